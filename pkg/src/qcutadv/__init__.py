"""Wire cutting with tampered boundary preparations, variational classifiers under
inserted adversarial gates, and numerical checks of their robustness bounds."""

__version__ = "0.1.0"
