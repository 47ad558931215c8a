"""Dense complex linear algebra used across the package.

Matrices are plain ``numpy`` complex arrays. Unitaries are validated on the way
in wherever an operation relies on unitarity.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

MAX_DIM = 2**14
UNITARY_ATOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


class NotUnitaryError(ValueError):
    pass


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``; rejects results larger than ``MAX_DIM``."""
    a, b = as_cmatrix(a), as_cmatrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if rows > MAX_DIM or cols > MAX_DIM:
        raise ValueError(f"tensor product of dimension {rows}x{cols} exceeds {MAX_DIM}")
    return np.kron(a, b)


def kron_all(*mats) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = tensor(out, m)
    return out


def schatten_norm(m, p: int) -> float:
    """Schatten p-norm for p in {1, 2} (trace norm, Hilbert-Schmidt norm)."""
    if p not in (1, 2):
        raise ValueError("only p=1 and p=2 are supported")
    sv = np.linalg.svd(as_cmatrix(m), compute_uv=False)
    if p == 1:
        return float(np.sum(sv))
    return float(np.sqrt(np.sum(sv**2)))


def operator_norm(m) -> float:
    return float(np.linalg.svd(as_cmatrix(m), compute_uv=False)[0])


def hs_norm(m) -> float:
    # Frobenius equals the Schatten 2-norm; used on hot paths where SVD is wasteful
    return float(np.linalg.norm(as_cmatrix(m)))


def is_unitary(u, atol: float = UNITARY_ATOL) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return operator_norm(u.conj().T @ u - np.eye(u.shape[0])) <= atol


def check_unitary(u, atol: float = UNITARY_ATOL) -> np.ndarray:
    u = as_cmatrix(u)
    if not is_unitary(u, atol):
        raise NotUnitaryError(f"matrix of shape {u.shape} is not unitary within {atol}")
    return u


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _phase_objective(alpha: float, phases: np.ndarray) -> float:
    return float(np.max(np.abs(1.0 - np.exp(1j * (alpha + phases)))))


def _arc_centre(phases: np.ndarray) -> float:
    """Centre of the shortest arc of the unit circle holding every phase."""
    ph = np.sort(np.mod(phases, 2 * np.pi))
    gaps = np.diff(np.concatenate([ph, [ph[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    start = ph[(k + 1) % len(ph)]
    return float(start + (2 * np.pi - gaps[k]) / 2)


def min_phase_opnorm_distance(u, grid: int = 1024, tol: float = 1e-9) -> float:
    """``min_alpha || I - e^{i alpha} U ||_op`` for unitary ``U``.

    The objective only depends on the eigenphases of ``U``. It is scanned on a
    uniform grid, the best cell is refined with a bounded scalar search, and
    the phase that centres the eigenphase arc on 1 is tried as well. The
    objective is a max of kinks, so the arc centre is what pins the minimum
    to machine precision.
    """
    u = check_unitary(u)
    phases = np.angle(np.linalg.eigvals(u))
    alphas = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    vals = np.max(np.abs(1.0 - np.exp(1j * (alphas[:, None] + phases[None, :]))), axis=1)
    best = int(np.argmin(vals))
    step = 2 * np.pi / grid
    res = minimize_scalar(
        _phase_objective,
        bounds=(alphas[best] - step, alphas[best] + step),
        args=(phases,),
        method="bounded",
        options={"xatol": tol},
    )
    centred = _phase_objective(-_arc_centre(phases), phases)
    return float(min(res.fun, vals[best], centred))


def min_phase_hs_distance(u) -> float:
    """``min_alpha || I - e^{i alpha} U ||_2`` in closed form.

    ``||I - phi U||_2^2 = 2D - 2 Re(phi Tr U)`` is minimised by aligning the
    phase with ``Tr U``.
    """
    u = check_unitary(u)
    dim = u.shape[0]
    return float(np.sqrt(max(2 * dim - 2 * abs(np.trace(u)), 0.0)))


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *keys)``.

    Different key tuples give independent streams, so work split across chunks
    or workers stays reproducible regardless of scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def haar_unitaries(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``n`` Haar-random ``dim x dim`` unitaries, shape ``(n, dim, dim)``."""
    g = (rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(dim: int, seed: int | np.random.Generator) -> np.ndarray:
    if dim < 2 or not is_power_of_two(dim):
        raise ValueError(f"dim must be a power of two >= 2, got {dim}")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    return haar_unitaries(dim, 1, rng)[0]


def swap_operator(d_qubits: int) -> np.ndarray:
    """SWAP on ``C^D ⊗ C^D`` with ``D = 2**d_qubits``."""
    if d_qubits < 1:
        raise ValueError("d_qubits must be positive")
    dim = 2**d_qubits
    if dim * dim > MAX_DIM:
        raise ValueError("swap operator exceeds dimension budget")
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    idx = np.arange(dim)
    x, y = np.meshgrid(idx, idx, indexing="ij")
    s[(y * dim + x).ravel(), (x * dim + y).ravel()] = 1.0
    return s


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def random_near_identity(dim: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Unitary ``exp(-i strength G)`` with ``G`` a random Hermitian of unit operator norm."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (g + g.conj().T) / 2
    h = h / operator_norm(h)
    return expm_hermitian(h, strength)
