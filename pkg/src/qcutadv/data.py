"""Dataset ingestion: IDX files, resampling, and a synthetic separable task."""
from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from . import qmath
from .classifier import LabeledDataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
CACHE_ENV = "QCUTADV_DATA"


class IdxFormatError(ValueError):
    pass


def data_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "qcutadv"))


def _read(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        import gzip

        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def read_idx_images(path) -> np.ndarray:
    """uint8 images of shape ``(count, rows, cols)``."""
    raw = _read(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x} (image file)")
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise IdxFormatError(f"{path}: truncated, expected {need} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x} (label file)")
    if len(raw) < 8 + count:
        raise IdxFormatError(f"{path}: truncated, expected {8 + count} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(int)


def write_idx_images(path, images: np.ndarray):
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, n, r, c) + images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes())


def ingest_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to ``[0, 1]`` (float, ``(N, rows, cols)``) and integer labels."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    return images.astype(float) / 255.0, labels


def downsample(img: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resize of a square image with pixel-centre alignment.

    Output pixel ``i`` samples the source at ``(i + 0.5) * s / t - 0.5``,
    clamped to the image.
    """
    img = np.asarray(img, dtype=float)
    src = img.shape[-1]
    if img.shape[-2] != src:
        raise ValueError("expected square images")
    if target > src:
        raise ValueError(f"target size {target} exceeds source size {src}")
    coords = np.clip((np.arange(target) + 0.5) * src / target - 0.5, 0, src - 1)
    lo = np.floor(coords).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    rows = img[..., lo, :] * (1 - frac)[:, None] + img[..., hi, :] * frac[:, None]
    return rows[..., lo] * (1 - frac) + rows[..., hi] * frac


def image_dataset(images, labels, classes, target: int, split: str) -> LabeledDataset:
    """Keep ``classes`` (relabelled 0..K-1 in the given order), resize, flatten row-major."""
    classes = list(classes)
    mask = np.isin(labels, classes)
    imgs = downsample(images[mask], target) if target != images.shape[-1] else images[mask]
    feats = imgs.reshape(len(imgs), -1)
    lab = np.array([classes.index(v) for v in labels[mask]], dtype=int)
    keep = np.linalg.norm(feats, axis=1) > 0
    return LabeledDataset(feats[keep], lab[keep], np.array([split] * int(keep.sum())))


def concat(*parts: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(
        np.concatenate([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.split for p in parts]),
    )


def make_synthetic(
    n_samples: int = 200,
    n_features: int = 64,
    n_classes: int = 2,
    seed: int = 0,
    test_fraction: float = 0.25,
    noise: float = 0.2,
) -> LabeledDataset:
    """Separable task: class ``k`` concentrates its mass on the ``k``-th block of features.

    Under amplitude encoding the class is then mostly carried by the top
    ``log2 K`` data qubits.
    """
    rng = qmath.rng_for(seed, 7)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    block = n_features // n_classes
    feats = noise * rng.uniform(0, 1, size=(n_samples, n_features))
    for i, k in enumerate(labels):
        feats[i, k * block : (k + 1) * block] += rng.uniform(0.5, 1.0, size=block)
    n_test = int(round(test_fraction * n_samples))
    split = np.array(["train"] * (n_samples - n_test) + ["test"] * n_test)
    return LabeledDataset(feats, labels, split)


def dataset_checksum(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    h.update("|".join(ds.split.tolist()).encode())
    return h.hexdigest()
