"""Cube and mask containers, corruption operators, and quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataCube",
    "MaskSet",
    "Metrics",
    "make_mask",
    "add_gaussian_noise",
    "apply_mask",
    "psnr",
]


@dataclass(frozen=True)
class DataCube:
    """Dense hyperspectral volume.

    ``values`` has shape (B, m, n): each band is a contiguous row-major
    m x n image, so the flat buffer is band-sequential. The array is copied
    on construction and frozen; cubes are safe to share across threads.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.ndim != 3:
            raise ValueError(f"cube values must be 3-d (B, m, n), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"cube dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cube values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def B(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(m, n, B)."""
        return (self.m, self.n, self.B)

    def band(self, t: int) -> np.ndarray:
        """Read-only m x n view of band ``t`` (0-based)."""
        return self.values[t]

    def unfold(self) -> np.ndarray:
        """(m*n) x B matrix; pixel order is row-major, one column per band."""
        B, m, n = self.values.shape
        return np.ascontiguousarray(self.values.reshape(B, m * n).T)

    @classmethod
    def from_unfolded(cls, mat: np.ndarray, m: int, n: int) -> "DataCube":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != m * n:
            raise ValueError(f"expected ({m * n}, B) matrix, got {mat.shape}")
        return cls(mat.T.reshape(mat.shape[1], m, n))


@dataclass(frozen=True)
class MaskSet:
    """Per-band boolean sampling masks over the spatial grid, immutable."""

    masks: np.ndarray

    def __post_init__(self):
        arr = np.array(self.masks, dtype=bool, order="C")
        if arr.ndim != 3:
            raise ValueError(f"masks must be 3-d (B, m, n), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "masks", arr)

    @property
    def B(self) -> int:
        return self.masks.shape[0]

    @property
    def m(self) -> int:
        return self.masks.shape[1]

    @property
    def n(self) -> int:
        return self.masks.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.m, self.n, self.B)

    def band(self, t: int) -> np.ndarray:
        return self.masks[t]

    def counts(self) -> np.ndarray:
        """Number of sampled pixels per band."""
        return self.masks.sum(axis=(1, 2))

    def rates(self) -> np.ndarray:
        """Empirical sampling rate per band."""
        return self.counts() / float(self.m * self.n)


@dataclass(frozen=True)
class Metrics:
    """Reconstruction quality against a reference cube.

    ``psnr_paper`` is 10*log10(peak / mse) with peak the max absolute value
    of the reference; ``psnr_standard`` is the conventional
    10*log10(peak**2 / mse). ``psnr`` returns whichever ``formula`` selects.
    """

    mse: float
    peak: float
    psnr_paper: float
    psnr_standard: float
    formula: str = "paper"

    @property
    def psnr(self) -> float:
        return self.psnr_paper if self.formula == "paper" else self.psnr_standard


def make_mask(dims: tuple[int, int, int], rate: float, seed: int) -> MaskSet:
    """Draw an independent uniform random pixel subset for every band.

    Each band samples exactly floor(rate * m * n) pixels (different bands
    draw different subsets); the result is a pure function of (dims, rate,
    seed).
    """
    m, n, B = dims
    if m < 1 or n < 1 or B < 1:
        raise ValueError(f"dimensions must be positive, got {dims}")
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"sampling rate must be in (0, 1], got {rate}")
    # +1e-9 guards the floor against representation error in rate*m*n
    count = int(math.floor(rate * m * n + 1e-9))
    rng = np.random.default_rng(seed)
    masks = np.zeros((B, m, n), dtype=bool)
    for t in range(B):
        chosen = rng.permutation(m * n)[:count]
        masks[t].reshape(-1)[chosen] = True
    return MaskSet(masks)


def add_gaussian_noise(cube: DataCube, sigma: float, seed: int) -> DataCube:
    """Add i.i.d. zero-mean Gaussian noise to every voxel, seed-deterministic."""
    if sigma < 0:
        raise ValueError(f"noise level must be non-negative, got {sigma}")
    if sigma == 0:
        return DataCube(cube.values)
    rng = np.random.default_rng(seed)
    return DataCube(cube.values + sigma * rng.standard_normal(cube.values.shape))


def apply_mask(cube: DataCube, masks: MaskSet) -> DataCube:
    """Zero out unsampled voxels.

    The zeros are a storage convention only; the mask must be carried along
    to tell a sampled zero from a missing voxel.
    """
    if cube.dims != masks.dims:
        raise ValueError(f"cube dims {cube.dims} do not match mask dims {masks.dims}")
    return DataCube(np.where(masks.masks, cube.values, 0.0))


def psnr(candidate: DataCube, reference: DataCube, formula: str = "paper") -> Metrics:
    """Mean squared error and both PSNR variants over all voxels.

    mse == 0 yields +inf PSNR rather than an error.
    """
    if formula not in ("paper", "standard"):
        raise ValueError(f"formula must be 'paper' or 'standard', got {formula!r}")
    if candidate.dims != reference.dims:
        raise ValueError(
            f"candidate dims {candidate.dims} do not match reference dims {reference.dims}"
        )
    peak = float(np.max(np.abs(reference.values)))
    if peak == 0.0:
        raise ValueError("reference cube is identically zero")
    diff = candidate.values - reference.values
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        p_paper = math.inf
        p_std = math.inf
    else:
        p_paper = 10.0 * math.log10(peak / mse)
        p_std = 10.0 * math.log10(peak * peak / mse)
    return Metrics(mse=mse, peak=peak, psnr_paper=p_paper, psnr_standard=p_std, formula=formula)
