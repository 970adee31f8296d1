"""Patch extraction and the periodic shift operators it is built from.

Shifts wrap around at the image border, so every component shift is a
permutation of the pixel grid and its adjoint is exactly its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import DataCube

__all__ = [
    "PatchGeometry",
    "shift_index",
    "shift_permutation",
    "extract_patches",
    "patch_component_apply",
    "patch_component_adjoint",
]


@dataclass(frozen=True)
class PatchGeometry:
    """Spatial patch window (s1 rows x s2 cols) over an m x n image.

    Window positions are enumerated row-major; component index i in
    [1, d_s] corresponds to spatial offset i-1 in that enumeration.
    """

    s1: int
    s2: int
    m: int
    n: int

    def __post_init__(self):
        if not (1 <= self.s1 <= self.m):
            raise ValueError(f"need 1 <= s1 <= m, got s1={self.s1}, m={self.m}")
        if not (1 <= self.s2 <= self.n):
            raise ValueError(f"need 1 <= s2 <= n, got s2={self.s2}, n={self.n}")

    @property
    def d_s(self) -> int:
        return self.s1 * self.s2

    @property
    def n_pixels(self) -> int:
        return self.m * self.n


def _offset(j: int, s2: int) -> tuple[int, int]:
    # j steps along the row-major window walk; negative j mirrors the
    # positive offset so that offset(-j) == -offset(j) and shifts invert.
    q, r = divmod(abs(j), s2)
    return (q, r) if j >= 0 else (-q, -r)


def shift_index(x: tuple[int, int], j: int, geom: PatchGeometry) -> tuple[int, int]:
    """Pixel j steps after x in the row-major patch walk, wrapping periodically."""
    if abs(j) >= geom.d_s:
        raise ValueError(f"|j| must be < d_s={geom.d_s}, got j={j}")
    dr, dc = _offset(j, geom.s2)
    return ((x[0] + dr) % geom.m, (x[1] + dc) % geom.n)


def shift_permutation(geom: PatchGeometry, j: int) -> np.ndarray:
    """Linear-index permutation: perm[p] is the pixel j steps after pixel p."""
    if abs(j) >= geom.d_s:
        raise ValueError(f"|j| must be < d_s={geom.d_s}, got j={j}")
    dr, dc = _offset(j, geom.s2)
    rows = (np.arange(geom.m)[:, None] + dr) % geom.m
    cols = (np.arange(geom.n)[None, :] + dc) % geom.n
    return (rows * geom.n + cols).reshape(-1)


def extract_patches(cube: DataCube, geom: PatchGeometry, max_bytes: int = 2 << 30) -> np.ndarray:
    """One flattened s1 x s2 x B patch per pixel.

    Returns an (m*n) x (s1*s2*B) matrix. Row p (pixel in row-major order)
    holds the patch anchored at p with its top-left corner at p; columns
    run spatial offset outer, band inner, so column i*B + t is band t at
    window offset i.
    """
    if (geom.m, geom.n) != (cube.m, cube.n):
        raise ValueError(
            f"geometry grid {(geom.m, geom.n)} does not match cube grid {(cube.m, cube.n)}"
        )
    B = cube.B
    d = geom.d_s * B
    need = geom.n_pixels * d * 8
    if need > max_bytes:
        raise ValueError(f"patch matrix needs {need} bytes, budget is {max_bytes}")
    out = np.empty((geom.n_pixels, d), dtype=np.float64)
    for i in range(geom.d_s):
        dr, dc = divmod(i, geom.s2)
        shifted = np.roll(cube.values, (-dr, -dc), axis=(1, 2))
        out[:, i * B : (i + 1) * B] = shifted.reshape(B, geom.n_pixels).T
    return out


def _check_component(i: int, geom: PatchGeometry) -> None:
    if not 1 <= i <= geom.d_s:
        raise ValueError(f"component index must be in [1, {geom.d_s}], got {i}")


def patch_component_apply(band: np.ndarray, i: int, geom: PatchGeometry) -> np.ndarray:
    """output(x) = input(x shifted by i-1): read the i-th patch component."""
    _check_component(i, geom)
    dr, dc = _offset(i - 1, geom.s2)
    return np.roll(band, (-dr, -dc), axis=(0, 1))


def patch_component_adjoint(band: np.ndarray, i: int, geom: PatchGeometry) -> np.ndarray:
    """output(x) = input(x shifted by 1-i): exact adjoint of the i-th component."""
    _check_component(i, geom)
    dr, dc = _offset(i - 1, geom.s2)
    return np.roll(band, (dr, dc), axis=(0, 1))
