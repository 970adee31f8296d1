"""Brute-force references and a synthetic cube generator.

Everything here is written independently of the production modules it
cross-checks: naive kNN and weights, a dense shift-sum, a dense direct
solve, and central-difference gradients. Deliberately slow, size-capped,
and single-threaded; shipped in the library so installations can verify
themselves via the ``selfcheck`` CLI subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, gaussian_filter1d

from .datacube import DataCube

__all__ = [
    "SyntheticSpec",
    "synth_cube",
    "naive_knn",
    "naive_bar_w",
    "naive_wtilde",
    "dense_solve",
    "fd_gradient",
    "selfcheck",
]

DENSE_SOLVE_CAP = 4096


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a low-rank test cube: smooth abundance maps mixed with
    smooth spectra, values in [0, 1], exact unfolded rank equal to ``rank``."""

    m: int
    n: int
    B: int
    rank: int
    smoothness: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if min(self.m, self.n, self.B) < 1:
            raise ValueError(f"dimensions must be positive, got {(self.m, self.n, self.B)}")
        if not 1 <= self.rank <= min(self.B, 8):
            raise ValueError(f"rank must be in [1, min(B, 8)] = [1, {min(self.B, 8)}], got {self.rank}")
        if self.smoothness < 0:
            raise ValueError(f"smoothness must be non-negative, got {self.smoothness}")


def synth_cube(spec: SyntheticSpec) -> DataCube:
    """Deterministic synthetic cube: sum over components of abundance(x) * spectrum(t)."""
    rng = np.random.default_rng(spec.seed)
    maps = np.empty((spec.rank, spec.m, spec.n))
    for l in range(spec.rank):
        a = rng.standard_normal((spec.m, spec.n))
        if spec.smoothness > 0:
            a = gaussian_filter(a, spec.smoothness, mode="wrap")
        a -= a.min()
        maps[l] = a
    total = maps.sum(axis=0)
    # per-pixel scaling keeps sums <= 1 without changing the factor rank
    maps /= np.maximum(total, 1.0)[None, :, :]
    spectra = np.empty((spec.rank, spec.B))
    for l in range(spec.rank):
        s = rng.standard_normal(spec.B)
        if spec.B > 2:
            s = gaussian_filter1d(s, max(1.0, spec.B / 8.0), mode="wrap")
        lo, hi = s.min(), s.max()
        spectra[l] = (s - lo) / (hi - lo) if hi > lo else 0.5
    values = np.einsum("lmn,lt->tmn", maps, spectra)
    return DataCube(values)


def naive_knn(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference kNN: per-row full distance scan, python-sorted with the row
    itself first and remaining ties broken by smaller index."""
    P = np.asarray(points, dtype=np.float64)
    N = P.shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= {N}, got k={k}")
    idx = np.empty((N, k), dtype=np.int64)
    d2 = np.empty((N, k), dtype=np.float64)
    for r in range(N):
        dists = ((P - P[r]) ** 2).sum(axis=1)
        order = sorted(range(N), key=lambda j: (j != r, dists[j], j))[:k]
        idx[r] = order
        d2[r] = dists[order]
        d2[r, 0] = 0.0
    return idx, d2


def naive_bar_w(points: np.ndarray, k: int, r_sigma: int) -> np.ndarray:
    """Reference dense similarity matrix over the kNN pairs, scalar math only."""
    idx, d2 = naive_knn(points, k)
    N = idx.shape[0]
    if not 2 <= r_sigma <= k:
        raise ValueError(f"need 2 <= r_sigma <= k={k}, got {r_sigma}")
    sigma = np.empty(N)
    for r in range(N):
        s = math.sqrt(d2[r, r_sigma - 1])
        if s == 0.0:
            positive = [v for v in d2[r] if v > 0.0]
            s = math.sqrt(min(positive)) if positive else 1.0
        sigma[r] = s
    W = np.zeros((N, N))
    for r in range(N):
        for c in range(k):
            j = idx[r, c]
            W[r, j] = math.exp(-d2[r, c] / (sigma[r] * sigma[j]))
    return W


def naive_wtilde(bar_dense: np.ndarray, s1: int, s2: int, m: int, n: int) -> np.ndarray:
    """Reference shift sum on a dense matrix, inline modular index arithmetic."""
    N = m * n
    if bar_dense.shape != (N, N):
        raise ValueError(f"expected {N} x {N} matrix, got {bar_dense.shape}")
    out = np.zeros((N, N))
    for i in range(s1 * s2):
        # offset of window position i, negated: the shift by 1-(i+1) steps
        dr, dc = divmod(i, s2)
        perm = np.empty(N, dtype=np.int64)
        for p in range(N):
            r, c = divmod(p, n)
            perm[p] = ((r - dr) % m) * n + ((c - dc) % n)
        for x in range(N):
            for y in range(N):
                out[x, y] += bar_dense[perm[x], perm[y]]
    return out


def dense_solve(system) -> np.ndarray:
    """Direct dense factorization of a band system, with a residual check."""
    N = system.n
    if N > DENSE_SOLVE_CAP:
        raise ValueError(f"dense solve capped at {DENSE_SOLVE_CAP} unknowns, got {N}")
    A = np.asarray(system.A.todense())
    try:
        x = np.linalg.solve(A, system.rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular band system (band {system.band}): {exc}") from exc
    rhs_norm = np.linalg.norm(system.rhs)
    resid = np.linalg.norm(A @ x - system.rhs)
    if resid > 1e-10 * max(rhs_norm, 1e-30):
        raise ArithmeticError(
            f"dense solve residual {resid:.3e} exceeds 1e-10 * |rhs| (band {system.band})"
        )
    return x


def fd_gradient(f, u: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar field over a band image."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    u = np.asarray(u, dtype=np.float64)
    grad = np.empty(u.size)
    flat = u.reshape(-1)
    for p in range(flat.size):
        e = np.zeros_like(flat)
        e[p] = h
        grad[p] = (f((flat + e).reshape(u.shape)) - f((flat - e).reshape(u.shape))) / (2.0 * h)
    return grad


def _check_adjoint() -> bool:
    from .patch import PatchGeometry, patch_component_adjoint, patch_component_apply

    rng = np.random.default_rng(11)
    geom = PatchGeometry(2, 2, 6, 6)
    for i in range(1, geom.d_s + 1):
        u = rng.standard_normal((6, 6))
        v = rng.standard_normal((6, 6))
        lhs = float((patch_component_apply(u, i, geom) * v).sum())
        rhs = float((u * patch_component_adjoint(v, i, geom)).sum())
        if not math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12):
            return False
    return True


def _check_graph() -> bool:
    from .graph import build_bar_w, knn_exact, local_scale

    rng = np.random.default_rng(5)
    pts = rng.random((16, 6))
    table = knn_exact(pts, 5)
    sigma = local_scale(table, 3)
    got = np.asarray(build_bar_w(pts, table, sigma).todense())
    want = naive_bar_w(pts, 5, 3)
    return bool(np.allclose(got, want, rtol=1e-13, atol=0.0))


def _check_solver() -> bool:
    from .graph import assemble_wtilde, build_bar_w, knn_exact, local_scale
    from .patch import PatchGeometry, extract_patches
    from .solver import SolverConfig, assemble_band_system, solve_band

    cube = synth_cube(SyntheticSpec(4, 4, 2, 2, smoothness=1.0, seed=3))
    geom = PatchGeometry(2, 2, 4, 4)
    patches = extract_patches(cube, geom)
    table = knn_exact(patches, 6)
    wt = assemble_wtilde(build_bar_w(patches, table, local_scale(table, 3)), geom)
    mask = np.zeros((4, 4), dtype=bool)
    mask.reshape(-1)[[0, 5, 9, 14]] = True
    system = assemble_band_system(wt, mask, cube.band(0), 5.0, 0.25)
    cfg = SolverConfig(k=6, r_sigma=3, gmres_tol=1e-12, gmres_max_iters=2000)
    x = solve_band(system, np.zeros(16), cfg)
    ref = dense_solve(system)
    return bool(np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref))


def _check_fd_stationarity() -> bool:
    from .graph import assemble_wtilde, build_bar_w, knn_exact, local_scale
    from .patch import PatchGeometry, extract_patches
    from .solver import SolverConfig, assemble_band_system, solve_band, wnll_energy

    cube = synth_cube(SyntheticSpec(4, 4, 2, 1, smoothness=1.0, seed=9))
    geom = PatchGeometry(2, 2, 4, 4)
    patches = extract_patches(cube, geom)
    table = knn_exact(patches, 16)  # full graph: symmetric weights
    wt = assemble_wtilde(build_bar_w(patches, table, local_scale(table, 8)), geom)
    mask = np.zeros((4, 4), dtype=bool)
    mask.reshape(-1)[[1, 6, 11, 12]] = True
    lam, rate = 3.0, 0.25
    system = assemble_band_system(wt, mask, cube.band(0), lam, rate)
    cfg = SolverConfig(k=16, r_sigma=8, gmres_tol=1e-13, gmres_max_iters=2000)
    x = solve_band(system, np.zeros(16), cfg)
    grad = fd_gradient(
        lambda img: wnll_energy(img, wt, mask, cube.band(0), lam, rate), x.reshape(4, 4), 1e-5
    )
    scale = np.abs(system.A.data).max()
    return bool(np.abs(grad).max() <= 1e-6 * scale)


def _check_roundtrip() -> bool:
    import tempfile
    from pathlib import Path

    from .hsio import read_cube, write_cube

    rng = np.random.default_rng(2)
    cube = DataCube(rng.random((3, 5, 4)).astype(np.float32).astype(np.float64))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "t.hsc"
        write_cube(path, cube)
        back = read_cube(path)
    return bool(np.array_equal(back.values, cube.values))


def _check_svt() -> bool:
    from .lowrank import svt

    got = svt(np.diag([3.0, 1.0]), 2.0)
    return bool(np.allclose(got, np.diag([1.0, 0.0]), atol=1e-12))


def selfcheck(verbose: bool = True) -> bool:
    """Run the oracle battery; prints one PASS/FAIL line per check."""
    checks = [
        ("adjoint_identity", _check_adjoint),
        ("graph_vs_naive", _check_graph),
        ("gmres_vs_dense", _check_solver),
        ("energy_stationarity", _check_fd_stationarity),
        ("hsc_roundtrip", _check_roundtrip),
        ("svt_closed_form", _check_svt),
    ]
    ok = True
    for name, fn in checks:
        passed = fn()
        ok = ok and passed
        if verbose:
            print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return ok
