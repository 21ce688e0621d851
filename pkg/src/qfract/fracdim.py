"""Correlation dimension of point clouds (Grassberger-Procaccia).

C(r) = 2 / (M (M-1)) * #{i < j : |x_i - x_j| < r} with chordal distances.
Points on a line or on the unit circle are counted exactly by sorting; other
clouds go through a hash grid with cell size max(r), scanned in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .config import TOL

# Staircase flag: RMS deviation of log C from the fitted line (natural log).
# Calibrated on a straight-line attractor (pentagon alpha=0.58), the Cantor set,
# and the stepped pentagon alpha=0.925 curve.
STAIRCASE_RESIDUAL = 0.1
MIN_FIT_POINTS = 5


@dataclass(frozen=True)
class CorrelationCurve:
    radii: np.ndarray
    counts: np.ndarray  # C(r)
    pairs: np.ndarray  # raw pair counts
    n_points: int


@dataclass(frozen=True)
class DimensionFit:
    dimension: float
    intercept: float
    rmin: float
    rmax: float
    residual: float  # RMS of log C about the fitted line
    slope_spread: float  # max - min of local slopes inside the window
    used: int
    staircase: bool


def _pairs_on_line(x: np.ndarray, radii: np.ndarray) -> np.ndarray:
    xs = np.sort(x)
    idx = np.arange(len(xs))
    return np.array([int(np.sum(np.searchsorted(xs, xs + r, side="left") - idx - 1)) for r in radii], dtype=np.int64)


def _pairs_on_circle(pts: np.ndarray, radii: np.ndarray) -> np.ndarray:
    # chord < r  <=>  angular gap < 2 asin(r/2); each pair is counted from the
    # endpoint whose forward gap is the shorter one
    m = len(pts)
    ang = np.sort(np.arctan2(pts[:, 1], pts[:, 0]))
    doubled = np.concatenate([ang, ang + 2 * np.pi])
    idx = np.arange(m)
    out = np.empty(len(radii), dtype=np.int64)
    for k, r in enumerate(radii):
        if r > 2.0:
            out[k] = m * (m - 1) // 2
            continue
        gap = 2.0 * np.arcsin(r / 2.0)
        ahead = np.searchsorted(doubled, ang + gap, side="left") - idx - 1
        out[k] = int(np.minimum(ahead, m - 1).sum())
    return out


@njit(cache=True)
def _find(keys, key):
    lo, hi = 0, keys.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys.shape[0] and keys[lo] == key:
        return lo
    return -1


@njit(cache=True, parallel=True)
def _grid_histogram(pts, starts, keys, cell_coords, strides, offsets, r2, n_chunks):
    n_cells = keys.shape[0]
    d = pts.shape[1]
    nb = r2.shape[0]
    hist = np.zeros((n_chunks, nb + 1), dtype=np.int64)
    for c in prange(n_chunks):
        for a in range(c, n_cells, n_chunks):
            for o in range(offsets.shape[0]):
                key = 0
                for t in range(d):
                    key += (cell_coords[a, t] + offsets[o, t]) * strides[t]
                if key < keys[a]:
                    continue
                b = _find(keys, key)
                if b < 0:
                    continue
                for i in range(starts[a], starts[a + 1]):
                    j0 = i + 1 if b == a else starts[b]
                    for j in range(j0, starts[b + 1]):
                        s = 0.0
                        for t in range(d):
                            diff = pts[i, t] - pts[j, t]
                            s += diff * diff
                        # first bin whose squared radius exceeds s (strict comparison)
                        lo, hi = 0, nb
                        while lo < hi:
                            mid = (lo + hi) // 2
                            if r2[mid] > s:
                                hi = mid
                            else:
                                lo = mid + 1
                        hist[c, lo] += 1
    return hist.sum(axis=0)


def _pairs_hash_grid(pts: np.ndarray, radii: np.ndarray, chunks: int = 64) -> np.ndarray:
    h = float(radii[-1])
    coords = np.floor((pts - pts.min(axis=0)) / h).astype(np.int64)
    # one spare cell on each side so neighbour keys never alias
    coords += 1
    dims = coords.max(axis=0) + 2
    strides = np.concatenate([[1], np.cumprod(dims[:-1])]).astype(np.int64)
    keys = coords @ strides
    order = np.argsort(keys, kind="stable")
    keys, pts, coords = keys[order], np.ascontiguousarray(pts[order]), coords[order]
    uniq, first = np.unique(keys, return_index=True)
    starts = np.append(first, len(keys)).astype(np.int64)
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * pts.shape[1], indexing="ij")).reshape(pts.shape[1], -1).T.astype(np.int64)
    hist = _grid_histogram(pts, starts, uniq, np.ascontiguousarray(coords[first]), strides, offsets, radii * radii, chunks)
    return np.cumsum(hist[:-1])


def correlation_integral(points, radii, method: str = "auto") -> CorrelationCurve:
    """Pair-count curve; ``method`` is "auto", "line", "circle" or "grid"."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = len(pts)
    if m < 2:
        raise ValueError("correlation integral needs at least 2 points")
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0 or np.any(np.diff(radii) < 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and sorted ascending")
    if method == "auto":
        if pts.shape[1] == 1:
            method = "line"
        elif pts.shape[1] == 2 and np.abs(np.linalg.norm(pts, axis=1) - 1.0).max() < TOL.sphere_drift:
            method = "circle"
        else:
            method = "grid"
    if method == "line":
        if pts.shape[1] != 1:
            raise ValueError("line counting needs one-dimensional points")
        pairs = _pairs_on_line(pts[:, 0], radii)
    elif method == "circle":
        pairs = _pairs_on_circle(pts, radii)
    elif method == "grid":
        pairs = _pairs_hash_grid(pts, radii)
    else:
        raise ValueError(f"unknown counting method {method!r}")
    counts = pairs * (2.0 / (m * (m - 1.0)))
    return CorrelationCurve(radii, counts, pairs, m)


def diameter_estimate(points) -> float:
    """Double-sweep lower bound on the diameter: farthest point from the farthest point of x_0."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    far = pts[np.argmax(np.linalg.norm(pts - pts[0], axis=1))]
    return float(np.linalg.norm(pts - far, axis=1).max())


def log_radii(rmin: float, rmax: float, bins: int) -> np.ndarray:
    if not 0 < rmin < rmax:
        raise ValueError("need 0 < rmin < rmax")
    return np.geomspace(rmin, rmax, bins)


def fit_dimension(curve: CorrelationCurve, rmin: float | None = None, rmax: float | None = None, staircase_residual: float = STAIRCASE_RESIDUAL) -> DimensionFit:
    """Least-squares slope of log C against log r over [rmin, rmax]."""
    r, c = curve.radii, curve.counts
    lo = r[0] if rmin is None else rmin
    hi = r[-1] if rmax is None else rmax
    use = (r >= lo) & (r <= hi) & (c > 0)
    if np.count_nonzero(use) < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} radii with nonzero C(r) inside the window")
    x, y = np.log(r[use]), np.log(c[use])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    local = np.diff(y) / np.diff(x)
    spread = float(local.max() - local.min()) if len(local) else 0.0
    return DimensionFit(float(slope), float(intercept), float(lo), float(hi), resid, spread, int(use.sum()), resid > staircase_residual)


def estimate_dimension(points, rmin_frac: float = 1e-3, rmax_frac: float = 1e-1, bins: int = 30) -> tuple[CorrelationCurve, DimensionFit]:
    """Curve and fit with the window given as fractions of the estimated diameter."""
    diam = diameter_estimate(points)
    radii = log_radii(rmin_frac * diam, rmax_frac * diam, bins)
    curve = correlation_integral(points, radii)
    return curve, fit_dimension(curve)


def cantor_from_digits(digits) -> np.ndarray:
    """x = sum_j d_j 3^{-j} for ternary digit rows d in {0, 2}."""
    d = np.atleast_2d(np.asarray(digits, dtype=float))
    scale = 3.0 ** -np.arange(1, d.shape[1] + 1)
    return d @ scale


def cantor_points(count: int, seed: int, digits: int = 40) -> np.ndarray:
    """Random points of the middle-thirds Cantor set (uniform random addresses)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return cantor_from_digits(2 * rng.integers(0, 2, size=(count, digits)))
