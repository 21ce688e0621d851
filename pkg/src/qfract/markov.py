"""Density iterates f_k of the Markov operator and its restriction to trace functions.

f_0 = 1 and

    f_{k+1}(r) = C sum_i f_k(w_i^{-1}(r)) / (1 + alpha^2 - 2 alpha n_i.r)^{n+1},
    C = (1 - alpha^2)^{n+2} / (N (1 + alpha^2)),

where f_k is the density of the k-th pushforward of the normalized uniform
measure. Two evaluation routes are provided: exact recursion over all N^k
preimage paths, and iteration on a chart grid of the whole sphere with
linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.ndimage import map_coordinates

from .clifford import Multivector, Signature, point_paravector, trace_phi
from .config import DEFAULT_GRIDS, EXACT_COST_CAP, TOL
from .conformal import moebius_inverse
from .ifs import IFSSystem
from .polytopes import TORUS_A, TORUS_B, TORUS_C, TORUS_D, check_balanced

# leaves per vectorized batch in the exact recursion
_BATCH_LEAVES = 1 << 21

SPHERE_KINDS = ("circle", "latlong", "hyper")


def sphere_area(n: int) -> float:
    """Surface measure of the unit S^n."""
    from math import gamma, pi

    return 2 * pi ** ((n + 1) / 2) / gamma((n + 1) / 2)


def _prefactor(s: IFSSystem) -> float:
    a2 = s.alpha**2
    return (1 - a2) ** (s.dim + 2) / (s.count * (1 + a2))


def _preimages(s: IFSSystem, r: np.ndarray):
    """w_i^{-1}(r) for all i, shape (N, ..., d), and the recurrence weights (N, ...)."""
    a = s.alpha
    weights = []
    pts = []
    for b in s.boosts:
        g = 1 + a * a - 2 * a * (r @ b.axis)
        weights.append(_prefactor(s) / g ** (s.dim + 1))
        pts.append(moebius_inverse(b, r))
    return np.stack(pts), np.stack(weights)


def apply_recurrence(s: IFSSystem, r, levels: int, base: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Run the recurrence ``levels`` times at points r, with f_0 given by ``base`` (default 1).

    Walks all N^levels preimage paths breadth-first.
    """
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    if levels < 0:
        raise ValueError("level must be >= 0")
    leaves = s.count**levels
    if leaves > EXACT_COST_CAP:
        raise ValueError(f"exact recursion needs N^k = {leaves} leaf evaluations per point (cap {EXACT_COST_CAP}); use the grid route")
    out = np.empty(len(r))
    batch = max(1, _BATCH_LEAVES // leaves)
    for start in range(0, len(r), batch):
        pts = r[start : start + batch]
        w = np.ones(len(pts))
        for _ in range(levels):
            pre, wt = _preimages(s, pts)  # (N, P, d), (N, P)
            w = (wt * w[None, :]).T.reshape(-1)
            pts = np.swapaxes(pre, 0, 1).reshape(-1, pts.shape[-1])
        vals = w if base is None else w * base(pts)
        out[start : start + batch] = vals.reshape(len(w) // leaves if leaves else len(w), leaves).sum(axis=1) if levels else vals
    return out[0] if single else out


def density_exact(s: IFSSystem, r, k: int) -> np.ndarray:
    if not check_balanced(s.config)[0]:
        raise ValueError("density recurrence requires a balanced configuration")
    return apply_recurrence(s, r, k)


# Surfaces


@dataclass(frozen=True)
class DensitySurface:
    """Evaluation points on S^n with optional weights, image layout and f_k values."""

    points: np.ndarray
    values: np.ndarray
    kind: str
    weights: np.ndarray | None = None
    shape: tuple[int, ...] | None = None
    k: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.points),):
            raise ValueError("one value per point required")
        if self.weights is not None and self.weights.shape != (len(self.points),):
            raise ValueError("one weight per point required")

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    @property
    def full_sphere(self) -> bool:
        return self.kind in SPHERE_KINDS

    def image(self) -> np.ndarray:
        if self.shape is None or len(self.shape) != 2:
            raise ValueError(f"surface of kind {self.kind!r} has no 2D layout")
        return self.values.reshape(self.shape)

    def with_values(self, values: np.ndarray, k: int) -> "DensitySurface":
        return replace(self, values=np.asarray(values, dtype=float), k=k)


def _centers(count: int, span: float) -> np.ndarray:
    return (np.arange(count) + 0.5) * span / count


def circle_grid(m: int) -> DensitySurface:
    """Nodes at angles 2 pi j / m; trapezoid weights."""
    t = 2 * np.pi * np.arange(m) / m
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    return DensitySurface(pts, np.ones(m), "circle", np.full(m, 2 * np.pi / m), (m,))


def latlong_grid(n_lon: int, n_lat: int) -> DensitySurface:
    """Cell-centred (polar, azimuth) grid on S^2 with exact cell areas; x3 is the polar axis.

    Layout is (n_lat, n_lon): rows run from the north pole southwards.
    """
    if n_lon % 2:
        raise ValueError("n_lon must be even for pole reflection")
    th = _centers(n_lat, np.pi)
    ph = _centers(n_lon, 2 * np.pi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    edges = np.linspace(0, np.pi, n_lat + 1)
    band = np.cos(edges[:-1]) - np.cos(edges[1:])
    w = np.repeat(band * (2 * np.pi / n_lon), n_lon)
    return DensitySurface(pts, np.ones(len(pts)), "latlong", w, (n_lat, n_lon))


def _hyper_embed(chi, th, ph):
    s = np.sin(chi)
    return np.stack([np.cos(chi), s * np.cos(th), s * np.sin(th) * np.cos(ph), s * np.sin(th) * np.sin(ph)], axis=-1)


def hyper_grid(n_chi: int, n_theta: int, n_phi: int) -> DensitySurface:
    """Cell-centred hyperspherical (chi, theta, phi) grid on S^3 with exact cell volumes."""
    if n_phi % 2:
        raise ValueError("n_phi must be even for pole reflection")
    chi = _centers(n_chi, np.pi)
    th = _centers(n_theta, np.pi)
    ph = _centers(n_phi, 2 * np.pi)
    C, T, P = np.meshgrid(chi, th, ph, indexing="ij")
    pts = _hyper_embed(C, T, P).reshape(-1, 4)
    ce = np.linspace(0, np.pi, n_chi + 1)
    te = np.linspace(0, np.pi, n_theta + 1)
    chi_w = np.diff(ce / 2 - np.sin(2 * ce) / 4)
    th_w = np.cos(te[:-1]) - np.cos(te[1:])
    w = (chi_w[:, None, None] * th_w[None, :, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, None, :]).reshape(-1)
    return DensitySurface(pts, np.ones(len(pts)), "hyper", w, (n_chi, n_theta, n_phi))


def sphere_grid(n: int, shape: tuple[int, ...] | None = None) -> DensitySurface:
    shape = tuple(shape) if shape is not None else DEFAULT_GRIDS.get(n)
    if n == 1:
        return circle_grid(*shape)
    if n == 2:
        return latlong_grid(*shape)
    if n == 3:
        return hyper_grid(*shape)
    raise ValueError(f"full-sphere grids exist for n = 1, 2, 3, not {n}")


def slice_surface(axis: int, value: float, n_lon: int = 512, n_lat: int = 256) -> DensitySurface:
    """The 2-sphere {x in S^3 : x[axis] = value}, gridded like latlong_grid. ``axis`` is 0-based."""
    if not 0 <= axis < 4 or not -1 < value < 1:
        raise ValueError("slice needs axis in 0..3 and |value| < 1")
    base = latlong_grid(n_lon, n_lat)
    rad = np.sqrt(1 - value * value)
    pts = np.insert(base.points * rad, axis, value, axis=1)
    return DensitySurface(
        pts, np.ones(len(pts)), "slice", base.weights * rad * rad, base.shape, params={"axis": axis, "value": value}
    )


TORUS_RADII = {"aa": (TORUS_A, TORUS_D), "ab": (TORUS_D, TORUS_A), "ba": (TORUS_B, TORUS_C), "bb": (TORUS_C, TORUS_B)}


def torus_surface(family: str, n_u: int = 512, n_v: int = 512) -> DensitySurface:
    """Flat torus (r cos u, r sin u, s cos v, s sin v) through one of Coxeter's vertex families."""
    if family not in TORUS_RADII:
        raise ValueError(f"unknown torus family {family!r}")
    r, s = TORUS_RADII[family]
    u = _centers(n_u, 2 * np.pi)
    v = _centers(n_v, 2 * np.pi)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.stack([r * np.cos(U), r * np.sin(U), s * np.cos(V), s * np.sin(V)], axis=-1).reshape(-1, 4)
    w = np.full(len(pts), r * s * (2 * np.pi / n_u) * (2 * np.pi / n_v))
    return DensitySurface(pts, np.ones(len(pts)), "torus", w, (n_u, n_v), params={"family": family})


# Chart interpolation


def _wrap_pad(arr, axis):
    first = np.take(arr, [0], axis=axis)
    last = np.take(arr, [-1], axis=axis)
    return np.concatenate([last, arr, first], axis=axis)


def _pole_pad(arr, axis, phi_axis, flip_axes=()):
    # mirror across a pole: the cell beyond the edge is the edge cell turned by pi in azimuth
    n_phi = arr.shape[phi_axis]
    edge_lo = np.roll(np.take(arr, [0], axis=axis), n_phi // 2, axis=phi_axis)
    edge_hi = np.roll(np.take(arr, [-1], axis=axis), n_phi // 2, axis=phi_axis)
    for fa in flip_axes:
        edge_lo = np.flip(edge_lo, axis=fa)
        edge_hi = np.flip(edge_hi, axis=fa)
    return np.concatenate([edge_lo, arr, edge_hi], axis=axis)


def _padded_values(surface: DensitySurface) -> np.ndarray:
    vals = surface.values.reshape(surface.shape)
    if surface.kind == "circle":
        return np.concatenate([vals, vals[:1]])
    if surface.kind == "latlong":
        padded = _pole_pad(vals, 0, 1)
        return _wrap_pad(padded, 1)
    if surface.kind == "hyper":
        padded = _pole_pad(vals, 0, 2, flip_axes=(1,))
        padded = _pole_pad(padded, 1, 2)
        return _wrap_pad(padded, 2)
    raise ValueError(f"no chart for surface kind {surface.kind!r}")


def _chart_coordinates(surface: DensitySurface, y: np.ndarray) -> np.ndarray:
    two_pi = 2 * np.pi
    if surface.kind == "circle":
        (m,) = surface.shape
        t = np.mod(np.arctan2(y[:, 1], y[:, 0]), two_pi)
        return (t * m / two_pi)[None, :]
    if surface.kind == "latlong":
        n_lat, n_lon = surface.shape
        th = np.arctan2(np.hypot(y[:, 0], y[:, 1]), y[:, 2])
        ph = np.mod(np.arctan2(y[:, 1], y[:, 0]), two_pi)
        return np.stack([th * n_lat / np.pi + 0.5, ph * n_lon / two_pi + 0.5])
    if surface.kind == "hyper":
        n_chi, n_th, n_ph = surface.shape
        rho3 = np.sqrt(y[:, 1] ** 2 + y[:, 2] ** 2 + y[:, 3] ** 2)
        chi = np.arctan2(rho3, y[:, 0])
        th = np.arctan2(np.hypot(y[:, 2], y[:, 3]), y[:, 1])
        ph = np.mod(np.arctan2(y[:, 3], y[:, 2]), two_pi)
        return np.stack([chi * n_chi / np.pi + 0.5, th * n_th / np.pi + 0.5, ph * n_ph / two_pi + 0.5])
    raise ValueError(f"no chart for surface kind {surface.kind!r}")


def interpolate(surface: DensitySurface, y) -> np.ndarray:
    """Piecewise-linear value of the stored grid function at sphere points y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    coords = _chart_coordinates(surface, y)
    return map_coordinates(_padded_values(surface), coords, order=1, mode="nearest")


def density_grid_iterate(s: IFSSystem, surface: DensitySurface) -> DensitySurface:
    """One application of the recurrence with f_k read off the grid by interpolation."""
    if not surface.full_sphere:
        raise ValueError(f"grid iteration needs a full-sphere grid, got {surface.kind!r}")
    if surface.dim != s.dim:
        raise ValueError("surface and system live on spheres of different dimension")
    new = np.zeros(len(surface.points))
    a = s.alpha
    pref = _prefactor(s)
    for b in s.boosts:
        g = 1 + a * a - 2 * a * (surface.points @ b.axis)
        new += pref / g ** (s.dim + 1) * interpolate(surface, moebius_inverse(b, surface.points))
    return surface.with_values(new, surface.k + 1)


def density_grid(s: IFSSystem, k: int, shape=None) -> DensitySurface:
    surf = sphere_grid(s.dim, shape)
    for _ in range(k):
        surf = density_grid_iterate(s, surf)
    return surf


def evaluate_surface(s: IFSSystem, surface: DensitySurface, k: int, via: DensitySurface | None = None) -> DensitySurface:
    """f_k on an arbitrary surface: exact recursion, or interpolation from a full-sphere grid ``via``."""
    if via is None:
        vals = density_exact(s, surface.points, k)
    else:
        if via.k != k:
            raise ValueError(f"grid holds f_{via.k}, not f_{k}")
        vals = interpolate(via, surface.points)
    return surface.with_values(vals, k)


def integrate_density(surface: DensitySurface) -> float:
    if surface.weights is None:
        raise ValueError("surface has no quadrature weights; use integrate_density_mc")
    return float(surface.weights @ surface.values)


def uniform_sphere(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n + 1))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def integrate_density_mc(density: Callable[[np.ndarray], np.ndarray], n: int, samples: int, seed: int, batch: int = 1 << 16) -> tuple[float, float]:
    """Monte-Carlo integral over S^n: (estimate, standard error)."""
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        v = density(uniform_sphere(rng, m, n))
        total += float(v.sum())
        total_sq += float((v * v).sum())
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    area = sphere_area(n)
    return area * mean, area * np.sqrt(var / samples)


# Trace operator on L = span{1, e_1, ..., e_{n+1}}


@dataclass(frozen=True)
class TraceOperator:
    matrix: np.ndarray

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(a, dtype=float)

    def vector_eigenvalues(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.matrix[1:, 1:]).real)[::-1]


def trace_operator(s: IFSSystem) -> TraceOperator:
    """Matrix of a -> sum_i P(alpha n_i) a P(alpha n_i) / (N (1 + alpha^2)) on {1, e_1, ...}."""
    ok, residual = check_balanced(s.config)
    if not ok:
        raise ValueError(f"trace operator needs a balanced configuration (|sum n_i| = {residual:.3g})")
    d = s.dim + 1
    sig = Signature(d)
    basis = [Multivector.scalar(sig)] + [Multivector.blade(sig, 1 << i) for i in range(d)]
    ps = [point_paravector(s.alpha * n) for n in s.axes]
    z = s.count * (1 + s.alpha**2)
    m = np.empty((d + 1, d + 1))
    for col, e in enumerate(basis):
        acc = Multivector.zero(sig)
        for p in ps:
            acc = acc + p * e * p
        acc = acc / z
        high = np.delete(acc.coeffs, [0] + [1 << i for i in range(d)])
        if np.abs(high).max(initial=0.0) > TOL.membership:
            raise ValueError("V leaves the paravector space; configuration is not admissible")
        m[0, col] = trace_phi(acc)
        m[1:, col] = acc.vector_part
    return TraceOperator(m)


def trace_function(a: np.ndarray, x) -> np.ndarray:
    """f_a(x) = (P(x), a) = a_0 + a.x."""
    a = np.asarray(a, dtype=float)
    return a[0] + np.asarray(x, dtype=float) @ a[1:]


@dataclass(frozen=True)
class FixedPointResult:
    point: np.ndarray
    iterations: int
    distances: np.ndarray  # |V^k a0 - fixed| per iteration, measured against the final iterate


def trace_fixed_point(op: TraceOperator, a0=None, tol: float = 1e-12, max_iter: int = 100_000) -> FixedPointResult:
    """Power iteration a <- V a from a0 (scalar part 1) until successive iterates agree to ``tol``."""
    d = op.matrix.shape[0]
    a = np.zeros(d) if a0 is None else np.asarray(a0, dtype=float).copy()
    if a0 is None:
        a[0] = 1.0
    if abs(a[0] - 1.0) > TOL.trace_one:
        raise ValueError("starting element must have trace 1")
    history = [a.copy()]
    for it in range(1, max_iter + 1):
        nxt = op(a)
        history.append(nxt.copy())
        if np.abs(nxt - a).max() <= tol:
            hist = np.array(history)
            return FixedPointResult(nxt, it, np.linalg.norm(hist - nxt, axis=1))
        a = nxt
    raise RuntimeError(f"trace operator iteration did not converge in {max_iter} steps")


def fit_rate(distances: np.ndarray, floor: float = 1e-10) -> float:
    """Geometric decay rate of a distance sequence, from a log-linear fit above ``floor``."""
    d = np.asarray(distances)
    use = np.flatnonzero(d > floor)
    if len(use) < 3:
        raise ValueError("not enough decaying iterates to fit a rate")
    slope = np.polyfit(use, np.log(d[use]), 1)[0]
    return float(np.exp(slope))
