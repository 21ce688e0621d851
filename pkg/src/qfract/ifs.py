"""Chaos-game sampling of IFS attractors with place-dependent probabilities.

Map i is the boost with parameter alpha along detector direction n_i, and at
point x it is chosen with probability (1 + alpha^2 + 2 alpha n_i.x) / (N (1 + alpha^2)).

Randomness: chain ``c`` of a run seeded with ``seed`` draws uniforms from
``Philox(SeedSequence(seed, spawn_key=(c,)))``, one uniform per step, so a
chain's output does not depend on chunk sizes or on how many other chains run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import DEFAULT_BURN_IN, TOL
from .conformal import SpinBoost, moebius_apply
from .polytopes import VertexConfiguration, check_balanced

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

CHUNK = 1 << 18


@dataclass(frozen=True)
class IFSSystem:
    config: VertexConfiguration
    alpha: float

    def __post_init__(self):
        ok, residual = check_balanced(self.config)
        if not ok:
            raise ValueError(f"configuration {self.config.name!r} is not balanced (|sum n_i| = {residual:.3g})")
        alpha = float(self.alpha)
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def axes(self) -> np.ndarray:
        return self.config.vertices

    @property
    def count(self) -> int:
        return self.config.count

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def boosts(self) -> list[SpinBoost]:
        return [SpinBoost(self.alpha, n) for n in self.axes]


@dataclass(frozen=True)
class SampleRun:
    seed: int
    chain: int
    steps: np.ndarray  # global step number k of x_k
    maps: np.ndarray  # index i_k of the map producing x_k
    points: np.ndarray

    def __len__(self):
        return len(self.steps)


def probabilities(s: IFSSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a = s.alpha
    return (1 + a * a + 2 * a * (x @ s.axes.T)) / (s.count * (1 + a * a))


def choose_index(p: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: smallest i with u < p_0 + ... + p_i."""
    cum = np.cumsum(p)
    return int(min(np.searchsorted(cum, u, side="right"), len(p) - 1))


def step(s: IFSSystem, x, rng: np.random.Generator) -> tuple[int, np.ndarray, np.random.Generator]:
    x = np.asarray(x, dtype=float)
    i = choose_index(probabilities(s, x), rng.random())
    y = moebius_apply(s.boosts[i], x)
    return i, y / np.linalg.norm(y), rng


def chain_stream(seed: int, chain: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chain,))))


def _chain_impl(x0, axes, alpha, uniforms, out_points, out_maps):
    n_maps, d = axes.shape
    a2 = alpha * alpha
    z = n_maps * (1.0 + a2)
    x = x0.copy()
    dots = np.empty(n_maps)
    for k in range(uniforms.shape[0]):
        for i in range(n_maps):
            acc = 0.0
            for j in range(d):
                acc += axes[i, j] * x[j]
            dots[i] = acc
        u = uniforms[k]
        cum = 0.0
        chosen = n_maps - 1
        for i in range(n_maps):
            cum += (1.0 + a2 + 2.0 * alpha * dots[i]) / z
            if u < cum:
                chosen = i
                break
        dot = dots[chosen]
        den = 1.0 + a2 + 2.0 * alpha * dot
        c = 2.0 * alpha * (1.0 + alpha * dot)
        norm = 0.0
        for j in range(d):
            x[j] = ((1.0 - a2) * x[j] + c * axes[chosen, j]) / den
            norm += x[j] * x[j]
        norm = np.sqrt(norm)
        for j in range(d):
            x[j] /= norm
        if out_points.shape[0] > 0:
            for j in range(d):
                out_points[k, j] = x[j]
            out_maps[k] = chosen
    return x


_chain_kernel = njit(nogil=True, cache=True)(_chain_impl) if njit is not None else _chain_impl


def _initial_point(s: IFSSystem, x0) -> np.ndarray:
    x = s.axes[0] if x0 is None else np.asarray(x0, dtype=float)
    if x.shape != (s.dim + 1,) or abs(np.linalg.norm(x) - 1.0) > TOL.sphere_drift:
        raise ValueError("initial point must be a unit vector of the configuration's dimension")
    return np.ascontiguousarray(x, dtype=float)


def iter_chunks(
    s: IFSSystem,
    count: int,
    seed: int,
    x0=None,
    burn_in: int = DEFAULT_BURN_IN,
    chain: int = 0,
    chunk: int = CHUNK,
    jit: bool = True,
) -> Iterator[SampleRun]:
    """Stream a chain as consecutive SampleRun blocks of at most ``chunk`` points."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    kernel = _chain_kernel if jit else _chain_impl
    rng = chain_stream(seed, chain)
    axes = np.ascontiguousarray(s.axes)
    x = _initial_point(s, x0)
    empty_pts, empty_maps = np.empty((0, s.dim + 1)), np.empty(0, dtype=np.int64)
    left = burn_in
    while left:
        m = min(left, chunk)
        x = kernel(x, axes, s.alpha, rng.random(m), empty_pts, empty_maps)
        left -= m
    done = 0
    while done < count:
        m = min(count - done, chunk)
        pts = np.empty((m, s.dim + 1))
        maps = np.empty(m, dtype=np.int64)
        x = kernel(x, axes, s.alpha, rng.random(m), pts, maps)
        steps = np.arange(burn_in + done + 1, burn_in + done + m + 1, dtype=np.int64)
        yield SampleRun(seed, chain, steps, maps, pts)
        done += m


def run(s: IFSSystem, count: int, seed: int, x0=None, burn_in: int = DEFAULT_BURN_IN, chain: int = 0, jit: bool = True) -> SampleRun:
    parts = list(iter_chunks(s, count, seed, x0, burn_in, chain, jit=jit))
    return SampleRun(
        seed,
        chain,
        np.concatenate([p.steps for p in parts]),
        np.concatenate([p.maps for p in parts]),
        np.concatenate([p.points for p in parts]),
    )


def run_chains(
    s: IFSSystem,
    count: int,
    seed: int,
    chains: int = 1,
    threads: int = 1,
    x0=None,
    burn_in: int = DEFAULT_BURN_IN,
) -> list[SampleRun]:
    """Independent chains, each with ``count`` points, returned in chain order."""
    if chains < 1:
        raise ValueError("chains must be >= 1")

    def job(c):
        return run(s, count, seed, x0, burn_in, chain=c)

    if threads <= 1 or chains == 1:
        return [job(c) for c in range(chains)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(chains)))


def slice_project(points: np.ndarray, axis: int, lo: float, hi: float) -> np.ndarray:
    """Points with lo < x[axis] < hi, with that coordinate dropped. ``axis`` is 0-based."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] < 3:
        raise ValueError("slice_project needs points on S^n with n >= 2")
    if not 0 <= axis < points.shape[1]:
        raise ValueError(f"axis {axis} out of range for {points.shape[1]} coordinates")
    keep = (points[:, axis] > lo) & (points[:, axis] < hi)
    return np.delete(points[keep], axis, axis=1)


def count_in_slice(s: IFSSystem, count: int, seed: int, axis: int, lo: float, hi: float, burn_in: int = DEFAULT_BURN_IN, chain: int = 0) -> int:
    """Number of chain points with lo < x[axis] < hi, streamed without storing the run."""
    total = 0
    for part in iter_chunks(s, count, seed, burn_in=burn_in, chain=chain, chunk=1 << 20):
        c = part.points[:, axis]
        total += int(np.count_nonzero((c > lo) & (c < hi)))
    return total
