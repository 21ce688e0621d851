"""Self-checks runnable from an installed package, without the test tree.

Each suite is a list of small named checks with fixed seeds. They cover the
core identities of every module and finish in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    ok: bool
    detail: str


def _rng(tag: int) -> np.random.Generator:
    return np.random.default_rng(1000 + tag)


def _max_err(pairs) -> float:
    return max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in pairs)


# clifford


def _clifford_identities():
    from .clifford import Multivector, Signature, inner, involution, trace_phi

    rng = _rng(1)
    worst = 0.0
    for sig in (Signature(3), Signature(1, 2), Signature(5)):
        for _ in range(30):
            a, b, c = (Multivector.random(sig, rng) for _ in range(3))
            worst = max(
                worst,
                abs(trace_phi(a * b) - trace_phi(b * a)),
                abs(inner(a * b, c) - inner(b, involution(a, "tau") * c)),
                ((a * b) * c - a * (b * c)).norm(),
                (involution(a, "nu") - involution(involution(a, "tau"), "pi")).norm(),
            )
    return worst < 1e-12, f"max error {worst:.2e}"


def _clifford_pairs():
    from .clifford import Multivector, PairElement, Signature, pair_product, psi_plus, trace_phi

    rng = _rng(2)
    sig = Signature(3)
    worst = 0.0
    for _ in range(30):
        x, y = (PairElement(Multivector.random(sig, rng, [0, 2]), Multivector.random(sig, rng, [1, 3])) for _ in range(2))
        z = PairElement(Multivector.random(sig, rng), Multivector.random(sig, rng))
        lhs = pair_product(pair_product(x, y), z)
        rhs = pair_product(x, pair_product(y, z))
        worst = max(worst, (lhs.a - rhs.a).norm(), (lhs.b - rhs.b).norm())
        ev = [PairElement(Multivector.random(sig, rng), Multivector.zero(sig)) for _ in range(2)]
        prod = psi_plus(pair_product(ev[0], ev[1]))
        worst = max(worst, (prod - psi_plus(ev[0]) * psi_plus(ev[1])).norm())
        worst = max(worst, abs(trace_phi(ev[0].a) - trace_phi(psi_plus(ev[0]))))
    return worst < 1e-12, f"max error {worst:.2e}"


def _clifford_sqrt():
    from .clifford import Paravector, is_positive, paravector_sqrt

    rng = _rng(3)
    worst = 0.0
    positive = True
    for _ in range(50):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        a = Paravector(1.0, rng.uniform(0, 1) * n)
        b = paravector_sqrt(a).to_multivector()
        worst = max(worst, (b * b - a.to_multivector()).norm())
        positive &= is_positive(b)
    return positive and worst < 1e-12, f"max |b^2 - a| {worst:.2e}"


# conformal


def _random_boost(rng, dim):
    from .conformal import SpinBoost

    n = rng.normal(size=dim)
    return SpinBoost(rng.uniform(0, 0.95), n / np.linalg.norm(n))


def _sphere(rng, dim):
    x = rng.normal(size=dim)
    return x / np.linalg.norm(x)


def _conformal_routes():
    from .conformal import boost_to_lorentz, clifford_moebius, lorentz_apply, moebius_apply

    rng = _rng(4)
    pairs = []
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        b, x = _random_boost(rng, dim), _sphere(rng, dim)
        y = moebius_apply(b, x)
        pairs += [(y, clifford_moebius(b.multivector(), x)), (y, lorentz_apply(boost_to_lorentz(b), x))]
    err = _max_err(pairs)
    return err < 1e-10, f"max disagreement {err:.2e}"


def _conformal_dilation():
    from .conformal import SpinBoost, moebius_apply, stereo_project

    rng = _rng(5)
    worst = 0.0
    for alpha in (0.3, 0.5, 0.9):
        n = _sphere(rng, 3)
        b = SpinBoost(alpha, n)
        for _ in range(20):
            x = _sphere(rng, 3)
            p, q = stereo_project(n, x), stereo_project(n, moebius_apply(b, x))
            worst = max(worst, abs(np.linalg.norm(q) / np.linalg.norm(p) / b.dilation() - 1))
    return worst < 1e-12, f"max relative error {worst:.2e}"


def _conformal_rn():
    from .conformal import moebius_apply, rn_surface

    rng = _rng(6)
    worst = 0.0
    h = 1e-5
    for _ in range(50):
        b = _random_boost(rng, 2)
        x = _sphere(rng, 2)
        t = np.array([-x[1], x[0]])
        ds = np.linalg.norm(moebius_apply(b, x * np.cos(h) + t * np.sin(h)) - moebius_apply(b, x * np.cos(h) - t * np.sin(h))) / (2 * h)
        worst = max(worst, abs(ds / rn_surface(b, x) - 1))
    return worst < 1e-6, f"max relative error vs finite differences {worst:.2e}"


# polytopes


def _polytope_counts():
    from .polytopes import edges, get_configuration

    expected = {"cell5": (5, 10), "cell16": (8, 24), "cell8": (16, 32), "cell24": (24, 96), "cell600": (120, 720), "cell120": (600, 1200)}
    got = {name: (len(get_configuration(name)), len(edges(get_configuration(name)))) for name in expected}
    return got == expected, ", ".join(f"{k}={v}" for k, v in got.items())


def _polytope_balance():
    from .polytopes import available, check_balanced, get_configuration

    names = [name for name in available() if "<" not in name] + ["polygon7"]
    worst = max(check_balanced(get_configuration(name))[1] for name in names)
    return worst < 1e-10, f"max |sum n_i| {worst:.2e}"


def _polytope_icosians():
    from .polytopes import ICOSIAN_S1, ICOSIAN_T1, icosian_group, polytope4, same_point_set

    group = icosian_group([ICOSIAN_S1, ICOSIAN_T1])
    rel = (ICOSIAN_S1**3).allclose(-1.0, 1e-14) and (ICOSIAN_T1**5).allclose(-1.0, 1e-14) and ((ICOSIAN_S1 * ICOSIAN_T1) ** 2).allclose(-1.0, 1e-14)
    same = same_point_set(np.array([q.to_vector() for q in group]), polytope4("cell600").vertices, 1e-9)
    return rel and same and len(group) == 120, f"group order {len(group)}, relations {'hold' if rel else 'fail'}"


# ifs


def _ifs_probabilities():
    from .ifs import IFSSystem, probabilities
    from .polytopes import get_configuration

    rng = _rng(7)
    s = IFSSystem(get_configuration("cell600"), 0.9)
    x = rng.normal(size=(1000, 4))
    p = probabilities(s, x / np.linalg.norm(x, axis=1, keepdims=True))
    err = float(np.abs(p.sum(axis=1) - 1).max())
    return err < 1e-13 and p.min() > 0, f"max |sum p - 1| {err:.2e}"


def _ifs_replay():
    from .ifs import IFSSystem, run, run_chains
    from .polytopes import get_configuration

    s = IFSSystem(get_configuration("octahedron"), 0.5)
    a, b = run(s, 20_000, seed=3), run(s, 20_000, seed=3)
    chains = run_chains(s, 5_000, seed=3, chains=3, threads=3)
    same = np.array_equal(a.points, b.points) and np.array_equal(chains[0].points, a.points[:5000])
    return same, "replay identical" if same else "replay differs"


def _ifs_kernels():
    from .ifs import IFSSystem, _chain_impl, _chain_kernel, chain_stream
    from .polytopes import get_configuration

    s = IFSSystem(get_configuration("cell24"), 0.6)
    u = chain_stream(5).random(1000)
    out = []
    for kern in (_chain_kernel, _chain_impl):
        pts, maps = np.empty((1000, 4)), np.empty(1000, dtype=np.int64)
        kern(s.axes[0].copy(), np.ascontiguousarray(s.axes), s.alpha, u, pts, maps)
        out.append((pts, maps))
    err = float(np.abs(out[0][0] - out[1][0]).max())
    ok = np.array_equal(out[0][1], out[1][1]) and err < 1e-12
    return ok, f"compiled vs interpreted max diff {err:.2e}"


# markov


def _markov_exact():
    from .ifs import IFSSystem
    from .markov import density_exact
    from .polytopes import get_configuration

    v = float(density_exact(IFSSystem(get_configuration("antipodal"), 0.5), np.array([0.0, 1.0]), 1))
    return abs(v - 0.216) < 1e-12, f"f_1 = {v!r}"


def _markov_grid():
    from .ifs import IFSSystem
    from .markov import circle_grid, density_exact, density_grid_iterate, integrate_density
    from .polytopes import polygon

    s = IFSSystem(polygon(5), 0.58)
    surf = circle_grid(4096)
    worst, drift = 0.0, 0.0
    for k in range(1, 4):
        surf = density_grid_iterate(s, surf)
        worst = max(worst, float(np.abs(surf.values / density_exact(s, surf.points, k) - 1).max()))
        drift = max(drift, abs(integrate_density(surf) / (2 * np.pi) - 1))
    return worst < 1e-3 and drift < 1e-2, f"grid vs exact {worst:.2e}, integral drift {drift:.2e}"


def _markov_trace():
    from .ifs import IFSSystem
    from .markov import fit_rate, trace_fixed_point, trace_operator
    from .polytopes import get_configuration

    op = trace_operator(IFSSystem(get_configuration("octahedron"), 0.5))
    eig = float(np.abs(op.vector_eigenvalues() - 11 / 15).max())
    res = trace_fixed_point(op, np.array([1.0, 0.9, 0.0, 0.0]))
    rate = fit_rate(res.distances)
    ok = eig < 1e-12 and abs(rate / (11 / 15) - 1) < 1e-2
    return ok, f"eigenvalue error {eig:.2e}, fitted rate {rate:.6f}"


# fracdim


def _fracdim_counts():
    from .fracdim import correlation_integral

    rng = _rng(8)
    pts = rng.normal(size=(400, 3))
    radii = np.geomspace(0.05, 3, 12)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))[np.triu_indices(400, 1)]
    brute = np.array([np.count_nonzero(d < r) for r in radii])
    ok = np.array_equal(correlation_integral(pts, radii).pairs, brute)
    return ok, "hash grid equals brute force" if ok else "pair counts differ"


def _fracdim_cantor():
    from .fracdim import cantor_points, estimate_dimension

    _, fit = estimate_dimension(cantor_points(50_000, seed=1))
    return abs(fit.dimension - np.log(2) / np.log(3)) < 0.03, f"D = {fit.dimension:.4f}"


SUITES: dict[str, list[tuple[str, Callable[[], tuple[bool, str]]]]] = {
    "clifford": [("algebra identities", _clifford_identities), ("pair representation", _clifford_pairs), ("paravector square root", _clifford_sqrt)],
    "conformal": [("three routes agree", _conformal_routes), ("stereographic dilation", _conformal_dilation), ("surface RN derivative", _conformal_rn)],
    "polytopes": [("vertex and edge counts", _polytope_counts), ("balance", _polytope_balance), ("icosian group", _polytope_icosians)],
    "ifs": [("probabilities", _ifs_probabilities), ("replay", _ifs_replay), ("kernels agree", _ifs_kernels)],
    "markov": [("antipodal value", _markov_exact), ("grid route", _markov_grid), ("trace operator", _markov_trace)],
    "fracdim": [("pair counts", _fracdim_counts), ("Cantor dimension", _fracdim_cantor)],
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    out = []
    for label, fn in SUITES[name]:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, label, bool(ok), detail))
    return out
