"""Dense real Clifford algebras Cl(p, q).

Basis blades are indexed by bitmask: bit ``i`` set means generator ``i``
(named ``e{start+i}``) is present. Generators ``0..p-1`` square to +1 and
``p..p+q-1`` to -1. Products are evaluated from cached sign/index tables,
so everything here is exact up to floating point rounding.

Besides the algebra itself the module carries the paravector calculus used
for conformal maps of spheres: positivity, paravector square roots, the
exponential form of spin-boosts, polar decomposition of group elements, and
the 2x2 "pair" representation of the even Clifford algebra of signature
(1, n+1) over Cl(n+1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from .config import MAX_CLIFFORD_DIM, TOL


@dataclass(frozen=True)
class Signature:
    p: int
    q: int = 0
    start: int = 1

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError(f"signature counts must be non-negative, got ({self.p}, {self.q})")
        if self.p + self.q > MAX_CLIFFORD_DIM:
            raise ValueError(f"p+q={self.p + self.q} exceeds the cap {MAX_CLIFFORD_DIM}")

    @property
    def dim(self) -> int:
        return self.p + self.q

    @property
    def size(self) -> int:
        return 1 << self.dim

    def __str__(self):
        return f"Cl({self.p},{self.q})"


def _reorder_sign(a: int, b: int) -> int:
    # parity of swaps needed to bring e_a e_b into canonical order
    a >>= 1
    swaps = 0
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1 if swaps & 1 else 1


@lru_cache(maxsize=None)
def _tables(p: int, q: int):
    n = p + q
    size = 1 << n
    blades = np.arange(size)
    grades = np.array([bin(i).count("1") for i in range(size)])
    neg_mask = ((1 << n) - 1) ^ ((1 << p) - 1)
    sign = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            s = _reorder_sign(i, j)
            if bin(i & j & neg_mask).count("1") & 1:
                s = -s
            sign[i, j] = s
    index = blades[:, None] ^ blades[None, :]
    square = sign[blades, blades]  # e_I e_I
    for arr in (sign, index, grades, square):
        arr.setflags(write=False)
    return sign, index, grades, square


def _blade_name(mask: int, sig: Signature) -> str:
    if mask == 0:
        return "1"
    idx = [str(sig.start + i) for i in range(sig.dim) if mask >> i & 1]
    sep = "" if sig.start + sig.dim <= 10 else "_"
    return "e" + sep.join(idx)


class Multivector:
    """Element of Cl(p, q) stored as a dense coefficient vector."""

    __slots__ = ("sig", "coeffs")

    def __init__(self, sig: Signature, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (sig.size,):
            raise ValueError(f"{sig} needs {sig.size} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        self.sig = sig
        self.coeffs = coeffs

    # construction helpers

    @classmethod
    def zero(cls, sig: Signature) -> "Multivector":
        return cls(sig, np.zeros(sig.size))

    @classmethod
    def scalar(cls, sig: Signature, value: float = 1.0) -> "Multivector":
        c = np.zeros(sig.size)
        c[0] = value
        return cls(sig, c)

    @classmethod
    def blade(cls, sig: Signature, mask: int, value: float = 1.0) -> "Multivector":
        c = np.zeros(sig.size)
        c[mask] = value
        return cls(sig, c)

    @classmethod
    def basis(cls, sig: Signature, *gens: int) -> "Multivector":
        """Ordered product of generators, labelled from ``sig.start``.

        ``basis(sig, 2, 1)`` is ``e2 e1 = -e12`` in a Euclidean algebra.
        """
        out = cls.scalar(sig)
        for g in gens:
            i = g - sig.start
            if not 0 <= i < sig.dim:
                raise ValueError(f"generator e{g} not in {sig}")
            out = out * cls.blade(sig, 1 << i)
        return out

    @classmethod
    def vector(cls, sig: Signature, v: Sequence[float]) -> "Multivector":
        v = np.asarray(v, dtype=float)
        if v.shape != (sig.dim,):
            raise ValueError(f"vector of length {sig.dim} expected, got {v.shape}")
        c = np.zeros(sig.size)
        c[1 << np.arange(sig.dim)] = v
        return cls(sig, c)

    @classmethod
    def paravector(cls, sig: Signature, x0: float, x: Sequence[float]) -> "Multivector":
        c = cls.vector(sig, x).coeffs.copy()
        c[0] = x0
        return cls(sig, c)

    @classmethod
    def random(cls, sig: Signature, rng: np.random.Generator, grades: Iterable[int] | None = None) -> "Multivector":
        c = rng.standard_normal(sig.size)
        if grades is not None:
            keep = np.isin(_tables(sig.p, sig.q)[2], list(grades))
            c = np.where(keep, c, 0.0)
        return cls(sig, c)

    # views

    @property
    def scalar_part(self) -> float:
        return float(self.coeffs[0])

    @property
    def vector_part(self) -> np.ndarray:
        return self.coeffs[1 << np.arange(self.sig.dim)].copy()

    def grade(self, k: int) -> "Multivector":
        return grade_project(self, k)

    def grades_present(self, tol: float = 0.0) -> set[int]:
        g = _tables(self.sig.p, self.sig.q)[2]
        return {int(x) for x in np.unique(g[np.abs(self.coeffs) > tol])}

    # arithmetic

    def _check(self, other: "Multivector"):
        if other.sig != self.sig:
            raise ValueError(f"signature mismatch: {self.sig} vs {other.sig}")

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._check(other)
            return Multivector(self.sig, self.coeffs + other.coeffs)
        if np.isscalar(other):
            c = self.coeffs.copy()
            c[0] += other
            return Multivector(self.sig, c)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.sig, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Multivector) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return Multivector(self.sig, self.coeffs / other)
        return NotImplemented

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector."""
        return float(np.linalg.norm(self.coeffs))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        if np.isscalar(other):
            other = Multivector.scalar(self.sig, other)
        self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= atol)

    def reverse(self) -> "Multivector":
        return involution(self, "tau")

    def __repr__(self):
        terms = []
        for mask in np.flatnonzero(self.coeffs):
            c = self.coeffs[mask]
            name = _blade_name(int(mask), self.sig)
            terms.append(f"{c:g}" if name == "1" else f"{c:g}*{name}")
        return f"Multivector({self.sig}: {' + '.join(terms) or '0'})"


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    if a.sig != b.sig:
        raise ValueError(f"signature mismatch: {a.sig} vs {b.sig}")
    sign, index, _, _ = _tables(a.sig.p, a.sig.q)
    weights = sign * np.outer(a.coeffs, b.coeffs)
    return Multivector(a.sig, np.bincount(index.ravel(), weights=weights.ravel(), minlength=a.sig.size))


def left_matrix(a: Multivector) -> np.ndarray:
    """Matrix of ``x -> a x`` acting on coefficient vectors."""
    sign, index, _, _ = _tables(a.sig.p, a.sig.q)
    size = a.sig.size
    cols = np.arange(size)
    out = np.zeros((size, size))
    for i in np.flatnonzero(a.coeffs):
        out[index[i], cols] += sign[i] * a.coeffs[i]
    return out


InvolutionKind = Literal["pi", "tau", "nu"]


def involution(a: Multivector, kind: InvolutionKind) -> Multivector:
    """Principal automorphism (pi), reversion (tau) or their composition (nu)."""
    k = _tables(a.sig.p, a.sig.q)[2]
    if kind == "pi":
        s = (-1.0) ** k
    elif kind == "tau":
        s = (-1.0) ** (k * (k - 1) // 2)
    elif kind == "nu":
        s = (-1.0) ** (k * (k + 1) // 2)
    else:
        raise ValueError(f"unknown involution {kind!r}")
    return Multivector(a.sig, a.coeffs * s)


def trace_phi(a: Multivector) -> float:
    """Scalar part; the normalized trace of left multiplication."""
    return float(a.coeffs[0])


def _scalar_of_product(a: Multivector, b: Multivector) -> float:
    # Phi(ab) only needs the diagonal blade pairs
    square = _tables(a.sig.p, a.sig.q)[3]
    return float(np.sum(a.coeffs * b.coeffs * square))


def _blade_metric(sig: Signature) -> np.ndarray:
    # (e_I, e_I) = Phi(e_I^tau e_I)
    _, _, k, square = _tables(sig.p, sig.q)
    return square * (-1.0) ** (k * (k - 1) // 2)


def inner(a: Multivector, b: Multivector) -> float:
    """Bilinear form (a, b) = Phi(a^tau b)."""
    if a.sig != b.sig:
        raise ValueError(f"signature mismatch: {a.sig} vs {b.sig}")
    return _scalar_of_product(involution(a, "tau"), b)


def norm_delta(a: Multivector) -> Multivector:
    return involution(a, "nu") * a


def grade_project(a: Multivector, k: int) -> Multivector:
    if not 0 <= k <= a.sig.dim:
        raise ValueError(f"grade {k} outside 0..{a.sig.dim}")
    g = _tables(a.sig.p, a.sig.q)[2]
    return Multivector(a.sig, np.where(g == k, a.coeffs, 0.0))


def inverse(a: Multivector) -> Multivector:
    """Two-sided inverse; uses a^nu / Delta(a) when Delta(a) is a nonzero scalar."""
    d = norm_delta(a)
    rest = np.abs(d.coeffs[1:]).max(initial=0.0)
    if rest <= TOL.membership * max(1.0, abs(d.coeffs[0])) and abs(d.coeffs[0]) > TOL.membership:
        return involution(a, "nu") / d.coeffs[0]
    one = np.zeros(a.sig.size)
    one[0] = 1.0
    try:
        x = np.linalg.solve(left_matrix(a), one)
    except np.linalg.LinAlgError as exc:
        raise ValueError("multivector is not invertible") from exc
    return Multivector(a.sig, x)


def is_positive(a: Multivector, tol: float | None = None) -> bool:
    """a = a^tau and the Gram matrix (e_I, a e_J) is positive semidefinite."""
    tol = TOL.positivity if tol is None else tol
    scale = max(1.0, a.norm())
    if not involution(a, "tau").allclose(a, atol=tol * scale):
        return False
    gram = _blade_metric(a.sig)[:, None] * left_matrix(a)
    gram = 0.5 * (gram + gram.T)
    return bool(np.linalg.eigvalsh(gram).min() >= -tol * scale)


def is_paravector_preserving(a: Multivector, tol: float | None = None) -> bool:
    """Whether a w a^tau stays in grades {0, 1} for every basis paravector w.

    Checking the basis suffices because the map is linear in w.
    """
    tol = TOL.membership if tol is None else tol
    g = _tables(a.sig.p, a.sig.q)[2]
    a_rev = involution(a, "tau")
    basis = [Multivector.scalar(a.sig)] + [Multivector.blade(a.sig, 1 << i) for i in range(a.sig.dim)]
    for w in basis:
        c = (a * w * a_rev).coeffs
        if np.abs(c[g > 1]).max(initial=0.0) > tol * max(1.0, np.abs(c).max()):
            return False
    return True


def is_group_element(g: Multivector, tol: float | None = None) -> bool:
    """Membership in G: Delta(g) = 1 and g V^1 g^tau within V^1."""
    tol = TOL.membership if tol is None else tol
    d = norm_delta(g)
    if not d.allclose(1.0, atol=tol * max(1.0, g.norm() ** 2)):
        return False
    return is_paravector_preserving(g, tol)


@dataclass(frozen=True)
class Paravector:
    """x0 + x in R + V for a Euclidean V."""

    x0: float
    x: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def sig(self) -> Signature:
        return Signature(len(self.x), 0)

    def to_multivector(self) -> Multivector:
        return Multivector.paravector(self.sig, self.x0, self.x)

    @classmethod
    def from_multivector(cls, m: Multivector, tol: float | None = None) -> "Paravector":
        tol = TOL.membership if tol is None else tol
        if m.sig.q != 0:
            raise ValueError("paravectors are defined over Euclidean algebras here")
        g = _tables(m.sig.p, m.sig.q)[2]
        if np.abs(m.coeffs[g > 1]).max(initial=0.0) > tol * max(1.0, m.norm()):
            raise ValueError("multivector has components above grade 1")
        return cls(m.scalar_part, m.vector_part)

    def delta(self) -> float:
        """Q^1(x0, x) = x0^2 - |x|^2, the norm Delta of the paravector."""
        return self.x0**2 - float(self.x @ self.x)


def point_paravector(x: Sequence[float]) -> Multivector:
    """P(x) = 1 + x."""
    x = np.asarray(x, dtype=float)
    return Multivector.paravector(Signature(len(x), 0), 1.0, x)


def paravector_sqrt(a: Paravector, tol: float | None = None) -> Paravector:
    """Positive square root of a = 1 + alpha*n with 0 <= alpha <= 1."""
    tol = TOL.positivity if tol is None else tol
    if abs(a.x0 - 1.0) > tol:
        raise ValueError(f"paravector_sqrt needs scalar part 1, got {a.x0}")
    alpha = float(np.linalg.norm(a.x))
    if alpha > 1.0 + tol:
        raise ValueError(f"Delta(a) = {1 - alpha**2:.3g} < 0; no positive square root")
    if alpha == 0.0:
        return Paravector(1.0, np.zeros_like(a.x))
    if alpha >= 1.0 - tol:
        return Paravector(a.x0 / np.sqrt(2.0), a.x / np.sqrt(2.0))
    n = a.x / alpha
    eps = alpha / (1.0 + np.sqrt(1.0 - alpha * alpha))  # = (1 - sqrt(1-alpha^2)) / alpha
    s = 1.0 / np.sqrt(1.0 + eps * eps)
    return Paravector(s, s * eps * n)


def _unit_axis(n: Sequence[float], tol: float | None = None) -> np.ndarray:
    tol = TOL.unit_norm if tol is None else tol
    n = np.asarray(n, dtype=float)
    if n.ndim != 1 or abs(np.linalg.norm(n) - 1.0) > tol:
        raise ValueError(f"axis must be a unit vector, |n| = {np.linalg.norm(n)!r}")
    return n


def exp_boost(eta: float, n: Sequence[float]) -> Multivector:
    """exp(eta n / 2) = cosh(eta/2) + sinh(eta/2) n."""
    n = _unit_axis(n)
    if eta < 0:
        raise ValueError("rapidity must be non-negative; flip the axis instead")
    return Multivector.paravector(Signature(len(n), 0), np.cosh(eta / 2), np.sinh(eta / 2) * n)


def polar_decompose(g: Multivector) -> tuple[Multivector, Multivector]:
    """Split g in G into a positive spin-boost m and a rotation u, g = m u."""
    if g.sig.q != 0:
        raise ValueError("polar decomposition is defined over Euclidean algebras")
    if not is_group_element(g):
        raise ValueError("g is not in the spin group (Delta(g) != 1 or g does not preserve paravectors)")
    h = g * involution(g, "tau")
    try:
        hp = Paravector.from_multivector(h)
    except ValueError as exc:
        raise ValueError("g g^tau is not a paravector; g is not in G") from exc
    if hp.x0 <= 0 or hp.delta() <= 0:
        raise ValueError("g g^tau is not a positive paravector; g is not in G")
    c = hp.x0
    root = paravector_sqrt(Paravector(1.0, hp.x / c))
    m = Multivector.paravector(g.sig, root.x0, root.x) * np.sqrt(c)
    u = involution(m, "nu") * g  # Delta(m) = 1
    return m, u


# Pair representation A(a, b) = [[a, b], [pi(b), pi(a)]] over Cl(n+1, 0).


@dataclass(frozen=True)
class PairElement:
    a: Multivector
    b: Multivector

    def __post_init__(self):
        if self.a.sig != self.b.sig:
            raise ValueError(f"pair components differ in signature: {self.a.sig} vs {self.b.sig}")

    @property
    def sig(self) -> Signature:
        return self.a.sig

    @classmethod
    def one(cls, sig: Signature) -> "PairElement":
        return cls(Multivector.scalar(sig), Multivector.zero(sig))

    def __mul__(self, other):
        if isinstance(other, PairElement):
            return pair_product(self, other)
        if np.isscalar(other):
            return PairElement(self.a * other, self.b * other)
        return NotImplemented

    __rmul__ = lambda self, other: self * other if np.isscalar(other) else NotImplemented

    def __add__(self, other):
        if isinstance(other, PairElement):
            return PairElement(self.a + other.a, self.b + other.b)
        return NotImplemented

    def __neg__(self):
        return PairElement(-self.a, -self.b)

    def __sub__(self, other):
        return self + (-other)

    def pi(self) -> "PairElement":
        return PairElement(self.a, -self.b)

    def tau(self) -> "PairElement":
        return PairElement(involution(self.a, "nu"), involution(self.b, "tau"))

    def nu(self) -> "PairElement":
        return self.tau().pi()

    def allclose(self, other: "PairElement", atol: float = 1e-12) -> bool:
        return self.a.allclose(other.a, atol) and self.b.allclose(other.b, atol)

    def matrix(self) -> list[list[Multivector]]:
        return [[self.a, self.b], [involution(self.b, "pi"), involution(self.a, "pi")]]


def pair_product(x: PairElement, y: PairElement) -> PairElement:
    """A(a,b) A(a',b') = A(aa' + b pi(b'), ab' + b pi(a'))."""
    if x.sig != y.sig:
        raise ValueError(f"signature mismatch: {x.sig} vs {y.sig}")
    a = x.a * y.a + x.b * involution(y.b, "pi")
    b = x.a * y.b + x.b * involution(y.a, "pi")
    return PairElement(a, b)


def conformal_signature(n_plus_1: int) -> Signature:
    """Signature of C^1 = Cl(V^1, Q^1) for Euclidean V of dimension n+1: e0^2 = +1, e_i^2 = -1."""
    return Signature(1, n_plus_1, start=0)


def pair_embed(x: Multivector) -> PairElement:
    """Isomorphism of C^1 = Cl(1, n+1) onto pair matrices over Cl(n+1, 0).

    The paravector x0 e0 + v goes to A(0, x0 - v); with this choice the
    even part maps onto the basis table e_{i1..i2k} -> (-1)^k e_{i1..i2k},
    e0 e_{i1..i(2k+1)} -> (-1)^k e_{i1..i(2k+1)}.
    """
    sig = x.sig
    if sig.p != 1 or sig.start != 0:
        raise ValueError(f"pair_embed expects Cl(1, n+1) with generators e0.., got {sig}")
    target = Signature(sig.q, 0)
    images = [PairElement(Multivector.zero(target), Multivector.scalar(target))]
    for i in range(sig.q):
        images.append(PairElement(Multivector.zero(target), -Multivector.blade(target, 1 << i)))
    total = PairElement(Multivector.zero(target), Multivector.zero(target))
    for mask in np.flatnonzero(x.coeffs):
        term = PairElement.one(target)
        for i in range(sig.dim):
            if mask >> i & 1:
                term = term * images[i]
        total = total + term * float(x.coeffs[mask])
    return total


def psi(x: PairElement) -> Multivector:
    """Top-left entry of the pair matrix."""
    return x.a


def psi_plus(x: PairElement, tol: float = 1e-12) -> Multivector:
    """Isomorphism of the even subalgebra (pairs with b = 0) onto Cl(n+1, 0)."""
    if np.abs(x.b.coeffs).max(initial=0.0) > tol:
        raise ValueError("psi_plus is defined on even elements only (b must vanish)")
    return x.a
