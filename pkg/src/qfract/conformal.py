"""Moebius maps of S^n and B^{n+1} induced by spin-boosts.

Hot paths use the closed-form boost action. The Clifford conjugation route
(:func:`clifford_moebius`) and the Lorentz matrix route (:func:`lorentz_apply`)
compute the same maps independently and serve as cross-checks.

All point arguments may be a single vector of shape ``(n+1,)`` or a batch of
shape ``(..., n+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import (
    Multivector,
    Signature,
    _unit_axis,
    involution,
    is_group_element,
    point_paravector,
)
from .config import TOL


@dataclass(frozen=True)
class SpinBoost:
    """Boost with parameter ``alpha`` in [0, 1) along a unit ``axis``."""

    alpha: float
    axis: np.ndarray

    def __post_init__(self):
        axis = _unit_axis(self.axis).copy()
        axis.setflags(write=False)
        alpha = float(self.alpha)
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_eta(cls, eta: float, axis) -> "SpinBoost":
        return cls(np.tanh(eta / 2.0), axis)

    @property
    def eta(self) -> float:
        return 2.0 * np.arctanh(self.alpha)

    @property
    def dim(self) -> int:
        """Dimension n of the sphere S^n the boost acts on."""
        return len(self.axis) - 1

    def inverse(self) -> "SpinBoost":
        return SpinBoost(self.alpha, -self.axis)

    def multivector(self) -> Multivector:
        """(1 + alpha n) / sqrt(1 - alpha^2) in Cl(n+1, 0)."""
        s = 1.0 / np.sqrt(1.0 - self.alpha**2)
        return Multivector.paravector(Signature(len(self.axis)), s, s * self.alpha * self.axis)

    def lorentz(self) -> "LorentzMatrix":
        a2 = self.alpha**2
        gamma = (1 + a2) / (1 - a2)
        shift = 2 * self.alpha / (1 - a2) * self.axis
        m = np.empty((self.dim + 2, self.dim + 2))
        m[0, 0] = gamma
        m[0, 1:] = shift
        m[1:, 0] = shift
        m[1:, 1:] = np.eye(self.dim + 1) + (gamma - 1) * np.outer(self.axis, self.axis)
        return LorentzMatrix(m)

    def dilation(self) -> float:
        """Stereographic dilation factor (1+alpha)/(1-alpha) = e^eta."""
        return (1 + self.alpha) / (1 - self.alpha)


def _denominator(b: SpinBoost, x: np.ndarray, sign: float = 1.0) -> np.ndarray:
    return 1.0 + b.alpha**2 + sign * 2.0 * b.alpha * (x @ b.axis)


def moebius_apply(b: SpinBoost, x) -> np.ndarray:
    """Image of sphere or ball points under the boost."""
    x = np.asarray(x, dtype=float)
    a = b.alpha
    dot = x @ b.axis
    num = (1 - a * a) * x + (2 * a * (1 + a * dot))[..., None] * b.axis
    return num / (1 + a * a + 2 * a * dot)[..., None]


def moebius_inverse(b: SpinBoost, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    a = b.alpha
    dot = r @ b.axis
    num = (1 - a * a) * r - (2 * a * (1 - a * dot))[..., None] * b.axis
    return num / (1 + a * a - 2 * a * dot)[..., None]


def conformal_factor(b: SpinBoost, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (1 - b.alpha**2) / _denominator(b, x)


def pullback_metric(b: SpinBoost, x) -> np.ndarray:
    """Pullback of the Euclidean metric of R^{n+1} by the boost, at x."""
    x = np.asarray(x, dtype=float)
    a, n = b.alpha, b.axis
    f = _denominator(b, x)
    rho = (1 - a * a) / f
    eye = np.eye(len(n))
    nn = np.outer(n, n)
    nx = n[:, None] * x[..., None, :]
    xn = np.swapaxes(nx, -1, -2)
    sq = np.sum(x * x, axis=-1)
    g = (
        eye
        + (4 * a * a * (sq - 1) / f**2)[..., None, None] * nn
        - (2 * a / f)[..., None, None] * (nx + xn)
    )
    return (rho**2)[..., None, None] * g


def rn_surface(b: SpinBoost, x) -> np.ndarray:
    """Surface Radon-Nikodym derivative rho^n on S^n."""
    return conformal_factor(b, x) ** b.dim


def rn_volume(b: SpinBoost, x) -> np.ndarray:
    """Jacobian determinant rho^{n+2} of the boost acting on B^{n+1}."""
    return conformal_factor(b, x) ** (b.dim + 2)


def stereo_project(pole, x) -> np.ndarray:
    """Stereographic projection of sphere points from ``pole`` onto the hyperplane orthogonal to it."""
    pole = _unit_axis(pole)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > TOL.sphere_drift):
        raise ValueError("stereo_project expects points on the unit sphere")
    dot = x @ pole
    diff = x - pole
    # on the sphere 1 - n.x = |x - n|^2 / 2, which avoids cancellation near the pole
    gap = 0.5 * np.sum(diff * diff, axis=-1)
    if np.any(gap <= TOL.pole):
        raise ValueError("stereographic projection undefined at the projection pole")
    return (x - dot[..., None] * pole) / gap[..., None]


# Clifford route


def clifford_moebius(g: Multivector, x) -> np.ndarray:
    """x' from g P(x) g^tau = lambda P(x') for g in the spin group."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    g_rev = involution(g, "tau")
    out = np.empty_like(flat)
    for k, point in enumerate(flat):
        image = g * point_paravector(point) * g_rev
        out[k] = image.vector_part / image.scalar_part
    return out.reshape(x.shape)


def rotor(u, v) -> Multivector:
    """Product of two unit vectors; conjugation by it is a rotation of V."""
    u, v = _unit_axis(u), _unit_axis(v)
    sig = Signature(len(u))
    return Multivector.vector(sig, u) * Multivector.vector(sig, v)


# Lorentz matrix route

_MINKOWSKI = {}


def minkowski(dim: int) -> np.ndarray:
    if dim not in _MINKOWSKI:
        eta = -np.eye(dim)
        eta[0, 0] = 1.0
        eta.setflags(write=False)
        _MINKOWSKI[dim] = eta
    return _MINKOWSKI[dim]


@dataclass(frozen=True)
class LorentzMatrix:
    """Proper orthochronous Lorentz transformation; index 0 is the time direction."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError(f"square matrix of size >= 2 required, got {m.shape}")
        eta = minkowski(m.shape[0])
        scale = max(1.0, np.abs(m).max() ** 2)
        if np.abs(m.T @ eta @ m - eta).max() > TOL.lorentz * scale:
            raise ValueError("matrix does not preserve the Minkowski form")
        if m[0, 0] < 1.0 - TOL.lorentz * scale:
            raise ValueError("matrix is not orthochronous")
        if abs(np.linalg.det(m) - 1.0) > TOL.lorentz * scale:
            raise ValueError("matrix has determinant != 1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def __matmul__(self, other: "LorentzMatrix") -> "LorentzMatrix":
        return LorentzMatrix(self.entries @ other.entries)

    def inverse(self) -> "LorentzMatrix":
        eta = minkowski(self.entries.shape[0])
        return LorentzMatrix(eta @ self.entries.T @ eta)

    @classmethod
    def rotation(cls, r: np.ndarray) -> "LorentzMatrix":
        r = np.asarray(r, dtype=float)
        m = np.eye(r.shape[0] + 1)
        m[1:, 1:] = r
        return cls(m)


def boost_to_lorentz(g: Multivector | SpinBoost) -> LorentzMatrix:
    """Matrix of w -> g w g^tau on the paravector basis {1, e_1, ..., e_{n+1}}."""
    if isinstance(g, SpinBoost):
        g = g.multivector()
    if not is_group_element(g):
        raise ValueError("element is not in the spin group")
    dim = g.sig.dim
    g_rev = involution(g, "tau")
    cols = [Multivector.scalar(g.sig)] + [Multivector.blade(g.sig, 1 << i) for i in range(dim)]
    m = np.empty((dim + 1, dim + 1))
    for mu, w in enumerate(cols):
        image = g * w * g_rev
        m[0, mu] = image.scalar_part
        m[1:, mu] = image.vector_part
    return LorentzMatrix(m)


def lorentz_apply(L: LorentzMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m = L.entries
    top = m[0, 0] + x @ m[0, 1:]
    rest = m[1:, 0] + x @ m[1:, 1:].T
    return rest / top[..., None]


def cocycle(L: LorentzMatrix, x, r: float) -> np.ndarray:
    """f_r(L, x) = (L^0_0 + L^0_i x^i)^r."""
    x = np.asarray(x, dtype=float)
    m = L.entries
    return (m[0, 0] + x @ m[0, 1:]) ** r


def rn_lorentz(L: LorentzMatrix, x) -> np.ndarray:
    """Surface Radon-Nikodym derivative of the sphere map induced by L."""
    n = L.entries.shape[0] - 2
    return cocycle(L, x, -float(n))
