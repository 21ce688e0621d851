"""Detector configurations: regular polygons, Platonic solids and regular 4-polytopes.

Quaternions are identified with R^4 by ``w + x i + y j + z k -> (x, y, z, w)``;
with this ordering the binary icosahedral group closes onto the 600-cell
coordinates built from even permutations of (phi, 1, 1/phi, 0)/2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import TOL

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
INV_GOLDEN = GOLDEN - 1.0

_KEY_DECIMALS = 9


@dataclass(frozen=True)
class VertexConfiguration:
    """N unit vectors in R^{n+1}, the detector directions on S^n."""

    vertices: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError(f"vertices must be an (N, n+1) array with n >= 1, got shape {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.abs(norms - 1.0).max() > TOL.unit_norm:
            raise ValueError(f"vertices must be unit vectors (max deviation {np.abs(norms - 1).max():.2e})")
        keys = {tuple(row) for row in np.round(v, _KEY_DECIMALS)}
        if len(keys) != len(v):
            raise ValueError("vertices must be pairwise distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        """Sphere dimension n."""
        return self.vertices.shape[1] - 1

    @property
    def count(self) -> int:
        return self.vertices.shape[0]

    def __len__(self):
        return self.count


def check_balanced(c: VertexConfiguration) -> tuple[bool, float]:
    residual = float(np.linalg.norm(c.vertices.sum(axis=0)))
    return residual < TOL.balance, residual


def gram_isotropy_residual(c: VertexConfiguration) -> float:
    """max |sum n n^T - N/(n+1) I|."""
    v = c.vertices
    target = len(v) / v.shape[1] * np.eye(v.shape[1])
    return float(np.abs(v.T @ v - target).max())


def canonical_order(v: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically (first coordinate most significant)."""
    r = np.round(v, _KEY_DECIMALS) + 0.0  # folds -0.0 into 0.0
    idx = np.lexsort(r.T[::-1])
    return v[idx]


def edges(c: VertexConfiguration, rel_tol: float = 1e-9) -> np.ndarray:
    """Index pairs (i < j) at the minimal chordal distance."""
    v = c.vertices
    d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
    iu = np.triu_indices(len(v), k=1)
    dmin = d[iu].min()
    mask = np.abs(d[iu] - dmin) <= rel_tol * dmin
    return np.stack([iu[0][mask], iu[1][mask]], axis=1)


# S^1 and S^2


def polygon(count: int) -> VertexConfiguration:
    """Regular N-gon with vertex k at angle 2 pi k / N (vertex 0 is (1, 0))."""
    if count < 2:
        raise ValueError(f"a polygon needs at least 2 vertices, got {count}")
    t = 2 * np.pi * np.arange(count) / count
    v = np.stack([np.cos(t), np.sin(t)], axis=1)
    # exact zeros where cos or sin vanish make the sums cleaner
    v[np.abs(v) < 1e-15] = 0.0
    return VertexConfiguration(v, name="pentagon" if count == 5 else f"polygon{count}")


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cyclic(rows) -> list:
    out = []
    for r in rows:
        for s in range(3):
            out.append(tuple(r[(i - s) % 3] for i in range(3)))
    return out


def _signs(base, positions) -> list:
    out = []
    for flips in itertools.product((1.0, -1.0), repeat=len(positions)):
        r = list(base)
        for p, f in zip(positions, flips):
            r[p] *= f
        out.append(tuple(r))
    return out


PLATONIC = ("tetrahedron", "octahedron", "cube", "icosahedron", "dodecahedron")


@lru_cache(maxsize=None)
def platonic(name: str) -> VertexConfiguration:
    if name == "tetrahedron":
        v = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    elif name == "octahedron":
        v = [tuple(s * e) for e in np.eye(3) for s in (1, -1)]
    elif name == "cube":
        v = list(itertools.product((1, -1), repeat=3))
    elif name == "icosahedron":
        v = _cyclic(_signs((0.0, 1.0, GOLDEN), (1, 2)))
    elif name == "dodecahedron":
        v = list(itertools.product((1, -1), repeat=3)) + _cyclic(_signs((0.0, INV_GOLDEN, GOLDEN), (1, 2)))
    else:
        raise ValueError(f"unknown Platonic solid {name!r}; choose from {', '.join(PLATONIC)}")
    return VertexConfiguration(canonical_order(_normalize(v)), name=name)


# Quaternions


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        if not isinstance(o, Quaternion):
            return NotImplemented
        return Quaternion(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __pow__(self, k: int) -> "Quaternion":
        out = Quaternion(1.0)
        for _ in range(k):
            out = out * self
        return out

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def components(self) -> np.ndarray:
        """(w, x, y, z)."""
        return np.array([self.w, self.x, self.y, self.z])

    def to_vector(self) -> np.ndarray:
        """Point of R^4, real part last."""
        return np.array([self.x, self.y, self.z, self.w])

    @classmethod
    def from_vector(cls, v) -> "Quaternion":
        x, y, z, w = (float(t) for t in v)
        return cls(w, x, y, z)

    def key(self) -> tuple:
        return tuple(np.round(self.components(), _KEY_DECIMALS) + 0.0)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        if not isinstance(other, Quaternion):
            other = Quaternion(float(other))
        return bool(np.abs(self.components() - other.components()).max() <= atol)


QI, QJ, QK = Quaternion(0, 1, 0, 0), Quaternion(0, 0, 1, 0), Quaternion(0, 0, 0, 1)

# T1 and T2 carry the opposite overall sign to the commonly quoted forms so
# that S^3 = T^5 = (ST)^2 = -1 holds; the quoted T's satisfy T^5 = +1.
ICOSIAN_S1 = Quaternion(0.5, -INV_GOLDEN / 2, 0.0, -GOLDEN / 2)
ICOSIAN_T1 = Quaternion(-INV_GOLDEN / 2, 0.5, GOLDEN / 2, 0.0)
ICOSIAN_S2 = Quaternion(0.5, GOLDEN / 2, INV_GOLDEN / 2, 0.0)
ICOSIAN_T2 = Quaternion(GOLDEN / 2, 0.5, 0.0, INV_GOLDEN / 2)

GROUP_BOUND = 10_000


def icosian_group(generators, bound: int = GROUP_BOUND) -> list[Quaternion]:
    """Closure of unit quaternion generators under the Hamilton product.

    Returned in canonical order of their R^4 images.
    """
    gens = list(generators)
    for g in gens:
        if abs(g.norm() - 1.0) > TOL.unit_norm:
            raise ValueError(f"generator {g} is not a unit quaternion")
    one = Quaternion(1.0)
    found = {one.key(): one}
    frontier = [one]
    while frontier:
        nxt = []
        for q in frontier:
            for g in gens:
                p = q * g
                k = p.key()
                if k not in found:
                    found[k] = p
                    nxt.append(p)
                    if len(found) > bound:
                        raise ValueError(f"closure exceeds {bound} elements; generators do not span a small finite group")
        frontier = nxt
    vecs = canonical_order(np.array([q.to_vector() for q in found.values()]))
    return [Quaternion.from_vector(v) for v in vecs]


def quaternion_angle(p: Quaternion, q: Quaternion) -> float:
    c = float(p.components() @ q.components()) / (p.norm() * q.norm())
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


# S^3


def _even_permutations(n: int):
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        if inversions % 2 == 0:
            yield perm


def cell600_vertices() -> np.ndarray:
    v = [tuple(s * e) for e in np.eye(4) for s in (1, -1)]
    v += list(itertools.product((0.5, -0.5), repeat=4))
    base = (GOLDEN / 2, 0.5, INV_GOLDEN / 2, 0.0)
    for signed in _signs(base, (0, 1, 2)):
        for perm in _even_permutations(4):
            # coordinate perm[i] receives entry i
            row = [0.0] * 4
            for i, p in enumerate(perm):
                row[p] = signed[i]
            v.append(tuple(row))
    return np.array(v, dtype=float)


def _tetrahedral_cells(v: np.ndarray) -> list[tuple[int, ...]]:
    """4-cliques of the minimal-distance graph."""
    cfg = VertexConfiguration(v)
    adj = np.zeros((len(v), len(v)), dtype=bool)
    e = edges(cfg)
    adj[e[:, 0], e[:, 1]] = True
    adj[e[:, 1], e[:, 0]] = True
    cells = []
    for i, j in e:
        common = np.flatnonzero(adj[i] & adj[j])
        common = common[common > j]
        for a, b in itertools.combinations(common, 2):
            if adj[a, b]:
                cells.append((int(i), int(j), int(a), int(b)))
    return cells


def cell120_vertices() -> np.ndarray:
    v = cell600_vertices()
    cells = _tetrahedral_cells(v)
    centroids = np.array([v[list(c)].mean(axis=0) for c in cells])
    return _normalize(centroids)


POLYTOPES4 = ("cell5", "cell16", "cell8", "cell24", "cell600", "cell120")


@lru_cache(maxsize=None)
def polytope4(name: str) -> VertexConfiguration:
    if name == "cell5":
        a, b, c = 1 / np.sqrt(10), 1 / np.sqrt(6), 1 / np.sqrt(3)
        v = [(a, b, c, 1), (a, b, c, -1), (a, b, -2 * c, 0), (a, -np.sqrt(1.5), 0, 0), (-2 * np.sqrt(0.4), 0, 0, 0)]
        v = _normalize(v)
    elif name == "cell16":
        v = np.array([s * e for e in np.eye(4) for s in (1, -1)])
    elif name == "cell8":
        v = np.array(list(itertools.product((0.5, -0.5), repeat=4)))
    elif name == "cell24":
        v = np.vstack([polytope4("cell16").vertices, polytope4("cell8").vertices])
    elif name == "cell600":
        v = cell600_vertices()
    elif name == "cell120":
        v = cell120_vertices()
    else:
        raise ValueError(f"unknown 4-polytope {name!r}; choose from {', '.join(POLYTOPES4)}")
    return VertexConfiguration(canonical_order(np.asarray(v, dtype=float)), name=name)


# Coxeter's four tori

_TORUS_C = 3 ** -0.5 * 5 ** -0.25
TORUS_A = float(np.sqrt((1 + _TORUS_C * GOLDEN**1.5) / 2))
TORUS_B = float(np.sqrt((1 + _TORUS_C * GOLDEN**-1.5) / 2))
TORUS_C = float(np.sqrt((1 - _TORUS_C * GOLDEN**-1.5) / 2))
TORUS_D = float(np.sqrt((1 - _TORUS_C * GOLDEN**1.5) / 2))
TORUS_FAMILIES = ("aa", "ab", "ba", "bb")


def coxeter_tori(family: str) -> np.ndarray:
    """30 points on one torus: (r cos k t, r sin k t, s cos 11 k t, s sin 11 k t), t = pi/30.

    ``aa``/``ab`` use even k in 0..58 with radii (a, d) / (d, -a);
    ``ba``/``bb`` use odd k in 1..59 with radii (b, c) / (c, -b).
    """
    radii = {
        "aa": (TORUS_A, TORUS_D, 0),
        "ab": (TORUS_D, -TORUS_A, 0),
        "ba": (TORUS_B, TORUS_C, 1),
        "bb": (TORUS_C, -TORUS_B, 1),
    }
    if family not in radii:
        raise ValueError(f"unknown torus family {family!r}; choose from {', '.join(TORUS_FAMILIES)}")
    r, s, start = radii[family]
    k = np.arange(start, 60, 2)
    t = np.pi / 30 * k
    return np.stack([r * np.cos(t), r * np.sin(t), s * np.cos(11 * t), s * np.sin(11 * t)], axis=1)


def coxeter_tori_union() -> np.ndarray:
    return np.vstack([coxeter_tori(f) for f in TORUS_FAMILIES])


def same_point_set(a: np.ndarray, b: np.ndarray, tol: float = 1e-6) -> bool:
    """Whether two point arrays agree as sets (nearest-neighbour matching both ways)."""
    if a.shape != b.shape:
        return False
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return bool(d.min(axis=1).max() <= tol and d.min(axis=0).max() <= tol)


def find_congruence(src: np.ndarray, dst: np.ndarray, tol: float = 1e-6) -> np.ndarray | None:
    """Orthogonal Q with {Q p : p in src} = dst as sets, or None.

    Matches a frame of ``d`` independent source points against every target
    tuple with the same Gram matrix; ``d`` is the ambient dimension.
    """
    src, dst = np.asarray(src, float), np.asarray(dst, float)
    dim = src.shape[1]
    if src.shape != dst.shape:
        return None
    # greedy independent frame in src
    frame = [0]
    for i in range(1, len(src)):
        if np.linalg.matrix_rank(src[frame + [i]], tol=1e-8) == len(frame) + 1:
            frame.append(i)
        if len(frame) == dim:
            break
    if len(frame) < dim:
        return None
    P = src[frame]
    G = P @ P.T
    dg = dst @ dst.T

    def extend(chosen):
        level = len(chosen)
        if level == dim:
            Qt = dst[chosen]
            Q = np.linalg.solve(P, Qt).T
            if np.abs(Q.T @ Q - np.eye(dim)).max() > tol:
                return None
            return Q if same_point_set(src @ Q.T, dst, tol) else None
        ok = np.abs(np.diag(dg) - G[level, level]) <= tol
        for m, c in enumerate(chosen):
            ok &= np.abs(dg[c] - G[level, m]) <= tol
        for cand in np.flatnonzero(ok):
            found = extend(chosen + [int(cand)])
            if found is not None:
                return found
        return None

    return extend([])


# name registry

_POLYGON_NAMES = {"pair": 2, "antipodal": 2, "triangle": 3, "square": 4, "pentagon": 5, "hexagon": 6}


def available() -> list[str]:
    return sorted(_POLYGON_NAMES) + ["polygon<N>"] + list(PLATONIC) + list(POLYTOPES4)


def get_configuration(name: str) -> VertexConfiguration:
    if name in _POLYGON_NAMES:
        return polygon(_POLYGON_NAMES[name])
    if name.startswith("polygon") and name[7:].isdigit():
        return polygon(int(name[7:]))
    if name in PLATONIC:
        return platonic(name)
    if name in POLYTOPES4:
        return polytope4(name)
    raise ValueError(f"unknown configuration {name!r}; known: {', '.join(available())}")
