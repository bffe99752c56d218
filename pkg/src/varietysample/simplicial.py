"""Simplicial complexes on point samples and their Betti numbers.

Two constructions are provided: a modified Vietoris-Rips complex (closed
balls, dimension at most 2) whose first two Betti numbers match the variety
below the weak feature size, and the Cech complex of open balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .solve import rng_for

WITNESS_FACTOR = 2.0 * math.sqrt(8.0)
TIE_TOL = 1e-12
MODIFIED_VR, CECH = "modified_vr", "cech"
MAX_CECH_DIM = 4


@dataclass
class SimplicialComplex:
    num_vertices: int
    simplices: list[list[tuple[int, ...]]]
    kind: str
    epsilon: float
    max_dim: int

    @classmethod
    def from_simplices(cls, maximal: Iterable[Sequence[int]], kind: str = CECH, epsilon: float = 0.0,
                       max_dim: int | None = None, num_vertices: int | None = None) -> "SimplicialComplex":
        """Downward closure of the given simplices."""
        faces: dict[int, set] = {}
        top = 0
        for s in maximal:
            s = tuple(sorted(set(int(v) for v in s)))
            top = max(top, len(s) - 1)
            for k in range(1, len(s) + 1):
                faces.setdefault(k - 1, set()).update(combinations(s, k))
        verts = {v for (v,) in faces.get(0, ())}
        nv = num_vertices if num_vertices is not None else (max(verts) + 1 if verts else 0)
        faces.setdefault(0, set()).update((v,) for v in range(nv))
        # an explicit list is complete: nothing lives one dimension above it
        cap = top + 1 if max_dim is None else max_dim
        simplices = [sorted(faces.get(k, ())) for k in range(cap + 1)]
        return cls(nv, simplices, kind, float(epsilon), cap)

    @property
    def dimension(self) -> int:
        dims = [k for k, s in enumerate(self.simplices) if s]
        return max(dims) if dims else -1

    def count(self, k: int) -> int:
        return len(self.simplices[k]) if 0 <= k < len(self.simplices) else 0

    def __len__(self):
        return sum(len(s) for s in self.simplices)

    def is_closed(self) -> bool:
        present = [set(s) for s in self.simplices]
        for k in range(1, len(self.simplices)):
            for s in self.simplices[k]:
                if any(f not in present[k - 1] for f in combinations(s, k)):
                    return False
        return True

    def to_text(self) -> str:
        lines = [f"# kind {self.kind} epsilon {self.epsilon!r} vertices {self.num_vertices}"]
        for k, ss in enumerate(self.simplices):
            lines.append(f"dim {k} count {len(ss)}")
            lines.extend(" ".join(str(v) for v in s) for s in ss)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# exact comparisons near thresholds


def _exact_sq_dist(a, b) -> Fraction:
    return sum((Fraction(float(x)) - Fraction(float(y))) ** 2 for x, y in zip(a, b))


def _within(P: np.ndarray, i: int, j: int, r: float) -> bool:
    """``||P_i - P_j|| <= r`` with an exact check for near-ties."""
    d = float(np.linalg.norm(P[i] - P[j]))
    if abs(d - r) >= TIE_TOL:
        return d <= r
    return _exact_sq_dist(P[i], P[j]) <= Fraction(r) ** 2


def _edges_within(P: np.ndarray, tree: cKDTree, r: float) -> set[tuple[int, int]]:
    cand = tree.query_pairs(r + 2 * TIE_TOL, output_type="ndarray")
    return {(int(i), int(j)) for i, j in cand if _within(P, int(i), int(j), r)}


def _adjacency(n: int, edges) -> list[set[int]]:
    adj = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    return adj


def _cliques(adj: list[set[int]], edges: Iterable[tuple[int, int]]) -> list[tuple[int, int, int]]:
    tri = []
    for a, b in edges:
        for c in adj[a] & adj[b]:
            if c > b:
                tri.append((a, b, c))
    return sorted(tri)


def build_modified_vr(points: np.ndarray, epsilon: float, witness_factor: float = WITNESS_FACTOR) -> SimplicialComplex:
    """Edges join points whose closed ``epsilon``-balls meet, or which share such a
    neighbour and lie within ``witness_factor * epsilon``; triangles are 3-cliques."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    P = np.asarray(points, dtype=float)
    n = len(P)
    if n == 0:
        return SimplicialComplex(0, [[], [], []], MODIFIED_VR, float(epsilon), 2)
    tree = cKDTree(P)
    close = _edges_within(P, tree, 2.0 * epsilon)
    adj_close = _adjacency(n, close)
    edges = set(close)
    reach = witness_factor * epsilon
    for c in range(n):
        for a, b in combinations(sorted(adj_close[c]), 2):
            if (a, b) not in edges and _within(P, a, b, reach):
                edges.add((a, b))
    edges_sorted = sorted(edges)
    tri = _cliques(_adjacency(n, edges_sorted), edges_sorted)
    return SimplicialComplex(n, [[(v,) for v in range(n)], edges_sorted, tri], MODIFIED_VR, float(epsilon), 2)


# ---------------------------------------------------------------------------
# minimum enclosing balls


def _circumball(R: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with all points of ``R`` on its boundary (centre in their affine hull)."""
    p0 = R[0]
    if len(R) == 1:
        return p0.copy(), 0.0
    A = np.array([r - p0 for r in R[1:]])
    G = A @ A.T
    rhs = 0.5 * np.sum(A * A, axis=1)
    lam = np.linalg.lstsq(G, rhs, rcond=None)[0]
    c = p0 + lam @ A
    return c, float(np.linalg.norm(R[0] - c))


def _exact_circumradius_sq(R: list[np.ndarray]) -> Fraction:
    p0 = [Fraction(float(v)) for v in R[0]]
    A = [[Fraction(float(v)) - p for v, p in zip(r, p0)] for r in R[1:]]
    m = len(A)
    if m == 0:
        return Fraction(0)
    G = [[sum(x * y for x, y in zip(A[i], A[j])) for j in range(m)] for i in range(m)]
    rhs = [sum(x * x for x in A[i]) / 2 for i in range(m)]
    lam = _fraction_solve(G, rhs)
    c = [sum(lam[i] * A[i][k] for i in range(m)) for k in range(len(p0))]
    return sum(x * x for x in c)


def _fraction_solve(G: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    m = len(G)
    M = [row[:] + [b[i]] for i, row in enumerate(G)]
    for col in range(m):
        piv = next((r for r in range(col, m) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("affinely dependent support set")
        M[col], M[piv] = M[piv], M[col]
        for r in range(m):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][m] / M[i][i] for i in range(m)]


def _welzl(P: list[np.ndarray], R: list[np.ndarray], dim: int):
    if not P or len(R) == dim + 1:
        if not R:
            return np.zeros(dim), -1.0, []
        c, r = _circumball(R)
        return c, r, list(R)
    p = P[-1]
    c, r, S = _welzl(P[:-1], R, dim)
    if r >= 0 and np.linalg.norm(p - c) <= r * (1 + 1e-12) + 1e-15:
        return c, r, S
    return _welzl(P[:-1], R + [p], dim)


def min_enclosing_ball(points: np.ndarray, seed: int = 0) -> tuple[np.ndarray, float, list[np.ndarray]]:
    """Centre, radius and support points of the smallest enclosing ball (Welzl)."""
    P = [np.asarray(p, dtype=float) for p in points]
    order = rng_for(seed, "welzl", len(P)).permutation(len(P))
    return _welzl([P[i] for i in order], [], len(P[0]))


def _meb_below(P: np.ndarray, simplex: tuple[int, ...], epsilon: float) -> bool:
    _, r, support = min_enclosing_ball(P[list(simplex)])
    if abs(r - epsilon) >= TIE_TOL:
        return r < epsilon
    return _exact_circumradius_sq(support) < Fraction(epsilon) ** 2


def build_cech(points: np.ndarray, epsilon: float, max_dim: int = 2) -> SimplicialComplex:
    """Nerve of the open ``epsilon``-balls around the sample, up to ``max_dim``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 <= max_dim <= MAX_CECH_DIM:
        raise ValueError(f"max_dim must lie in [0, {MAX_CECH_DIM}]")
    P = np.asarray(points, dtype=float)
    n = len(P)
    simplices: list[list[tuple[int, ...]]] = [[(v,) for v in range(n)]]
    if max_dim >= 1 and n:
        tree = cKDTree(P)
        cand = tree.query_pairs(2 * epsilon + 2 * TIE_TOL, output_type="ndarray")
        edges = sorted((int(i), int(j)) for i, j in cand if _meb_below(P, (int(i), int(j)), epsilon))
        simplices.append(edges)
        adj = _adjacency(n, edges)
        for k in range(2, max_dim + 1):
            prev = set(simplices[-1])
            nxt = []
            for s in simplices[-1]:
                common = set.intersection(*(adj[v] for v in s))
                for v in sorted(common):
                    if v <= s[-1]:
                        continue
                    cand_s = s + (v,)
                    if all(f in prev for f in combinations(cand_s, k)) and _meb_below(P, cand_s, epsilon):
                        nxt.append(cand_s)
            simplices.append(sorted(nxt))
    while len(simplices) < max_dim + 1:
        simplices.append([])
    return SimplicialComplex(n, simplices, CECH, float(epsilon), max_dim)


# ---------------------------------------------------------------------------
# homology


def _boundary_columns_gf2(K: SimplicialComplex, k: int) -> list[int]:
    index = {s: i for i, s in enumerate(K.simplices[k - 1])}
    cols = []
    for s in K.simplices[k]:
        col = 0
        for f in combinations(s, k):
            col ^= 1 << index[f]
        cols.append(col)
    return cols


def rank_gf2(columns: list[int]) -> int:
    """Rank of a GF(2) matrix given as integer bitset columns."""
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            low = col.bit_length() - 1
            if low in pivots:
                col ^= pivots[low]
            else:
                pivots[low] = col
                rank += 1
                break
    return rank


def _boundary_rational(K: SimplicialComplex, k: int) -> list[dict[int, Fraction]]:
    index = {s: i for i, s in enumerate(K.simplices[k - 1])}
    cols = []
    for s in K.simplices[k]:
        cols.append({index[s[:i] + s[i + 1:]]: Fraction((-1) ** i) for i in range(len(s))})
    return cols


def rank_rational(columns: list[dict[int, Fraction]]) -> int:
    """Rank over the rationals by sparse exact elimination."""
    pivots: dict[int, dict[int, Fraction]] = {}
    rank = 0
    for col in columns:
        col = dict(col)
        while col:
            low = max(col)
            if low not in pivots:
                pivots[low] = col
                rank += 1
                break
            piv = pivots[low]
            f = col[low] / piv[low]
            for r, v in piv.items():
                nv = col.get(r, 0) - f * v
                if nv:
                    col[r] = nv
                else:
                    col.pop(r, None)
    return rank


def components(num_vertices: int, edges: Iterable[tuple[int, int]]) -> int:
    parent = list(range(num_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    count = num_vertices
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            count -= 1
    return count


@dataclass
class BettiReport:
    betti: list[int]
    complex_kind: str
    epsilon: float
    coefficients: str = "gf2"
    certificate: str = "none"
    checked: str = ""
    simplex_counts: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "betti": [int(b) for b in self.betti],
            "complex_kind": self.complex_kind,
            "epsilon": float(self.epsilon),
            "coefficients": self.coefficients,
            "certificate": self.certificate,
            "checked": self.checked,
            "simplex_counts": [int(c) for c in self.simplex_counts],
        }


def betti(K: SimplicialComplex, top_dim: int | None = None, coefficients: str = "gf2") -> BettiReport:
    """Betti numbers ``beta_0 .. beta_top_dim`` by boundary-matrix rank."""
    if top_dim is None:
        top_dim = max(K.max_dim - 1, 0)
    if top_dim < 0:
        raise ValueError("top_dim must be nonnegative")
    if top_dim + 1 > K.max_dim and K.count(K.max_dim):
        raise ValueError(f"beta_{top_dim} needs simplices of dimension {top_dim + 1} beyond the cap {K.max_dim}")
    if coefficients == "gf2":
        ranks = [0] + [rank_gf2(_boundary_columns_gf2(K, k)) if K.count(k) else 0 for k in range(1, top_dim + 2)]
    elif coefficients == "rational":
        ranks = [0] + [rank_rational(_boundary_rational(K, k)) if K.count(k) else 0 for k in range(1, top_dim + 2)]
    else:
        raise ValueError("coefficients must be 'gf2' or 'rational'")
    b = [K.count(k) - ranks[k] - ranks[k + 1] for k in range(top_dim + 1)]
    if K.num_vertices and b[0] != components(K.num_vertices, K.simplices[1] if len(K.simplices) > 1 else []):
        raise RuntimeError("beta_0 disagrees with the union-find component count")
    return BettiReport(b, K.kind, K.epsilon, coefficients,
                       simplex_counts=[K.count(k) for k in range(len(K.simplices))])


def certify(report: BettiReport, epsilon: float, mode: str, wfs: float | None = None,
            local_reach_min: float | None = None, sample_epsilon: float | None = None) -> BettiReport:
    """Stamp a homology certificate when the matching density inequality holds.

    ``wfs`` mode needs a modified Vietoris-Rips report and checks
    ``epsilon < wfs``; ``reach`` mode needs a Cech report, checks
    ``epsilon < 4/5 * min eta`` and that the sample is ``epsilon/2``-dense.
    """
    if mode == "wfs":
        if report.complex_kind != MODIFIED_VR:
            raise ValueError("wfs certificates apply to the modified Vietoris-Rips complex")
        if wfs is None:
            raise ValueError("wfs mode needs a weak feature size (or b2) value")
        ok = epsilon < wfs
        report.checked = f"epsilon={epsilon:.6g} < wfs={wfs:.6g}: {ok}"
        report.certificate = "wfs_based" if ok else "none"
    elif mode == "reach":
        if report.complex_kind != CECH:
            raise ValueError("reach certificates apply to the Cech complex")
        if local_reach_min is None:
            raise ValueError("reach mode needs the minimum local reach bound")
        bound = 0.8 * local_reach_min
        ok_eps = epsilon < bound
        ok_dense = sample_epsilon is not None and sample_epsilon <= epsilon / 2
        report.checked = (f"epsilon={epsilon:.6g} < 4/5*min_eta={bound:.6g}: {ok_eps}; "
                          f"sample density {sample_epsilon} <= epsilon/2={epsilon / 2:.6g}: {ok_dense}")
        report.certificate = "reach_based" if ok_eps and ok_dense else "none"
    else:
        raise ValueError("mode must be 'wfs' or 'reach'")
    return report
