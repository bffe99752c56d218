"""Normal loci, bounding boxes, coordinate slices and bottlenecks of a variety."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DegenerateNormalLocus, EmptyVarietyError
from .poly import Polynomial, PolySystem
from .solve import (
    _CONVERGED,
    _SINGULAR,
    TrackSettings,
    dedup_points,
    parameter_track_raw,
    rng_for,
    total_degree_track,
)

log = logging.getLogger(__name__)

DIAGONAL_FRACTION = 1e-4
BOX_MARGIN = 1.01


# ---------------------------------------------------------------------------
# auxiliary systems


def normal_locus_system(F: PolySystem, free: Sequence[int] | None = None) -> PolySystem:
    """The Lagrange system for critical points of the distance to ``q``.

    Variables are ordered ``x_1..x_n, lambda_1..lambda_c, q_1..q_n``.  Only the
    coordinates in ``free`` get a normality equation; the others are meant to
    be fixed (sliced) and treated as parameters.
    """
    n, c = F.num_vars, F.codim
    free = list(range(n)) if free is None else list(free)
    m = 2 * n + c
    names = list(F.var_names) + [f"lambda_{i + 1}" for i in range(c)] + [f"q_{v}" for v in F.var_names]
    pos = list(range(n))
    fs = [p.embed(m, pos) for p in F.polys]
    jac = F.symbolic_jacobian()
    eqs = list(fs)
    for j in free:
        e = Polynomial.variable(j, m) - Polynomial.variable(n + c + j, m)
        for i in range(c):
            e = e - Polynomial.variable(n + i, m) * jac[i][j].embed(m, pos)
        eqs.append(e)
    return PolySystem(eqs, names)


def _det(rows: list[list[Polynomial]]) -> Polynomial:
    if len(rows) == 1:
        return rows[0][0]
    total = None
    for j, entry in enumerate(rows[0]):
        if entry.is_zero():
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = entry * _det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else Polynomial(rows[0][0].num_vars)


def bottleneck_system(F: PolySystem, seed: int = 0) -> PolySystem:
    """Square system on ``X x X`` whose off-diagonal solutions contain the bottlenecks.

    The rank conditions on ``[x - y; J_F(x)]`` and ``[x - y; J_F(y)]`` are the
    vanishing of all ``(c+1)``-minors; when there are more minors than the
    ``n - c`` equations needed per point, random rational combinations are used.
    """
    n, c = F.num_vars, F.codim
    if c >= n:
        raise ValueError("bottlenecks need codim < number of variables")
    m = 2 * n
    names = [f"{v}" for v in F.var_names] + [f"{v}_" for v in F.var_names]
    xs, ys = list(range(n)), list(range(n, 2 * n))
    jac = F.symbolic_jacobian()
    rng = rng_for(seed, "bottleneck-combinations", F.to_text())
    diff = [Polynomial.variable(j, m) - Polynomial.variable(n + j, m) for j in range(n)]
    eqs = [p.embed(m, xs) for p in F.polys] + [p.embed(m, ys) for p in F.polys]
    for pos in (xs, ys):
        J = [[jac[i][j].embed(m, pos) for j in range(n)] for i in range(c)]
        minors = []
        for cols in combinations(range(n), c + 1):
            rows = [[diff[j] for j in cols]] + [[J[i][j] for j in cols] for i in range(c)]
            minors.append(_det(rows))
        if len(minors) == n - c:
            eqs.extend(minors)
        else:
            for _ in range(n - c):
                w = rng.normal(size=len(minors))
                combo = Polynomial(m)
                for wk, mk in zip(w, minors):
                    combo = combo + mk * Fraction(round(float(wk) * 10**6), 10**6)
                eqs.append(combo)
    return PolySystem(eqs, names)


# ---------------------------------------------------------------------------
# normal locus and bounding box


@dataclass
class NormalLocus:
    base_point: np.ndarray
    critical_points: np.ndarray
    edd_observed: int
    paths_tracked: int = 0


def _real_mask(x: np.ndarray, tol: float) -> np.ndarray:
    return np.max(np.abs(x.imag), axis=1) <= tol if x.shape[1] else np.ones(len(x), dtype=bool)


def normal_locus(F: PolySystem, q, settings: TrackSettings = TrackSettings(), workers: int = 1) -> NormalLocus:
    """Real critical points of the squared distance from ``q`` on ``X``."""
    n, c = F.num_vars, F.codim
    q = np.asarray(q, dtype=float).ravel()
    if q.shape != (n,):
        raise ValueError("q has the wrong dimension")
    sysm = normal_locus_system(F)
    unknown = list(range(n + c))
    (x, status, res, cond), total = total_degree_track(sysm, unknown, q, settings, workers)
    conv = status == _CONVERGED
    if not conv.any():
        raise DegenerateNormalLocus(
            f"no isolated critical points from q={q.tolist()} "
            f"({int((status == _SINGULAR).sum())} singular endpoints); resample q"
        )
    pts = x[conv]
    keep, _ = dedup_points(pts, settings.dedup_tol)
    pts = pts[keep]
    real = pts[_real_mask(pts, settings.real_tol)].real[:, :n]
    if len(real):
        k, _ = dedup_points(real, settings.dedup_tol)
        real = real[k]
    return NormalLocus(base_point=q, critical_points=real, edd_observed=len(pts), paths_tracked=total)


@dataclass(frozen=True)
class BoundingBox:
    center: np.ndarray
    half_width: float

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    def contains(self, points: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(points)
        return np.all((P >= self.lower) & (P <= self.upper), axis=1)

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.center], "half_width": float(self.half_width)}


def bounding_box(F: PolySystem, settings: TrackSettings = TrackSettings(), q=None,
                 q_scale: float = 0.1, workers: int = 1) -> BoundingBox:
    """Hypercube around a random ``q`` that contains ``X``.

    The half width is the largest distance from ``q`` to a real critical
    point of the distance function, padded by 1%.
    """
    if q is None:
        q = rng_for(settings.rng_seed, "bounding-box-q").normal(size=F.num_vars) * q_scale
    nl = normal_locus(F, q, settings, workers)
    if len(nl.critical_points) == 0:
        raise EmptyVarietyError("the normal locus has no real points: the real variety is empty")
    far = float(np.max(np.linalg.norm(nl.critical_points - nl.base_point, axis=1)))
    return BoundingBox(center=np.asarray(nl.base_point, dtype=float), half_width=BOX_MARGIN * far)


# ---------------------------------------------------------------------------
# slices


@dataclass
class SliceFamily:
    """Real points of ``X`` on the fibres of ``pi_t`` over many grid points."""

    t: tuple[int, ...]
    grid: np.ndarray
    points: np.ndarray
    group: np.ndarray
    paths_tracked: int
    start_paths: int
    start_size: int
    failed_paths: int


def _generic_parameters(seed: int, tag, k: int) -> np.ndarray:
    rng = rng_for(seed, "generic-parameters", tag)
    return rng.normal(size=k) + 1j * rng.normal(size=k)


def _family_start(sysm: PolySystem, unknown, params, p0, settings, workers):
    (x, status, _, _), total = total_degree_track(sysm, unknown, p0, settings, workers)
    pts = x[status == _CONVERGED]
    if len(pts):
        keep, counts = dedup_points(pts, settings.dedup_tol)
        if np.any(counts > 1):
            log.warning("generic start solve produced repeated endpoints; keeping one of each")
        pts = pts[keep]
    return pts, total


def slice_family(F: PolySystem, t: Sequence[int], grid: np.ndarray, settings: TrackSettings = TrackSettings(),
                 workers: int = 1) -> SliceFamily:
    """Intersect ``X`` with the affine spaces ``{x_t = g}`` for every row ``g`` of ``grid``.

    A generic complex fibre is solved once by total degree; every grid point
    is then reached by a parameter homotopy from it.
    """
    n = F.num_vars
    t = tuple(sorted(t))
    free = [j for j in range(n) if j not in t]
    if len(free) != F.codim:
        raise ValueError(f"slicing {len(t)} coordinates of an {n}-space leaves a non-square system "
                         f"for codim {F.codim}")
    grid = np.asarray(grid, dtype=float).reshape(-1, len(t))
    p0 = _generic_parameters(settings.rng_seed, ("slice", t), len(t))
    starts, start_paths = _family_start(F, free, list(t), p0, settings, workers)
    x, status, _, _ = parameter_track_raw(F, free, list(t), starts, p0, grid, settings, workers)
    S = len(starts)
    group = np.repeat(np.arange(len(grid)), S)
    ok = (status == _CONVERGED) & _real_mask(x, settings.real_tol)
    pts = np.empty((int(ok.sum()), n))
    pts[:, free] = x[ok].real
    pts[:, list(t)] = grid[group[ok]]
    group = group[ok]
    if len(pts):
        keep, _ = dedup_points(pts, settings.dedup_tol)
        pts, group = pts[keep], group[keep]
    failed = int(np.sum(status != _CONVERGED))
    return SliceFamily(t, grid, pts, group, S * len(grid), start_paths, S, failed)


def slice(F: PolySystem, t: Sequence[int], g, settings: TrackSettings = TrackSettings()) -> np.ndarray:
    """Real points of ``X`` with coordinates ``t`` fixed to ``g``."""
    fam = slice_family(F, t, np.atleast_2d(np.asarray(g, dtype=float)), settings)
    return fam.points


def slice_normal_family(F: PolySystem, t: Sequence[int], grid: np.ndarray, q: np.ndarray,
                        settings: TrackSettings = TrackSettings(), workers: int = 1) -> SliceFamily:
    """Normal loci of the slices ``X ∩ {x_t = g}`` with respect to one base point ``q``."""
    n, c = F.num_vars, F.codim
    t = tuple(sorted(t))
    free = [j for j in range(n) if j not in t]
    sysm = normal_locus_system(F, free)
    unknown = free + list(range(n, n + c))
    params = list(t) + list(range(n + c, 2 * n + c))
    grid = np.asarray(grid, dtype=float).reshape(-1, len(t))
    q = np.asarray(q, dtype=float)
    p0 = np.concatenate([_generic_parameters(settings.rng_seed, ("normal-slice", t), len(t)), q])
    starts, start_paths = _family_start(sysm, unknown, params, p0, settings, workers)
    targets = np.concatenate([grid, np.broadcast_to(q, (len(grid), n))], axis=1)
    x, status, _, _ = parameter_track_raw(sysm, unknown, params, starts, p0, targets, settings, workers)
    S = len(starts)
    group = np.repeat(np.arange(len(grid)), S)
    ok = (status == _CONVERGED) & _real_mask(x, settings.real_tol)
    pts = np.empty((int(ok.sum()), n))
    pts[:, free] = x[ok][:, : len(free)].real
    pts[:, list(t)] = grid[group[ok]]
    group = group[ok]
    if len(pts):
        keep, _ = dedup_points(pts, settings.dedup_tol)
        pts, group = pts[keep], group[keep]
    failed = int(np.sum(status != _CONVERGED))
    return SliceFamily(t, grid, pts, group, S * len(grid), start_paths, S, failed)


# ---------------------------------------------------------------------------
# bottlenecks


@dataclass
class BottleneckReport:
    pairs: list[tuple[np.ndarray, np.ndarray, float]]
    b2: float | None
    finite: bool
    paths_tracked: int
    wfs_declared: float | None = None
    wfs_assumed_b2: bool = False
    nonisolated_radii: list[float] = field(default_factory=list)
    diagnosis: str = ""

    @property
    def radii(self) -> list[float]:
        return [r for _, _, r in self.pairs]

    @property
    def min_radius(self) -> float | None:
        """Smallest radius among all validated real pairs, isolated or not."""
        vals = self.radii + list(self.nonisolated_radii)
        return min(vals) if vals else None

    def declare_wfs(self, value: float | None = None) -> "BottleneckReport":
        if value is not None:
            self.wfs_declared = float(value)
            self.wfs_assumed_b2 = False
        elif self.b2 is not None:
            self.wfs_declared = self.b2
            self.wfs_assumed_b2 = True
        return self

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {"x": [float(v) for v in a], "y": [float(v) for v in b], "radius": float(r)}
                for a, b, r in self.pairs
            ],
            "radii": [float(r) for r in self.radii],
            "b2": None if self.b2 is None else float(self.b2),
            "finite": bool(self.finite),
            "wfs_declared": None if self.wfs_declared is None else float(self.wfs_declared),
            "wfs_assumes_b2": bool(self.wfs_assumed_b2),
            "paths_tracked": int(self.paths_tracked),
            "nonisolated_radii": [float(r) for r in self.nonisolated_radii],
            "diagnosis": self.diagnosis,
        }


def _rank_gap(system: PolySystem, pts: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Smallest singular value of the row-normalized matrix ``[x - y; J_F(x)]``."""
    n = system.num_vars
    _, J = system.compiled.evaluate(pts.astype(complex))
    J = J.real
    d = (pts - other)[:, None, :]
    M = np.concatenate([d, J], axis=1)
    norms = np.linalg.norm(M, axis=2, keepdims=True)
    M = M / np.where(norms > 0, norms, 1.0)
    if M.shape[1] > n:
        return np.zeros(len(pts))
    sv = np.linalg.svd(M, compute_uv=False)
    return sv[:, -1]


def bottlenecks(F: PolySystem, settings: TrackSettings = TrackSettings(), box: BoundingBox | None = None,
                workers: int = 1, rank_tol: float = 1e-6, residual_tol: float = 1e-8) -> BottleneckReport:
    """All real bottleneck pairs of ``X`` and the narrowest radius ``b2``.

    Off-diagonal endpoints that are singular for the square system lie on a
    positive-dimensional family of bottlenecks (e.g. antipodal pairs of a
    circle); their presence makes the report ``finite=False`` with no ``b2``.
    """
    n, c = F.num_vars, F.codim
    if c >= n:
        raise ValueError("bottlenecks need codim < number of variables")
    box = box or bounding_box(F, settings, workers=workers)
    sysm = bottleneck_system(F, settings.rng_seed)
    (x, status, res, _), total = total_degree_track(sysm, range(2 * n), None, settings, workers)

    cand = ((status == _CONVERGED) | (status == _SINGULAR)) & (res <= residual_tol)
    imag_tol = np.where(status == _CONVERGED, settings.real_tol, 1e-6)
    cand &= np.max(np.abs(x.imag), axis=1) <= imag_tol
    X, Y = x[cand, :n].real, x[cand, n:].real
    st = status[cand]
    sep = np.linalg.norm(X - Y, axis=1) > DIAGONAL_FRACTION * box.width
    X, Y, st = X[sep], Y[sep], st[sep]
    if len(X):
        fx = np.max(np.abs(F.compiled.values(X.astype(complex))), axis=1)
        fy = np.max(np.abs(F.compiled.values(Y.astype(complex))), axis=1)
        valid = (fx <= residual_tol) & (fy <= residual_tol)
        valid &= (_rank_gap(F, X, Y) <= rank_tol) & (_rank_gap(F, Y, X) <= rank_tol)
        X, Y, st = X[valid], Y[valid], st[valid]

    # canonical orientation of each unordered pair, then dedup
    swap = np.array([tuple(a) > tuple(b) for a, b in zip(X, Y)], dtype=bool)
    X2 = np.where(swap[:, None], Y, X)
    Y2 = np.where(swap[:, None], X, Y)
    iso = st == _CONVERGED
    pairs = []
    if iso.any():
        PQ = np.concatenate([X2[iso], Y2[iso]], axis=1)
        keep, _ = dedup_points(PQ, settings.dedup_tol * 10)
        for a, b in zip(X2[iso][keep], Y2[iso][keep]):
            pairs.append((a, b, float(np.linalg.norm(a - b) / 2)))
    pairs.sort(key=lambda p: (p[2], tuple(p[0])))
    noniso = [float(np.linalg.norm(a - b) / 2) for a, b in zip(X2[~iso], Y2[~iso])]

    finite, diagnosis = True, "isolated bottlenecks only"
    if noniso:
        finite = False
        diagnosis = f"{len(noniso)} off-diagonal singular endpoints: positive-dimensional bottleneck family"
    elif _radius_cluster(pairs, settings):
        finite = False
        diagnosis = "more than 50 pairs share one radius and are not isolated"
    b2 = pairs[0][2] if finite and pairs else None
    if finite and not pairs:
        diagnosis = "no real bottleneck pairs found"
    return BottleneckReport(pairs=pairs, b2=b2, finite=finite, paths_tracked=total,
                            nonisolated_radii=sorted(noniso), diagnosis=diagnosis)


def _radius_cluster(pairs, settings: TrackSettings) -> bool:
    if len(pairs) <= 50:
        return False
    radii = np.array([r for _, _, r in pairs])
    order = np.argsort(radii)
    radii = radii[order]
    lo = 0
    for hi in range(len(radii)):
        while radii[hi] - radii[lo] > 1e-6:
            lo += 1
        if hi - lo + 1 > 50:
            group = np.array([np.concatenate(pairs[i][:2]) for i in order[lo: hi + 1]])
            d = np.linalg.norm(group[:, None, :] - group[None, :, :], axis=2)
            np.fill_diagonal(d, np.inf)
            if np.median(d.min(axis=1)) < settings.dedup_tol * 10:
                return True
    return False
