"""Homotopy continuation: total-degree and parameter homotopies.

Paths are tracked in batches.  Every path keeps its own ``t`` and step
size; a batch step advances all active paths at once with a 4th-order
Runge-Kutta predictor on the Davidenko equation ``H_x x' = -H_t`` followed
by Newton correction.  Batches are fixed by path index, so results do not
depend on how batches are spread over worker processes.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import PathBudgetExceeded
from .poly import CompiledSystem, PolySystem

CONVERGED = "converged"
DIVERGED = "diverged"
SINGULAR = "singular_endpoint"
TRUNCATED = "truncated"

# integer status codes used inside the tracker
_ACTIVE, _CONVERGED, _DIVERGED, _SINGULAR, _TRUNCATED, _REACHED = -1, 0, 1, 2, 3, 4
STATUS_NAMES = {_CONVERGED: CONVERGED, _DIVERGED: DIVERGED, _SINGULAR: SINGULAR, _TRUNCATED: TRUNCATED}

DIVERGENCE_NORM = 1e8
COND_MAX = 1e10


@dataclass(frozen=True)
class TrackSettings:
    step_init: float = 0.02
    step_min: float = 1e-9
    step_max: float = 0.1
    newton_tol: float = 1e-10
    max_newton_iters: int = 3
    endgame_t: float = 0.1
    real_tol: float = 1e-8
    dedup_tol: float = 1e-6
    max_steps: int = 4000
    rng_seed: int = 0
    max_paths: int = 200_000
    batch_size: int = 8192
    polish_iters: int = 8

    def __post_init__(self):
        if not (0 < self.step_min <= self.step_init <= self.step_max):
            raise ValueError("need 0 < step_min <= step_init <= step_max")
        for name in ("newton_tol", "real_tol", "dedup_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.endgame_t <= 0.2):
            raise ValueError("endgame_t must lie in (0, 0.2]")
        if self.max_newton_iters < 1 or self.max_steps < 1 or self.batch_size < 1:
            raise ValueError("iteration counts must be positive")

    def with_seed(self, seed: int) -> "TrackSettings":
        return replace(self, rng_seed=int(seed))


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent, reproducible generator for a named purpose under one run seed."""
    spawn = tuple(zlib.crc32(str(k).encode()) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=spawn)))


@dataclass
class SolutionSet:
    """Deduplicated endpoints of a homotopy run.

    ``points`` holds one row per distinct endpoint; ``multiplicity`` counts
    how many paths ended there.  ``paths_tracked`` counts every path issued.
    """

    points: np.ndarray
    residuals: np.ndarray
    status: list[str]
    multiplicity: np.ndarray
    paths_tracked: int
    var_names: tuple[str, ...] = ()
    condition: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.status)

    @property
    def converged(self) -> np.ndarray:
        mask = np.array([s == CONVERGED for s in self.status], dtype=bool)
        return self.points[mask] if len(mask) else self.points[:0]

    def count(self, status: str) -> int:
        return sum(1 for s in self.status if s == status)


# ---------------------------------------------------------------------------
# homotopies


class ParameterHomotopy:
    """``H(x, t) = F(x; (1-t) p0 + t p1)`` with per-path parameter endpoints."""

    def __init__(self, compiled: CompiledSystem, unknown: Sequence[int], params: Sequence[int],
                 p0: np.ndarray, p1: np.ndarray):
        self.compiled = compiled
        self.unknown = np.asarray(unknown, dtype=np.int64)
        self.params = np.asarray(params, dtype=np.int64)
        self.p0 = np.asarray(p0, dtype=complex)
        self.p1 = np.asarray(p1, dtype=complex)
        self.dp = self.p1 - self.p0
        self.k = len(self.unknown)

    def _full(self, x, p):
        X = np.empty((x.shape[0], self.compiled.num_vars), dtype=complex)
        X[:, self.unknown] = x
        if len(self.params):
            X[:, self.params] = p
        return X

    def evaluate(self, x, t, idx):
        p = self.p0[idx] + t[:, None] * self.dp[idx]
        F, J = self.compiled.evaluate(self._full(x, p))
        Hx = J[:, :, self.unknown]
        Ht = np.einsum("nij,nj->ni", J[:, :, self.params], self.dp[idx]) if len(self.params) else np.zeros_like(F)
        return F, Hx, Ht

    def target(self, x, idx):
        F, J = self.compiled.evaluate(self._full(x, self.p1[idx]))
        return F, J[:, :, self.unknown]


class TotalDegreeHomotopy:
    """``H(x, t) = (1-t) gamma G(x) + t F(x)`` with ``G_i = x_i^{d_i} - 1``."""

    def __init__(self, compiled: CompiledSystem, unknown: Sequence[int], params: Sequence[int],
                 pvalues: np.ndarray, degrees: Sequence[int], gamma: complex):
        self.compiled = compiled
        self.unknown = np.asarray(unknown, dtype=np.int64)
        self.params = np.asarray(params, dtype=np.int64)
        self.pvalues = np.asarray(pvalues, dtype=complex)
        self.degrees = np.asarray(degrees, dtype=np.int64)
        self.gamma = complex(gamma)
        self.k = len(self.unknown)

    def _full(self, x):
        X = np.empty((x.shape[0], self.compiled.num_vars), dtype=complex)
        X[:, self.unknown] = x
        if len(self.params):
            X[:, self.params] = self.pvalues
        return X

    def evaluate(self, x, t, idx):
        F, J = self.compiled.evaluate(self._full(x))
        Jx = J[:, :, self.unknown]
        xd1 = x ** (self.degrees - 1)
        G = xd1 * x - 1.0
        s = (1.0 - t)[:, None]
        H = s * self.gamma * G + t[:, None] * F
        Hx = t[:, None, None] * Jx
        diag = s * self.gamma * self.degrees * xd1
        Hx[:, np.arange(self.k), np.arange(self.k)] += diag
        Ht = F - self.gamma * G
        return H, Hx, Ht

    def target(self, x, idx):
        F, J = self.compiled.evaluate(self._full(x))
        return F, J[:, :, self.unknown]

    def start_points(self, lo: int, hi: int) -> np.ndarray:
        """Start solutions ``lo..hi-1`` in mixed-radix order over the roots of unity."""
        idx = np.arange(lo, hi)
        out = np.empty((len(idx), self.k), dtype=complex)
        rem = idx.copy()
        for j in range(self.k - 1, -1, -1):
            d = int(self.degrees[j])
            out[:, j] = np.exp(2j * np.pi * (rem % d) / d)
            rem //= d
        return out


# ---------------------------------------------------------------------------
# tracking core


def _batched_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``A[i] x[i] = b[i]``; returns the solutions and a mask of rows that worked."""
    k = A.shape[1]
    with np.errstate(all="ignore"):
        if k == 1:
            sol = b / A[:, 0, :]
        elif k == 2:
            a, bb, c, d = A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1]
            det = a * d - bb * c
            sol = np.stack([(d * b[:, 0] - bb * b[:, 1]) / det, (a * b[:, 1] - c * b[:, 0]) / det], axis=1)
        else:
            try:
                sol = np.linalg.solve(A, b[..., None])[..., 0]
            except np.linalg.LinAlgError:
                sol = np.full(b.shape, np.nan, dtype=complex)
                for i in range(A.shape[0]):
                    try:
                        sol[i] = np.linalg.solve(A[i], b[i])
                    except np.linalg.LinAlgError:
                        pass
    ok = np.all(np.isfinite(sol), axis=1)
    sol[~ok] = 0.0
    return sol, ok


def _norm(v):
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=1))


def _velocity(hom, x, t, idx):
    _, Hx, Ht = hom.evaluate(x, t, idx)
    return _batched_solve(Hx, -Ht)


def _track(hom, x0: np.ndarray, idx: np.ndarray, settings: TrackSettings):
    """Track the paths starting at ``x0`` (rows belong to homotopy rows ``idx``)."""
    N = x0.shape[0]
    x = np.array(x0, dtype=complex)
    t = np.zeros(N)
    h = np.full(N, settings.step_init)
    succ = np.zeros(N, dtype=np.int64)
    steps = np.zeros(N, dtype=np.int64)
    status = np.full(N, _ACTIVE, dtype=np.int64)
    tol = 1e-8

    while True:
        A = np.flatnonzero(status == _ACTIVE)
        if A.size == 0:
            break
        xa, ta = x[A], t[A]
        rows = idx[A]
        ha = np.minimum(h[A], 1.0 - ta)
        hh = ha[:, None]

        k1, ok = _velocity(hom, xa, ta, rows)
        k2, ok2 = _velocity(hom, xa + 0.5 * hh * k1, ta + 0.5 * ha, rows)
        k3, ok3 = _velocity(hom, xa + 0.5 * hh * k2, ta + 0.5 * ha, rows)
        k4, ok4 = _velocity(hom, xa + hh * k3, ta + ha, rows)
        ok &= ok2 & ok3 & ok4
        xp = xa + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        t1 = ta + ha
        xc = xp
        d_first = None
        for _ in range(settings.max_newton_iters):
            H, Hx, _ = hom.evaluate(xc, t1, rows)
            dx, good = _batched_solve(Hx, -H)
            ok &= good
            xc = xc + dx
            nd = _norm(dx)
            if d_first is None:
                d_first = nd
        scale = 1.0 + _norm(xc)
        moved = _norm(xp - xa)
        accept = ok & np.isfinite(scale) & (nd <= tol * scale) & (d_first <= 0.1 * moved + 1e-7 * scale)

        # accepted steps
        Acc = A[accept]
        x[Acc] = xc[accept]
        reached = accept & (ha >= 1.0 - ta)
        t[Acc] = np.where(reached[accept], 1.0, t1[accept])
        succ[Acc] += 1
        grow = Acc[succ[Acc] >= 5]
        h[grow] = np.minimum(2.0 * h[grow], settings.step_max)
        succ[grow] = 0
        status[A[reached]] = _REACHED
        big = Acc[_norm(x[Acc]) > DIVERGENCE_NORM]
        status[big] = _DIVERGED

        # rejected steps
        Rej = A[~accept]
        h[Rej] = ha[~accept] * 0.5
        succ[Rej] = 0
        collapsed = Rej[h[Rej] < settings.step_min]
        near_end = t[collapsed] >= 1.0 - settings.endgame_t
        status[collapsed[near_end]] = _SINGULAR
        status[collapsed[~near_end]] = _TRUNCATED

        steps[A] += 1
        over = A[(steps[A] >= settings.max_steps) & (status[A] == _ACTIVE)]
        status[over] = _TRUNCATED
    return x, t, status, steps


def _polish(hom, x: np.ndarray, idx: np.ndarray, settings: TrackSettings):
    """Newton on the target system (pseudo-inverse steps); returns x, residual, condition."""
    x = np.array(x, dtype=complex)
    for _ in range(settings.polish_iters):
        F, J = hom.target(x, idx)
        with np.errstate(all="ignore"):
            try:
                dx = -np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-13), F)
            except np.linalg.LinAlgError:
                break
        dx[~np.isfinite(dx)] = 0
        x = x + dx
        if np.all(_norm(dx) <= settings.newton_tol * (1 + _norm(x))):
            break
    F, J = hom.target(x, idx)
    res = np.max(np.abs(F), axis=1) if F.shape[1] else np.zeros(len(x))
    with np.errstate(all="ignore"):
        try:
            sv = np.linalg.svd(J, compute_uv=False)
            cond = sv[:, 0] / sv[:, -1]
        except np.linalg.LinAlgError:
            cond = np.full(len(x), np.inf)
    cond[~np.isfinite(cond)] = np.inf
    return x, res, cond


def track_batch(hom, x0: np.ndarray, idx: np.ndarray, settings: TrackSettings):
    """Track then polish one batch.  Returns ``(x, status, residual, condition)`` arrays."""
    x, t, status, _ = _track(hom, x0, idx, settings)
    res = np.full(len(x), np.inf)
    cond = np.full(len(x), np.inf)
    fin = np.flatnonzero((status == _REACHED) | (status == _SINGULAR))
    if fin.size:
        xp, r, c = _polish(hom, x[fin], idx[fin], settings)
        ok = np.all(np.isfinite(xp), axis=1)
        x[fin[ok]] = xp[ok]
        res[fin] = np.where(ok, r, np.inf)
        cond[fin] = np.where(ok, c, np.inf)
        reached = status[fin] == _REACHED
        good = reached & (res[fin] <= 10 * settings.newton_tol) & (cond[fin] <= COND_MAX)
        status[fin[good]] = _CONVERGED
        status[fin[reached & ~good]] = _SINGULAR
    status[status == _ACTIVE] = _TRUNCATED
    return x, status, res, cond


# ---------------------------------------------------------------------------
# deduplication


def cluster_points(points: np.ndarray, tol: float) -> np.ndarray:
    """Label rows so that rows within ``tol`` (transitively) share a label.

    Labels are the index of the first row of each cluster, so the result is
    independent of tree construction details.
    """
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    P = np.asarray(points)
    if np.iscomplexobj(P):
        P = np.concatenate([P.real, P.imag], axis=1)
    P = np.where(np.isfinite(P), P, 1e300)
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pairs = cKDTree(P).query_pairs(tol, output_type="ndarray")
    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(i) for i in range(n)], dtype=np.int64)


def dedup_points(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Keep the first row of each cluster.  Returns ``(kept_indices, counts)``."""
    labels = cluster_points(points, tol)
    keep, counts = np.unique(labels, return_counts=True)
    return keep, counts


def _solution_set(x, status, res, cond, paths, settings, names=()) -> SolutionSet:
    order = np.argsort(status, kind="stable")  # converged first, then the rest
    x, status, res, cond = x[order], status[order], res[order], cond[order]
    labels = cluster_points(x, settings.dedup_tol)
    # only merge endpoints sharing a status
    keys = {}
    reps, mult = [], []
    for i, (lab, st) in enumerate(zip(labels, status)):
        key = (int(lab), int(st))
        if key in keys:
            mult[keys[key]] += 1
        else:
            keys[key] = len(reps)
            reps.append(i)
            mult.append(1)
    reps = np.array(reps, dtype=np.int64)
    return SolutionSet(
        points=x[reps] if len(reps) else x[:0],
        residuals=res[reps] if len(reps) else res[:0],
        status=[STATUS_NAMES[int(s)] for s in status[reps]],
        multiplicity=np.array(mult, dtype=np.int64),
        paths_tracked=int(paths),
        var_names=tuple(names),
        condition=cond[reps] if len(reps) else cond[:0],
    )


# ---------------------------------------------------------------------------
# drivers


def _run_total_degree_chunk(args):
    compiled, unknown, params, pvalues, degrees, gamma, lo, hi, settings = args
    hom = TotalDegreeHomotopy(compiled, unknown, params, pvalues, degrees, gamma)
    x0 = hom.start_points(lo, hi)
    return track_batch(hom, x0, np.zeros(hi - lo, dtype=np.int64), settings)


def _run_parameter_chunk(args):
    compiled, unknown, params, p0, p1, x0, settings = args
    hom = ParameterHomotopy(compiled, unknown, params, p0, p1)
    return track_batch(hom, x0, np.arange(len(x0)), settings)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _concat(results, k):
    if not results:
        z = np.zeros(0)
        return np.zeros((0, k), dtype=complex), np.zeros(0, dtype=np.int64), z, z
    return tuple(np.concatenate([r[i] for r in results]) for i in range(4))


def total_degree_track(system: PolySystem, unknown: Sequence[int], param_values=None,
                       settings: TrackSettings = TrackSettings(), workers: int = 1,
                       gamma: complex | None = None):
    """Track all Bezout-many paths for ``system`` in the ``unknown`` variables.

    Variables not listed in ``unknown`` are fixed at ``param_values``.
    Returns raw arrays ``(x, status, residual, condition)`` and the path count.
    """
    n = system.num_vars
    unknown = list(unknown)
    params = [j for j in range(n) if j not in unknown]
    if len(unknown) != system.codim:
        raise ValueError(f"system is not square: {system.codim} equations, {len(unknown)} unknowns")
    pvalues = np.asarray(param_values if param_values is not None else np.zeros(len(params)), dtype=complex)
    if pvalues.shape != (len(params),):
        raise ValueError("parameter dimension mismatch")
    degrees = [p.degree_in(unknown) for p in system.polys]
    if min(degrees) < 1:
        raise ValueError("an equation does not involve the unknowns")
    total = math.prod(degrees)
    if total > settings.max_paths:
        raise PathBudgetExceeded(f"Bezout number {total} exceeds the path budget {settings.max_paths}")
    if gamma is None:
        rng = rng_for(settings.rng_seed, "gamma", system.to_text(), tuple(unknown))
        gamma = np.exp(2j * np.pi * rng.uniform())
    compiled = system.compiled
    jobs = [
        (compiled, unknown, params, pvalues, degrees, gamma, lo, min(lo + settings.batch_size, total), settings)
        for lo in range(0, total, settings.batch_size)
    ]
    return _concat(_map(_run_total_degree_chunk, jobs, workers), len(unknown)), total


def parameter_track_raw(system: PolySystem, unknown: Sequence[int], params: Sequence[int],
                        starts: np.ndarray, p0: np.ndarray, p1: np.ndarray,
                        settings: TrackSettings = TrackSettings(), workers: int = 1):
    """Track every start point to every target parameter row of ``p1``.

    ``starts`` has shape ``(S, k)``; ``p1`` has shape ``(G, P)``.  Paths are
    ordered target-major: path ``g * S + s`` goes from ``starts[s]`` to ``p1[g]``.
    Returns ``(x, status, residual, condition)`` arrays of length ``G * S``.
    """
    starts = np.asarray(starts, dtype=complex).reshape(-1, len(unknown))
    p1 = np.asarray(p1, dtype=complex).reshape(-1, len(params))
    p0 = np.asarray(p0, dtype=complex).reshape(len(params))
    S, G = len(starts), len(p1)
    total = S * G
    compiled = system.compiled
    jobs = []
    for lo in range(0, total, settings.batch_size):
        hi = min(lo + settings.batch_size, total)
        ids = np.arange(lo, hi)
        jobs.append((compiled, list(unknown), list(params), np.broadcast_to(p0, (hi - lo, len(params))).copy(),
                     p1[ids // S], starts[ids % S], settings))
    return _concat(_map(_run_parameter_chunk, jobs, workers), len(unknown))


def solve_square(system: PolySystem, settings: TrackSettings = TrackSettings(), workers: int = 1) -> SolutionSet:
    """Solve a square system by a total-degree homotopy with the gamma trick."""
    if system.codim != system.num_vars:
        raise ValueError(f"solve_square needs a square system, got {system.codim} equations "
                         f"in {system.num_vars} unknowns")
    (x, status, res, cond), total = total_degree_track(system, range(system.num_vars), None, settings, workers)
    return _solution_set(x, status, res, cond, total, settings, system.var_names)


def parameter_track(system: PolySystem, start: SolutionSet, p0, p1, param_idx: Sequence[int],
                    settings: TrackSettings = TrackSettings(), workers: int = 1,
                    start_tol: float = 1e-6) -> SolutionSet:
    """Move the converged solutions of ``start`` (valid at ``p0``) to parameters ``p1``.

    ``param_idx`` lists the variables of ``system`` that act as parameters;
    the remaining variables are the unknowns.
    """
    n = system.num_vars
    param_idx = list(param_idx)
    unknown = [j for j in range(n) if j not in param_idx]
    p0 = np.asarray(p0, dtype=complex).ravel()
    p1 = np.asarray(p1, dtype=complex).ravel()
    if p0.shape != (len(param_idx),) or p1.shape != (len(param_idx),):
        raise ValueError(f"parameter dimension mismatch: expected {len(param_idx)} parameters")
    pts = start.converged
    if pts.shape[1] != len(unknown):
        raise ValueError("start points do not match the number of unknowns")
    if len(pts):
        X = np.empty((len(pts), n), dtype=complex)
        X[:, unknown] = pts
        X[:, param_idx] = p0
        res = np.max(np.abs(system.compiled.values(X)), axis=1)
        if np.any(res > start_tol):
            raise ValueError(f"start point residual {res.max():.3e} exceeds {start_tol:g}")
    x, status, res, cond = parameter_track_raw(system, unknown, param_idx, pts, p0, p1[None, :], settings, workers)
    return _solution_set(x, status, res, cond, len(pts), settings, tuple(system.var_names[j] for j in unknown))


def real_points(solutions: SolutionSet, real_tol: float = 1e-8, dedup_tol: float = 1e-6) -> np.ndarray:
    """Real parts of converged points whose imaginary parts are all within ``real_tol``."""
    pts = solutions.converged
    if len(pts) == 0:
        return np.zeros((0, solutions.points.shape[1] if solutions.points.ndim == 2 else 0))
    mask = np.max(np.abs(pts.imag), axis=1) <= real_tol
    real = pts[mask].real
    if len(real) == 0:
        return real
    keep, _ = dedup_points(real, dedup_tol)
    return real[keep]
