"""Grid sampling of a real variety with a density guarantee.

The basic sample intersects ``X`` with every coordinate-aligned affine space
of dimension ``n - d`` through a translated grid; the extra sample adds the
normal loci of lower-dimensional slices so that every connected component of
every slice is hit.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import InfiniteBottlenecks
from .geom import (
    BoundingBox,
    BottleneckReport,
    bottlenecks,
    bounding_box,
    slice_family,
    slice_normal_family,
)
from .poly import PolySystem
from .solve import TrackSettings, dedup_points, rng_for

log = logging.getLogger(__name__)

SLACK = 0.99
BASIC, EXTRA = 0, 1
# Points from different slices are the same point only if it lies on both
# grids; such copies agree to solver accuracy.  A coarser tolerance would merge
# distinct points wherever X passes close to a grid crossing.
CROSS_SLICE_TOL = 1e-9


def choose_delta(epsilon: float, b2: float, n: int) -> float:
    """Grid size with ``delta * sqrt(n)`` just below ``min(epsilon, 2 b2)``."""
    if not (epsilon > 0 and b2 > 0):
        raise ValueError("epsilon and b2 must be positive")
    if n < 1:
        raise ValueError("dimension must be positive")
    return SLACK * min(epsilon, 2.0 * b2) / math.sqrt(n)


def density_hypothesis(delta: float, epsilon: float, b2: float, n: int) -> bool:
    return 0 < delta * math.sqrt(n) < min(epsilon, 2.0 * b2)


@dataclass(frozen=True)
class GridSpec:
    delta: float
    translation: np.ndarray
    box: BoundingBox
    n: int
    d: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        tr = np.asarray(self.translation, dtype=float)
        if tr.shape != (self.n,) or np.any(tr < 0) or np.any(tr >= self.delta):
            raise ValueError("translation must be an n-vector with entries in [0, delta)")
        object.__setattr__(self, "translation", tr)

    @classmethod
    def random(cls, delta: float, box: BoundingBox, d: int, seed: int) -> "GridSpec":
        n = len(box.center)
        tr = rng_for(seed, "grid-translation").uniform(0.0, delta, size=n)
        tr = np.minimum(tr, np.nextafter(delta, 0.0))
        return cls(delta, tr, box, n, d)

    def axis(self, j: int) -> np.ndarray:
        """Grid values along coordinate ``j`` inside the box."""
        lo, hi, tr = self.box.lower[j], self.box.upper[j], self.translation[j]
        m0 = math.ceil((lo - tr) / self.delta)
        m1 = math.floor((hi - tr) / self.delta)
        return tr + self.delta * np.arange(m0, m1 + 1)

    def points(self, t: Sequence[int]) -> np.ndarray:
        """``G_t(delta)`` restricted to the box, in lexicographic order."""
        axes = [self.axis(j) for j in t]
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def count(self, t: Sequence[int]) -> int:
        return int(np.prod([len(self.axis(j)) for j in t]))


@dataclass
class Sample:
    points: np.ndarray
    kind: np.ndarray
    subset: np.ndarray
    g: np.ndarray
    subsets: list[tuple[int, ...]]
    delta: float
    seed: int
    paths_tracked: int = 0
    start_paths: int = 0
    epsilon_certified: float | None = None
    epsilon: float | None = None
    b2: float | None = None
    var_names: tuple[str, ...] = ()
    translation: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    bottleneck_report: BottleneckReport | None = None
    failed_paths: int = 0

    def __len__(self):
        return len(self.points)

    @property
    def basic_count(self) -> int:
        return int(np.sum(self.kind == BASIC))

    @property
    def extra_count(self) -> int:
        return int(np.sum(self.kind == EXTRA))

    def provenance(self, i: int) -> tuple:
        t = self.subsets[self.subset[i]]
        g = tuple(float(v) for v in self.g[i, : len(t)])
        if self.kind[i] == BASIC:
            return ("basic", t, g)
        return ("extra", len(t), t, g)

    def metadata(self, canonical: bool = False) -> dict:
        meta = {
            "num_points": len(self),
            "basic_count": self.basic_count,
            "extra_count": self.extra_count,
            "delta": float(self.delta),
            "epsilon": None if self.epsilon is None else float(self.epsilon),
            "epsilon_certified": None if self.epsilon_certified is None else float(self.epsilon_certified),
            "b2": None if self.b2 is None else float(self.b2),
            "seed": int(self.seed),
            "paths_tracked": int(self.paths_tracked),
            "start_paths": int(self.start_paths),
            "failed_paths": int(self.failed_paths),
            "translation": None if self.translation is None else [float(v) for v in self.translation],
            "var_names": list(self.var_names),
        }
        if not canonical:
            meta["timings"] = {k: dict(v) for k, v in self.timings.items()}
        return meta


def _empty(n: int, d: int, delta: float, seed: int) -> Sample:
    return Sample(np.zeros((0, n)), np.zeros(0, dtype=np.int8), np.zeros(0, dtype=np.int32),
                  np.zeros((0, max(d, 1))), [], delta, seed)


def _merge(samples: list[Sample], tol: float) -> Sample:
    """Concatenate samples, dropping later points within ``tol`` of earlier ones."""
    base = samples[0]
    subsets: list[tuple[int, ...]] = []
    pts, kind, sub, gs = [], [], [], []
    width = max(s.g.shape[1] for s in samples)
    for s in samples:
        offset = len(subsets)
        subsets.extend(s.subsets)
        pts.append(s.points)
        kind.append(s.kind)
        sub.append(s.subset + offset)
        g = np.full((len(s.points), width), np.nan)
        g[:, : s.g.shape[1]] = s.g
        gs.append(g)
    out = Sample(np.concatenate(pts), np.concatenate(kind), np.concatenate(sub).astype(np.int32),
                 np.concatenate(gs), subsets, base.delta, base.seed,
                 paths_tracked=sum(s.paths_tracked for s in samples),
                 start_paths=sum(s.start_paths for s in samples),
                 failed_paths=sum(s.failed_paths for s in samples),
                 var_names=base.var_names, translation=base.translation)
    if len(out.points):
        keep, _ = dedup_points(out.points, tol)
        out.points, out.kind, out.subset, out.g = out.points[keep], out.kind[keep], out.subset[keep], out.g[keep]
    return out


def _from_family(fam, kind: int, n: int, width: int, delta: float, seed: int) -> Sample:
    g = np.full((len(fam.points), width), np.nan)
    g[:, : len(fam.t)] = fam.grid[fam.group]
    return Sample(fam.points, np.full(len(fam.points), kind, dtype=np.int8),
                  np.zeros(len(fam.points), dtype=np.int32), g, [fam.t], delta, seed,
                  paths_tracked=fam.paths_tracked, start_paths=fam.start_paths,
                  failed_paths=fam.failed_paths)


def basic_sample(F: PolySystem, grid: GridSpec, settings: TrackSettings = TrackSettings(),
                 workers: int = 1) -> Sample:
    """Real points of ``X`` over every ``d``-dimensional coordinate grid."""
    n, d = F.num_vars, grid.d
    if d < 1:
        raise ValueError("the variety must have positive dimension")
    parts = [_empty(n, d, grid.delta, settings.rng_seed)]
    for t in combinations(range(n), d):
        pts = grid.points(t)
        if len(pts) == 0:
            continue
        fam = slice_family(F, t, pts, settings, workers)
        if fam.failed_paths:
            log.info("basic sample t=%s: %d paths did not converge", t, fam.failed_paths)
        parts.append(_from_family(fam, BASIC, n, d, grid.delta, settings.rng_seed))
    out = _merge(parts, CROSS_SLICE_TOL)
    out.var_names, out.translation = tuple(F.var_names), grid.translation
    return out


def extra_sample(F: PolySystem, grid: GridSpec, q, settings: TrackSettings = TrackSettings(),
                 workers: int = 1) -> Sample:
    """Normal loci, with respect to ``q``, of the slices over grids of dimension below ``d``."""
    n, d = F.num_vars, grid.d
    q = np.asarray(q, dtype=float)
    parts = [_empty(n, d, grid.delta, settings.rng_seed)]
    for k in range(1, d):
        for t in combinations(range(n), k):
            pts = grid.points(t)
            if len(pts) == 0:
                continue
            fam = slice_normal_family(F, t, pts, q, settings, workers)
            if fam.failed_paths:
                log.info("extra sample t=%s: %d paths did not converge", t, fam.failed_paths)
            parts.append(_from_family(fam, EXTRA, n, d, grid.delta, settings.rng_seed))
    out = _merge(parts, CROSS_SLICE_TOL)
    out.var_names, out.translation = tuple(F.var_names), grid.translation
    return out


class _Phase:
    def __init__(self, timings: dict, name: str):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.w, self.c = time.perf_counter(), time.process_time()

    def __exit__(self, *exc):
        self.timings[self.name] = {"wall": time.perf_counter() - self.w, "cpu": time.process_time() - self.c}


def total_sample(F: PolySystem, epsilon: float, settings: TrackSettings = TrackSettings(), *,
                 b2_override: float | None = None, delta: float | None = None,
                 box: BoundingBox | None = None, translation=None, q=None, d: int | None = None,
                 workers: int = 1, compute_bottlenecks: bool | None = None) -> Sample:
    """The sample ``S_delta`` certified to be ``epsilon``-dense when the grid hypothesis holds.

    ``delta`` overrides the grid size (the certificate is then stamped only if
    the hypothesis still holds); ``b2_override`` replaces the computed
    narrowest bottleneck radius.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = F.num_vars
    d = n - F.codim if d is None else int(d)
    timings: dict = {}
    with _Phase(timings, "bounding_box"):
        box = box or bounding_box(F, settings, workers=workers)

    report = None
    b2 = b2_override
    if compute_bottlenecks is None:
        compute_bottlenecks = b2_override is None and delta is None
    if compute_bottlenecks:
        with _Phase(timings, "bottlenecks"):
            report = bottlenecks(F, settings, box=box, workers=workers)
        if b2 is None:
            if not report.finite:
                raise InfiniteBottlenecks(
                    f"bottleneck locus is not finite ({report.diagnosis}); supply a b2 override")
            if report.b2 is None:
                raise InfiniteBottlenecks(f"no bottleneck radius available ({report.diagnosis})")
            b2 = report.b2

    if delta is None:
        delta = choose_delta(epsilon, b2, n)
    grid = GridSpec.random(delta, box, d, settings.rng_seed) if translation is None else \
        GridSpec(delta, np.asarray(translation, dtype=float), box, n, d)
    if q is None:
        q = box.center + rng_for(settings.rng_seed, "extra-q").normal(size=n) * 0.1 * box.half_width

    with _Phase(timings, "basic"):
        basic = basic_sample(F, grid, settings, workers)
    with _Phase(timings, "extra"):
        extra = extra_sample(F, grid, q, settings, workers) if d >= 2 else _empty(n, d, delta, settings.rng_seed)
    out = _merge([basic, extra], CROSS_SLICE_TOL)
    out.var_names, out.translation = tuple(F.var_names), grid.translation
    out.epsilon, out.b2 = float(epsilon), None if b2 is None else float(b2)
    out.bottleneck_report = report
    out.timings = timings
    if b2 is not None and density_hypothesis(delta, epsilon, b2, n):
        out.epsilon_certified = float(epsilon)
    return out


# ---------------------------------------------------------------------------
# export


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(sample: Sample, path: str | os.PathLike) -> None:
    """One point per row; provenance as ``kind``, ``t`` and ``g`` columns."""
    names = list(sample.var_names) or [f"x{i + 1}" for i in range(sample.points.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["kind", "t", "g"])
        for i, p in enumerate(sample.points):
            prov = sample.provenance(i)
            t, g = prov[-2], prov[-1]
            w.writerow([_fmt(v) for v in p] + [prov[0], "|".join(str(j) for j in t),
                                                "|".join(_fmt(v) for v in g)])


def read_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = header.index("kind")
    return np.array([[float(v) for v in r[:n]] for r in rows[1:]]).reshape(-1, n)


def sample_to_dict(sample: Sample, canonical: bool = False) -> dict:
    return {
        "metadata": sample.metadata(canonical),
        "points": [[float(v) for v in p] for p in sample.points],
        "provenance": [
            {"kind": pr[0], "t": list(pr[-2]), "g": list(pr[-1])}
            for pr in (sample.provenance(i) for i in range(len(sample)))
        ],
    }


def write_json(sample: Sample, path: str | os.PathLike, canonical: bool = False) -> None:
    with open(path, "w") as fh:
        json.dump(sample_to_dict(sample, canonical), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_obj(sample: Sample, path: str | os.PathLike) -> None:
    """Point cloud as OBJ vertices; pads to 3D or keeps the first three coordinates."""
    with open(path, "w") as fh:
        n = sample.points.shape[1]
        if n > 3:
            fh.write(f"# projection onto coordinates {', '.join(sample.var_names[:3])}\n")
        for p in sample.points:
            v = list(p[:3]) + [0.0] * max(0, 3 - n)
            fh.write("v " + " ".join(_fmt(c) for c in v) + "\n")
