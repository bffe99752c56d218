"""Certified lower bounds on the reach of a variety lying on the unit sphere.

Pointwise, the local reach at ``x`` is bounded below by
``eta(x) = 1 / (7 D^{3/2} mu_norm(F, x))``.  Over an ``epsilon``-sample ``E``,
``min_E eta - epsilon`` bounds the global reach from below whenever positive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, NotHomogeneousError, NumericalFailure, UnsupportedInput
from .poly import Polynomial, PolySystem, system_norm
from .sample import Sample, total_sample
from .solve import TrackSettings

log = logging.getLogger(__name__)

SPHERE_TOL = 1e-8
RANK_TOL = 1e-12
MAX_HALVINGS = 8


def _sphere_form(n: int) -> Polynomial:
    p = Polynomial(n)
    for j in range(n):
        p = p + Polynomial.variable(j, n) ** 2
    return p


def split_sphere(F: PolySystem) -> tuple[PolySystem, bool]:
    """Separate the unit-sphere equation from the homogeneous forms cutting out ``X``.

    Returns the forms and whether a sphere equation was present.  A system
    consisting of the sphere alone yields the quadratic form ``sum x_i^2``.
    """
    n = F.num_vars
    sphere = _sphere_form(n) - 1
    rest = [p for p in F.polys if p != sphere]
    found = len(rest) < len(F.polys)
    for p in rest:
        if not p.is_homogeneous():
            raise NotHomogeneousError("every equation other than the unit sphere must be homogeneous")
    if not rest:
        rest = [_sphere_form(n)]
    return PolySystem(rest, F.var_names), found


def _forms(F: PolySystem) -> PolySystem:
    forms, _ = split_sphere(F)
    return forms


def mu_norm_batch(F: PolySystem, X: np.ndarray) -> np.ndarray:
    """Condition number ``||F|| * ||DF(x)^+ Delta||`` at each row of ``X``."""
    forms = _forms(F)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != forms.num_vars:
        raise ValueError("point dimension does not match the system")
    off = np.abs(np.linalg.norm(X, axis=1) - 1.0)
    if np.any(off > SPHERE_TOL):
        raise ValueError(f"point off the unit sphere by {off.max():.3g}")
    _, J = forms.compiled.evaluate(X.astype(complex))
    J = J.real
    sv = np.linalg.svd(J, compute_uv=False)
    if np.any(sv[:, -1] <= RANK_TOL * np.maximum(sv[:, 0], 1e-300)):
        raise NumericalFailure("rank-deficient Jacobian: singular point of the variety")
    JJt = J @ np.transpose(J, (0, 2, 1))
    pinv = np.transpose(J, (0, 2, 1)) @ np.linalg.inv(JJt)
    scaled = pinv * np.sqrt(np.asarray(forms.degrees, dtype=float))[None, None, :]
    top = np.linalg.svd(scaled, compute_uv=False)[:, 0]
    return system_norm(forms.polys) * top


def mu_norm(F: PolySystem, x) -> float:
    return float(mu_norm_batch(F, np.asarray(x, dtype=float)[None, :])[0])


def eta_batch(F: PolySystem, X: np.ndarray) -> np.ndarray:
    D = _forms(F).max_degree
    return 1.0 / (7.0 * D ** 1.5 * mu_norm_batch(F, X))


def eta(F: PolySystem, x) -> float:
    """Local reach lower bound at ``x``."""
    return float(eta_batch(F, np.asarray(x, dtype=float)[None, :])[0])


@dataclass
class ReachEstimate:
    m: float
    epsilon: float
    lower_bound: float
    points: np.ndarray
    etas: np.ndarray
    D: int
    iterations: int
    sample_size: int = 0
    history: list = field(default_factory=list)
    sample_certified: bool = False

    @property
    def per_point(self):
        return list(zip(self.points, self.etas))

    @property
    def certified(self) -> bool:
        """Positive bound computed from a sample certified ``epsilon``-dense."""
        return self.lower_bound > 0 and self.sample_certified

    def certificate_line(self) -> str:
        return f"tau_X > {self.lower_bound:.6g}"

    def to_dict(self, include_points: bool = False) -> dict:
        out = {
            "m": float(self.m),
            "epsilon": float(self.epsilon),
            "lower_bound": float(self.lower_bound),
            "certified": bool(self.certified),
            "D": int(self.D),
            "iterations": int(self.iterations),
            "sample_size": int(self.sample_size),
            "sample_certified": bool(self.sample_certified),
            "history": [dict(h) for h in self.history],
        }
        if include_points:
            out["per_point"] = [
                {"point": [float(v) for v in p], "eta": float(e)} for p, e in zip(self.points, self.etas)
            ]
        return out


def estimate_from_sample(F: PolySystem, points: np.ndarray, epsilon: float) -> ReachEstimate:
    """``m - epsilon`` for a given ``epsilon``-sample; points are renormalized onto the sphere."""
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        raise NumericalFailure("empty sample")
    P = P / np.linalg.norm(P, axis=1, keepdims=True)
    etas = eta_batch(F, P)
    m = float(etas.min())
    return ReachEstimate(m, float(epsilon), m - float(epsilon), P, etas, _forms(F).max_degree, 1, len(P))


def reach_lower_bound(F: PolySystem, epsilon0: float, settings: TrackSettings = TrackSettings(), *,
                      b2_override: float | None = None, delta: float | None = None, workers: int = 1,
                      max_halvings: int = MAX_HALVINGS, **sample_kwargs) -> ReachEstimate:
    """Halve ``epsilon`` from ``epsilon0`` until ``min eta - epsilon`` is positive."""
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    try:
        forms, on_sphere = split_sphere(F)
    except NotHomogeneousError as exc:
        raise UnsupportedInput(f"reach bounds need a homogeneous system on the unit sphere: {exc}") from exc
    if not on_sphere:
        raise UnsupportedInput("reach bounds need the unit-sphere equation plus homogeneous forms")
    eps = 2.0 * epsilon0
    history = []
    sample: Sample | None = None
    for it in range(1, max_halvings + 2):
        eps /= 2.0
        if sample is None or delta is None:
            sample = total_sample(F, eps, settings, b2_override=b2_override, delta=delta,
                                  workers=workers, **sample_kwargs)
        est = estimate_from_sample(F, sample.points, eps)
        history.append({"epsilon": eps, "m": est.m, "sample_size": len(sample)})
        log.info("reach iteration %d: epsilon=%g m=%g", it, eps, est.m)
        if est.lower_bound > 0:
            est.iterations, est.history = it, history
            est.sample_certified = sample.epsilon_certified is not None
            if not est.sample_certified:
                log.warning("the sample is not certified epsilon-dense; the bound is only indicative")
            return est
    raise CertificationError(
        f"no positive bound after {max_halvings} halvings (last m={history[-1]['m']:.3g}, "
        f"epsilon={eps:.3g})")
