"""Command-line interface: ``varietysample {sample,bottlenecks,reach,homology,solve}``.

Every command reads a polynomial system from a text file, writes JSON (and
CSV/OBJ/PNG where relevant) into ``--out`` and exits with

* 0 on success,
* 2 on usage or input errors,
* 3 on numerical failures,
* 4 when ``--require-certificate`` is set and no certificate could be issued.

Defaults can be supplied by a JSON file named in ``$VARIETYSAMPLE_CONFIG``
(or ``--config``); keys are the long option names with dashes replaced by
underscores, plus an optional ``"settings"`` object of solver overrides.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (
    CertificationError,
    NumericalFailure,
    PathBudgetExceeded,
    VarietySampleError,
)
from .geom import bottlenecks, bounding_box
from .poly import PolySystem, parse_system
from .reach import estimate_from_sample, reach_lower_bound, split_sphere
from .sample import total_sample, write_csv, write_json, write_obj
from .simplicial import betti, build_cech, build_modified_vr, certify
from .solve import TrackSettings, solve_square

log = logging.getLogger("varietysample")

CONFIG_ENV = "VARIETYSAMPLE_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CERTIFICATE = 0, 2, 3, 4


class UsageError(VarietySampleError):
    pass


class NotCertified(VarietySampleError):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str
    out: str = "."
    seed: int = 0
    workers: int = 1
    epsilon: float | None = None
    epsilon0: float | None = None
    delta: float | None = None
    b2_override: float | None = None
    wfs_override: float | None = None
    max_dim: int = 2
    dim: int | None = None
    complex: str = "vr"
    coeff: str = "gf2"
    require_certificate: bool = False
    canonical_output: bool = False
    no_plots: bool = False
    obj: bool = False
    variables: list[str] | None = None
    settings: dict = field(default_factory=dict)

    def validate(self):
        for name in ("epsilon", "epsilon0", "delta", "b2_override", "wfs_override"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise UsageError(f"--{name.replace('_', '-')} must be a positive number")
        if self.workers < 1:
            raise UsageError("--workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.command in ("sample", "homology") and self.epsilon is None:
            raise UsageError(f"{self.command} needs --epsilon")
        if self.command == "reach" and self.epsilon0 is None:
            raise UsageError("reach needs --epsilon0")
        if not 0 <= self.max_dim <= 4:
            raise UsageError("--max-dim must lie in [0, 4]")

    def track_settings(self) -> TrackSettings:
        known = {f.name for f in dataclasses.fields(TrackSettings)}
        bad = set(self.settings) - known
        if bad:
            raise UsageError(f"unknown solver settings: {sorted(bad)}")
        try:
            return TrackSettings(**{**self.settings, "rng_seed": self.seed})
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_system(cfg: RunConfig) -> PolySystem:
    if not os.path.isfile(cfg.input_path):
        raise UsageError(f"input file not found: {cfg.input_path}")
    with open(cfg.input_path) as fh:
        text = fh.read()
    return parse_system(text, cfg.variables)


def _run_info(cfg: RunConfig, F: PolySystem, started: float) -> dict:
    info = {
        "version": __version__,
        "command": cfg.command,
        "input": os.path.basename(cfg.input_path),
        "system": F.to_text().splitlines(),
        "variables": list(F.var_names),
        "seed": cfg.seed,
    }
    if not cfg.canonical_output:
        info["workers"] = cfg.workers
        info["wall_time"] = time.perf_counter() - started
    return info


def _sample(cfg: RunConfig, F: PolySystem, settings: TrackSettings, epsilon: float):
    return total_sample(F, epsilon, settings, b2_override=cfg.b2_override, delta=cfg.delta,
                        d=cfg.dim, workers=cfg.workers,
                        compute_bottlenecks=cfg.b2_override is None)


# ---------------------------------------------------------------------------
# commands


def cmd_sample(cfg: RunConfig) -> int:
    started = time.perf_counter()
    F = _load_system(cfg)
    settings = cfg.track_settings()
    s = _sample(cfg, F, settings, cfg.epsilon)
    write_csv(s, os.path.join(cfg.out, "sample.csv"))
    write_json(s, os.path.join(cfg.out, "sample.json"), canonical=cfg.canonical_output)
    if cfg.obj:
        write_obj(s, os.path.join(cfg.out, "sample.obj"))
    if not cfg.no_plots:
        from .plotting import plot_sample

        plot_sample(s.points, s.kind, os.path.join(cfg.out, "sample.png"), F,
                    title=f"|E|={s.basic_count}  |E'|={s.extra_count}  delta={s.delta:.3g}")
    summary = {"run": _run_info(cfg, F, started), **s.metadata(cfg.canonical_output)}
    _write_json(os.path.join(cfg.out, "sample_summary.json"), summary)
    print(f"sample: {len(s)} points (basic {s.basic_count}, extra {s.extra_count}), "
          f"delta={s.delta:.6g}, paths={s.paths_tracked}, certified epsilon={s.epsilon_certified}")
    if cfg.require_certificate and s.epsilon_certified is None:
        raise NotCertified("the grid hypothesis delta*sqrt(n) < min(epsilon, 2 b2) does not hold")
    return EXIT_OK


def cmd_bottlenecks(cfg: RunConfig) -> int:
    started = time.perf_counter()
    F = _load_system(cfg)
    settings = cfg.track_settings()
    t0, c0 = time.perf_counter(), time.process_time()
    box = bounding_box(F, settings, workers=cfg.workers)
    rep = bottlenecks(F, settings, box=box, workers=cfg.workers)
    rep.declare_wfs(cfg.wfs_override)
    payload = {"run": _run_info(cfg, F, started), **rep.to_dict(), "bounding_box": box.to_dict()}
    if not cfg.canonical_output:
        payload["timings"] = {"bottlenecks": {"wall": time.perf_counter() - t0, "cpu": time.process_time() - c0}}
    _write_json(os.path.join(cfg.out, "bottlenecks.json"), payload)
    if not cfg.no_plots:
        from .plotting import plot_bottlenecks

        plot_bottlenecks(rep.pairs, os.path.join(cfg.out, "bottlenecks.png"), F, rep.b2)
    print(f"bottlenecks: {len(rep.pairs)} pairs, finite={rep.finite}, b2={rep.b2} ({rep.diagnosis})")
    if cfg.require_certificate and rep.b2 is None:
        raise NotCertified("no finite narrowest bottleneck")
    return EXIT_OK


def cmd_reach(cfg: RunConfig) -> int:
    started = time.perf_counter()
    F = _load_system(cfg)
    settings = cfg.track_settings()
    est = reach_lower_bound(F, cfg.epsilon0, settings, b2_override=cfg.b2_override, delta=cfg.delta,
                            workers=cfg.workers, d=cfg.dim)
    payload = {"run": _run_info(cfg, F, started), **est.to_dict(), "certificate": est.certificate_line()}
    _write_json(os.path.join(cfg.out, "reach.json"), payload)
    if not cfg.no_plots:
        from .plotting import plot_eta

        plot_eta(est.etas, os.path.join(cfg.out, "reach.png"), est.epsilon)
    print(est.certificate_line())
    return EXIT_OK


def cmd_homology(cfg: RunConfig) -> int:
    started = time.perf_counter()
    F = _load_system(cfg)
    settings = cfg.track_settings()
    eps = cfg.epsilon
    notes = []
    if cfg.complex == "vr":
        s = _sample(cfg, F, settings, eps)
        K = build_modified_vr(s.points, eps)
        rep = betti(K, 1, cfg.coeff)
        wfs = cfg.wfs_override if cfg.wfs_override is not None else s.b2
        if cfg.wfs_override is None and wfs is not None:
            notes.append("assumes wfs = b2 (conjectured equality)")
        if wfs is None:
            notes.append("no wfs or b2 value available")
            rep.checked = "no wfs value"
        else:
            certify(rep, eps, "wfs", wfs=wfs)
        if s.epsilon_certified is None and rep.certificate != "none":
            rep.certificate = "none"
            notes.append("the sample is not certified epsilon-dense")
    else:
        s = _sample(cfg, F, settings, eps / 2)
        K = build_cech(s.points, eps, cfg.max_dim)
        rep = betti(K, max(cfg.max_dim - 1, 0), cfg.coeff)
        try:
            on_sphere = split_sphere(F)[1]
        except VarietySampleError:
            on_sphere = False
        if on_sphere and len(s.points):
            m = estimate_from_sample(F, s.points, eps / 2).m
            certify(rep, eps, "reach", local_reach_min=m, sample_epsilon=s.epsilon_certified)
        else:
            rep.checked = "reach bound unavailable: input is not homogeneous on the unit sphere"
            notes.append(rep.checked)
    if rep.certificate == "none":
        log.warning("homology not certified: %s", rep.checked or "; ".join(notes))
    payload = {
        "run": _run_info(cfg, F, started),
        **rep.to_dict(),
        "sample_size": len(s),
        "sample_delta": float(s.delta),
        "b2": s.b2,
        "notes": notes,
    }
    _write_json(os.path.join(cfg.out, "homology.json"), payload)
    with open(os.path.join(cfg.out, "complex.txt"), "w") as fh:
        fh.write(K.to_text())
    if not cfg.no_plots:
        from .plotting import plot_complex

        plot_complex(s.points, K.simplices[1] if len(K.simplices) > 1 else [],
                     K.simplices[2] if len(K.simplices) > 2 else [],
                     os.path.join(cfg.out, "homology.png"), title=f"betti {rep.betti}")
    print(f"betti: {rep.betti} ({rep.complex_kind}, {rep.coefficients}); certificate {rep.certificate}")
    if cfg.require_certificate and rep.certificate == "none":
        raise NotCertified(rep.checked or "homology certificate not issued")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    started = time.perf_counter()
    F = _load_system(cfg)
    sols = solve_square(F, cfg.track_settings(), cfg.workers)
    payload = {
        "run": _run_info(cfg, F, started),
        "paths_tracked": sols.paths_tracked,
        "solutions": [
            {"point": [[float(z.real), float(z.imag)] for z in p], "status": st,
             "residual": float(r), "multiplicity": int(m)}
            for p, st, r, m in zip(sols.points, sols.status, sols.residuals, sols.multiplicity)
        ],
    }
    _write_json(os.path.join(cfg.out, "solutions.json"), payload)
    print(f"solve: {len(sols)} distinct endpoints from {sols.paths_tracked} paths")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "bottlenecks": cmd_bottlenecks,
    "reach": cmd_reach,
    "homology": cmd_homology,
    "solve": cmd_solve,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input_path", help="polynomial system, one equation per line or ';'-separated")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="run seed; fixes every random choice")
    common.add_argument("--workers", type=int, help="worker processes for path tracking")
    common.add_argument("--vars", dest="variables", type=lambda s: [v.strip() for v in s.split(",")],
                        help="comma-separated variable order (default: sorted names)")
    common.add_argument("--config", help=f"JSON defaults file (default: ${CONFIG_ENV})")
    common.add_argument("--max-paths", type=int, help="path budget for one total-degree solve")
    common.add_argument("--require-certificate", action="store_true", default=None)
    common.add_argument("--canonical-output", action="store_true", default=None,
                        help="omit timing fields so outputs are byte-identical across runs")
    common.add_argument("--no-plots", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="varietysample", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def sampling(p):
        p.add_argument("--delta", type=float, help="grid size override")
        p.add_argument("--b2-override", type=float, help="narrowest bottleneck radius to use")
        p.add_argument("--dim", type=int, help="dimension of the variety (default n - c)")

    p = sub.add_parser("sample", parents=[common], help="certified epsilon-sample")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--obj", action="store_true", default=None, help="also write sample.obj")
    sampling(p)

    p = sub.add_parser("bottlenecks", parents=[common], help="bottleneck pairs and b2")
    p.add_argument("--wfs-override", type=float)

    p = sub.add_parser("reach", parents=[common], help="reach lower bound for a variety on the sphere")
    p.add_argument("--epsilon0", type=float)
    sampling(p)

    p = sub.add_parser("homology", parents=[common], help="Betti numbers from a sample")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--complex", choices=["vr", "cech"])
    p.add_argument("--max-dim", type=int, help="Cech dimension cap")
    p.add_argument("--coeff", choices=["gf2", "rational"])
    p.add_argument("--wfs-override", type=float)
    sampling(p)

    sub.add_parser("solve", parents=[common], help="solve a square system (debugging aid)")
    return parser


def _config_defaults(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def make_config(args: argparse.Namespace) -> RunConfig:
    values = _config_defaults(args.config)
    settings = dict(values.pop("settings", {}) or {})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "verbose", "max_paths"):
            values[k] = v
    if args.max_paths is not None:
        settings["max_paths"] = args.max_paths
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
    cfg = RunConfig(**values, settings=settings)
    cfg.validate()
    return cfg


def _fail(cfg_out: str | None, code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    if cfg_out:
        os.makedirs(cfg_out, exist_ok=True)
        _write_json(os.path.join(cfg_out, "error.json"), payload)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out
    try:
        cfg = make_config(args)
        out = cfg.out
        os.makedirs(cfg.out, exist_ok=True)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ValueError, TypeError) as exc:
        return _fail(out, EXIT_USAGE, exc)
    except (NotCertified, CertificationError) as exc:
        return _fail(out, EXIT_CERTIFICATE, exc)
    except (NumericalFailure, PathBudgetExceeded) as exc:
        return _fail(out, EXIT_NUMERICAL, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
