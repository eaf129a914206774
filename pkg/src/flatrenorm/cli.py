"""Command-line front end.

    flatrenorm renormalize --config run.json --out trace.csv
    flatrenorm spectrum --l1 2 --l2 2
    flatrenorm phase-diagram --config scan.json --threads 4
    flatrenorm classify --config run.json
    flatrenorm verify [--config run.json] [--corrupt]
    flatrenorm dimension --config dim.json --out dim.csv
    flatrenorm tune --config run.json --out tuned.json

Exit codes: 0 success, 1 configuration error, 2 precision exhausted,
3 a verification check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import mpmath

from . import checks
from .diffeo import PrecisionPolicy
from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    FlatRenormError,
    IllConditionedBasis,
    NotRenormalizable,
    PrecisionExhausted,
)
from .maps import MapX, map_from_dict, map_to_dict, validate
from .numeric import fmt, num, to_mp
from .oracle import (
    DIMENSION_COLUMNS,
    box_dimension,
    gap_decay_check,
    return_time_law,
    verify_renorm,
)
from .renorm import iterate, trace_to_csv, tune_parameter
from .spectral import HorizonPolicy, classify_quadrant, decompose, eigen, eigenvalues

EXIT_OK, EXIT_CONFIG, EXIT_PRECISION, EXIT_VERIFY = 0, 1, 2, 3

# a (2,2) map with identity diffeomorphisms; x2 is tuned inside [0, x3]
DEFAULT_CONFIG = {
    "map": {"l1": "2", "l2": "2", "x1": "-0.3", "x2": "0.03", "x3": "0.1", "x4": "0.9", "s": "0.5"},
    "precision": 256,
    "depth": 8,
    "tune": {"param": "x2", "bracket": ["0", "0.1"], "depth": 10},
    "verify": {"samples": 100, "tol": "1e-20", "gap_depth": 8},
}


class ConfigError(Exception):
    pass


@dataclass
class TuneSpec:
    param: str
    bracket: tuple
    depth: int


@dataclass
class ExperimentConfig:
    map: MapX | None = None
    maps: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    precision: int = 256
    depth: int = 8
    chart: str = "x"
    tune: TuneSpec | None = None
    horizon: HorizonPolicy = field(default_factory=HorizonPolicy)
    scan: dict | None = None
    verify: dict = field(default_factory=dict)
    dimension: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def policy(self) -> PrecisionPolicy:
        return PrecisionPolicy(bits=self.precision)


def _int(d, key, default, lo=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key!r} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"{key!r} must be >= {lo}")
    return v


def _decimal(v, what):
    try:
        return Decimal(str(v))
    except InvalidOperation as exc:
        raise ConfigError(f"{what} is not a number: {v!r}") from exc


def _axis(spec, name) -> list[Decimal]:
    """[start, stop, step] -> inclusive grid; a step larger than the range gives one point."""
    if isinstance(spec, (int, float, str)):
        spec = [spec, spec, 1]
    if not isinstance(spec, list) or len(spec) not in (2, 3):
        raise ConfigError(f"scan axis {name!r} must be [start, stop, step]")
    start, stop = _decimal(spec[0], name), _decimal(spec[1], name)
    step = _decimal(spec[2], name) if len(spec) == 3 else Decimal(1)
    if step <= 0 or stop < start:
        raise ConfigError(f"scan axis {name!r} is empty")
    out, v = [], start
    while v <= stop:
        out.append(v)
        v += step
    return out


def parse_config(raw: dict, args=None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    cfg = ExperimentConfig()
    cfg.precision = _int(raw, "precision", 256, 64)
    cfg.depth = _int(raw, "depth", 8, 0)
    cfg.chart = raw.get("chart", "x")
    if cfg.chart not in ("x", "s"):
        raise ConfigError("chart must be 'x' or 's'")
    if args is not None:
        if args.precision is not None:
            if args.precision < 64:
                raise ConfigError("precision must be >= 64 bits")
            cfg.precision = args.precision
        if args.depth is not None:
            if args.depth < 0:
                raise ConfigError("depth must be >= 0")
            cfg.depth = args.depth
    with cfg.policy.activate():
        try:
            if "map" in raw:
                cfg.map = map_from_dict(raw["map"])
            for i, m in enumerate(raw.get("maps", [])):
                cfg.maps.append(map_from_dict(m))
                cfg.labels.append(str(m.get("label", i)))
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad map: {exc}") from exc
        t = raw.get("tune")
        if t is not None:
            if not isinstance(t, dict):
                raise ConfigError("'tune' must be an object")
            if "bracket" not in t:
                raise ConfigError("tuning requested without a bracket")
            br = t["bracket"]
            if not isinstance(br, list) or len(br) != 2:
                raise ConfigError("bracket must be [lo, hi]")
            try:
                lo, hi = num(str(br[0])), num(str(br[1]))
            except ValueError as exc:
                raise ConfigError(f"bracket is not numeric: {br!r}") from exc
            if not lo < hi:
                raise ConfigError("bracket must be ordered lo < hi")
            param = t.get("param", "x2")
            if param not in ("x1", "x2", "x3", "x4", "s"):
                raise ConfigError(f"cannot tune {param!r}")
            cfg.tune = TuneSpec(param, (lo, hi), _int(t, "depth", cfg.depth + 2, 0))
    h = raw.get("classify", {})
    try:
        cfg.horizon = HorizonPolicy(float(h.get("K", 50)), int(h.get("k", 3)), float(h.get("band", 0.25)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad classification thresholds: {exc}") from exc
    if cfg.horizon.k < 1 or cfg.horizon.band <= 0:
        raise ConfigError("classification needs k >= 1 and band > 0")
    if "scan" in raw:
        s = raw["scan"]
        if not isinstance(s, dict) or "l1" not in s or "l2" not in s:
            raise ConfigError("'scan' needs 'l1' and 'l2' axes")
        cfg.scan = {"l1": _axis(s["l1"], "l1"), "l2": _axis(s["l2"], "l2")}
    cfg.verify = dict(raw.get("verify", {}))
    cfg.dimension = dict(raw.get("dimension", {}))
    cfg.output = dict(raw.get("output", {}))
    return cfg


def load_config(args, required: bool = True, default: dict | None = None) -> ExperimentConfig:
    if args.config is None:
        if default is not None:
            return parse_config(json.loads(json.dumps(default)), args)
        if required:
            raise ConfigError("--config is required for this command")
        return parse_config({}, args)
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config} is not valid JSON: {exc}") from exc
    return parse_config(raw, args)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _prepared_map(cfg: ExperimentConfig, f: MapX | None = None) -> MapX:
    f = f or cfg.map
    if f is None:
        raise ConfigError("configuration has no 'map'")
    with cfg.policy.activate():
        if cfg.tune is not None:
            f = tune_parameter(f, cfg.tune.depth, cfg.policy, cfg.tune.param,
                               cfg.tune.bracket, cfg.chart).map
        bad = validate(f)
        if bad:
            raise ConfigError("invalid map: " + ", ".join(bad))
    return f


def _geometry(trace, f: MapX, cfg: ExperimentConfig) -> dict:
    spec = eigen(to_mp(f.l1), to_mp(f.l2))
    out = {"quadrant": spec.quadrant, "lambda_u": mpmath.nstr(spec.lambda_u, 15)}
    if trace.depth == 0:
        out["verdict"] = "Undetermined"
        return out
    try:
        rep = decompose(trace, spec, cfg.horizon)
    except IllConditionedBasis as exc:
        out["verdict"] = "Undetermined"
        out["error"] = str(exc)
        return out
    out.update(rep.to_dict())
    return out


# --------------------------------------------------------------------------
# commands


def cmd_renormalize(args) -> int:
    cfg = load_config(args)
    f = _prepared_map(cfg)
    with cfg.policy.activate():
        trace = iterate(f, cfg.depth, cfg.policy, chart=cfg.chart)
        summary = {
            "depth_requested": cfg.depth,
            "depth_reached": trace.depth,
            "stop_reason": trace.stop_reason,
            "failure": None if trace.failure is None else {
                "level": trace.failure.level, "side": trace.failure.side,
            },
            "precision_bits": cfg.precision,
            "tuned_map": map_to_dict(f),
            "geometry": _geometry(trace, f, cfg),
        }
        csv_text = trace_to_csv(trace)
    out = args.out or cfg.output.get("trace")
    _write(out, csv_text)
    summary_path = cfg.output.get("summary")
    if summary_path is None and out not in (None, "-"):
        summary_path = str(Path(out).with_suffix(".summary.json"))
    if summary_path is None:
        sys.stderr.write(_dump(summary))
    else:
        _write(summary_path, _dump(summary))
    if trace.stop_reason == "precision" and trace.depth < cfg.depth:
        print(f"precision exhausted at level {trace.depth}", file=sys.stderr)
        return EXIT_PRECISION
    return EXIT_OK


def cmd_spectrum(args) -> int:
    prec = args.precision or 256
    with mpmath.workprec(prec):
        try:
            l1 = mpmath.mpf(args.l1)
            l2 = mpmath.mpf(args.l2)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"exponents must be numbers: {exc}") from exc
        if not (l1 >= 1 and l2 >= 1):
            raise ConfigError("exponents must be >= 1")
        data = eigen(l1, l2).to_dict()
    _write(args.out, _dump(data))
    return EXIT_OK


def _phase_row(point):
    l1, l2, prec = point
    with mpmath.workprec(prec):
        lu, ls = eigenvalues(mpmath.mpf(l1), mpmath.mpf(l2))
        return [l1, l2, mpmath.nstr(lu, 17), mpmath.nstr(ls, 17), classify_quadrant(l1, l2)]


def cmd_phase_diagram(args) -> int:
    cfg = load_config(args, required=False)
    scan = cfg.scan
    if args.l1 is not None or args.l2 is not None:
        scan = {"l1": _axis(args.l1 or ["1", "4", "0.5"], "l1"), "l2": _axis(args.l2 or ["1", "4", "0.5"], "l2")}
    if scan is None:
        raise ConfigError("no scan grid: give 'scan' in the config or --l1/--l2")
    for a in scan["l1"] + scan["l2"]:
        if a < 1:
            raise ConfigError("exponents must be >= 1")
    points = [(str(a), str(b), cfg.precision) for a in scan["l1"] for b in scan["l2"]]
    if not points:
        raise ConfigError("empty grid")
    threads = max(1, args.threads or 1)
    if threads == 1:
        rows = [_phase_row(p) for p in points]
    else:
        # executor.map yields in submission order, so output is row-major
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_phase_row, points, chunksize=8))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l1", "l2", "lambda_u", "lambda_s", "quadrant"])
    w.writerows(rows)
    _write(args.out or cfg.output.get("phase"), buf.getvalue())
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = load_config(args)
    f = _prepared_map(cfg)
    with cfg.policy.activate():
        trace = iterate(f, cfg.depth, cfg.policy, chart=cfg.chart, measure=False)
        out = _geometry(trace, f, cfg)
        out["depth_reached"] = trace.depth
    _write(args.out, _dump(out))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args, default=DEFAULT_CONFIG)
    v = cfg.verify
    samples = int(v.get("samples", 100))
    tol = v.get("tol", "1e-20")
    gap_depth = int(v.get("gap_depth", 8))
    corrupt = bool(args.corrupt or v.get("corrupt", False))
    rng = random.Random(args.seed if args.seed is not None else 0)
    pol = cfg.policy
    f = _prepared_map(cfg)
    results = []
    with pol.activate():
        perturb = {"x3": "1e-5"} if corrupt else None
        rep = verify_renorm(f, samples, tol, pol, perturb)
        results.append({"name": "oracle.verify_renorm", "pass": rep.passed, **rep.to_dict()})
        if samples > 0:
            trace = iterate(f, min(cfg.depth, gap_depth), pol, measure=False)
            rt = return_time_law(f, trace, max(2, samples // 10), pol)
            results.append({"name": "oracle.return_times", "pass": rt.passed,
                            "observed": [list(o) for o in rt.observed]})
            g = gap_decay_check(f, gap_depth, pol)
            results.append({"name": "oracle.gap_decay", "pass": g.passed, "slope": g.slope,
                            "r2": g.r2, "reason": g.reason})
            level_maps = [m for m in trace.maps if isinstance(m, MapX)]
            suites = (
                checks.diffeo_invariants(rng, pol)
                + checks.map_invariants(rng, pol, max(1, samples // 5))
                + [checks.chart_commutation(level_maps, pol, tol)]
                + checks.spectral_invariants(rng, pol, max(1, samples // 5))
            )
            results.extend(r.to_dict() for r in suites)
    ok = all(r["pass"] for r in results)
    _write(args.out, _dump({"pass": ok, "checks": results, "seed": args.seed if args.seed is not None else 0}))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_dimension(args) -> int:
    cfg = load_config(args)
    maps = list(zip(cfg.labels, cfg.maps)) or ([("0", cfg.map)] if cfg.map is not None else [])
    if not maps:
        raise ConfigError("configuration has no 'map' or 'maps'")
    d = cfg.dimension
    depths = d.get("depths", [cfg.depth])
    if not isinstance(depths, list) or not all(isinstance(x, int) and x >= 0 for x in depths):
        raise ConfigError("'dimension.depths' must be a list of nonnegative integers")
    scale_count = int(d.get("scale_count", 12))
    out = args.out or cfg.output.get("dimension")
    for label, m in maps:
        f = _prepared_map(cfg, m)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DIMENSION_COLUMNS)
        estimates = {}
        for depth in depths:
            rep = box_dimension(f, depth, scale_count, cfg.policy)
            w.writerows(rep.rows())
            estimates[depth] = rep.estimate
        path = out
        if len(maps) > 1 and out not in (None, "-"):
            p = Path(out)
            path = str(p.with_name(f"{p.stem}_{label}{p.suffix}"))
        _write(path, buf.getvalue())
        msg = ", ".join(f"depth {k}: {v:.6f}" for k, v in estimates.items())
        print(f"map {label}: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = load_config(args)
    if cfg.tune is None:
        raise ConfigError("configuration has no 'tune' block")
    with cfg.policy.activate():
        res = tune_parameter(cfg.map, cfg.tune.depth, cfg.policy, cfg.tune.param,
                             cfg.tune.bracket, cfg.chart)
        out = {"map": map_to_dict(res.map), "param": cfg.tune.param, "steps": res.steps,
               "depth": res.depth, "bracket": [fmt(res.bracket[0], 40), fmt(res.bracket[1], 40)]}
    _write(args.out, _dump(out))
    return EXIT_OK


COMMANDS = {
    "renormalize": cmd_renormalize,
    "spectrum": cmd_spectrum,
    "phase-diagram": cmd_phase_diagram,
    "classify": cmd_classify,
    "verify": cmd_verify,
    "dimension": cmd_dimension,
    "tune": cmd_tune,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatrenorm", description="Renormalization of circle maps with a flat interval.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--precision", type=int, help="mantissa bits (overrides the config)")
    common.add_argument("--depth", type=int, help="renormalization depth (overrides the config)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for grid scans")
    common.add_argument("--seed", type=int, help="seed for randomized checks")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "spectrum":
            sp.add_argument("--l1", required=True)
            sp.add_argument("--l2", required=True)
        if name == "phase-diagram":
            sp.add_argument("--l1", nargs=3, metavar=("START", "STOP", "STEP"))
            sp.add_argument("--l2", nargs=3, metavar=("START", "STOP", "STEP"))
        if name == "verify":
            sp.add_argument("--corrupt", action="store_true", help="perturb R f to check that verification fails")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BracketError, NotRenormalizable, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PrecisionExhausted, ConvergenceError) as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except FlatRenormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
