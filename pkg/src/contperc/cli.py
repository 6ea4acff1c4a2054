"""Command-line experiment runner.

Config files are flat ``key = value`` lines; ``#`` starts a comment.  See
README.md for the grammar.  ``run`` and ``validate`` share one validation
path, so they accept and reject exactly the same files.

Exit status: 0 success, 1 config or runtime error, 2 bracketing failure or
undefined giant cluster.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional


from . import __version__
from . import estimators as est
from .clusters import cluster_configuration, dump_labels
from .errors import BracketingError, PercolationError, UndefinedGiantError
from .geometry import Ball, Cylinder, Space, SpaceKind
from .io import format_value, write_csv, write_keyvalue
from .pointprocess import dump_configuration, sample_configuration

EXPERIMENTS = ("sample", "clusters", "crossing-sweep", "lambda-c", "bb-sweep", "lambda-bb", "stability", "a-sets",
               "htimesr-multiplicity")

REQUIRED = object()


class ConfigError(Exception):
    """One or more diagnostics, each naming the file, line and field."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = diagnostics


# -- value parsers -------------------------------------------------------------


def _float(s: str) -> float:
    x = float(s)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _positive(s: str) -> float:
    x = _float(s)
    if x <= 0:
        raise ValueError("must be > 0")
    return x


def _nonneg(s: str) -> float:
    x = _float(s)
    if x < 0:
        raise ValueError("must be >= 0")
    return x


def _probability(s: str) -> float:
    x = _float(s)
    if not 0 <= x <= 1:
        raise ValueError("must lie in [0, 1]")
    return x


def _pos_int(s: str) -> int:
    x = int(s)
    if x < 1:
        raise ValueError("must be >= 1")
    return x


def _seed(s: str) -> int:
    x = int(s)
    if not 0 <= x < 2 ** 64:
        raise ValueError("must be an unsigned 64-bit integer")
    return x


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError("must be true or false")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _float_list(s: str) -> tuple:
    vals = tuple(_nonneg(v) for v in s.split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _grid(s: str) -> tuple:
    """Comma list, or ``start:stop:step`` with ``stop`` included."""
    if ":" not in s:
        vals = _float_list(s)
    else:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError("range form is start:stop:step")
        a, b, h = (_float(p) for p in parts)
        if h <= 0 or b < a:
            raise ValueError("range needs step > 0 and stop >= start")
        n = (b - a) / h
        if abs(n - round(n)) > 1e-9:
            raise ValueError("stop - start must be a multiple of step")
        vals = tuple(round(a + k * h, 12) for k in range(int(round(n)) + 1))
        if vals[0] < 0:
            raise ValueError("must be >= 0")
    if any(q <= p for p, q in zip(vals, vals[1:])):
        raise ValueError("must be strictly ascending")
    return vals


# -- schema --------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any = REQUIRED
    experiments: Optional[tuple] = None  # None: every experiment

    def applies(self, experiment: str) -> bool:
        return self.experiments is None or experiment in self.experiments


_SWEEPS = ("crossing-sweep", "lambda-c", "bb-sweep", "lambda-bb", "htimesr-multiplicity")
_CROSSING = ("crossing-sweep", "lambda-c")
_BB = ("bb-sweep", "lambda-bb")
_SPAN = ("crossing-sweep", "lambda-c", "stability")
_TRIALS = _SWEEPS + ("stability", "a-sets")

SCHEMA: dict[str, Field] = {
    "experiment": Field(_choice(*EXPERIMENTS)),
    "space": Field(_choice(*(k.value for k in SpaceKind))),
    "space.dim": Field(int, 2),
    "space.ball_radius": Field(_positive, 1.0),
    "window": Field(_choice("ball", "cylinder"), None),
    "window.radius": Field(_positive, None),
    "window.h2_radius": Field(_positive, None),
    "window.height_half": Field(_positive, None),
    "lambda.max": Field(_positive, None, ("sample", "clusters") + _SWEEPS),
    "lambda": Field(_nonneg, None, ("clusters", "a-sets")),
    "lambda.grid": Field(_grid, REQUIRED, _SWEEPS),
    "trials": Field(_pos_int, REQUIRED, _TRIALS),
    "seed": Field(_seed),
    "threads": Field(_pos_int, None),
    "common_random_numbers": Field(_bool, True, _SWEEPS),
    "r_inner": Field(_nonneg, REQUIRED, _SPAN),
    "r_outer": Field(_positive, REQUIRED, _SPAN),
    "threshold": Field(_probability, 0.5, ("lambda-c",)),
    "tol": Field(_positive, None, ("lambda-c",)),
    "R": Field(_positive, REQUIRED, _BB),
    "separations": Field(_float_list, REQUIRED, _BB),
    "pad": Field(_nonneg, None, _BB),
    "axis": Field(_choice("height", "h2"), "height", _BB),
    "target": Field(_probability, 0.99, ("lambda-bb",)),
    "lambda1": Field(_nonneg, REQUIRED, ("stability",)),
    "lambda2": Field(_positive, REQUIRED, ("stability",)),
    "lambda_star": Field(_positive, REQUIRED, ("a-sets",)),
    "r": Field(_positive, REQUIRED, ("a-sets",)),
    "n": Field(_pos_int, REQUIRED, ("a-sets",)),
    "output": Field(str, None),
}


@dataclass
class ExperimentConfig:
    """Resolved configuration: every applicable field present, defaults filled."""

    path: Path
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    @property
    def space(self) -> Space:
        kind = SpaceKind(self.values["space"])
        return Space(kind, self.values["space.dim"] if kind is SpaceKind.EUCLIDEAN else 2,
                     self.values["space.ball_radius"])

    @property
    def window(self):
        v = self.values
        if v.get("window") == "ball":
            return Ball(v["window.radius"])
        if v.get("window") == "cylinder":
            return Cylinder(v["window.h2_radius"], v["window.height_half"])
        return None

    @property
    def output(self) -> str:
        return self.values["output"]

    def echo(self) -> str:
        return "".join(f"{k} = {_echo(v)}\n" for k, v in self.values.items() if v is not None)


def _echo(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return format_value(v)


def _read_lines(path: Path) -> tuple[dict, dict, list]:
    raw, lines, errors = {}, {}, []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config: {exc.strerror}"]) from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors.append(f"{path}:{lineno}: expected 'key = value'")
        elif key not in SCHEMA:
            errors.append(f"{path}:{lineno}: field '{key}': unknown field")
        elif key in raw:
            errors.append(f"{path}:{lineno}: field '{key}': duplicate (first set on line {lines[key]})")
        else:
            raw[key], lines[key] = value, lineno
    return raw, lines, errors


def load_config(path, seed_override: Optional[int] = None, threads: Optional[int] = None) -> ExperimentConfig:
    """Parse and fully validate a config file; raises ConfigError listing every problem."""
    path = Path(path)
    raw, lines, errors = _read_lines(path)

    def where(key):
        return f"{path}:{lines[key]}" if key in lines else f"{path}"

    def err(key, msg):
        errors.append(f"{where(key)}: field '{key}': {msg}")

    experiment = raw.get("experiment")
    if experiment is None:
        err("experiment", "missing required field")
    elif experiment not in EXPERIMENTS:
        err("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if errors and (experiment is None or experiment not in EXPERIMENTS):
        raise ConfigError(errors)

    values: dict[str, Any] = {}
    for key, field_ in SCHEMA.items():
        if not field_.applies(experiment):
            if key in raw:
                err(key, f"not used by experiment '{experiment}'")
            continue
        if key in raw:
            try:
                values[key] = field_.parse(raw[key])
            except ValueError as exc:
                err(key, str(exc) if str(exc) and "invalid literal" not in str(exc)
                    else f"cannot parse {raw[key]!r}")
        elif field_.default is REQUIRED:
            err(key, "missing required field")
        else:
            values[key] = field_.default
    if seed_override is not None:
        values["seed"] = seed_override
    if threads is not None:
        values["threads"] = threads
    if errors:
        raise ConfigError(errors)

    _cross_validate(values, err)
    if errors:
        raise ConfigError(errors)
    if values.get("threads") is None:
        values["threads"] = os.cpu_count() or 1
    if values.get("output") is None:
        values["output"] = experiment
    return ExperimentConfig(path, values)


def _cross_validate(v: dict, err) -> None:
    exp = v["experiment"]
    kind = SpaceKind(v["space"])
    br = v["space.ball_radius"]
    if kind is SpaceKind.EUCLIDEAN:
        if v["space.dim"] < 2:
            err("space.dim", "must be >= 2")
    elif "space.dim" in v and v["space.dim"] != 2:
        err("space.dim", f"only dimension 2 is meaningful for space '{kind.value}'")

    # window shape
    shape = v.get("window")
    needs_window = exp in ("sample", "clusters", "a-sets")
    if shape is None and needs_window:
        err("window", f"experiment '{exp}' needs a sampling window")
    if shape == "ball":
        if kind is SpaceKind.H2XR:
            err("window", "H2xR windows must be cylinders (window = cylinder)")
        if v.get("window.radius") is None:
            err("window.radius", "missing required field for window = ball")
        for k in ("window.h2_radius", "window.height_half"):
            if v.get(k) is not None:
                err(k, "only valid for window = cylinder")
    elif shape == "cylinder":
        if kind is not SpaceKind.H2XR:
            err("window", "cylinder windows need space = h2xr")
        for k in ("window.h2_radius", "window.height_half"):
            if v.get(k) is None:
                err(k, "missing required field for window = cylinder")
        if v.get("window.radius") is not None:
            err("window.radius", "only valid for window = ball")
    else:
        for k in ("window.radius", "window.h2_radius", "window.height_half"):
            if v.get(k) is not None and exp != "htimesr-multiplicity":
                err(k, "set 'window' as well")
    if shape is not None and exp in ("bb-sweep", "lambda-bb", "stability"):
        err("window", f"experiment '{exp}' derives its window; remove the window fields")

    # intensities
    grid = v.get("lambda.grid")
    lmax = v.get("lambda.max")
    if grid is not None and lmax is not None and grid[-1] > lmax:
        err("lambda.grid", f"contains {grid[-1]!r} > lambda.max = {lmax!r}")
    if grid is not None and grid[-1] <= 0:
        err("lambda.grid", "needs a positive largest intensity")
    if exp in ("sample", "clusters") and lmax is None:
        err("lambda.max", "missing required field")
    if exp == "clusters" and v.get("lambda") is not None and lmax is not None and v["lambda"] > lmax:
        err("lambda", f"exceeds lambda.max = {lmax!r}")
    if exp == "stability" and v["lambda1"] > v["lambda2"]:
        err("lambda1", "must be <= lambda2")
    if exp == "a-sets":
        if v.get("lambda") is None:
            err("lambda", "missing required field")
        elif v["lambda"] > v["lambda_star"]:
            err("lambda", "must be <= lambda_star")

    # region radii
    if exp in _SPAN:
        if v["r_inner"] >= v["r_outer"]:
            err("r_inner", "must be < r_outer")
        if exp in _CROSSING and shape == "ball" and v["r_outer"] + 2 * br > v["window.radius"]:
            err("window.radius", f"must be >= r_outer + 2*ball_radius = {v['r_outer'] + 2 * br!r}")
        if exp in _CROSSING and shape == "cylinder" and v["r_outer"] + 2 * br > min(v["window.h2_radius"],
                                                                                  v["window.height_half"]):
            err("window", "cylinder must contain the r_outer ball inflated by 2*ball_radius")
    if exp in _BB and kind is not SpaceKind.H2XR and v["axis"] != "height":
        err("axis", "only meaningful for space = h2xr")
    if exp == "htimesr-multiplicity":
        if kind is not SpaceKind.H2XR:
            err("space", "htimesr-multiplicity needs space = h2xr")
        if shape == "ball":
            err("window", "htimesr-multiplicity uses a cylinder window")
        if v.get("window.h2_radius") is None:
            v["window.h2_radius"] = 6.0
        if v.get("window.height_half") is None:
            v["window.height_half"] = 6.0
        v["window"] = "cylinder"


# -- execution -----------------------------------------------------------------


def _plan(cfg: ExperimentConfig, window=None) -> est.SweepPlan:
    return est.SweepPlan(cfg.space, cfg["lambda.grid"], cfg["trials"], cfg["seed"], window=window,
                         common_random_numbers=cfg["common_random_numbers"], threads=cfg["threads"])


def _run_experiment(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], list[str]]:
    """Execute one experiment; returns written files and console summary lines."""
    space, exp, name = cfg.space, cfg.experiment, cfg.output
    written: list[Path] = []
    notes: list[str] = []

    if exp in ("sample", "clusters"):
        config = sample_configuration(space, cfg.window, cfg["lambda.max"], cfg["seed"])
        written.append(dump_configuration(config, out / f"{name}.csv"))
        written.append(out / f"{name}.meta")
        notes.append(f"points: {len(config)}")
        if exp == "clusters":
            lam = cfg["lambda"] if cfg["lambda"] is not None else cfg["lambda.max"]
            labeling = cluster_configuration(space, config, lam)
            written.append(dump_labels(labeling, out / f"{name}.labels.csv"))
            rows = [(c.label, c.size, c.extent) for c in labeling.clusters.values()]
            written.append(write_csv(out / f"{name}.clusters.csv", ["cluster_id", "size", "extent"], rows))
            notes.append(f"clusters at lambda={format_value(lam)}: {labeling.n_clusters}")
        return written, notes

    report_path = out / f"{name}.csv"
    if exp == "crossing-sweep":
        report = est.crossing_sweep(space, _plan(cfg, cfg.window), cfg["r_inner"], cfg["r_outer"]).report
    elif exp == "lambda-c":
        try:
            interval = est.lambda_c_estimate(space, _plan(cfg, cfg.window), cfg["r_inner"], cfg["r_outer"],
                                             cfg["threshold"], cfg["tol"])
        except BracketingError as exc:
            if exc.report is not None:
                exc.report.write(report_path)
            raise
        report = interval.report
        notes.append(f"lambda_c in [{format_value(interval.lo)}, {format_value(interval.hi)}]")
    elif exp == "bb-sweep":
        report = est.bb_sweep(space, _plan(cfg), cfg["R"], cfg["separations"], cfg["pad"], cfg["axis"])
    elif exp == "lambda-bb":
        res = est.lambda_bb_estimate(space, _plan(cfg), cfg["R"], cfg["separations"], cfg["target"], cfg["pad"],
                                     cfg["axis"])
        report = res.report
        notes.append(f"lambda_bb = {format_value(res.lam)}" if res.reached
                     else f"target {format_value(cfg['target'])} not reached on the grid")
    elif exp == "stability":
        ex = est.stability_experiment(space, cfg["lambda1"], cfg["lambda2"], cfg["r_inner"], cfg["r_outer"],
                                      cfg["trials"], cfg["seed"], cfg["threads"])
        report = ex.report
        notes.append(f"stable {ex.n_stable} of {ex.n_spanning2} spanning clusters")
    elif exp == "a-sets":
        report = est.a_set_experiment(space, cfg.window, cfg["lambda_star"], cfg["lambda"], cfg["r"], cfg["n"],
                                      cfg["trials"], cfg["seed"], threads=cfg["threads"])
    elif exp == "htimesr-multiplicity":
        w = cfg.window
        report = est.htimesr_multiplicity(cfg["lambda.grid"], cfg["trials"], cfg["seed"], w.h2_radius, w.height_half,
                                          space.ball_radius, cfg["threads"]).report
    else:  # pragma: no cover - schema rejects unknown experiments
        raise AssertionError(exp)
    report.write(report_path)
    written += [report_path, report_path.with_suffix(".meta")]
    notes.append(f"rows: {len(report.rows)}")
    return written, notes


def _write_manifest(cfg: ExperimentConfig, out: Path, outputs: list[Path], wall: float, status: str) -> Path:
    items = {k: _echo(v) for k, v in cfg.values.items() if v is not None}
    items |= {"version": __version__, "status": status, "wall_time_s": wall,
              "outputs": ",".join(p.name for p in outputs)}
    return write_keyvalue(out / f"{cfg.output}.manifest", items)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed_override, args.threads)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 1
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        written, notes = _run_experiment(cfg, out)
    except (BracketingError, UndefinedGiantError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_manifest(cfg, out, [], time.perf_counter() - t0, f"failed: {type(exc).__name__}")
        return 2
    except PercolationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    manifest = _write_manifest(cfg, out, written, time.perf_counter() - t0, "ok")
    for line in notes:
        print(line)
    print(f"wrote {', '.join(str(p) for p in written + [manifest])}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config, args.seed_override, args.threads)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 1
    print("OK")
    print(cfg.echo(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contperc", description="Poisson Boolean model percolation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (("run", cmd_run, "run the experiment described by a config file"),
                           ("validate", cmd_validate, "check a config file without sampling")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--output-dir", default=".", help="directory for reports (default: current directory)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (overrides the config)")
        p.add_argument("--seed-override", type=int, default=None, help="replace the config seed")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    if args.seed_override is not None and not 0 <= args.seed_override < 2 ** 64:
        print("error: --seed-override must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
