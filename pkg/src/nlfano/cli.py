"""Command-line front end: lineshape sweeps, effective-parameter curves, EIT scans,
validation reports and fits of external data.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import effective, oracle, profiles, validation
from .effective import ReadoutError
from .fit import FitError, NoFeatureError, ProfileSamples, fit_profile
from .linalg import DegenerateSteadyStateError
from .model import FIELD_NAMES, ModelParams, ParameterError, epsilon_of, params_from_mapping, validate
from .parallel import pmap

AXES = ("omega_L", "Omega", "Gamma_c")
EXIT_CONFIG, EXIT_NUMERIC = 2, 3
DEFAULT_MODEL = {"q": 5.0, "Omega": 0.1}


class ConfigError(ValueError):
    pass


@dataclass
class Sweep:
    axis: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not (isinstance(self.count, int) and self.count >= 2):
            raise ConfigError(f"sweep count must be an integer >= 2, got {self.count!r}")
        if not self.start < self.stop:
            raise ConfigError(f"sweep start must be < stop, got {self.start} >= {self.stop}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class RunConfig:
    model: ModelParams
    sweep: Sweep | None = None
    oracle: str | tuple = "auto"
    rel_tol: float = 1e-3
    epsilon: list = field(default_factory=lambda: [0.0])
    Gamma_e: list = field(default_factory=lambda: [0.0])


def _number(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def parse_oracle(text) -> str | tuple:
    if isinstance(text, dict):
        return (int(text["N"]), float(text["W"]))
    if text in ("auto", "off"):
        return text
    parts = str(text).split(",")
    if len(parts) != 2:
        raise ConfigError(f"--oracle must be auto, off or N,W; got {text!r}")
    try:
        return (int(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(f"--oracle must be auto, off or N,W; got {text!r}") from None


def build_config(args, default_sweep: Sweep | None, default_oracle: str = "auto") -> RunConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    model = dict(DEFAULT_MODEL)
    if "model" in raw:
        model.update(raw["model"])
    else:
        model.update({k: v for k, v in raw.items() if k not in ("sweep", "oracle", "eit")})
    sweep = dict(raw.get("sweep", {}))
    eit = dict(raw.get("eit", {}))
    oracle_opt = raw.get("oracle", default_oracle)
    rel_tol = 1e-3
    if isinstance(oracle_opt, dict) and "rel_tol" in oracle_opt:
        rel_tol = float(oracle_opt["rel_tol"])
        oracle_opt = "auto" if "N" not in oracle_opt else oracle_opt

    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key in FIELD_NAMES:
            model[key] = _number(key, value)
        elif key.startswith("sweep."):
            sub = key[6:]
            sweep[sub] = value if sub == "axis" else _number(key, value)
        elif key in ("eit.epsilon", "eit.Gamma_e"):
            eit[key[4:]] = [_number(key, v) for v in value.split(",")]
        else:
            raise ConfigError(f"unknown --set key {key!r}")
    if args.oracle is not None:
        oracle_opt = args.oracle

    try:
        params = params_from_mapping(model)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    problems = validate(params)
    if problems:
        raise ConfigError("; ".join(problems))

    sw = None
    if default_sweep is not None:
        merged = {"axis": default_sweep.axis, "start": default_sweep.start, "stop": default_sweep.stop, "count": default_sweep.count}
        merged.update(sweep)
        count = merged["count"]
        if isinstance(count, float) and count.is_integer():
            count = int(count)
        sw = Sweep(str(merged["axis"]), float(merged["start"]), float(merged["stop"]), count)
    return RunConfig(
        model=params,
        sweep=sw,
        oracle=parse_oracle(oracle_opt),
        rel_tol=rel_tol,
        epsilon=[float(e) for e in eit.get("epsilon", [0.0])],
        Gamma_e=[float(g) for g in eit.get("Gamma_e", [params.Gamma_e])],
    )


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}"


def render(columns: list[str], rows: list[list], form: str) -> str:
    if form == "json":
        clean = [[None if (v is None or (isinstance(v, float) and math.isnan(v))) else float(f"{v:.12g}") for v in r] for r in rows]
        return json.dumps({"columns": columns, "rows": clean}, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def emit(text: str, path: str | None) -> None:
    """Write to ``path`` atomically (temp file + rename) or to stdout."""
    if not path:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".nlfano-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def normalize_columns(rows: list[list], cols: range) -> None:
    for c in cols:
        vals = [r[c] for r in rows if r[c] is not None]
        peak = max(vals) if vals else 0.0
        if peak > 0:
            for r in rows:
                if r[c] is not None:
                    r[c] = r[c] / peak


def _oracle_values(params: ModelParams, omega_L, cfg: RunConfig):
    if cfg.oracle == "off":
        return [None] * len(omega_L)
    if cfg.oracle == "auto":
        values, *_ = oracle.converged_profile(params, omega_L, cfg.rel_tol)
    else:
        N, W = cfg.oracle
        values = oracle.profile(params, omega_L, N, W)
    return list(values)


def cmd_profile(args) -> str:
    p0 = build_config(args, None).model
    cfg = build_config(args, Sweep("omega_L", p0.omega_e - 10.0, p0.omega_e + 10.0, 201))
    if cfg.sweep.axis != "omega_L":
        raise ConfigError("profile needs sweep axis omega_L")
    p, w = cfg.model, cfg.sweep.values()
    closed = None
    if p.Gamma_e == 0 and p.gamma_eg == 0:
        closed = profiles.generalized_profile(profiles.effective_params_population(p), w)
    kernel = effective.population(p, w)
    orc = _oracle_values(p, w, cfg)
    rows = [
        [w[i], float(epsilon_of(p, w[i])), None if closed is None else float(closed[i]), float(kernel[i]), orc[i]]
        for i in range(w.size)
    ]
    if args.normalize == "peak":
        normalize_columns(rows, range(2, 5))
    return render(["omega_L", "epsilon", "n_c_closed", "n_c_effective", "n_c_oracle"], rows, args.format)


def _fitted(params: ModelParams, cfg: RunConfig):
    if cfg.oracle == "auto":
        res, _ = validation.oracle_fit(params, rel_tol=cfg.rel_tol)
    else:
        N, W = cfg.oracle
        lo, hi = validation._window(params, 10.0)
        w = np.linspace(lo, hi, 25)
        res = fit_profile(ProfileSamples(w, oracle.profile(params, w, N, W)))
    return res.params


def cmd_sweep(args) -> str:
    cfg = build_config(args, Sweep("Omega", 0.0, 2.0, 101), default_oracle="off")
    if cfg.sweep.axis == "omega_L":
        raise ConfigError("sweep needs axis Omega or Gamma_c")
    p = cfg.model
    if p.Gamma_e != 0 or p.gamma_eg != 0:
        raise ConfigError("closed-form effective parameters need Gamma_e = gamma_eg = 0")
    axis = cfg.sweep.axis
    cols = [axis, "gamma_eff", "q_eff_over_q", "omega_eff", "C"]
    with_fit = cfg.oracle != "off"
    if with_fit:
        cols += ["gamma_eff_fit", "q_eff_over_q_fit", "omega_eff_fit", "C_fit"]
    rows = []
    for x in cfg.sweep.values():
        px = p.replace(**{axis: float(x)})
        ef = profiles.effective_params_population(px)
        ratio = px.Gamma_c / (2 * px.Omega**2 + px.Gamma_c) / ef.gamma_eff
        row = [float(x), ef.gamma_eff, ratio, ef.omega_eff, ef.C]
        if with_fit:
            if px.Omega == 0:
                row += [None] * 4
            else:
                fe = _fitted(px, cfg)
                row += [fe.gamma_eff, fe.q_eff / px.q if px.q != 0 else None, fe.omega_eff, fe.C]
        rows.append(row)
    return render(cols, rows, args.format)


def cmd_eit(args) -> str:
    cfg = build_config(args, Sweep("Omega", 0.0, 2.0, 201), default_oracle="off")
    if cfg.sweep.axis != "Omega":
        raise ConfigError("eit needs sweep axis Omega")
    p = cfg.model
    with_oracle = cfg.oracle != "off"
    cols = ["Omega", "epsilon", "Gamma_e", "n_c"] + (["n_c_oracle"] if with_oracle else [])
    rows = []
    for eps in cfg.epsilon:
        zero = profiles.eit_rabi(eps, p.q) if p.q != 0 else None
        oms = list(cfg.sweep.values())
        if zero is not None and cfg.sweep.start <= zero <= cfg.sweep.stop:
            print(f"predicted transparency zero: epsilon={fmt(eps)} Omega={fmt(zero)}", file=sys.stderr)
            oms = sorted(set(oms) | {zero})
        for ge in cfg.Gamma_e:
            pe = p.replace(Gamma_e=ge)
            wl = pe.omega_e + eps
            kernel = [effective.population(pe.replace(Omega=float(o)), wl) for o in oms]
            if with_oracle:
                jobs = [pe.replace(Omega=float(o)) for o in oms]
                if cfg.oracle == "auto":
                    orc = [r.n_c for r in pmap(_converge_at(wl, cfg.rel_tol), jobs)]
                else:
                    N, W = cfg.oracle
                    orc = [oracle.solve_point(j, wl, N, W).n_c for j in jobs]
            for i, o in enumerate(oms):
                row = [float(o), eps, ge, kernel[i]]
                if with_oracle:
                    row.append(orc[i])
                rows.append(row)
    if args.normalize == "peak":
        normalize_columns(rows, range(3, len(cols)))
    return render(cols, rows, args.format)


class _converge_at:
    """Picklable ``params -> converge(params, omega_L, rel_tol)``."""

    def __init__(self, omega_L: float, rel_tol: float):
        self.omega_L, self.rel_tol = omega_L, rel_tol

    def __call__(self, params: ModelParams):
        return oracle.converge(params, self.omega_L, self.rel_tol)


def cmd_validate(args) -> tuple[str, int]:
    numbers = None
    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",")]
        except ValueError:
            raise ConfigError(f"--only expects comma-separated criterion numbers, got {args.only!r}") from None
        bad = [n for n in numbers if n not in validation.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    results = validation.run_all(numbers, log=lambda line: print(line, file=sys.stderr))
    rep = validation.report(results)
    return json.dumps(rep, indent=1, default=float) + "\n", 0 if rep["all_passed"] else 1


def read_samples(path: str, kind: str) -> ProfileSamples:
    try:
        fh = open(path, newline="") if path != "-" else sys.stdin
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["omega_L", "value"]:
            raise ConfigError(f"{path}:1: header must start with omega_L,value")
        w, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                wv, yv = float(row[0]), float(row[1])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value in {row[:2]}") from None
            if not (math.isfinite(wv) and math.isfinite(yv)):
                raise ConfigError(f"{path}:{lineno}: non-finite value")
            w.append(wv)
            y.append(yv)
    try:
        return ProfileSamples(np.array(w), np.array(y), kind)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_fit(args) -> str:
    res = fit_profile(read_samples(args.input, args.kind))
    return json.dumps(res.as_dict(), indent=1) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with model parameters (and optional sweep/oracle/eit)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter, e.g. q=5 or sweep.count=51")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--normalize", choices=("none", "peak"), default="none")
    common.add_argument(
        "--oracle", help="auto, off, or fixed controls N,W (default: auto for profile, off otherwise)"
    )

    parser = argparse.ArgumentParser(prog="nlfano", description=__doc__.split("\n\n")[0].replace("\n", " "))
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="n_c versus laser frequency")
    sub.add_parser("sweep", parents=[common], help="effective parameters versus Omega or Gamma_c")
    sub.add_parser("eit", parents=[common], help="n_c versus Omega at fixed detunings")
    v = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    v.add_argument("--only", help="comma-separated criterion numbers")
    f = sub.add_parser("fit", parents=[common], help="fit a sampled lineshape (CSV omega_L,value)")
    f.add_argument("input", help="CSV path or - for stdin")
    f.add_argument("--kind", choices=("population", "photocurrent"), default="population")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    status = 0
    try:
        if args.command == "validate":
            text, status = cmd_validate(args)
        else:
            text = {"profile": cmd_profile, "sweep": cmd_sweep, "eit": cmd_eit, "fit": cmd_fit}[args.command](args)
        emit(text, args.out)
    except (ConfigError, ParameterError, oracle.DiscretizationError) as exc:
        print(f"nlfano: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateSteadyStateError, oracle.ConvergenceError, FitError, NoFeatureError, ReadoutError, profiles.UnsupportedClosedFormError) as exc:
        print(f"nlfano: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return status


if __name__ == "__main__":
    sys.exit(main())
