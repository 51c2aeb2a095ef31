"""Command-line interface.

Every subcommand accepts ``--config FILE``: a flat ``key = value`` file whose
keys are the subcommand's flag names.  Flags given on the command line win
over the file.  Failures exit nonzero and print one JSON object to stderr
naming the error category.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .asymptotic_risk import E_UMLE2_UNIT, AsymptoticInputs, e_ub2_unit, kappa0, risk_expansion
from .core import FUNCTIONALS, ModelParams, RngStream, get_functional
from .limiting_process import DEFAULT_STEP, DEFAULT_TRUNCATION, GridSpec, estimate_limit_constants
from .mc_harness import PAPER_TAUS, PAPER_THETAS, StudyConfig, paper_config, run_study
from .sequence_model import FunctionalError, estimate, generate_sequence


class CliError(Exception):
    codes = {"usage": 2, "parse": 3, "io": 4, "value": 5, "numeric": 6}

    def __init__(self, category: str, message: str, **extra):
        super().__init__(message)
        self.category = category
        self.extra = extra

    @property
    def exit_code(self) -> int:
        return self.codes[self.category]

    def payload(self) -> dict:
        return {"error": self.category, "message": str(self), **self.extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _tau_list(text: str) -> list[int]:
    out = []
    try:
        for tok in text.replace(",", " ").split():
            if ".." in tok:
                a, b = tok.split("..")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(tok))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an index list or range a..b: {text!r}") from None
    return out


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return v


# flag -> (type, repeatable, help)
OPTIONS = {
    "n": (int, False, "sequence length"),
    "theta": (_float_list, True, "change level(s); repeatable, comma lists allowed"),
    "tau": (_tau_list, True, "change index/indices; repeatable, ranges a..b allowed"),
    "eps": (float, False, "noise level"),
    "reps": (int, False, "Monte Carlo replications"),
    "seed": (_u64, False, "64-bit seed"),
    "stream": (_u64, False, "stream id (replication index) of a single draw"),
    "delta": (float, False, "jump size"),
    "grid-step": (float, False, "grid step of the simulated path"),
    "truncation": (float, False, "half-width T of the grid [-T, T]"),
    "workers": (int, False, "parallel worker processes"),
    "functional": (str, False, f"one of {sorted(FUNCTIONALS)}"),
    "input": (str, False, "input CSV, one real per line, optional header 'x'"),
    "out": (str, False, "output file (directory for reproduce-figure1); stdout if omitted"),
    "format": (str, False, "csv or json"),
    "i1": (float, False, "Fisher-type norm I1"),
    "i2": (float, False, "Fisher-type norm I2"),
    "dl-dtheta1": (float, False, "dL/dtheta1"),
    "dl-dtheta2": (float, False, "dL/dtheta2"),
    "dl-dtau": (float, False, "dL/dtau"),
    "d2l-dtheta1": (float, False, "d2L/dtheta1^2"),
    "d2l-dtheta2": (float, False, "d2L/dtheta2^2"),
}

COMMANDS = {
    "simulate-sequence": (
        "Draw one sequence from the change-in-mean model",
        {"n": 20, "theta": [1.0], "tau": [10], "eps": 1.0, "seed": 0, "stream": 0, "out": None, "format": "csv"},
    ),
    "estimate": (
        "MLE and Bayes estimates for a sequence read from CSV",
        {"input": None, "eps": 1.0, "functional": "theta_tau", "out": None, "format": "json"},
    ),
    "risk-table": (
        "Monte Carlo risk table over a (theta, tau) grid",
        {
            "n": 20,
            "theta": list(PAPER_THETAS),
            "tau": list(PAPER_TAUS),
            "eps": 1.0,
            "reps": 10_000,
            "seed": 0,
            "functional": "theta_tau",
            "workers": 1,
            "out": None,
            "format": "csv",
        },
    ),
    "limit-constants": (
        "Monte Carlo of the limiting change-point estimates",
        {
            "delta": 1.0,
            "grid-step": DEFAULT_STEP,
            "truncation": DEFAULT_TRUNCATION,
            "reps": 200_000,
            "seed": 0,
            "workers": 1,
            "out": None,
            "format": "json",
        },
    ),
    "asymptotic-risk": (
        "Second-order risk expansions of the functional estimates",
        {
            "eps": 1.0,
            "i1": 1.0,
            "i2": 1.0,
            "delta": 1.0,
            "dl-dtheta1": 0.0,
            "dl-dtheta2": 0.0,
            "dl-dtau": 0.0,
            "d2l-dtheta1": 0.0,
            "d2l-dtheta2": 0.0,
            "out": None,
            "format": "json",
        },
    ),
    "reproduce-figure1": (
        "Risk-ratio study on the n=20 design; writes kappa.svg, kappa_tilde.svg, risk_table.csv",
        {"reps": 10_000, "seed": 0, "workers": 1, "out": "figure1"},
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="changepoint-efficiency", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, defaults) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", default=argparse.SUPPRESS, help="key = value config file")
        for flag in defaults:
            typ, repeat, h = OPTIONS[flag]
            kw = dict(type=typ, default=argparse.SUPPRESS, help=h, dest=flag)
            if repeat:
                kw["action"] = "append"
            p.add_argument(f"--{flag}", **kw)
    return parser


def read_config(path: str, command: str) -> dict:
    allowed = COMMANDS[command][1]
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CliError("io", f"cannot read config {path}: {e.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
        else:
            key, _, value = line.partition(" ")
            value = value.strip()
        key = key.lstrip("-").replace("_", "-").lower()
        if key not in allowed:
            raise CliError("parse", f"unknown config key {key!r} for {command}", line=lineno)
        typ, repeat, _ = OPTIONS[key]
        try:
            val = typ(value)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise CliError("parse", f"bad value for {key}: {e}", line=lineno) from None
        if repeat:
            out.setdefault(key, []).append(val)
        else:
            out[key] = val
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then command-line flags."""
    command = args.command
    settings = dict(COMMANDS[command][1])
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if hasattr(args, "config"):
        settings.update(read_config(args.config, command))
    settings.update(cli)
    for key in ("theta", "tau"):
        if key in settings and settings[key] and isinstance(settings[key][0], list):
            settings[key] = [v for chunk in settings[key] for v in chunk]
    fmt = settings.get("format")
    if fmt is not None and fmt not in ("csv", "json"):
        raise CliError("usage", f"--format must be csv or json, got {fmt!r}")
    return settings


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"cannot write {out}: {e.strerror}") from None


def _single(settings, key):
    vals = settings[key]
    if len(vals) != 1:
        raise CliError("usage", f"--{key} takes exactly one value here, got {vals}")
    return vals[0]


def read_sequence_csv(path: str) -> np.ndarray:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CliError("io", f"cannot read {path}: {e.strerror}") from None
    values = []
    for lineno, raw in enumerate(lines, 1):
        tok = raw.strip()
        if not tok:
            continue
        if lineno == 1 and tok.lower() == "x":
            continue
        if "," in tok:
            raise CliError("parse", f"expected a single column, got {tok!r}", line=lineno)
        try:
            v = float(tok)
        except ValueError:
            raise CliError("parse", f"not a number: {tok!r}", line=lineno) from None
        if not math.isfinite(v):
            raise CliError("value", f"non-finite value {tok!r}", line=lineno)
        values.append(v)
    if len(values) < 2:
        raise CliError("value", f"need at least 2 observations, got {len(values)}")
    return np.array(values)


def cmd_simulate_sequence(s: dict) -> None:
    params = ModelParams(theta=_single(s, "theta"), tau=_single(s, "tau"), eps=s["eps"], n=s["n"])
    sample = generate_sequence(params, RngStream(s["seed"], s["stream"]), s["stream"])
    if s["format"] == "json":
        text = report.to_json(
            {
                "theta": params.theta,
                "tau": params.tau,
                "eps": params.eps,
                "n": params.n,
                "seed": s["seed"],
                "stream": s["stream"],
                "x": sample.x.tolist(),
            }
        )
    else:
        text = "x\n" + "".join(report.fmt(v) + "\n" for v in sample.x)
    _emit(text, s["out"])


def cmd_estimate(s: dict) -> None:
    if s["input"] is None:
        raise CliError("usage", "--input is required")
    x = read_sequence_csv(s["input"])
    try:
        est, post = estimate(x, s["eps"], get_functional(s["functional"]))
    except FunctionalError as e:
        raise CliError("numeric", str(e)) from None
    result = {**est.as_dict(), "eps": s["eps"], "functional": s["functional"], "weights": post.weights.tolist()}
    if s["format"] == "csv":
        rows = ["key,value"] + [f"{k},{report.fmt(v)}" for k, v in est.as_dict().items()]
        rows += [f"p_{k},{report.fmt(w)}" for k, w in enumerate(post.weights, 1)]
        _emit("\n".join(rows) + "\n", s["out"])
    else:
        _emit(report.to_json(result), s["out"])


def cmd_risk_table(s: dict) -> None:
    config = StudyConfig(
        n=s["n"],
        eps=s["eps"],
        theta_values=tuple(s["theta"]),
        tau_values=tuple(s["tau"]),
        reps=s["reps"],
        seed=s["seed"],
        functional_name=s["functional"],
    )
    table = run_study(config, workers=s["workers"])
    if s["format"] == "json":
        _emit(report.to_json(report.risk_table_dict(table)), s["out"])
    else:
        _emit(report.risk_table_csv(table), s["out"])


def limit_constants_report(res) -> dict:
    d4 = res.delta**4
    return {
        "delta": res.delta,
        "grid_step": res.grid.step,
        "truncation": res.grid.truncation,
        "reps": res.reps,
        "seed": res.seed,
        "e_umle2": res.e_umle2.as_dict(),
        "e_ub2": res.e_ub2.as_dict(),
        "kappa0_hat": res.kappa0_hat.as_dict(),
        "mean_umle": res.mean_umle.as_dict(),
        "mean_ub": res.mean_ub.as_dict(),
        "tail_fraction": res.tail_fraction,
        "targets": {
            "e_umle2": E_UMLE2_UNIT / d4,
            "e_ub2": e_ub2_unit() / d4,
            "kappa0": kappa0(),
        },
    }


def cmd_limit_constants(s: dict) -> None:
    if s["reps"] < 100:
        raise CliError("value", "--reps must be at least 100")
    if not s["delta"] > 0:
        raise CliError("value", "--delta must be positive")
    grid = GridSpec(step=s["grid-step"], truncation=s["truncation"])
    if grid.points < 3:
        raise CliError("value", "grid needs at least 3 points")
    res = estimate_limit_constants(s["delta"], grid, s["reps"], s["seed"], workers=s["workers"])
    rep = limit_constants_report(res)
    if s["format"] == "csv":
        rows = ["quantity,value,se,target"]
        for q in ("e_umle2", "e_ub2", "kappa0_hat"):
            target = rep["targets"]["kappa0" if q == "kappa0_hat" else q]
            rows.append(",".join([q, report.fmt(rep[q]["value"]), report.fmt(rep[q]["se"]), report.fmt(target)]))
        _emit("\n".join(rows) + "\n", s["out"])
    else:
        _emit(report.to_json(rep), s["out"])


def cmd_asymptotic_risk(s: dict) -> None:
    inp = AsymptoticInputs(
        eps=s["eps"],
        i1=s["i1"],
        i2=s["i2"],
        delta=s["delta"],
        dL_dtheta1=s["dl-dtheta1"],
        dL_dtheta2=s["dl-dtheta2"],
        dL_dtau=s["dl-dtau"],
        d2L_dtheta1=s["d2l-dtheta1"],
        d2L_dtheta2=s["d2l-dtheta2"],
    )
    exp = risk_expansion(inp)
    rep = {
        "first_order": exp.first_order,
        "second_order_mle": exp.second_order_mle,
        "second_order_bayes": exp.second_order_bayes,
        "ratio_limit": exp.ratio_limit,
        "risk_mle": exp.risk_mle(inp.eps),
        "risk_bayes": exp.risk_bayes(inp.eps),
        "eps": inp.eps,
    }
    if s["format"] == "csv":
        _emit("key,value\n" + "".join(f"{k},{report.fmt(v)}\n" for k, v in rep.items()), s["out"])
    else:
        _emit(report.to_json(rep), s["out"])


def cmd_reproduce_figure1(s: dict) -> dict:
    if s["reps"] < 1:
        raise CliError("value", "--reps must be >= 1")
    table = run_study(paper_config(reps=s["reps"], seed=s["seed"]), workers=s["workers"])
    try:
        paths = report.write_figure1(table, s["out"])
    except OSError as e:
        raise CliError("io", f"cannot write to {s['out']}: {e.strerror}") from None
    sys.stdout.write(report.to_json({k: str(v) for k, v in paths.items()}))
    return paths


HANDLERS = {
    "simulate-sequence": cmd_simulate_sequence,
    "estimate": cmd_estimate,
    "risk-table": cmd_risk_table,
    "limit-constants": cmd_limit_constants,
    "asymptotic-risk": cmd_asymptotic_risk,
    "reproduce-figure1": cmd_reproduce_figure1,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = resolve(args)
        if settings.get("workers", 1) < 1:
            raise CliError("value", "--workers must be >= 1")
        HANDLERS[args.command](settings)
    except CliError as e:
        sys.stderr.write(json.dumps(e.payload()) + "\n")
        return e.exit_code
    except ValueError as e:
        sys.stderr.write(json.dumps({"error": "value", "message": str(e)}) + "\n")
        return CliError.codes["value"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
