"""Command-line front end.

Subcommands::

    edd        expected detection delay for one configuration
    arl        average run length under no change
    sweep      EDD over a (mu1, M) grid
    calibrate  constant C and the threshold for a target ARL
    verify     oracle-equivalence self-checks

Results go to ``--output`` (CSV or JSON, written atomically) or to stdout.
Progress and warnings go to stderr. Exit codes: 0 success, 1 failed
self-check, 2 usage error, 3 estimation failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

from . import __version__
from .calibrate import NumericalError, calibrate_threshold, compute_c_constant
from .sim import (
    MonteCarloSummary,
    TrialConfig,
    default_workers,
    estimate_arl,
    estimate_edd,
    sweep_edd,
)
from .verify import check_cusum_maxform, check_focus_oracle, check_sign_symmetry

log = logging.getLogger("banditqcd")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ESTIMATION = 3
EXIT_NUMERICAL = 4

CSV_HEADER = "param_set,lambda,nu,mu1,M,trials,mean,std_error,censored,false_alarms"

# option name -> converter, for values read from --config
_CONFIG_KEYS = {
    "streams": int,
    "mu1": float,
    "nu": float,
    "threshold": float,
    "gamma": float,
    "horizon": int,
    "trials": int,
    "seed": int,
    "workers": int,
    "output": str,
    "format": str,
    "mu1_grid": str,
    "m_grid": str,
    "cases": int,
    "max_len": int,
}


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return format(value, ".6g")


def _round6(value):
    if isinstance(value, float) and math.isfinite(value):
        return float(format(value, ".6g"))
    if isinstance(value, float):
        return _fmt(value)
    return value


def version_string() -> str:
    """``git describe`` of the source checkout, or ``v<version>`` outside one."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--tags", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
        if out:
            return f"v{__version__}-{out}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path: str) -> dict:
    """Read ``key=value`` lines or a JSON object; ``#`` starts a comment."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    config = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            config[key] = _CONFIG_KEYS[key](value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return config


def _grid(text: str, conv) -> list:
    try:
        values = [conv(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if not values:
        raise UsageError("grid must be non-empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditqcd",
        description="Bandit quickest change detection with Decaying-epsilon-FOCuS.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, need_mu1=True, need_nu=True):
        p.add_argument("--config", help="key=value or JSON file with default option values")
        p.add_argument("--streams", "-M", type=int, help="number of streams M")
        if need_mu1:
            p.add_argument("--mu1", type=float, help="post-change mean")
        if need_nu:
            p.add_argument("--nu", type=float, help="change point (global time)")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--threshold", "--lambda", dest="threshold", type=float,
                           help="detection threshold lambda")
        group.add_argument("--gamma", type=float, help="target ARL; threshold is calibrated")
        p.add_argument("--horizon", type=int, help="ticks before a trial is censored")
        p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="worker processes (default: $BANDITQCD_WORKERS or 1)")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")

    common(sub.add_parser("edd", help="expected detection delay"))
    common(sub.add_parser("arl", help="average run length under no change"), need_mu1=False, need_nu=False)
    p = sub.add_parser("sweep", help="EDD over a (mu1, M) grid")
    common(p, need_mu1=False)
    p.add_argument("--mu1-grid", dest="mu1_grid", help="comma-separated post-change means")
    p.add_argument("--m-grid", dest="m_grid", help="comma-separated stream counts")

    p = sub.add_parser("calibrate", help="compute C and the threshold for a target ARL")
    p.add_argument("--config")
    p.add_argument("--gamma", type=float, help="target ARL")
    p.add_argument("--streams", "-M", type=int, help="number of streams M")
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("verify", help="run the oracle-equivalence self-checks")
    p.add_argument("--config")
    p.add_argument("--cases", type=int, help="random sequences per check (default 1000)")
    p.add_argument("--max-len", dest="max_len", type=int, help="maximum sequence length (default 300)")
    p.add_argument("--seed", type=int)
    return parser


_DEFAULTS = {
    "streams": 10,
    "mu1": 1.0,
    "nu": 0.0,
    "horizon": 1_000_000,
    "trials": 500,
    "seed": 0,
    "format": "csv",
    "cases": 1000,
    "max_len": 300,
}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from ``--config`` and then from the defaults."""
    config = load_config(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "threshold", None) is not None and config.get("gamma") is not None:
        config.pop("gamma")
    if getattr(args, "gamma", None) is not None and config.get("threshold") is not None:
        config.pop("threshold")
    for key, value in config.items():
        # keys meant for other subcommands are ignored
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    for key, value in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        try:
            args.workers = default_workers()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    _validate(args)
    return args


def _validate(args):
    def positive(name, value):
        if value is None or not value > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")

    for name in ("streams", "trials", "horizon", "workers", "cases", "max_len"):
        if hasattr(args, name):
            positive(name, getattr(args, name))
    if hasattr(args, "threshold"):
        if args.threshold is not None and args.gamma is not None:
            raise UsageError("--threshold and --gamma are mutually exclusive")
        if args.threshold is None and args.gamma is None:
            raise UsageError("one of --threshold or --gamma is required")
        if args.threshold is not None:
            positive("threshold", args.threshold)
        if args.gamma is not None:
            positive("gamma", args.gamma)
    if args.command == "calibrate":
        positive("gamma", args.gamma)
    if getattr(args, "nu", None) is not None:
        if math.isnan(args.nu) or args.nu < 0:
            raise UsageError("--nu must be >= 0")
        if math.isfinite(args.nu) and args.nu != int(args.nu):
            raise UsageError("--nu must be an integer time")
    if getattr(args, "mu1", None) is not None and not math.isfinite(args.mu1):
        raise UsageError("--mu1 must be finite")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if args.command == "sweep":
        args.mu1_grid = _grid(args.mu1_grid or "", float)
        args.m_grid = _grid(args.m_grid or "", int)


def _threshold(args) -> float:
    if args.threshold is not None:
        return args.threshold
    c, _ = compute_c_constant()
    try:
        return calibrate_threshold(args.gamma, args.streams, c)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _row(param_set, lam, nu, mu1, m, summary: MonteCarloSummary) -> dict:
    return {
        "param_set": param_set,
        "lambda": lam,
        "nu": nu,
        "mu1": mu1,
        "M": m,
        "trials": summary.n_trials,
        "mean": summary.mean,
        "std_error": summary.std_error,
        "censored": summary.n_censored,
        "false_alarms": summary.n_false_alarms,
        "status": summary.status,
        "message": summary.message,
    }


def render(rows: list[dict], fmt: str, command: str, config: dict) -> str:
    if fmt == "csv":
        cols = CSV_HEADER.split(",")
        lines = [CSV_HEADER]
        lines += [",".join(_fmt(r.get(c)) if c != "param_set" else str(r[c]) for c in cols) for r in rows]
        return "\n".join(lines) + "\n"
    doc = {
        "version": version_string(),
        "command": command,
        "config": {k: _round6(v) for k, v in config.items()},
        "rows": [{k: _round6(v) for k, v in r.items()} for r in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(args, rows, config):
    text = render(rows, args.format, args.command, config)
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _config_echo(args) -> dict:
    skip = {"config", "output", "format", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _cmd_mc(args) -> int:
    lam = _threshold(args)
    if args.command == "sweep":
        log.info("sweep: %d cells x %d trials", len(args.mu1_grid) * len(args.m_grid), args.trials)
        cells = sweep_edd(args.mu1_grid, args.m_grid, int(args.nu), lam, args.trials,
                          seed=args.seed, horizon=args.horizon, workers=args.workers)
        rows = [_row(f"sweep-{i}", lam, args.nu, mu1, m, s) for i, (mu1, m, s) in enumerate(cells)]
    elif args.command == "edd":
        if not math.isfinite(args.nu):
            raise UsageError("edd needs a finite --nu")
        cfg = TrialConfig(args.streams, int(args.nu), args.mu1, lam, args.horizon, args.seed)
        log.info("edd: %d trials of %s", args.trials, cfg)
        rows = [_row("edd", lam, args.nu, args.mu1, args.streams, estimate_edd(cfg, args.trials, args.workers))]
    else:
        cfg = TrialConfig(args.streams, math.inf, 0.0, lam, args.horizon, args.seed)
        log.info("arl: %d trials of %s", args.trials, cfg)
        rows = [_row("arl", lam, math.inf, 0.0, args.streams, estimate_arl(cfg, args.trials, args.workers))]

    config = _config_echo(args)
    config["lambda"] = lam
    _emit(args, rows, config)
    failed = [r for r in rows if r["status"] == "failed"]
    first = rows[0]
    print(
        f"{args.command}: {len(rows)} row(s), lambda={_fmt(lam)}, "
        f"mean={_fmt(first['mean'])} se={_fmt(first['std_error'])}"
        + (f", {len(failed)} failed" if failed else ""),
        file=sys.stderr if not args.output else sys.stdout,
    )
    return EXIT_ESTIMATION if failed else EXIT_OK


def _cmd_calibrate(args) -> int:
    c, err = compute_c_constant()
    try:
        lam = calibrate_threshold(args.gamma, args.streams, c)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    row = {"C": c, "C_error": err, "gamma": args.gamma, "M": args.streams, "lambda": lam}
    if args.output:
        if args.format == "json":
            text = json.dumps({"version": version_string(), "command": "calibrate",
                               "rows": [{k: _round6(v) for k, v in row.items()}]},
                              indent=2, sort_keys=True) + "\n"
        else:
            cols = list(row)
            text = ",".join(cols) + "\n" + ",".join(_fmt(row[k]) for k in cols) + "\n"
        write_atomic(args.output, text)
    print(f"C={c:.10g} (+/- {err:.2g}) gamma={_fmt(args.gamma)} M={args.streams} lambda={lam:.10g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    seed = args.seed or 0
    results = [
        check_focus_oracle(args.cases, args.max_len, seed),
        check_cusum_maxform(args.cases, args.max_len, seed),
        check_sign_symmetry(max(1, args.cases // 5), args.max_len, seed),
    ]
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def run_command(args: argparse.Namespace) -> int:
    """Execute a parsed and resolved command; returns the exit status."""
    try:
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_mc(args)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OverflowError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolve(args)
        return run_command(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
