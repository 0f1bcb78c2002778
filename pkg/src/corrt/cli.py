"""Command-line interface.

Five subcommands: ``test`` and ``ci`` run the correlation test on a CSV
dataset, ``simulate`` and ``power`` drive the Monte Carlo harness for a
single data-generating process, and ``reproduce`` regenerates the three
canned experiment tables. Every output file echoes the effective
configuration, so a run can be replayed bitwise from its own artifact.

Exit codes: 0 success, 2 usage error, 3 data or input error, 4 numerical
failure (solver, convergence, degenerate statistic, harness budget).
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import CorrtError, DataError
from .inference import confidence_interval
from .inference import test as significance_test
from .montecarlo import (
    DgpSpec,
    power_curve,
    result_payload,
    run_mc,
    to_csv,
    to_json,
)
from .programs import Dataset
from .stats import wald_size_distortion

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Reduced problem sizes keep the canned experiments at workstation cost;
# the paper-scale variants sit behind --scale paper.
REPRODUCE_SCALES = {
    "table1": {"desk": (100, 250, 200), "paper": (200, 500, 100)},
    "power": {"desk": (100, 250, 200), "paper": (200, 500, 100)},
    "theorem1": {"desk": (200, 401, 400), "paper": (200, 401, 400)},
}
THEOREM1_AMPLITUDES = (0.0, 1.0, 3.0, 10.0)
POWER_SHIFTS = (0.0, 2.0, 4.0, 6.0)


class UsageError(Exception):
    """Bad flag/config combination discovered after argument parsing."""


# Keys accepted in a key=value config file, with their coercions. A flag
# given on the command line always wins over the file.
_INT_KEYS = {"n", "p", "s", "reps", "seed", "threads"}
_FLOAT_KEYS = {"beta0", "alpha", "level", "rho", "amplitude", "h"}
_STR_KEYS = {
    "data", "y_col", "test_col", "out", "table", "family", "design",
    "error", "method", "h_grid", "grid", "scale", "target",
}


def _coerce(key: str, raw: str):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"config key {key!r} expects an integer, got {raw!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise UsageError(f"config key {key!r} expects a number, got {raw!r}")
    if key in _STR_KEYS:
        return raw
    raise UsageError(f"unknown config key {key!r}")


def load_config_file(path: str) -> dict:
    """Parse a flat key=value file; blank lines and # comments ignored."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(
                f"{path}:{lineno}: expected key=value, got {stripped!r}"
            )
        key, _, raw = stripped.partition("=")
        out[key.strip()] = _coerce(key.strip(), raw.strip())
    return out


def merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    effective = dict(defaults)
    file_path = getattr(args, "config", None)
    if file_path is not None:
        for key, value in load_config_file(file_path).items():
            if key in effective:
                effective[key] = value
    for key in effective:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            effective[key] = flag_value
    return effective


def load_table(path: str):
    """Read a headed numeric CSV into (header, array)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path!r}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path!r} needs a header row and at least one data row")
    header = [cell.strip() for cell in rows[0]]
    width = len(header)
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise DataError(
                f"data row {i} has {len(row)} fields, expected {width}"
            )
        for j, cell in enumerate(row):
            text = cell.strip()
            if not text:
                raise DataError(
                    f"missing value at data row {i}, column {header[j]!r}"
                )
            try:
                values[i - 1, j] = float(text)
            except ValueError:
                raise DataError(
                    f"non-numeric value {text!r} at data row {i}, "
                    f"column {header[j]!r}"
                ) from None
    return header, values


def resolve_column(header, token, role: str) -> int:
    """Map a header name or 0-based index string to a column position."""
    if token is None:
        raise UsageError(f"--{role} is required (header name or column index)")
    if token in header:
        return header.index(token)
    try:
        index = int(token)
    except ValueError:
        raise DataError(
            f"column {token!r} not found; available columns: {header}"
        ) from None
    if not 0 <= index < len(header):
        raise DataError(
            f"column index {index} outside [0, {len(header)}) for --{role}"
        )
    return index


def build_dataset(cfg: dict) -> Dataset:
    if cfg["data"] is None:
        raise UsageError("--data is required")
    header, values = load_table(cfg["data"])
    y_col = resolve_column(header, cfg["y_col"], "y-col")
    test_col = resolve_column(header, cfg["test_col"], "test-col")
    if y_col == test_col:
        raise DataError("response and tested column must differ")
    keep = [j for j in range(len(header)) if j != y_col]
    W = values[:, keep]
    return Dataset(W=W, y=values[:, y_col], tested_index=keep.index(test_col))


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_meta_dict(meta):
    if meta is None:
        return None
    return {
        "a_hat": meta.a_hat,
        "used_fallback": meta.used_fallback,
        "feasibility_margins": meta.feasibility_margins,
    }


def cmd_test(cfg: dict) -> int:
    data = build_dataset(cfg)
    report = significance_test(data, beta0=cfg["beta0"], alpha=cfg["alpha"])
    payload = {
        "config": cfg,
        "report": {
            "beta0": report.beta0,
            "t_stat": report.t_stat,
            "critical_value": report.critical_value,
            "p_value": report.p_value,
            "reject": report.reject,
            "denominator": report.denominator,
            "gamma_fit": _fit_meta_dict(report.gamma_fit_meta),
            "theta_fit": _fit_meta_dict(report.theta_fit_meta),
        },
    }
    write_json(cfg["out"], payload)
    verdict = "reject" if report.reject else "fail to reject"
    print(
        f"T = {report.t_stat:.4f}, critical = {report.critical_value:.4f}, "
        f"p = {report.p_value:.4g}: {verdict} H0: beta = {cfg['beta0']:g} "
        f"at alpha = {cfg['alpha']:g}"
    )
    print(f"report written to {cfg['out']}")
    return EXIT_OK


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--grid expects lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--grid expects lo:hi:count, got {text!r}") from None
    if count < 1:
        raise UsageError("--grid count must be at least 1")
    return np.linspace(lo, hi, count)


def cmd_ci(cfg: dict) -> int:
    data = build_dataset(cfg)
    grid = None if cfg["grid"] is None else _parse_grid(cfg["grid"])
    result = confidence_interval(data, level=cfg["level"], grid=grid)
    payload = {
        "config": cfg,
        "interval": {
            "level": result.level,
            "hull": result.hull,
            "contiguous": result.contiguous,
            "diagnostic": result.diagnostic,
            "grid": result.grid,
            "accepted": result.accepted,
        },
    }
    write_json(cfg["out"], payload)
    if result.hull is None:
        print(f"no values accepted: {result.diagnostic}")
    else:
        lo, hi = result.hull
        shape = "contiguous" if result.contiguous else "has gaps"
        print(f"{cfg['level']:.0%} confidence hull: [{lo:.6g}, {hi:.6g}] ({shape})")
    print(f"interval written to {cfg['out']}")
    return EXIT_OK


def build_spec(cfg: dict) -> DgpSpec:
    for key in ("family", "n", "p"):
        if cfg[key] is None:
            raise UsageError(f"--{key} is required for simulation commands")
    s = cfg["s"]
    amplitude = cfg["amplitude"]
    return DgpSpec(
        family=cfg["family"],
        n=cfg["n"],
        p=cfg["p"],
        design=cfg["design"],
        rho=cfg["rho"],
        error=cfg["error"],
        s=None if s is None else int(s),
        amplitude=None if amplitude is None else float(amplitude),
        h=cfg["h"],
    )


def _echo(cfg: dict) -> dict:
    """Config as written into output files.

    The thread count shapes execution, never results, and output bytes
    must not depend on it, so it is omitted.
    """
    return {k: v for k, v in cfg.items() if k != "threads"}


def cmd_simulate(cfg: dict) -> int:
    spec = build_spec(cfg)
    result = run_mc(
        spec, cfg["method"], cfg["alpha"], cfg["reps"],
        master_seed=cfg["seed"], threads=cfg["threads"],
    )
    to_json([result], cfg["out"], config_echo=_echo(cfg))
    if cfg["table"] is not None:
        to_csv([result], cfg["table"])
    print(
        f"rejection rate = {result.rejection_rate:.4f} "
        f"+- {result.mc_stderr:.4f} "
        f"({result.rejections}/{result.reps} rejections, "
        f"{result.failures} failures)"
    )
    print(f"results written to {cfg['out']}")
    return EXIT_OK


def _parse_h_grid(text: str) -> list:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise UsageError(f"--h-grid expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError("--h-grid must contain at least one value")
    return values


def cmd_power(cfg: dict) -> int:
    spec = build_spec(cfg)
    results = power_curve(
        spec, cfg["method"], cfg["alpha"], cfg["reps"],
        _parse_h_grid(cfg["h_grid"]), cfg["seed"], threads=cfg["threads"],
    )
    to_json(results, cfg["out"], config_echo=_echo(cfg))
    if cfg["table"] is not None:
        to_csv(results, cfg["table"])
    for res in results:
        print(
            f"h = {res.spec.h:g}: rate = {res.rejection_rate:.4f} "
            f"+- {res.mc_stderr:.4f}"
        )
    print(f"results written to {cfg['out']}")
    return EXIT_OK


def _reproduce_theorem1(cfg: dict, n, p, reps):
    """Dense-signal size distortion of the debiased Wald test."""
    results, rows = [], []
    for idx, amp in enumerate(THEOREM1_AMPLITUDES):
        spec = DgpSpec(family="dense", n=n, p=p, amplitude=amp)
        res = run_mc(
            spec, "debias", 0.05, reps,
            master_seed=cfg["seed"] + idx, threads=cfg["threads"],
        )
        results.append(res)
        rows.append({
            "a": amp,
            "analytic_rate": wald_size_distortion(0.05, amp),
            "empirical_rate": res.rejection_rate,
            "mc_stderr": res.mc_stderr,
            "failures": res.failures,
        })
        print(
            f"a = {amp:g}: analytic {rows[-1]['analytic_rate']:.4f}, "
            f"empirical {res.rejection_rate:.4f} +- {res.mc_stderr:.4f}",
            file=sys.stderr,
        )
    csv_path = cfg["out"] + "/theorem1.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return results, csv_path, "theorem1.json"


def _reproduce_table1(cfg: dict, n, p, reps):
    """Size grid: both methods across correlation, error law, sparsity."""
    results = []
    cells = [
        (rho, error, s)
        for rho in (0.0, -0.5)
        for error in ("gaussian", "student_t3")
        for s in (3, n, p)
    ]
    for idx, (rho, error, s) in enumerate(cells):
        spec = DgpSpec(family="sparse", n=n, p=p, rho=rho, error=error, s=s)
        for method in ("corrt", "debias"):
            res = run_mc(
                spec, method, 0.05, reps,
                master_seed=cfg["seed"] + idx, threads=cfg["threads"],
            )
            results.append(res)
            print(
                f"rho = {rho:g}, error = {error}, s = {s}, {method}: "
                f"rate = {res.rejection_rate:.4f}",
                file=sys.stderr,
            )
    csv_path = cfg["out"] + "/table1.csv"
    to_csv(results, csv_path)
    return results, csv_path, "table1.json"


def _reproduce_power(cfg: dict, n, p, reps):
    """Rejection rate against local alternatives, sparse s=3 design."""
    spec = DgpSpec(family="sparse", n=n, p=p, rho=-0.5, s=3)
    results = power_curve(
        spec, "corrt", 0.05, reps, list(POWER_SHIFTS),
        cfg["seed"], threads=cfg["threads"],
    )
    for res in results:
        print(
            f"h = {res.spec.h:g}: rate = {res.rejection_rate:.4f}",
            file=sys.stderr,
        )
    csv_path = cfg["out"] + "/power.csv"
    to_csv(results, csv_path)
    return results, csv_path, "power.json"


def cmd_reproduce(cfg: dict) -> int:
    target = cfg["target"]
    os.makedirs(cfg["out"], exist_ok=True)
    n, p, reps = REPRODUCE_SCALES[target][cfg["scale"]]
    runner = {
        "theorem1": _reproduce_theorem1,
        "table1": _reproduce_table1,
        "power": _reproduce_power,
    }[target]
    results, csv_path, json_name = runner(cfg, n, p, reps)
    json_path = cfg["out"] + "/" + json_name
    to_json(results, json_path, config_echo=_echo(cfg))
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrt",
        description="Correlation test for one coefficient in a "
                    "high-dimensional linear model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--out", help="output JSON path")

    def add_data_flags(p):
        p.add_argument("--data", help="input CSV with a header row")
        p.add_argument("--y-col", dest="y_col",
                       help="response column (name or 0-based index)")
        p.add_argument("--test-col", dest="test_col",
                       help="tested column (name or 0-based index)")

    def add_sim_flags(p):
        p.add_argument("--family", choices=["sparse", "dense"])
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=int, help="total design columns")
        p.add_argument("--design", choices=["gaussian", "student_t3"])
        p.add_argument("--rho", type=float)
        p.add_argument("--error", choices=["gaussian", "student_t3"])
        p.add_argument("--s", type=int)
        p.add_argument("--amplitude", type=float)
        p.add_argument("--h", type=float)
        p.add_argument("--method", choices=["corrt", "debias"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--table", help="optional summary CSV path")

    p_test = sub.add_parser("test", help="run the significance test on a CSV")
    add_data_flags(p_test)
    p_test.add_argument("--beta0", type=float)
    p_test.add_argument("--alpha", type=float)
    add_common(p_test)

    p_ci = sub.add_parser("ci", help="confidence set by test inversion")
    add_data_flags(p_ci)
    p_ci.add_argument("--level", type=float)
    p_ci.add_argument("--grid", help="explicit grid as lo:hi:count")
    add_common(p_ci)

    p_sim = sub.add_parser("simulate", help="Monte Carlo for one DGP")
    add_sim_flags(p_sim)
    add_common(p_sim)

    p_pow = sub.add_parser("power", help="rejection rate across shifts")
    add_sim_flags(p_pow)
    p_pow.add_argument("--h-grid", dest="h_grid",
                       help="comma-separated shift values")
    add_common(p_pow)

    p_rep = sub.add_parser("reproduce", help="regenerate a canned experiment")
    p_rep.add_argument("target", choices=["theorem1", "table1", "power"])
    p_rep.add_argument("--scale", choices=["desk", "paper"])
    p_rep.add_argument("--seed", type=int)
    p_rep.add_argument("--threads", type=int)
    p_rep.add_argument("--config", help="key=value file; flags override it")
    p_rep.add_argument("--out", help="output directory")
    return parser


_DEFAULTS = {
    "test": {
        "command": "test", "data": None, "y_col": None, "test_col": None,
        "beta0": 0.0, "alpha": 0.05, "out": "corrt_test.json",
    },
    "ci": {
        "command": "ci", "data": None, "y_col": None, "test_col": None,
        "level": 0.95, "grid": None, "out": "corrt_ci.json",
    },
    "simulate": {
        "command": "simulate", "family": None, "n": None, "p": None,
        "design": "gaussian", "rho": 0.0, "error": "gaussian",
        "s": None, "amplitude": None, "h": 0.0, "method": "corrt",
        "alpha": 0.05, "reps": 100, "seed": 0, "threads": 1,
        "out": "simulate.json", "table": None,
    },
    "power": {
        "command": "power", "family": None, "n": None, "p": None,
        "design": "gaussian", "rho": 0.0, "error": "gaussian",
        "s": None, "amplitude": None, "h": 0.0, "method": "corrt",
        "alpha": 0.05, "reps": 100, "seed": 0, "threads": 1,
        "h_grid": "0,2,4,6", "out": "power.json", "table": None,
    },
    "reproduce": {
        "command": "reproduce", "target": None, "scale": "desk",
        "seed": 0, "threads": 1, "out": ".",
    },
}

_HANDLERS = {
    "test": cmd_test,
    "ci": cmd_ci,
    "simulate": cmd_simulate,
    "power": cmd_power,
    "reproduce": cmd_reproduce,
}


def _fail(code: int, exc: Exception) -> int:
    body = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(body, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args, _DEFAULTS[args.command])
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except DataError as exc:
        return _fail(EXIT_DATA, exc)
    except OSError as exc:
        return _fail(EXIT_DATA, exc)
    except (CorrtError, ValueError) as exc:
        return _fail(EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
