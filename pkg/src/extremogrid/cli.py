"""Batch command line front end.

Five subcommands cover the pipeline: ``simulate`` writes a field,
``theory`` tabulates closed-form dependence values, ``estimate`` runs the
empirical estimator on a simulated or stored field, ``clt`` runs the
replicated deviation experiment, and ``bias`` tabulates the deterministic
centering bias sweep.

Options may come from a key=value config file (--config); explicit flags
win.  Every output embeds the fully resolved configuration and its hash,
outputs are written atomically, and identical configurations produce
byte-identical files.  Exit codes: 0 success, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .clt import bias_curve, clt_report, plan
from .estimators import empirical_extremogram, threshold
from .fields import field_to_bytes, read_field, simulate_field
from .lattice import Grid, LagSet, lags_within
from .models import BrModel, IidModel, MmaModel, Variogram
from .output import atomic_write_bytes, atomic_write_text, config_hash, csv_text, json_text
from .theory import Interval, dependence_table

__all__ = ["main"]


class ConfigError(ValueError):
    """A configuration value is missing or invalid."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


# ---------------------------------------------------------------------------
# option handling
# ---------------------------------------------------------------------------

_COMMON = {
    "model": "iid",
    "n": 100,
    "d": 1,
    "phi": None,
    "R": None,
    "theta": None,
    "alpha": None,
    "norm": "sup",
    "seed": 0,
    "out": None,
    "format": None,
    "jobs": 1,
}

_DEFAULTS = {
    "simulate": {**_COMMON, "format": "bin"},
    "theory": {**_COMMON, "lags": "ball:2", "sets": "(1,inf),(1,inf)", "m": 10,
               "format": "csv"},
    "estimate": {**_COMMON, "lags": None, "sets": "(1,inf),(1,inf)", "m": None,
                 "gamma": None, "threshold_mode": "analytic", "infile": None,
                 "format": "csv"},
    "clt": {**_COMMON, "lags": None, "sets": "(1,inf),(1,inf)", "beta1": 0.4,
            "beta2": 0.05, "reps": 100, "center": "pre", "r_trunc": None,
            "sigma_fields": 20, "format": "json"},
    "bias": {**_COMMON, "lag": "1", "sets": "(1,inf),(1,inf)", "beta1_list": "0.4,0.25",
             "n_sweep": "10000,100000,1000000", "format": "csv"},
}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--model", choices=["iid", "mma", "br"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--phi", type=float, help="mma weight base in (0,1)")
    sp.add_argument("--R", type=int, help="mma truncation radius")
    sp.add_argument("--theta", type=float, help="br variogram scale")
    sp.add_argument("--alpha", type=float, help="br variogram exponent in (0,2]")
    sp.add_argument("--norm", choices=["sup", "euclidean"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output path")
    sp.add_argument("--jobs", type=int, help="parallel workers for replicates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extremogrid",
        description="max-stable lattice fields: simulation, dependence "
        "estimation and asymptotic checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate one field and write it")
    _add_common(sp)
    sp.add_argument("--format", choices=["bin", "csv"])

    sp = sub.add_parser("theory", help="closed-form dependence table")
    _add_common(sp)
    sp.add_argument("--lags", help="e.g. '0..5', '1,0;1,1' or 'ball:2'")
    sp.add_argument("--sets", help="interval pair, e.g. '(1,inf),(1,2)'")
    sp.add_argument("--m", type=int, help="threshold index for finite-level columns")
    sp.add_argument("--format", choices=["csv", "json"])

    sp = sub.add_parser("estimate", help="empirical dependence estimates")
    _add_common(sp)
    sp.add_argument("--lags", help="nonzero lags, e.g. '1..3' or '1,0;1,1'")
    sp.add_argument("--sets")
    sp.add_argument("--m", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--threshold-mode", dest="threshold_mode",
                    choices=["analytic", "empirical"])
    sp.add_argument("--in", dest="infile", help="read a stored field instead of simulating")
    sp.add_argument("--format", choices=["csv", "json"])

    sp = sub.add_parser("clt", help="replicated scaled-deviation experiment")
    _add_common(sp)
    sp.add_argument("--lags")
    sp.add_argument("--sets")
    sp.add_argument("--beta1", type=float)
    sp.add_argument("--beta2", type=float)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--center", choices=["pre", "true"])
    sp.add_argument("--r-trunc", dest="r_trunc", type=int)
    sp.add_argument("--sigma-fields", dest="sigma_fields", type=int)
    sp.add_argument("--format", choices=["json", "csv"])

    sp = sub.add_parser("bias", help="deterministic centering-bias sweep")
    _add_common(sp)
    sp.add_argument("--lag", help="single lag, e.g. '1' or '1,1'")
    sp.add_argument("--sets")
    sp.add_argument("--beta1-list", dest="beta1_list", help="e.g. '0.4,0.25'")
    sp.add_argument("--n-sweep", dest="n_sweep", help="e.g. '1e4,1e5,1e6'")
    sp.add_argument("--format", choices=["csv", "json"])

    return parser


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError("config", f"line {lineno} is not key=value")
                key, value = line.split("=", 1)
                out[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return out


_CASTS = {
    "model": str, "n": int, "d": int, "phi": float, "R": int, "theta": float,
    "alpha": float, "norm": str, "seed": int, "out": str, "format": str,
    "jobs": int, "lags": str, "sets": str, "m": int, "gamma": float,
    "threshold_mode": str, "infile": str, "beta1": float, "beta2": float,
    "reps": int, "center": str, "r_trunc": int, "sigma_fields": int,
    "lag": str, "beta1_list": str, "n_sweep": str,
}


def _coerce(key: str, raw):
    caster = _CASTS[key]
    try:
        if caster is int:
            return int(float(raw))
        return caster(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse {raw!r}") from exc


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    defaults = _DEFAULTS[args.command]
    file_cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in file_cfg:
        if key not in defaults:
            raise ConfigError(key, f"unknown option for command {args.command!r}")
    resolved = {"command": args.command}
    for key, default in defaults.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            resolved[key] = flag_val
        elif key in file_cfg:
            resolved[key] = _coerce(key, file_cfg[key])
        else:
            resolved[key] = default
    return resolved


# ---------------------------------------------------------------------------
# value parsing
# ---------------------------------------------------------------------------


def parse_interval(text: str) -> Interval:
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise ConfigError("sets", f"interval {text!r} must look like '(a,b)'")
    parts = text[1:-1].split(",")
    if len(parts) != 2:
        raise ConfigError("sets", f"interval {text!r} needs two endpoints")
    try:
        lo = float(parts[0])
        hi = float("inf") if parts[1].strip() == "inf" else float(parts[1])
        return Interval(lo, hi)
    except ValueError as exc:
        raise ConfigError("sets", str(exc)) from exc


def parse_sets(text: str) -> tuple[Interval, Interval]:
    depth, cut = 0, None
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            cut = i
            break
    if cut is None:
        raise ConfigError("sets", f"expected two intervals in {text!r}")
    return parse_interval(text[:cut]), parse_interval(text[cut + 1 :])


def parse_lags(text: str, d: int, norm: str) -> tuple[tuple[int, ...], ...]:
    text = text.strip()
    try:
        if text.startswith("ball:"):
            gamma = float(text[5:])
            return lags_within(gamma, d, norm)
        if ".." in text and d == 1:
            lo, hi = text.split("..", 1)
            return tuple((k,) for k in range(int(lo), int(hi) + 1))
        lags = []
        for part in text.split(";"):
            part = part.strip()
            if not part:
                continue
            comps = tuple(int(c) for c in part.split(","))
            if len(comps) != d:
                raise ConfigError(
                    "lags", f"lag {part!r} has {len(comps)} components, expected {d}"
                )
            lags.append(comps)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("lags", f"cannot parse {text!r}") from exc
    if not lags:
        raise ConfigError("lags", f"no lags in {text!r}")
    return tuple(lags)


def _floats(text: str, field: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(field, f"cannot parse {text!r}") from exc


def build_model(cfg: dict):
    name = cfg["model"]
    d = cfg["d"]
    if d is None or d < 1:
        raise ConfigError("d", f"dimension must be >= 1, got {d}")
    if name == "iid":
        return IidModel(d=d)
    if name == "mma":
        if cfg.get("phi") is None:
            raise ConfigError("phi", "required for the mma model")
        try:
            return MmaModel(phi=cfg["phi"], d=d, trunc_radius=cfg.get("R"),
                            norm=cfg["norm"])
        except ValueError as exc:
            raise ConfigError("phi", str(exc)) from exc
    if name == "br":
        if cfg.get("theta") is None:
            raise ConfigError("theta", "required for the br model")
        if cfg.get("alpha") is None:
            raise ConfigError("alpha", "required for the br model")
        try:
            return BrModel(variogram=Variogram(theta=cfg["theta"], alpha=cfg["alpha"]), d=d)
        except ValueError as exc:
            raise ConfigError("alpha", str(exc)) from exc
    raise ConfigError("model", f"unknown model {name!r}")


#: run-environment details that do not identify the experiment
_UNHASHED = ("out", "jobs")


def _science_dict(cfg: dict) -> dict:
    return {k: str(v) for k, v in cfg.items() if k not in _UNHASHED}


def _echo(cfg: dict) -> tuple[list[str], str]:
    science = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    digest = config_hash(science)
    lines = [f"config_hash: {digest}"]
    lines += [f"{k}: {science[k]}" for k in sorted(science)]
    return lines, digest


def _require_out(cfg: dict) -> str:
    if not cfg.get("out"):
        raise ConfigError("out", "an output path is required")
    return cfg["out"]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_simulate(cfg: dict) -> None:
    model = build_model(cfg)
    out = _require_out(cfg)
    grid = Grid(n=cfg["n"], d=cfg["d"])
    field = simulate_field(model, grid, cfg["seed"])
    if cfg["format"] == "bin":
        atomic_write_bytes(out, field_to_bytes(field))
        return
    header, _ = _echo(cfg)
    cols = [f"s{k+1}" for k in range(grid.d)] + ["value"]
    sites = grid.sites()
    flat = field.flat()
    rows = [
        {**{f"s{k+1}": int(s[k]) for k in range(grid.d)}, "value": float(v)}
        for s, v in zip(sites, flat)
    ]
    atomic_write_text(out, csv_text(cols, rows, header))


def _cmd_theory(cfg: dict) -> None:
    model = build_model(cfg)
    out = _require_out(cfg)
    a_set, b_set = parse_sets(cfg["sets"])
    lags = parse_lags(cfg["lags"], cfg["d"], cfg["norm"])
    rows = dependence_table(model, lags, a_set, b_set, cfg["m"])
    header, digest = _echo(cfg)
    if cfg["format"] == "json":
        payload = {"config": _science_dict(cfg),
                   "config_hash": digest,
                   "rows": [{**r, "lag": list(r["lag"])} for r in rows]}
        atomic_write_text(out, json_text(payload))
        return
    cols = [f"h{k+1}" for k in range(cfg["d"])] + [
        "theta", "rho_true", "rho_pre", "rho_taylor"]
    flat_rows = []
    for r in rows:
        row = {f"h{k+1}": r["lag"][k] for k in range(cfg["d"])}
        row.update({k: r[k] for k in ("theta", "rho_true", "rho_pre", "rho_taylor")})
        flat_rows.append(row)
    atomic_write_text(out, csv_text(cols, flat_rows, header))


def _cmd_estimate(cfg: dict) -> None:
    out = _require_out(cfg)
    a_set, b_set = parse_sets(cfg["sets"])
    if cfg.get("infile"):
        field = read_field(cfg["infile"])
        cfg = {**cfg, "n": field.grid.n, "d": field.grid.d}
    else:
        model = build_model(cfg)
        field = simulate_field(model, Grid(n=cfg["n"], d=cfg["d"]), cfg["seed"])
    if cfg.get("m") is None:
        raise ConfigError("m", "a threshold index is required")
    if cfg.get("lags") is None:
        raise ConfigError("lags", "a lag specification is required")
    lags = parse_lags(cfg["lags"], cfg["d"], cfg["norm"])
    gamma = cfg["gamma"] if cfg.get("gamma") is not None else _default_gamma(lags, cfg["norm"])
    try:
        lag_set = LagSet(lags, gamma=gamma, norm=cfg["norm"])
    except ValueError as exc:
        raise ConfigError("lags", str(exc)) from exc
    thr = threshold(field, cfg["m"], mode=cfg["threshold_mode"])
    series = empirical_extremogram(field, lag_set, a_set, b_set, thr.value,
                                   meta={"m": cfg["m"]})
    header, digest = _echo(cfg)
    if cfg["format"] == "json":
        payload = {"config": _science_dict(cfg),
                   "config_hash": digest,
                   "rows": [{**r, "lag": list(r["lag"])} for r in series.rows()]}
        atomic_write_text(out, json_text(payload))
        return
    cols = [f"h{k+1}" for k in range(cfg["d"])] + [
        "value", "kind", "n", "m", "a_m", "seed"]
    flat_rows = []
    for h, v in zip(series.lags, series.values):
        row = {f"h{k+1}": h[k] for k in range(cfg["d"])}
        row.update({"value": float(v), "kind": series.kind, "n": cfg["n"],
                    "m": cfg["m"], "a_m": thr.value, "seed": field.seed})
        flat_rows.append(row)
    atomic_write_text(out, csv_text(cols, flat_rows, header))


def _default_gamma(lags, norm: str) -> float:
    from .lattice import lag_norm

    return max(lag_norm(h, norm) for h in lags)


def _cmd_clt(cfg: dict) -> None:
    model = build_model(cfg)
    out = _require_out(cfg)
    a_set, b_set = parse_sets(cfg["sets"])
    if cfg.get("lags") is None:
        raise ConfigError("lags", "a lag specification is required")
    lags = parse_lags(cfg["lags"], cfg["d"], cfg["norm"])
    try:
        lag_set = LagSet(lags, gamma=_default_gamma(lags, cfg["norm"]), norm=cfg["norm"])
        plan_ = plan(cfg["n"], cfg["d"], cfg["beta1"], cfg["beta2"])
    except ValueError as exc:
        raise ConfigError("beta1", str(exc)) from exc
    center = {"pre": "preasymptotic", "true": "true"}[cfg["center"]]
    report = clt_report(
        model, plan_, lag_set, a_set, b_set, cfg["reps"], cfg["seed"],
        center=center, r_trunc=cfg.get("r_trunc"),
        sigma_fields=cfg["sigma_fields"], n_jobs=cfg["jobs"],
    )
    header, digest = _echo(cfg)
    if cfg["format"] == "csv":
        cols = ["rep"] + [f"h{k+1}" for k in range(cfg["d"])] + ["deviation"]
        rows = []
        for rep, row in enumerate(report.samples):
            for h, dev in zip(report.lags, row):
                rows.append({**{"rep": rep}, **{f"h{k+1}": h[k] for k in range(cfg["d"])},
                             "deviation": float(dev)})
        atomic_write_text(out, csv_text(cols, rows, header))
        return
    payload = report.to_json_dict()
    payload["config"] = _science_dict(cfg)
    payload["config_hash"] = digest
    atomic_write_text(out, json_text(payload))


def _cmd_bias(cfg: dict) -> None:
    model = build_model(cfg)
    out = _require_out(cfg)
    a_set, b_set = parse_sets(cfg["sets"])
    lag = parse_lags(cfg["lag"], cfg["d"], cfg["norm"])[0]
    beta1s = _floats(cfg["beta1_list"], "beta1-list")
    ns = [int(x) for x in _floats(cfg["n_sweep"], "n-sweep")]
    rows = bias_curve(model, a_set, b_set, lag, beta1s, ns)
    header, digest = _echo(cfg)
    if cfg["format"] == "json":
        payload = {"config": _science_dict(cfg),
                   "config_hash": digest, "rows": rows}
        atomic_write_text(out, json_text(payload))
        return
    cols = ["n", "beta1", "m", "scaled_bias", "reference", "ratio"]
    atomic_write_text(out, csv_text(cols, rows, header))


_COMMANDS = {
    "simulate": _cmd_simulate,
    "theory": _cmd_theory,
    "estimate": _cmd_estimate,
    "clt": _cmd_clt,
    "bias": _cmd_bias,
}


def _error_json(exc: Exception, field: str | None = None) -> str:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if field is not None:
        payload["error"]["field"] = field
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        command = _COMMANDS[cfg["command"]]
    except ConfigError as exc:
        print(_error_json(exc, exc.field), file=sys.stderr)
        return 2
    try:
        command(cfg)
    except ConfigError as exc:
        print(_error_json(exc, exc.field), file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures get a machine-readable trailer
        print(_error_json(exc), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
