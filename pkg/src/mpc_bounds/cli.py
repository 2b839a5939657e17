"""Command-line front end: ``mpc-bounds <config.json> [--output PATH] [--threads K] [--verbose]``.

The config is one JSON object. Top-level keys:

``channel``          ``{"noise_variance": N, "cost_threshold": Gamma}`` (required)
``constraints``      list of ``{"kind": ..., "budget": ..., <kind params>}``
``command``          ``limit | converse | achievability | sweep | verify`` (required)
``r``, ``r_grid``    second-order rate, or a list / ``{"start", "stop", "step"}``
``n``, ``n_grid``    blocklength, or a list
``units``            ``nats`` (default) or ``bits``; applies to ``r``
``sweep_kind``       bound computed by ``sweep``: ``limit | converse | achievability | analytic``
``estimator``        ``mc`` (default) or ``analytic`` for ``achievability``
``mc_samples``, ``seed``, ``batches``  Monte Carlo size; ``seed`` is mandatory for MC
``theta``            ``"default"`` (n^-3/4), ``"auto"`` or a positive number
``kappa_prime``      constant for the analytic curve (default 0)
``r_prime``          explicit converse split point (default: searched)
``mixture``          ``{"atoms": [...], "weights": [...]}`` in the u coordinate
                     (default: the optimal law of the limit at the same r)
``optimizer``        search options (``restarts``, ``seed``, ``weight_floor``, ...)
``checks``, ``quick``  verify selection and reduced Monte Carlo sizes
``output``, ``output_format``  path and ``csv`` (default) or ``jsonl``
``record_wall_time`` add a wall_time column (off by default; breaks byte-identical reruns)

Exit codes: 0 success, 2 config error, 3 numeric or infeasibility error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import bounds as bd
from . import channel as chn
from . import verify as vf
from .constraints import FUNCTION_KINDS, ConstraintSet, DiscreteDistribution, function_from_dict
from .optimizer import OptimizerResult, SearchOptions, asymptotic_limit
from .specfn import RegimeError

log = logging.getLogger("mpc_bounds")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("limit", "converse", "achievability", "sweep", "verify")
SWEEP_KINDS = ("limit", "converse", "achievability", "analytic")

COMMON_COLUMNS = ["command", "bound_kind", "n", "r", "units", "constraints", "value", "std_error", "status"]
KIND_COLUMNS = {
    "Limit": ["certificate_gap", "lower_bound", "atoms", "weights"],
    "LowerBound": ["r_prime", "gamma_thresh", "finite_n_value", "penalty", "slack"],
    "UpperBoundMC": ["theta", "samples", "seed"],
    "AnalyticCurve": ["kappa_prime"],
}
CHECK_COLUMNS = ["command", "check", "name", "passed", "value", "target", "detail"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    channel: chn.ChannelSpec
    constraints: ConstraintSet
    command: str
    r_values: list
    n_values: list
    units: str = "nats"
    sweep_kind: str = "limit"
    estimator: str = "mc"
    mc_samples: int = 100_000
    seed: int | None = None
    batches: int = 100
    theta: object = "default"
    kappa_prime: float = 0.0
    r_prime: float | None = None
    mixture: DiscreteDistribution | None = None
    optimizer: SearchOptions = field(default_factory=SearchOptions)
    checks: list | None = None
    quick: bool = False
    output: str | None = None
    output_format: str = "csv"
    record_wall_time: bool = False

    @property
    def bound(self) -> str:
        if self.command == "sweep":
            return self.sweep_kind
        if self.command == "achievability" and self.estimator == "analytic":
            return "analytic"
        return self.command

    def r_nats(self, r: float) -> float:
        return r * math.log(2.0) if self.units == "bits" else r


_TOP_KEYS = {
    "channel", "constraints", "command", "r", "r_grid", "n", "n_grid", "units", "sweep_kind", "estimator",
    "mc_samples", "seed", "batches", "theta", "kappa_prime", "r_prime", "mixture", "optimizer", "checks",
    "quick", "output", "output_format", "record_wall_time",
}
_OPT_KEYS = {f.name for f in fields(SearchOptions)} - {"threads"}


def _need(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _num(d, key, where, positive=False, integer=False, allow_zero=True):
    v = d[key]
    _need(isinstance(v, (int, float)) and not isinstance(v, bool), f"{where}.{key}", "must be a number")
    _need(math.isfinite(v), f"{where}.{key}", "must be finite")
    if integer:
        _need(float(v).is_integer(), f"{where}.{key}", "must be an integer")
        v = int(v)
    if positive:
        _need(v > 0 or (allow_zero and v == 0), f"{where}.{key}", "must be positive")
    return v


def _grid(spec, where):
    if isinstance(spec, list):
        _need(len(spec) > 0, where, "grid must be nonempty")
        out = []
        for i, x in enumerate(spec):
            _need(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x), f"{where}[{i}]", "must be a finite number")
            out.append(x)
        return out
    _need(isinstance(spec, dict), where, "must be a list or {start, stop, step}")
    extra = set(spec) - {"start", "stop", "step"}
    _need(not extra, where, f"unknown keys {sorted(extra)}")
    for k in ("start", "stop", "step"):
        _need(k in spec, where, f"missing {k}")
    start, stop, step = (_num(spec, k, where) for k in ("start", "stop", "step"))
    _need(step > 0, f"{where}.step", "must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    _need(count >= 1, where, "empty grid")
    # round to kill accumulation noise so that printed rates are clean
    return [float(np.round(start + i * step, 12)) for i in range(count)]


def config_from_dict(d: dict) -> RunConfig:
    _need(isinstance(d, dict), "config", "top level must be an object")
    unknown = set(d) - _TOP_KEYS
    _need(not unknown, "config", f"unknown keys {sorted(unknown)}")
    _need("channel" in d, "config", "missing channel")
    chd = d["channel"]
    _need(isinstance(chd, dict), "channel", "must be an object")
    _need(not set(chd) - {"noise_variance", "cost_threshold"}, "channel", f"unknown keys {sorted(set(chd) - {'noise_variance', 'cost_threshold'})}")
    for k in ("noise_variance", "cost_threshold"):
        _need(k in chd, "channel", f"missing {k}")
        _need(_num(chd, k, "channel") > 0, f"channel.{k}", "must be positive")
    ch = chn.ChannelSpec(float(chd["noise_variance"]), float(chd["cost_threshold"]))

    items = []
    cons = d.get("constraints", [])
    _need(isinstance(cons, list), "constraints", "must be a list")
    for i, it in enumerate(cons):
        where = f"constraints[{i}]"
        _need(isinstance(it, dict), where, "must be an object")
        _need("kind" in it and it["kind"] in FUNCTION_KINDS, f"{where}.kind", f"must be one of {sorted(FUNCTION_KINDS)}")
        _need("budget" in it, where, "missing budget")
        b = _num(it, "budget", where)
        _need(b >= 0, f"{where}.budget", "budget must lie in [0, inf)")
        params = {k: v for k, v in it.items() if k != "budget"}
        try:
            fn = function_from_dict(params)
        except TypeError as exc:
            raise ConfigError(f"{where}: bad parameters for {it['kind']}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        items.append((fn, float(b)))
    cs = ConstraintSet(ch.gamma, tuple(items))

    _need("command" in d, "config", "missing command")
    command = d["command"]
    _need(command in COMMANDS, "command", f"must be one of {list(COMMANDS)}")

    units = d.get("units", "nats")
    _need(units in ("nats", "bits"), "units", "must be nats or bits")
    if "r_grid" in d:
        _need("r" not in d, "r_grid", "give r or r_grid, not both")
        r_values = _grid(d["r_grid"], "r_grid")
    else:
        r_values = [_num(d, "r", "config")] if "r" in d else []
    if "n_grid" in d:
        _need("n" not in d, "n_grid", "give n or n_grid, not both")
        n_values = _grid(d["n_grid"], "n_grid")
        for i, n in enumerate(n_values):
            _need(float(n).is_integer() and n >= 2, f"n_grid[{i}]", "must be an integer >= 2")
        n_values = [int(n) for n in n_values]
    else:
        n_values = [_num(d, "n", "config", integer=True)] if "n" in d else []
        _need(all(n >= 2 for n in n_values), "n", "must be an integer >= 2")

    cfg = RunConfig(ch, cs, command, r_values, n_values, units=units)
    if "sweep_kind" in d:
        _need(d["sweep_kind"] in SWEEP_KINDS, "sweep_kind", f"must be one of {list(SWEEP_KINDS)}")
        cfg.sweep_kind = d["sweep_kind"]
    if "estimator" in d:
        _need(d["estimator"] in ("mc", "analytic"), "estimator", "must be mc or analytic")
        cfg.estimator = d["estimator"]
    if "mc_samples" in d:
        cfg.mc_samples = _num(d, "mc_samples", "config", integer=True)
    if "batches" in d:
        cfg.batches = _num(d, "batches", "config", integer=True)
        _need(cfg.batches >= 2, "batches", "must be at least 2")
    _need(cfg.mc_samples >= cfg.batches, "mc_samples", "must be at least the number of batches")
    if "seed" in d:
        cfg.seed = _num(d, "seed", "config", integer=True)
        _need(0 <= cfg.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
    if "theta" in d:
        t = d["theta"]
        if t not in ("default", "auto"):
            _need(isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t) and t > 0, "theta", "must be default, auto or a positive number")
        cfg.theta = t
    if "kappa_prime" in d:
        cfg.kappa_prime = float(_num(d, "kappa_prime", "config"))
    if "r_prime" in d:
        cfg.r_prime = float(_num(d, "r_prime", "config"))
    if "mixture" in d:
        m = d["mixture"]
        _need(isinstance(m, dict) and set(m) == {"atoms", "weights"}, "mixture", "must be {atoms, weights}")
        try:
            cfg.mixture = DiscreteDistribution(m["atoms"], m["weights"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mixture: {exc}") from None
    if "optimizer" in d:
        od = d["optimizer"]
        _need(isinstance(od, dict), "optimizer", "must be an object")
        bad = set(od) - _OPT_KEYS
        _need(not bad, "optimizer", f"unknown keys {sorted(bad)}")
        try:
            cfg.optimizer = SearchOptions(**od)
        except ValueError as exc:
            raise ConfigError(f"optimizer: {exc}") from None
    if "checks" in d:
        _need(isinstance(d["checks"], list), "checks", "must be a list")
        known = {str(k) for k in vf.ACCEPTANCE} | set(vf.EXTRA)
        bad = [c for c in d["checks"] if str(c) not in known]
        _need(not bad, "checks", f"unknown checks {bad}")
        cfg.checks = [str(c) for c in d["checks"]]
    for key in ("quick", "record_wall_time"):
        if key in d:
            _need(isinstance(d[key], bool), key, "must be true or false")
            setattr(cfg, key, d[key])
    if "output" in d:
        _need(isinstance(d["output"], str), "output", "must be a path string")
        cfg.output = d["output"]
    if "output_format" in d:
        _need(d["output_format"] in ("csv", "jsonl"), "output_format", "must be csv or jsonl")
        cfg.output_format = d["output_format"]

    # per-command requirements
    bound = cfg.bound
    if command != "verify":
        _need(cfg.r_values, "r", f"{command} needs r or r_grid")
        if bound != "limit":
            _need(cfg.n_values, "n", f"{bound} needs n or n_grid")
        _need(cs.condition2_holds, "constraints", "need at least one constraint function that grows without bound; use smoothed_step instead of step_indicator")
    if bound == "achievability" or command == "verify":
        _need(cfg.seed is not None, "seed", "seed is mandatory for Monte Carlo commands")
    if cfg.mixture is not None:
        for n in cfg.n_values:
            try:
                bd.AchievabilityQuery(ch, cs, n, 0.0, cfg.mixture, cfg.theta)
            except ValueError as exc:
                raise ConfigError(f"mixture: {exc} (n={n})") from None
    if cfg.r_prime is not None:
        _need(all(cfg.r_nats(cfg.r_prime) < cfg.r_nats(r) for r in cfg.r_values), "r_prime", "must be smaller than every r")
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return config_from_dict(d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# execution


def _opts(cfg: RunConfig, threads: int) -> SearchOptions:
    o = SearchOptions(**{f.name: getattr(cfg.optimizer, f.name) for f in fields(SearchOptions)})
    o.threads = threads
    return o


def _base_row(cfg, kind, n, r):
    return {
        "command": cfg.command,
        "bound_kind": kind,
        "n": n,
        "r": r,
        "units": cfg.units,
        "constraints": cfg.constraints.summary(),
    }


def _limit_row(cfg, r, res: OptimizerResult):
    row = _base_row(cfg, "Limit", None, r)
    row.update(
        value=res.value,
        std_error=None,
        status=res.status.value,
        certificate_gap=res.certificate_gap,
        lower_bound=res.lower_bound,
        atoms=" ".join(_fmt(a) for a in res.distribution.atoms),
        weights=" ".join(_fmt(w) for w in res.distribution.weights),
    )
    return row


def _evaluate(cfg: RunConfig, n, r, threads):
    """One result row for bound ``cfg.bound`` at ``(n, r)``; ``r`` in config units."""
    opts = _opts(cfg, threads)
    rn = cfg.r_nats(r)
    ch, cs = cfg.channel, cfg.constraints
    bound = cfg.bound
    if bound == "limit":
        return _limit_row(cfg, r, asymptotic_limit(ch, cs, rn, opts))
    if bound == "converse":
        rp = cfg.r_nats(cfg.r_prime) if cfg.r_prime is not None else None
        res = bd.converse_lower_bound(bd.ConverseQuery(ch, cs, n, rn, rp), opts)
        row = _base_row(cfg, "LowerBound", n, r)
        det = res.details
        row.update(
            value=res.value,
            std_error=None,
            status=res.status,
            r_prime=det["r_prime"] / (math.log(2.0) if cfg.units == "bits" else 1.0),
            gamma_thresh=det["gamma_thresh"],
            finite_n_value=det["finite_n_value"],
            penalty=det["penalty"],
            slack=det["slack"],
        )
        return row
    mixture = cfg.mixture
    status = "Given"
    if mixture is None:
        lim = asymptotic_limit(ch, cs, rn, opts)
        mixture, status = lim.distribution, lim.status.value
    mc = bd.MCConfig(cfg.mc_samples, cfg.seed, cfg.batches, threads) if cfg.seed is not None else None
    try:
        q = bd.AchievabilityQuery(ch, cs, n, rn, mixture, cfg.theta, mc)
    except ValueError as exc:
        raise NumericError(str(exc)) from None
    if bound == "analytic":
        row = _base_row(cfg, "AnalyticCurve", n, r)
        row.update(value=bd.analytic_achievability_curve(ch, q, cfg.kappa_prime), std_error=None, status=status, kappa_prime=cfg.kappa_prime)
        return row
    est = bd.mc_achievability_epsilon(q)
    row = _base_row(cfg, "UpperBoundMC", n, r)
    row.update(value=est.mean, std_error=est.std_error, status=status, theta=q.theta_value, samples=est.samples, seed=est.seed)
    return row


class NumericError(RuntimeError):
    pass


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def _columns(kind: str, wall: bool):
    cols = CHECK_COLUMNS if kind == "Check" else COMMON_COLUMNS + KIND_COLUMNS[kind]
    return cols + (["wall_time"] if wall else [])


class _Writer:
    """Single writer for CSV or JSON lines; CSV gets a header per bound kind."""

    def __init__(self, stream, fmt, wall):
        self.stream, self.fmt, self.wall = stream, fmt, wall
        self.header_for = None

    def write(self, row: dict):
        kind = row.get("bound_kind", "Check")
        cols = _columns(kind, self.wall)
        if self.fmt == "jsonl":
            out = {}
            for c in cols:
                v = row.get(c)
                out[c] = float(v) if isinstance(v, (np.floating,)) else (int(v) if isinstance(v, np.integer) else v)
            self.stream.write(json.dumps(out, allow_nan=True) + "\n")
        else:
            w = csv.writer(self.stream, lineterminator="\n")
            if self.header_for != kind:
                w.writerow(cols)
                self.header_for = kind
            w.writerow([_fmt(row.get(c)) for c in cols])
        self.stream.flush()

    def failure(self, message: str):
        row = {"command": "FAILED", "bound_kind": self.header_for or "Check", "status": f"FAILED: {message}", "detail": f"FAILED: {message}"}
        self.write(row)


def _rows(cfg: RunConfig, threads: int):
    if cfg.command == "verify":
        for key, res in vf.run_checks(cfg.checks, quick=cfg.quick, seed=cfg.seed or 0):
            yield {
                "command": "verify",
                "check": key,
                "name": res.name,
                "passed": bool(res.passed),
                "value": float(res.value),
                "target": float(res.target),
                "detail": res.detail,
                "_seconds": res.seconds,
            }
        return
    ns = cfg.n_values if cfg.bound != "limit" else [None]
    for n in ns:
        for r in cfg.r_values:
            t0 = time.perf_counter()
            row = _evaluate(cfg, n, r, threads)
            row["_seconds"] = time.perf_counter() - t0
            yield row


def run(cfg: RunConfig, stream, threads: int = 1) -> int:
    writer = _Writer(stream, cfg.output_format, cfg.record_wall_time)
    failed_checks = 0
    try:
        for row in _rows(cfg, threads):
            if cfg.record_wall_time:
                row["wall_time"] = row["_seconds"]
            if cfg.command == "verify":
                failed_checks += not row["passed"]
                log.info("check %s %s: %s", row["check"], row["name"], "pass" if row["passed"] else "FAIL")
            writer.write(row)
    except (NumericError, ArithmeticError, RegimeError, RuntimeError, ValueError) as exc:
        log.error("run failed: %s", exc)
        writer.failure(str(exc))
        return EXIT_NUMERIC
    return EXIT_NUMERIC if failed_checks else EXIT_OK


def _threads(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("MPC_BOUNDS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MPC_BOUNDS_THREADS must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mpc-bounds", description="Second-order limits and finite-blocklength bounds for the AWGN channel under several cost constraints.")
    ap.add_argument("config", help="path to the JSON run configuration")
    ap.add_argument("--output", help="output file (overrides the config; default stdout)")
    ap.add_argument("--threads", type=int, help="worker threads (overrides MPC_BOUNDS_THREADS)")
    ap.add_argument("--verbose", action="store_true", help="log progress to stderr")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        threads = _threads(args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = args.output or cfg.output
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            return run(cfg, fh, threads)
    buf = io.StringIO()
    code = run(cfg, buf, threads)
    sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
