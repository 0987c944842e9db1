"""Command-line runner producing deterministic CSV/JSON tables.

Every subcommand is a pure function of its :class:`RunConfig`; the output
file carries a ``#``-prefixed header with the schema version and the full
config, so identical configs give byte-identical files.  Wall time goes to
stderr only.
"""

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from . import __version__
from .chain import WalkSpec, return_distribution, mean_return_exact, simulate_walkers
from .continuum import ContinuumModel, discrete_return, return_density
from .qstats import delta_scan

SCHEMA_VERSION = 1

SUBCOMMANDS = ("return-dist", "continuum", "table1", "delta-scan", "mean-return", "simulate")

COLUMNS = {
    "return-dist": ["s", "p_r_discrete", "p_r_continuum"],
    "continuum": ["s", "t", "return_density", "p_r_continuum", "truncation_estimate"],
    "table1": ["L", "s_max", "captured_mass", "survival"],
    "delta-scan": ["a", "L", "s_max", "q", "q_power", "beta_q", "delta", "captured_mass",
                   "tail_lo", "tail_hi", "error"],
    "mean-return": ["a", "L", "t1_exact", "t1_over_L", "t1_over_LlnL", "log2_ratio"],
    "simulate": ["s", "p_r_mc", "p_r_exact", "stderr"],
}


class ConfigError(ValueError):
    """A configuration value violates a module precondition."""


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(" ", "").split(",") if x]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(float(x)) for x in str(text).replace(" ", "").split(",") if x]


@dataclass
class RunConfig:
    """Parameters for one subcommand run; keys mirror the CLI flags."""

    command: str
    a: list = field(default_factory=lambda: [1.0])
    L: int = 1000
    L_list: list = field(default_factory=list)
    horizon_mult: float = 10.0
    s_max: int = 0
    terms: int = 0
    seed: int = 0
    n_walkers: int = 100000
    rows: int = 2000
    tail_from: float = -1.0
    q_fixed: float = 0.0
    q_method: str = "asymptotic"
    workers: int = 1
    out: str = "-"
    format: str = "csv"

    def horizon(self, L=None):
        L = self.L if L is None else L
        if self.s_max > 0:
            return int(self.s_max)
        return int(round(self.horizon_mult * L * L))

    def validate(self):
        if self.command not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.command!r}")
        if not self.a:
            raise ConfigError("a: at least one exponent required")
        for a in self.a:
            if not 0.0 <= a < 2.0:
                raise ConfigError(f"chain.WalkSpec: a must lie in [0, 2), got {a}")
        if self.command in ("continuum",) or (self.command == "return-dist" and self.terms > 0):
            for a in self.a:
                if not 0.0 < a < 2.0:
                    raise ConfigError(f"continuum.coefficients: needs 0 < a < 2, got {a}")
        if self.L < 2:
            raise ConfigError(f"chain.WalkSpec: L must be >= 2, got {self.L}")
        if any(L < 2 for L in self.L_list):
            raise ConfigError("chain.WalkSpec: every L in L-list must be >= 2")
        if self.command in ("table1", "delta-scan", "mean-return") and not self.L_list:
            raise ConfigError(f"{self.command}: --L-list is required")
        if self.command == "delta-scan" and any(b <= a for a, b in zip(self.L_list, self.L_list[1:])):
            raise ConfigError("qstats.delta_scan: L-list must be strictly increasing")
        if self.s_max < 0 or self.horizon_mult <= 0:
            raise ConfigError("chain.return_distribution: horizon must be >= 1")
        if self.command in ("return-dist", "continuum", "simulate") and self.horizon() < 1:
            raise ConfigError("chain.return_distribution: s_max must be >= 1")
        if self.command == "continuum" and self.terms < 1:
            raise ConfigError("continuum.ContinuumModel: --terms must be >= 1")
        if self.command == "simulate" and self.n_walkers < 1:
            raise ConfigError("chain.simulate_walkers: n_walkers must be >= 1")
        if self.q_fixed and not 1.0 < self.q_fixed < 2.0:
            raise ConfigError("qstats.fit_beta: q must satisfy 1 < q < 2")
        if self.q_method not in ("asymptotic", "power"):
            raise ConfigError(f"qstats.delta_scan: unknown q-method {self.q_method!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.rows < 0 or self.workers < 1:
            raise ConfigError("rows must be >= 0 and workers >= 1")
        return self

    # config file: flat ``key = value`` lines with the flag names as keys
    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name.replace('_', '-')} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, **overrides):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser.read_string("[run]\n" + text)
        raw = dict(parser["run"])
        raw.update({k.replace("_", "-"): v for k, v in overrides.items() if v is not None})
        return cls._coerce(raw)

    @classmethod
    def _coerce(cls, raw):
        kinds = {f.name: f for f in fields(cls)}
        kw = {}
        for key, val in raw.items():
            name = key.replace("-", "_")
            if name not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            default = kinds[name].default
            if name == "a":
                kw[name] = _floats(val)
            elif name == "L_list":
                kw[name] = _ints(val)
            elif isinstance(default, bool):
                kw[name] = str(val).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kw[name] = int(float(val))
            elif isinstance(default, float):
                kw[name] = float(val)
            else:
                kw[name] = str(val)
        if "command" not in kw:
            raise ConfigError("config needs a command")
        return cls(**kw)


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def _row_steps(s_max, rows):
    if rows == 0 or s_max <= rows:
        return np.arange(1, s_max + 1)
    return np.unique(np.round(np.geomspace(1, s_max, rows)).astype(np.int64))


def run_return_dist(cfg):
    a, L = cfg.a[0], cfg.L
    s_max = cfg.horizon()
    tf = None if cfg.tail_from < 0 else int(cfg.tail_from * L * L)
    series = return_distribution(WalkSpec(a, L), s_max, tail_from=tf)
    s = _row_steps(s_max, cfg.rows)
    cols = {"s": s, "p_r_discrete": series.at(s)}
    if cfg.terms > 0:
        model = ContinuumModel.build(a, L, cfg.terms)
        cols["p_r_continuum"] = discrete_return(model, s)[0]
    else:
        cols["p_r_continuum"] = np.full(len(s), np.nan)
    rows = list(zip(*(cols[c] for c in COLUMNS["return-dist"])))
    summary = {"captured_mass": series.captured_mass, "survival": series.survival,
               "method": series.meta["method"]}
    return rows, summary


def run_continuum(cfg):
    a, L = cfg.a[0], cfg.L
    model = ContinuumModel.build(a, L, cfg.terms)
    s = _row_steps(cfg.horizon(), cfg.rows)
    t = s / L
    dens, est = return_density(model, t)
    rows = list(zip(s, t, dens, dens / L ** 2, est))
    zeros = model.zeros
    return rows, {"nu": model.nu, "first_zero": float(zeros[0]), "last_zero": float(zeros[-1])}


def _table1_row(a, L, s_max, tail_from):
    tf = None if tail_from < 0 else int(tail_from * L * L)
    series = return_distribution(WalkSpec(a, L), s_max, tail_from=tf)
    return (L, s_max, series.captured_mass, series.survival)


def run_table1(cfg):
    a = cfg.a[0]
    args = [(a, L, cfg.horizon(L), cfg.tail_from) for L in cfg.L_list]
    rows = _map(_table1_row, args, cfg.workers)
    horizon = f"s_max = {cfg.s_max}" if cfg.s_max > 0 else f"s_max = {float(cfg.horizon_mult)!r} * L**2"
    return rows, {"horizon": horizon}


def run_delta_scan(cfg):
    rows = []
    tail_from = None if cfg.tail_from == 0 else (0.1 if cfg.tail_from < 0 else cfg.tail_from)
    for a in cfg.a:
        scan = delta_scan(a, cfg.L_list, cfg.horizon_mult, q_fixed=cfg.q_fixed or None,
                          tail_from=tail_from, q_method=cfg.q_method, workers=cfg.workers)
        for r in scan:
            rows.append(tuple(getattr(r, c) for c in COLUMNS["delta-scan"]))
    failed = sum(1 for r in rows if r[-1])
    return rows, {"failed_rows": failed}


def run_mean_return(cfg):
    rows = []
    for a in cfg.a:
        t1 = {}
        for L in cfg.L_list:
            t1[L] = mean_return_exact(WalkSpec(a, L)).mean_first_return
        for L in cfg.L_list:
            v = t1[L]
            half = t1.get(L // 2) if L % 2 == 0 else None
            ratio = math.log2(v / half) if half else float("nan")
            rows.append((a, L, v, v / L, v / (L * math.log(L)), ratio))
    return rows, {}


def run_simulate(cfg):
    a, L = cfg.a[0], cfg.L
    s_max = cfg.horizon()
    spec = WalkSpec(a, L)
    mc = simulate_walkers(spec, cfg.n_walkers, s_max, cfg.seed)
    exact = return_distribution(spec, s_max)
    s = _row_steps(s_max, cfg.rows)
    p = exact.at(s)
    se = np.sqrt(p * (1 - p) / cfg.n_walkers)
    rows = list(zip(s, mc.at(s), p, se))
    return rows, {"captured_mass_mc": mc.captured_mass, "captured_mass_exact": exact.captured_mass}


RUNNERS = {
    "return-dist": run_return_dist,
    "continuum": run_continuum,
    "table1": run_table1,
    "delta-scan": run_delta_scan,
    "mean-return": run_mean_return,
    "simulate": run_simulate,
}


def _map(fn, args, workers):
    if workers > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, *zip(*args)))
    return [fn(*x) for x in args]


def render(cfg, rows, summary):
    """Serialise a result table as CSV or JSON text."""
    cols = COLUMNS[cfg.command]
    if cfg.format == "json":
        doc = {
            "schema": f"rrw/{cfg.command}/v{SCHEMA_VERSION}",
            "version": __version__,
            "config": {k: v for k, v in asdict(cfg).items() if k != "workers"},
            "columns": cols,
            "rows": [[_json_value(v) for v in r] for r in rows],
            "summary": {k: _json_value(v) for k, v in summary.items()},
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema: rrw/{cfg.command}/v{SCHEMA_VERSION}\n")
    buf.write(f"# version: {__version__}\n")
    for line in cfg.to_text().splitlines():
        # the worker count schedules the run but never changes its result
        if not line.startswith("workers ="):
            buf.write(f"# config: {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(v) for v in r])
    for k, v in summary.items():
        buf.write(f"# {k}: {_fmt(v)}\n")
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def parse_table(text):
    """Parse CSV produced by :func:`render`; returns ``(schema, columns, rows, meta)``.

    Raises ``ValueError`` if the header does not match a known schema.
    """
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta.setdefault(key, []).append(val)
        elif line:
            body.append(line)
    records = list(csv.reader(body))
    cols, rows = (records[0], records[1:]) if records else (None, [])
    schema = meta.get("schema", [""])[0]
    parts = schema.split("/")
    if len(parts) != 3 or parts[0] != "rrw" or parts[1] not in COLUMNS:
        raise ValueError(f"unrecognised schema {schema!r}")
    if parts[2] != f"v{SCHEMA_VERSION}":
        raise ValueError(f"schema version {parts[2]} not supported")
    if cols != COLUMNS[parts[1]]:
        raise ValueError(f"columns {cols} do not match schema {schema}")
    return schema, cols, rows, meta


def run(cfg):
    """Validate ``cfg``, run its subcommand and return the rendered text."""
    cfg.validate()
    rows, summary = RUNNERS[cfg.command](cfg)
    return render(cfg, rows, summary)


def build_parser():
    parser = argparse.ArgumentParser(prog="rrw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file; flags override it")
        p.add_argument("--a", help="exponent, or comma list for delta-scan / mean-return")
        p.add_argument("--L", type=int)
        p.add_argument("--L-list", dest="L_list")
        p.add_argument("--horizon-mult", dest="horizon_mult", type=float,
                       help="s_max = horizon-mult * L**2 (default 10)")
        p.add_argument("--s-max", dest="s_max", type=int, help="explicit horizon; overrides the multiplier")
        p.add_argument("--terms", type=int, help="Fourier-Bessel terms N")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-walkers", dest="n_walkers", type=int)
        p.add_argument("--rows", type=int, help="log-spaced output rows; 0 writes every step")
        p.add_argument("--tail-from", dest="tail_from", type=float,
                       help="switch to the slow-mode tail at tail-from * L**2 steps")
        p.add_argument("--q-fixed", dest="q_fixed", type=float)
        p.add_argument("--q-method", dest="q_method", choices=["asymptotic", "power"])
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output path, '-' for stdout")
        p.add_argument("--format", choices=["csv", "json"])
    return parser


def config_from_args(ns):
    overrides = {k: v for k, v in vars(ns).items() if k != "config" and v is not None}
    text = ""
    if ns.config:
        with open(ns.config) as fh:
            text = fh.read()
    return RunConfig.from_text(text, **overrides)


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        t0 = time.perf_counter()
        text = run(cfg)
        wall = time.perf_counter() - t0
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"rrw {ns.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    print(f"rrw {cfg.command}: {wall:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
