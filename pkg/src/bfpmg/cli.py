"""Command line harness: each subcommand runs one study and writes a CSV table.

Usage::

    bfpmg <subcommand> [--config FILE] [--pde NAME] [--p LIST] [--levels A..B]
                       [--mode MODE] [--out DIR] [--set KEY=VALUE ...]

The configuration file holds ``key = value`` lines (``#`` starts a comment);
command-line options override it.  Every CSV starts with ``#`` comment lines
echoing the resolved configuration and its SHA-256 hash.  Exit status is 0 on
success, 2 when a built-in check on the results fails and 1 on errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .extfloat import precision

log = logging.getLogger("bfpmg")

SUBCOMMANDS = ("quant-error", "min-width", "fmg", "prec-est", "recompute-table")

DEFAULTS = {
    "pde": "poisson",
    "d": "1",
    "p": "1",
    "levels": "1..8",
    "mode": "qcomp",
    "schedule": "estimated",
    "fixed_width": "64",
    "N": "",
    "w_add_cap": "",
    "caps": "inf,4,2,0",
    "widths": "5,10,15",
    "count": "8",
    "target": "1.5",
    "max_iters": "50",
    "j_c": "5",
    "q_max": "64",
    "rho_thresh": "1.05",
    "precision": "400",
    "check": "true",
}

INT_KEYS = ("d", "fixed_width", "count", "max_iters", "j_c", "q_max", "precision")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        out[key] = value
    return out


def parse_levels(text: str) -> list[int]:
    """``"a..b"`` or a comma list, e.g. ``"4..10"`` or ``"1,3,5"``."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad level range {text!r}")
        return list(range(lo, hi + 1))
    levels = [int(t) for t in text.split(",") if t.strip()]
    if not levels or min(levels) < 1:
        raise ConfigError(f"bad level list {text!r}")
    return levels


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _cap(text: str):
    text = text.strip().lower()
    return None if text in ("", "inf", "none") else int(text)


@dataclass
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def levels(self) -> list[int]:
        return parse_levels(self.values["levels"])

    @property
    def ps(self) -> list[int]:
        return _int_list(self.values["p"])

    @property
    def check(self) -> bool:
        return self.values["check"].lower() in ("1", "true", "yes", "on")

    def integer(self, key: str) -> int:
        return int(self.values[key])

    def real(self, key: str) -> float:
        return float(self.values[key])

    def n_override(self):
        v = self.values["N"].strip()
        return int(v) if v else None

    def lines(self) -> list[str]:
        return [f"{k}={self.values[k]}" for k in sorted(self.values)]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()

    def validate(self):
        from .fem import ProblemSpec

        try:
            for k in INT_KEYS:
                int(self.values[k])
            for p in self.ps:
                ProblemSpec(self["pde"], self.integer("d"), p, max(self.levels))
            float(self.values["target"])
            float(self.values["rho_thresh"])
            _cap(self.values["w_add_cap"])
            [_cap(c) for c in self.values["caps"].split(",")]
            _int_list(self.values["widths"])
            self.n_override()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self["mode"] not in ("qcomp", "nnqcomp", "hybrid"):
            raise ConfigError(f"unknown mode {self['mode']!r}")
        if self["schedule"] not in ("estimated", "fixed"):
            raise ConfigError(f"unknown schedule {self['schedule']!r}")
        return self


def resolve_config(args) -> ExperimentConfig:
    values = dict(DEFAULTS)
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    for key in ("pde", "p", "levels", "mode"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = value
    return ExperimentConfig(values).validate()


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt(x, digits: int = 6) -> str:
    """Decimal with an explicit precision field (``%.{digits}e``) for reals."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x):.{digits}e}"


def render_csv(command: str, cfg: ExperimentConfig, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# bfpmg {__version__} {command}\n")
    for line in cfg.lines():
        buf.write(f"# {line}\n")
    buf.write(f"# config_sha256={cfg.digest()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _policy(cfg: ExperimentConfig, cap=None):
    from .multigrid import GammaPolicy

    return GammaPolicy(mode=cfg["mode"], w_add_cap=cap)


def _spec(cfg: ExperimentConfig, p: int, j: int):
    from .fem import ProblemSpec

    return ProblemSpec(cfg["pde"], cfg.integer("d"), p, j)


def _schedule(cfg, spec, hierarchy, policy):
    from .multigrid import Schedule, estimated_schedule

    if cfg["schedule"] == "fixed":
        w = cfg.integer("fixed_width")
        return Schedule.fixed(w, w, w, flat=False, name=f"fixed{w}")
    sched, _, _ = estimated_schedule(spec, hierarchy.ell, cfg.integer("j_c"), cfg.integer("q_max"),
                                     cfg.real("rho_thresh"), policy, hierarchy)
    return sched


# ---------------------------------------------------------------------------
# subcommands; each returns (header, rows, failures)
# ---------------------------------------------------------------------------

def cmd_quant_error(cfg: ExperimentConfig):
    """Relative energy errors of quantized smallest eigenvectors."""
    from .analysis import condition_numbers, quant_bound, quant_error, smallest_eigpairs
    from .multigrid import level_data

    header = ["pde", "p", "j", "i", "w", "E", "sqrt_kappa_times_eps"]
    rows, failures = [], []
    widths = _int_list(cfg["widths"])
    for p in cfg.ps:
        for j in cfg.levels:
            spec = _spec(cfg, p, j)
            A = level_data(spec).A_raw
            cond = condition_numbers(A, spec.m)
            eig = smallest_eigpairs(A, cfg.integer("count"))
            for i, v in enumerate(eig.eigenvectors, 1):
                for w in widths:
                    E = quant_error(v, w, A)
                    bound = quant_bound(cond.kappa, w)
                    rows.append([cfg["pde"], p, j, i, w, E, bound])
                    if E > 4 * bound:
                        failures.append(f"p={p} j={j} i={i} w={w}: E exceeds 4 sqrt(kappa) eps")
    return header, rows, failures


def cmd_min_width(cfg: ExperimentConfig):
    """Staged minimum-width search per level."""
    from .multigrid import solver_setup
    from .multigrid.minwidth import min_widths

    header = ["pde", "p", "j", "which", "min_bits"]
    rows, failures = [], []
    for p in cfg.ps:
        h = solver_setup(_spec(cfg, p, max(cfg.levels)))
        prev = None
        for j in cfg.levels:
            res = min_widths(h, j, cfg.integer("max_iters"), cfg.real("target"), _policy(cfg))
            for which in ("wcheck", "w", "wdot"):
                rows.append([cfg["pde"], p, j, which, getattr(res, which)])
            if prev is not None and any(getattr(res, k) < getattr(prev, k) for k in ("wcheck", "w", "wdot")):
                log.warning("p=%d: min widths decrease from level %d to %d", p, j - 1, j)
            prev = res
    return header, rows, failures


def _count_by_level(trace):
    out: dict = {}
    for t in trace:
        key = t.fmg_level
        c = out.setdefault(key, [0, 0, 0])
        c[0] += 1
        c[1] += int(t.recomputed)
        c[2] += int(t.saturated > 0)
    return out


def cmd_fmg(cfg: ExperimentConfig):
    """FMG errors per level under the configured schedule and mode."""
    from .multigrid import BfpMultigrid, solver_setup

    header = ["pde", "p", "j", "schedule", "mode", "wcheck", "w", "wdot", "error", "ref_error",
              "ratio", "calls", "recomputations", "saturated_calls"]
    rows, failures = [], []
    top = max(cfg.levels)
    for p in cfg.ps:
        spec = _spec(cfg, p, top)
        h = solver_setup(spec)
        pol = _policy(cfg, _cap(cfg["w_add_cap"]))
        sched = _schedule(cfg, spec, h, pol)
        res = BfpMultigrid(h, sched, pol).fmg(top, cfg.n_override())
        counts = _count_by_level(res.trace)
        for j in cfg.levels:
            lv = h.level(j)
            x = res.per_level[j]
            ratio = lv.ratio(x)
            c = counts.get(j, [0, 0, 0])
            rows.append([cfg["pde"], p, j, sched.name, cfg["mode"], *sched.widths(j),
                         lv.error(x), lv.reference_error, ratio, *c])
            if cfg["schedule"] == "estimated" and not ratio <= cfg.real("target"):
                failures.append(f"p={p} j={j}: ratio {ratio:.4f} > {cfg['target']}")
    return header, rows, failures


def cmd_prec_est(cfg: ExperimentConfig):
    """Estimated width schedules and the FMG accuracy they reach."""
    from .multigrid import BfpMultigrid, estimated_schedule, solver_setup

    header = ["pde", "p", "j", "wcheck", "w", "wdot", "q_check", "q_w", "q_dot", "eta", "ratio"]
    rows, failures = [], []
    top = max(cfg.levels)
    for p in cfg.ps:
        spec = _spec(cfg, p, top)
        h = solver_setup(spec)
        pol = _policy(cfg)
        sched, west, pest = estimated_schedule(spec, top, cfg.integer("j_c"), cfg.integer("q_max"),
                                               cfg.real("rho_thresh"), pol, h)
        res = BfpMultigrid(h, sched, pol, record=False).fmg(top, cfg.n_override())
        for j in cfg.levels:
            wc, w, wd = sched.widths(j)
            ratio = h.level(j).ratio(res.per_level[j])
            rows.append([cfg["pde"], p, j, wc, w, wd, pest.q_check, west.q_w, pest.q_dot,
                         float(h.cheb.eta), ratio])
            if not wc >= w >= wd:
                failures.append(f"p={p} j={j}: schedule not ordered")
            if not ratio <= cfg.real("target"):
                failures.append(f"p={p} j={j}: ratio {ratio:.4f} > {cfg['target']}")
    return header, rows, failures


def recompute_counts(trace, level: int) -> tuple[int, int]:
    """``(recomputing calls, normalized calls)`` of the FMG stage on ``level``, restricted to that level."""
    calls = [t for t in trace if t.fmg_level == level and t.level == level and t.normalized]
    return sum(t.recomputed for t in calls), len(calls)


def cmd_recompute_table(cfg: ExperimentConfig):
    """Recomputation counts on the finest level for several ``w_add`` caps."""
    from .multigrid import BfpMultigrid, solver_setup

    header = ["pde", "p", "j", "w_add_cap", "recomputations", "calls"]
    rows, failures = [], []
    top = max(cfg.levels)
    caps = [_cap(c) for c in cfg["caps"].split(",")]
    for p in cfg.ps:
        spec = _spec(cfg, p, top)
        h = solver_setup(spec)
        sched = _schedule(cfg, spec, h, _policy(cfg))
        prev = None
        for cap in caps:
            res = BfpMultigrid(h, sched, _policy(cfg, cap)).fmg(top, cfg.n_override())
            rec, total = recompute_counts(res.trace, top)
            rows.append([cfg["pde"], p, top, "inf" if cap is None else cap, rec, total])
            if prev is not None and rec < prev:
                log.warning("p=%d: recomputations decrease as the cap shrinks", p)
            prev = rec
            if cap is None and rec > 0:
                failures.append(f"p={p}: {rec} recomputations without a cap")
    return header, rows, failures


COMMANDS = {
    "quant-error": cmd_quant_error,
    "min-width": cmd_min_width,
    "fmg": cmd_fmg,
    "prec-est": cmd_prec_est,
    "recompute-table": cmd_recompute_table,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bfpmg", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"bfpmg {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=COMMANDS[name].__doc__)
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--pde", choices=("poisson", "biharmonic"))
        sp.add_argument("--p", help="polynomial degree(s), comma separated")
        sp.add_argument("--levels", help="level range a..b or comma list")
        sp.add_argument("--mode", choices=("qcomp", "nnqcomp", "hybrid"))
        sp.add_argument("--out", help="output directory (default: standard output)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        with precision(cfg.integer("precision")):
            header, rows, failures = COMMANDS[args.command](cfg)
        text = render_csv(args.command, cfg, header, rows)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{args.command}.csv").write_text(text)
        else:
            sys.stdout.write(text)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"bfpmg: error: {exc}", file=sys.stderr)
        return 1
    if not cfg.check:
        failures = []
    for f in failures:
        print(f"bfpmg: check failed: {f}", file=sys.stderr)
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
