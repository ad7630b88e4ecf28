"""Experiment harness: INI-style configs in, CSV reports out.

A config is flat ``key = value`` text under section headers::

    [experiment]
    kind = BANDIT_REGRET        ; BANDIT_REGRET | SELF_PLAY | RPO_VERIFY | OVERHEAD
    selectors = UCT1, UCT_V
    seeds = 0-99                ; ranges and comma lists
    output = results/regret

    [selector]                  ; shared constants, overridable per rule
    c = 1.25
    [selector.UCT1]
    c = 1.4142135623730951

See the README for every section and key.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import enum
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import ALL_RULES, Rule, SelectorParams
from .engine import SearchConfig, VarianceSource, run_search
from .envs import Arm, BanditSpec, GridworldSpec, gridworld_env, regret_curves
from .learner import TabularModel, self_play_curve
from .rpo import run_invariant_suite

OUTPUT_ENV = "VAMCTS_OUTPUT_DIR"
DEFAULT_OUTPUT = "vamcts-results"
CSV_HEADER = ("selector", "seed", "checkpoint", "metric", "value")


class ExperimentKind(str, enum.Enum):
    BANDIT_REGRET = "BANDIT_REGRET"
    SELF_PLAY = "SELF_PLAY"
    RPO_VERIFY = "RPO_VERIFY"
    OVERHEAD = "OVERHEAD"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None,
                 source: str = "<config>"):
        self.line, self.field, self.source = line, field, source
        where = source if line is None else f"{source}:{line}"
        what = f" {field}:" if field else ""
        super().__init__(f"{where}:{what} {message}")


class ReportError(OSError):
    pass


@dataclass(frozen=True)
class OverheadSpec:
    total_simulations: int = 1_000_000
    simulations_per_search: int = 64
    rounds: int = 1000


@dataclass(frozen=True)
class SelfPlaySpec:
    iterations: int = 20
    batch: int = 4
    lr: float = 0.1
    eval_every: int = 5
    eval_episodes: int = 50
    temperature: float = 1.0


def default_gridworld() -> GridworldSpec:
    return GridworldSpec(5, 5, {(4, 4): 1.0, (4, 0): 0.3}, (0, 0), slip=0.2, max_steps=50)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    selectors: tuple[SelectorParams, ...]
    seeds: tuple[int, ...]
    output: str | None = None
    jobs: int = 1
    bandit: BanditSpec = field(default_factory=lambda: BanditSpec.bernoulli([0.9, 0.85, 0.1, 0.05]))
    horizon: int = 10_000
    checkpoints: tuple[int, ...] = ()
    gridworld: GridworldSpec = field(default_factory=default_gridworld)
    search: SearchConfig = field(default_factory=SearchConfig)
    self_play: SelfPlaySpec = field(default_factory=SelfPlaySpec)
    overhead: OverheadSpec = field(default_factory=OverheadSpec)

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        if self.kind is not ExperimentKind.RPO_VERIFY and not self.selectors:
            raise ConfigError("at least one selector is required", field="selectors")
        if not self.seeds:
            raise ConfigError("at least one seed is required", field="seeds")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive", field="jobs")
        if not self.checkpoints:
            object.__setattr__(self, "checkpoints", (self.horizon,))
        if any(not 1 <= c <= self.horizon for c in self.checkpoints):
            raise ConfigError("checkpoints must lie in [1, horizon]", field="checkpoints")

    @property
    def rules(self) -> list[str]:
        return [p.rule.value for p in self.selectors]


# --- parsing ------------------------------------------------------------------

def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0-2, 7"`` -> ``(0, 1, 2, 7)``; order kept, duplicates dropped."""
    seeds = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        if m:
            lo, hi = int(m[1]), int(m[2])
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    return tuple(dict.fromkeys(seeds))


_ARM = re.compile(r"(bernoulli|gaussian)\(([^)]*)\)|([0-9.eE+-]+)")


def parse_arms(text: str) -> BanditSpec:
    """``"bernoulli(0.9), gaussian(0.5, 0.1), 0.2"``; a bare number is Bernoulli."""
    arms = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _ARM.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse arm at {text[pos:]!r}")
        if m[3] is not None:
            arms.append(Arm.bernoulli(float(m[3])))
        else:
            args = [float(a) for a in m[2].split(",")]
            arms.append(Arm.bernoulli(*args) if m[1] == "bernoulli" else Arm.gaussian(*args))
        pos = m.end()
        rest = re.match(r"\s*,?\s*", text[pos:])
        pos += rest.end()
    return BanditSpec(arms)


def _parse_cell(text: str) -> tuple[int, int]:
    x, y = text.replace(",", " ").split()
    return int(x), int(y)


def _parse_goals(text: str) -> dict:
    """``"4 4 = 1.0; 4 0 = 0.3"``"""
    goals = {}
    for item in filter(None, (s.strip() for s in text.split(";"))):
        cell, _, reward = item.partition("=")
        goals[_parse_cell(cell)] = float(reward)
    return goals


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


class _Reader:
    """Typed access to a parsed config with line numbers in errors."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.lines = text.splitlines()
        self.cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                            interpolation=None)
        self.cp.optionxform = str.lower
        try:
            self.cp.read_string(text, source)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None),
                              source=source) from exc
        self.used = set()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for i, raw in enumerate(self.lines, start=1):
            line = raw.strip()
            m = re.fullmatch(r"\[([^\]]+)\]", line)
            if m:
                current = m[1].strip()
                if key is None and current == section:
                    return i
                continue
            if current == section and key is not None:
                name = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
                if name == key:
                    return i
        return None

    def error(self, section, key, message) -> ConfigError:
        name = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(message, self.line_of(section, key), name, self.source)

    def get(self, section: str, key: str, conv=str, default=None):
        self.used.add((section, key))
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise self.error(section, key, f"invalid value {raw!r}: {exc}") from exc

    def check_unknown(self):
        for section in self.cp.sections():
            for key in self.cp.options(section):
                if (section, key) not in self.used:
                    raise self.error(section, key, "unknown key")


_KNOWN_SECTIONS = {"experiment", "selector", "bandit", "gridworld", "search", "self_play", "overhead"}


def _selector_params(r: _Reader, rule: Rule, shared: dict) -> SelectorParams:
    section = f"selector.{rule.value}"
    kw = dict(shared)
    for key in ("c", "c1", "c2"):
        val = r.get(section, key, float)
        if val is not None:
            kw[key] = val
    try:
        return SelectorParams(rule, **kw)
    except ValueError as exc:
        raise r.error(section if r.cp.has_section(section) else "selector", None, str(exc)) from exc


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(text, source)
    for section in r.cp.sections():
        base = section.split(".", 1)
        if base[0] not in _KNOWN_SECTIONS or (len(base) == 2 and base[0] != "selector"):
            raise r.error(section, None, "unknown section")
        if len(base) == 2:
            try:
                Rule.parse(base[1])
            except ValueError as exc:
                raise r.error(section, None, str(exc)) from exc
    if not r.cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section", source=source)

    kind = r.get("experiment", "kind", lambda s: ExperimentKind(s.strip().upper()))
    if kind is None:
        raise r.error("experiment", None, "missing key 'kind'")

    def rule_list(s):
        return [Rule.parse(x) for x in s.replace(" ", "").split(",") if x]

    rules = r.get("experiment", "selectors", rule_list)
    if rules is None:
        rules = [] if kind is ExperimentKind.RPO_VERIFY else list(ALL_RULES)
    seeds = r.get("experiment", "seeds", parse_seeds, (0,))
    output = r.get("experiment", "output")
    jobs = r.get("experiment", "jobs", int, 1)

    shared = {k: v for k in ("c", "c1", "c2") if (v := r.get("selector", k, float)) is not None}
    selectors = tuple(_selector_params(r, rule, shared) for rule in rules)
    for section in r.cp.sections():
        if section.startswith("selector."):
            for key in ("c", "c1", "c2"):
                r.used.add((section, key))

    kw = {}
    arms = r.get("bandit", "arms", parse_arms)
    if arms is not None:
        kw["bandit"] = arms
    horizon = r.get("bandit", "horizon", int, 10_000)
    checkpoints = r.get("bandit", "checkpoints",
                        lambda s: tuple(int(x) for x in s.replace(" ", "").split(",") if x), ())

    if r.cp.has_section("gridworld"):
        g = default_gridworld()
        try:
            kw["gridworld"] = GridworldSpec(
                r.get("gridworld", "width", int, g.width),
                r.get("gridworld", "height", int, g.height),
                r.get("gridworld", "goals", _parse_goals, g.goals),
                r.get("gridworld", "start", _parse_cell, g.start),
                r.get("gridworld", "slip", float, g.slip),
                r.get("gridworld", "max_steps", int, g.max_steps),
                r.get("gridworld", "walls",
                      lambda s: frozenset(_parse_cell(c) for c in s.split(";") if c.strip()),
                      g.walls),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise r.error("gridworld", None, str(exc)) from exc

    s = SearchConfig()
    try:
        kw["search"] = SearchConfig(
            r.get("search", "simulations", int, s.num_simulations),
            r.get("search", "gamma", float, s.gamma),
            SelectorParams(),
            r.get("search", "normalize_values", _bool, s.normalize_values),
            r.get("search", "variance_source", lambda v: VarianceSource(v.strip().upper()),
                  s.variance_source),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise r.error("search", None, str(exc)) from exc

    sp = SelfPlaySpec()
    kw["self_play"] = SelfPlaySpec(
        r.get("self_play", "iterations", int, sp.iterations),
        r.get("self_play", "batch", int, sp.batch),
        r.get("self_play", "lr", float, sp.lr),
        r.get("self_play", "eval_every", int, sp.eval_every),
        r.get("self_play", "eval_episodes", int, sp.eval_episodes),
        r.get("self_play", "temperature", float, sp.temperature),
    )
    ov = OverheadSpec()
    kw["overhead"] = OverheadSpec(
        r.get("overhead", "total_simulations", int, ov.total_simulations),
        r.get("overhead", "simulations_per_search", int, ov.simulations_per_search),
        r.get("overhead", "rounds", int, ov.rounds),
    )
    r.check_unknown()

    try:
        return ExperimentConfig(kind, selectors, seeds, output, jobs, horizon=horizon,
                                checkpoints=checkpoints, **kw)
    except ConfigError as exc:
        section = "experiment" if exc.field in ("selectors", "seeds", "jobs") else "bandit"
        raise r.error(section, exc.field, str(exc).split(": ", 1)[-1].strip()) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from exc
    return parse_config(text, str(path))


# --- workers --------------------------------------------------------------------
# Each task returns rows (selector, seed, checkpoint, metric, value); the parent
# sorts them by (selector order, seed order, checkpoint, metric).

def _bandit_task(args):
    spec, params, horizon, seeds, checkpoints = args
    curves = regret_curves(spec, params, horizon, seeds, checkpoints)
    return [(params.rule.value, seed, c, "regret", float(curves[i, j]))
            for i, seed in enumerate(seeds) for j, c in enumerate(checkpoints)]


def _self_play_task(args):
    grid, params, search, sp, seed = args
    config = replace(search, selector=params)
    factory = lambda s: gridworld_env(grid, s)  # noqa: E731
    _, curve = self_play_curve(factory, TabularModel(4, sp.lr), config, sp.iterations, sp.batch,
                               seed, sp.eval_every, sp.eval_episodes, sp.temperature)
    return [(params.rule.value, seed, it, "return", float(ret)) for it, ret in curve]


def _chunks(items, k):
    k = max(1, min(k, len(items)))
    size = math.ceil(len(items) / k)
    return [items[i:i + size] for i in range(0, len(items), size)]


def _run_tasks(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [row for t in tasks for row in fn(t)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return [row for rows in pool.map(fn, tasks) for row in rows]


def measure_overhead(grid: GridworldSpec, selectors, search: SearchConfig, spec: OverheadSpec,
                     seed: int = 0) -> dict:
    """Wall-clock microseconds per simulation for each rule on one gridworld workload.

    Each rule gets ``total_simulations / len(selectors)`` simulations, split
    into ``rounds`` interleaved rounds (order reversed every other round) so
    machine drift hits all rules alike. The reported figure is the median of
    the per-round rates, which discounts rounds hit by outside load.
    """
    env = gridworld_env(grid, seed)
    root = env.initial_state()
    per_search = spec.simulations_per_search
    per_rule = max(1, spec.total_simulations // len(selectors))
    searches = max(1, math.ceil(per_rule / (per_search * spec.rounds)))
    rates = {p.rule.value: [] for p in selectors}
    configs = [(p.rule.value, replace(search, num_simulations=per_search, selector=p))
               for p in selectors]
    for rnd in range(spec.rounds):
        order = configs if rnd % 2 == 0 else configs[::-1]
        for name, cfg in order:
            t0 = time.perf_counter()
            for i in range(searches):
                run_search(env, root, cfg, seed + rnd * searches + i)
            rates[name].append(1e6 * (time.perf_counter() - t0) / (searches * per_search))
    return {name: float(np.median(r)) for name, r in rates.items()}


# --- reports --------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _sorted_rows(rows, config: ExperimentConfig):
    sel_order = {name: i for i, name in enumerate(config.rules)}
    seed_order = {s: i for i, s in enumerate(config.seeds)}
    return sorted(rows, key=lambda r: (sel_order.get(r[0], len(sel_order)), r[0],
                                       seed_order.get(r[1], len(seed_order)), r[2], r[3]))


def summarize(rows) -> list[tuple]:
    """Per (selector, checkpoint, metric): mean, min, max and seed count, in row order."""
    groups = {}
    for sel, _seed, cp, metric, value in rows:
        groups.setdefault((sel, cp, metric), []).append(value)
    return [(sel, cp, metric, float(np.mean(v)), float(np.min(v)), float(np.max(v)), len(v))
            for (sel, cp, metric), v in groups.items()]


@dataclass
class Report:
    kind: ExperimentKind
    rows: list
    summary: list
    results_path: Path | None = None
    summary_path: Path | None = None
    ok: bool = True


def write_report(report: Report, out_dir, config_name: str = "") -> Report:
    out = Path(out_dir)
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    comment = f"# vamcts {report.kind.value} {config_name} generated {stamp}".replace("  ", " ")
    try:
        out.mkdir(parents=True, exist_ok=True)
        results = out / "results.csv"
        with results.open("w", newline="") as fh:
            fh.write(comment + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows([tuple(_fmt(x) for x in row) for row in report.rows])
        summary = out / "summary.csv"
        with summary.open("w", newline="") as fh:
            fh.write(comment + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("selector", "checkpoint", "metric", "mean", "min", "max", "seeds"))
            w.writerows([tuple(_fmt(x) for x in row) for row in report.summary])
    except OSError as exc:
        raise ReportError(f"cannot write reports to {out}: {exc.strerror or exc}") from exc
    report.results_path, report.summary_path = results, summary
    return report


def run_experiment(config: ExperimentConfig, out_dir=None, config_name: str = "") -> Report:
    """Run ``config`` and write ``results.csv`` and ``summary.csv`` under the output directory.

    ``out_dir`` falls back to ``config.output``, then ``$VAMCTS_OUTPUT_DIR``,
    then ``./vamcts-results``.
    """
    out_dir = out_dir or config.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    ok = True
    kind = config.kind
    if kind is ExperimentKind.BANDIT_REGRET:
        tasks = [(config.bandit, p, config.horizon, chunk, config.checkpoints)
                 for p in config.selectors
                 for chunk in _chunks(list(config.seeds), max(1, config.jobs // len(config.selectors)))]
        rows = _run_tasks(_bandit_task, tasks, config.jobs)
    elif kind is ExperimentKind.SELF_PLAY:
        tasks = [(config.gridworld, p, config.search, config.self_play, seed)
                 for p in config.selectors for seed in config.seeds]
        rows = _run_tasks(_self_play_task, tasks, config.jobs)
    elif kind is ExperimentKind.RPO_VERIFY:
        rows = []
        for seed in config.seeds:
            for res in run_invariant_suite(seed):
                rows.append(("ALL", seed, 0, res.name, 1.0 if res.passed else 0.0))
                ok = ok and res.passed
    else:
        selectors = list(config.selectors)
        if Rule.UCT1 not in [p.rule for p in selectors]:
            selectors.insert(0, SelectorParams(Rule.UCT1))
        rows = []
        for seed in config.seeds:
            timing = measure_overhead(config.gridworld, selectors, config.search, config.overhead, seed)
            base = timing[Rule.UCT1.value]
            for name, us in timing.items():
                rows.append((name, seed, 0, "us_per_sim", us))
                rows.append((name, seed, 0, "ratio_to_UCT1", us / base))
    rows = _sorted_rows(rows, config)
    report = Report(kind, rows, summarize(rows), ok=ok)
    return write_report(report, out_dir, config_name)


# --- CLI ------------------------------------------------------------------------

def _print_summary(report: Report, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("selector", "checkpoint", "metric", "mean", "min", "max", "seeds"))
    for row in report.summary:
        w.writerow([f"{x:.6g}" if isinstance(x, float) else x for x in row])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vamcts", description="Variance-aware MCTS experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=True):
        p.add_argument("--seeds", type=parse_seeds, help="seed list, e.g. 0-9 or 1,5,7")
        p.add_argument("--out", help=f"output directory (default: config, ${OUTPUT_ENV}, ./{DEFAULT_OUTPUT})")
        if jobs:
            p.add_argument("--jobs", type=int, help="worker processes")

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    common(run)
    verify = sub.add_parser("verify", help="run the RPO invariant suite")
    common(verify, jobs=False)
    ov = sub.add_parser("bench-overhead", help="time every selector on one search workload")
    ov.add_argument("--simulations", type=int, default=OverheadSpec.total_simulations,
                    help="total simulations across all selectors")
    ov.add_argument("--rounds", type=int, default=OverheadSpec.rounds)
    common(ov, jobs=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            name = Path(args.config).name
        elif args.command == "verify":
            config = ExperimentConfig(ExperimentKind.RPO_VERIFY, (), (0,))
            name = "verify"
        else:
            config = ExperimentConfig(ExperimentKind.OVERHEAD,
                                      tuple(SelectorParams(r) for r in ALL_RULES), (0,),
                                      overhead=OverheadSpec(args.simulations, rounds=args.rounds))
            name = "bench-overhead"
        if args.seeds:
            config = replace(config, seeds=args.seeds)
        if getattr(args, "jobs", None):
            config = replace(config, jobs=args.jobs)
        report = run_experiment(config, args.out, name)
    except (ConfigError, ReportError, ValueError) as exc:
        print(f"vamcts: error: {exc}", file=sys.stderr)
        return 2
    if report.kind is ExperimentKind.RPO_VERIFY:
        for sel, seed, _cp, metric, value in report.rows:
            print(f"{'PASS' if value else 'FAIL'} {metric} (seed {seed})")
    else:
        _print_summary(report, sys.stdout)
    print(f"wrote {report.results_path} and {report.summary_path}", file=sys.stderr)
    return 0 if report.ok else 1


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentKind",
    "OverheadSpec",
    "Report",
    "ReportError",
    "SelfPlaySpec",
    "load_config",
    "main",
    "measure_overhead",
    "parse_arms",
    "parse_config",
    "parse_seeds",
    "run_experiment",
    "summarize",
    "write_report",
]
