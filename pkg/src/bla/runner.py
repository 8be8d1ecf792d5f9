"""Experiment grids: (generator x optimizer x seed) runs written out as CSV tables.

Config files are plain ``key = value`` lines; ``#`` starts a comment.
Recognised keys (defaults in brackets)::

    generator        f1 | f2 | f3 | stochastic_net | multi_input |
                     bernoulli_step | bernoulli_cosine               [f1]
    optimizers       comma list of BLA, BLA2, GD, ADAM               [BLA,GD,ADAM]
    epochs           int                                             [50]
    seeds            "0-9" or "0,3,7"                                [0-9]
    n_train, n_val   int                                             [6000, 1000]
    report_epochs    comma list                                      [1,5,10,15,25,50]
    out              output directory                                [results]
    hidden           hidden width(s) of BLA/GD/ADAM nets             [100]
    hidden2          hidden widths of BLA2                           [20,20]
    activation       hidden activation (tanh, relu, leaky_relu:0.01) [tanh]
    r_policy         first_batch_zero | first_epoch_zero             [first_batch_zero]
    step_factor      float in (0, 2]                                 [1.95]
    delta_start, delta_floor                                         [40, 8]
    distance         squared_l2 | linf                               [squared_l2]
    score_power      1 or 2                                          [2]
    scaling          standard | minmax | none                        [standard]
    input_spread     target spread of each scaled input              [4.0]
    solver           spectral | iterate                              [spectral]
    inner_max_iters, inner_tol                                       [100000, 1e-10]
    gd_lr, adam_lr, adam_batch                                       [0.001, 0.001, 200]
    baseline_init    glorot | normal (variance 0.5, as BLA)          [glorot]
    jobs             worker processes                                [1]
    timing           record wall-clock ms in histories               [false]
"""

from __future__ import annotations

import csv
import logging
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import baselines, trainer
from .data import GeneratorSpec, generate, split_and_shuffle
from .seeding import stream

log = logging.getLogger(__name__)

OPTIMIZERS = ("BLA", "BLA2", "GD", "ADAM")
TABLE_COLUMNS = ("BLA", "BLA2", "GD", "ADAM", "LBFGS")


class ConfigError(ValueError):
    pass


def _ints(text):
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)-(-?\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optimizers(text):
    names = [s.strip().upper() for s in str(text).split(",") if s.strip()]
    bad = [n for n in names if n not in OPTIMIZERS]
    if bad:
        raise ValueError(f"unknown optimizer(s) {bad}; choose from {OPTIMIZERS}")
    return names


@dataclass
class ExperimentConfig:
    generator: str = "f1"
    optimizers: list = field(default_factory=lambda: ["BLA", "GD", "ADAM"])
    epochs: int = 50
    seeds: list = field(default_factory=lambda: list(range(10)))
    n_train: int = 6000
    n_val: int = 1000
    report_epochs: list = field(default_factory=lambda: [1, 5, 10, 15, 25, 50])
    out: str = "results"
    hidden: list = field(default_factory=lambda: [100])
    hidden2: list = field(default_factory=lambda: [20, 20])
    activation: str = "tanh"
    r_policy: str = trainer.FIRST_BATCH_ZERO
    step_factor: float = 1.95
    delta_start: int = 40
    delta_floor: int = 8
    distance: str = "squared_l2"
    score_power: int = 2
    scaling: str = "standard"
    input_spread: float = 4.0
    solver: str = "spectral"
    inner_max_iters: int = 100_000
    inner_tol: float = 1e-10
    gd_lr: float = 0.001
    adam_lr: float = 0.001
    adam_batch: int = 200
    baseline_init: str = "glorot"
    jobs: int = 1
    timing: bool = False

    def validate(self):
        GeneratorSpec(self.generator)
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.optimizers:
            raise ConfigError("optimizers must be nonempty")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        bad = [e for e in self.report_epochs if not 1 <= e <= self.epochs]
        if bad:
            raise ConfigError(f"report epochs {bad} outside [1, {self.epochs}]")
        if self.baseline_init not in ("glorot", "normal"):
            raise ConfigError(f"baseline_init must be glorot or normal, got {self.baseline_init!r}")
        try:
            for opt in self.optimizers:
                if opt.startswith("BLA"):
                    bla_config(self, 0, opt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


_PARSERS = {
    "optimizers": _optimizers,
    "seeds": _ints,
    "report_epochs": _ints,
    "hidden": _ints,
    "hidden2": _ints,
    "timing": _bool,
}


def _coerce(name, text):
    if name in _PARSERS:
        return _PARSERS[name](text)
    default = ExperimentConfig.__dataclass_fields__[name].default
    if isinstance(default, bool):
        return _bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return str(text).strip()


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines into an :class:`ExperimentConfig`."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][\w-]*)\s*[=:]\s*(.*)", line)
        if not m:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = m.group(1).replace("-", "_"), m.group(2).strip()
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(**values).validate()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


def with_overrides(cfg, **overrides):
    """Copy of ``cfg`` with string or typed overrides applied (``None`` skipped)."""
    clean = {}
    for k, v in overrides.items():
        if v is None:
            continue
        clean[k] = _coerce(k, v) if isinstance(v, str) else v
    try:
        return replace(cfg, **clean).validate()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def make_data(cfg, seed):
    """Training and validation sets of one seed, shared by every optimizer."""
    spec = GeneratorSpec(cfg.generator)
    full = generate(spec, cfg.n_train + cfg.n_val, stream(seed, "data", spec.tag),
                    target_rng=stream(seed, "target"))
    return split_and_shuffle(full, cfg.n_train, cfg.n_val, stream(seed, "split"))


def bla_config(cfg, seed, optimizer="BLA"):
    return trainer.BlaConfig(
        hidden=tuple(cfg.hidden2 if optimizer == "BLA2" else cfg.hidden),
        hidden_activation=cfg.activation,
        epochs=cfg.epochs,
        delta_start=cfg.delta_start,
        delta_floor=cfg.delta_floor,
        r_policy=cfg.r_policy,
        step_factor=cfg.step_factor,
        inner_max_iters=cfg.inner_max_iters,
        inner_tol=cfg.inner_tol,
        solver=cfg.solver,
        distance=cfg.distance,
        score_power=cfg.score_power,
        scaling=cfg.scaling,
        input_spread=cfg.input_spread,
        seed=seed,
        name=optimizer,
    )


def run_one(cfg, optimizer, seed):
    """Train one (optimizer, seed) pair and return its history."""
    train, val = make_data(cfg, seed)
    if optimizer == "BLA":
        return trainer.train_bla(train, val, bla_config(cfg, seed))[1]
    if optimizer == "BLA2":
        return trainer.train_bla_two_hidden(train, val, bla_config(cfg, seed, "BLA2"))[1]
    common = dict(hidden=tuple(cfg.hidden), hidden_activation=cfg.activation,
                  init=cfg.baseline_init, seed=seed)
    if optimizer == "GD":
        return baselines.train_gd(train, val, cfg.epochs,
                                  baselines.GdConfig(lr=cfg.gd_lr, **common))[1]
    if optimizer == "ADAM":
        return baselines.train_adam(train, val, cfg.epochs, baselines.adam_config(
            lr=cfg.adam_lr, batch_size=cfg.adam_batch, **common))[1]
    raise ValueError(f"unknown optimizer {optimizer!r}")


def _task(args):
    cfg, optimizer, seed = args
    try:
        return (optimizer, seed), run_one(cfg, optimizer, seed), None
    except Exception:  # a failed run is reported, the grid carries on
        return (optimizer, seed), None, traceback.format_exc()


def history_path(out, optimizer, seed):
    return Path(out) / "history" / f"{optimizer}_seed{seed}.csv"


@dataclass
class ExperimentResult:
    histories: dict
    failures: dict
    table_path: Path
    plot_path: Path

    @property
    def ok(self):
        return not self.failures


def run_experiment(cfg):
    """Run the whole grid, write histories, the summary table and plot data."""
    cfg.validate()
    out = Path(cfg.out)
    (out / "history").mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, opt, seed) for opt in cfg.optimizers for seed in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    histories, failures = {}, {}
    for key, history, err in sorted(results, key=lambda r: _order(r[0])):
        if err is not None:
            log.error("run %s seed %s failed:\n%s", key[0], key[1], err)
            failures[key] = err
            continue
        histories[key] = history
        history.to_csv(history_path(out, *key), timing=cfg.timing)

    table = out / "table.csv"
    write_table(table, histories, cfg.report_epochs)
    plot = out / "plot_data.csv"
    emit_plot_data(sorted(history_path(out, *k) for k in histories), plot, cfg.report_epochs)
    if failures:
        with open(out / "failures.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["optimizer", "seed", "error"])
            for (opt, seed), err in sorted(failures.items(), key=lambda kv: _order(kv[0])):
                w.writerow([opt, seed, err.strip().splitlines()[-1]])
    return ExperimentResult(histories, failures, table, plot)


def _order(key):
    opt, seed = key
    return (OPTIMIZERS.index(opt) if opt in OPTIMIZERS else len(OPTIMIZERS), opt, seed)


def write_table(path, histories, report_epochs):
    """Mean and median across seeds per report epoch, one column pair per optimizer.

    LBFGS is not implemented; its columns stay empty.
    """
    present = {opt for opt, _ in histories}
    cols = [c for c in TABLE_COLUMNS if c in present or c == "LBFGS"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch"] + [f"{c}_{s}" for c in cols for s in ("mean", "median")])
        for epoch in report_epochs:
            row = [epoch]
            for c in cols:
                vals = [h.metric_at(epoch) for (opt, _), h in sorted(histories.items())
                        if opt == c and len(h.records) >= epoch]
                if vals:
                    row += [repr(float(np.mean(vals))), repr(float(np.median(vals)))]
                else:
                    row += ["", ""]
            w.writerow(row)


_HISTORY_NAME = re.compile(r"(?P<opt>[A-Za-z0-9]+)_seed(?P<seed>-?\d+)\.csv")


def emit_plot_data(history_files, out_path, report_epochs=None):
    """Long-format ``optimizer,seed,epoch,metric`` rows from history CSVs.

    Rows are ordered by (optimizer, seed, epoch); with ``report_epochs`` only
    those epochs are kept. Returns the number of data rows written.
    """
    rows = []
    for path in history_files:
        path = Path(path)
        m = _HISTORY_NAME.fullmatch(path.name)
        if not m:
            raise ValueError(f"not a history file name: {path.name}")
        if not path.exists():
            raise FileNotFoundError(path)
        opt, seed = m.group("opt"), int(m.group("seed"))
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                epoch = int(rec["epoch"])
                if report_epochs is None or epoch in report_epochs:
                    rows.append((_order((opt, seed)), epoch, opt, seed, rec["metric"]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["optimizer", "seed", "epoch", "metric"])
        for _, epoch, opt, seed, metric in rows:
            w.writerow([opt, seed, epoch, metric])
    return len(rows)
