"""Training loop, run records, CSV export, sweeps and win-rate comparisons."""

from __future__ import annotations

import csv
import enum
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from covbalance.config import AXES, ConfigError, RunConfig
from covbalance.optim import NonFiniteGradientError
from covbalance.problems import NonFiniteLossError
from covbalance.weighting import UncertaintyWeighting

logger = logging.getLogger(__name__)

_SCALE_SUFFIX = re.compile(r"_s(\d+)$")


def scale_of(loss_name: str) -> int:
    m = _SCALE_SUFFIX.search(loss_name)
    return int(m.group(1)) if m else 0


@dataclass
class RunRecord:
    """Recorded trajectory of one run.

    ``weights`` are always normalized so that strategies are comparable;
    ``raw_weights`` is set only for strategies with unnormalized weights.
    """

    loss_names: list
    steps: np.ndarray
    losses: np.ndarray
    weights: np.ndarray
    objective: np.ndarray
    dist_to_opt: np.ndarray
    raw_weights: Optional[np.ndarray] = None
    strategy: str = ""
    seed: int = 0
    experiment: str = "experiment"
    valid: bool = True
    error: str = ""
    final: dict = field(default_factory=dict)
    config: Optional[RunConfig] = None

    @property
    def n_rows(self) -> int:
        return len(self.steps)

    @property
    def filename(self) -> str:
        return f"{self.strategy}_{self.seed}.csv"

    def loss_scales(self) -> np.ndarray:
        return np.array([scale_of(n) for n in self.loss_names])

    def scale_weight_aggregates(self) -> np.ndarray:
        """Total weight per scale at every recorded step, shape ``(n_rows, n_scales)``."""
        scales = self.loss_scales()
        out = np.zeros((self.n_rows, scales.max() + 1))
        for s in range(out.shape[1]):
            out[:, s] = self.weights[:, scales == s].sum(axis=1)
        return out

    def header(self) -> list:
        cols = ["step"] + [f"loss_{n}" for n in self.loss_names] + [f"weight_{n}" for n in self.loss_names]
        cols += ["objective", "dist_to_opt"]
        if self.raw_weights is not None:
            cols += [f"raw_weight_{n}" for n in self.loss_names]
        return cols

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for i in range(self.n_rows):
                row = [str(int(self.steps[i]))]
                row += [repr(float(v)) for v in self.losses[i]]
                row += [repr(float(v)) for v in self.weights[i]]
                row += [repr(float(self.objective[i])), repr(float(self.dist_to_opt[i]))]
                if self.raw_weights is not None:
                    row += [repr(float(v)) for v in self.raw_weights[i]]
                w.writerow(row)
        return path

    @classmethod
    def from_csv(cls, path) -> "RunRecord":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or not rows[0] or rows[0][0] != "step":
            raise ValueError(f"{path}: not a run record (missing 'step' header)")
        header = rows[0]
        names = [h[len("loss_"):] for h in header if h.startswith("loss_")]
        n = len(names)
        expected = ["step"] + [f"loss_{x}" for x in names] + [f"weight_{x}" for x in names]
        expected += ["objective", "dist_to_opt"]
        has_raw = len(header) == len(expected) + n and n > 0
        if has_raw:
            expected += [f"raw_weight_{x}" for x in names]
        if header != expected:
            raise ValueError(f"{path}: unexpected header layout")
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
        stem = path.stem
        strategy, _, seed = stem.rpartition("_")
        return cls(
            loss_names=names,
            steps=data[:, 0].astype(int),
            losses=data[:, 1 : 1 + n],
            weights=data[:, 1 + n : 1 + 2 * n],
            objective=data[:, 1 + 2 * n],
            dist_to_opt=data[:, 2 + 2 * n],
            raw_weights=data[:, 3 + 2 * n :] if has_raw else None,
            strategy=strategy or stem,
            seed=int(seed) if seed.isdigit() else 0,
            experiment=path.parent.name,
        )

    def metric_vector(self) -> np.ndarray:
        """Final metrics used for win rates (all lower-is-better)."""
        vals = list(self.final.get("losses", [math.nan] * len(self.loss_names)))
        if self.final.get("has_optimum", False):
            vals.append(self.final.get("dist_to_opt", math.nan))
        return np.array(vals, dtype=float)

    def summary_row(self) -> dict:
        row = {
            "run": Path(self.filename).stem,
            "strategy": self.strategy,
            "seed": self.seed,
            "valid": self.valid,
            "error": self.error,
            "config_hash": self.config.config_hash() if self.config else "",
            "steps_run": self.final.get("steps_run", ""),
            "final_objective": self.final.get("objective", math.nan),
            "final_dist_to_opt": self.final.get("dist_to_opt", math.nan),
        }
        for name, v in zip(self.loss_names, self.final.get("losses", [])):
            row[f"final_loss_{name}"] = v
        if self.config is not None:
            row.update(self.config.resolved())
        return row


def run_experiment(config: RunConfig) -> RunRecord:
    """Train one configuration and record its trajectory.

    Each step evaluates the problem, asks the strategy for weights, combines
    the per-loss gradients with those weights (held constant, no gradient
    through them) and takes an optimizer step. Uncertainty weighting instead
    descends its own objective, stepping the log-variances alongside the
    parameters. Raises :class:`ConfigError` before any step on a bad config;
    a non-finite loss or gradient mid-run stops the run and returns the
    partial record with ``valid=False``.
    """
    config.validate()
    problem = config.build_problem()
    strategy = config.build_strategy()
    optimizer = config.build_optimizer()
    rng = np.random.default_rng(int(config.seed))
    n = problem.loss_count
    strategy.reset(n)
    uncertain = isinstance(strategy, UncertaintyWeighting)
    params = problem.initial_params(rng)

    steps, losses, weights, raw, objective, dist = [], [], [], [], [], []
    valid, error = True, ""
    step = 0
    for step in range(1, config.iterations + 1):
        try:
            obs = problem.evaluate(params, rng, step)
            wv = strategy.observe(obs)
            obj = strategy.objective_ if uncertain else float(wv.weights @ obs.losses)
            if (step - 1) % config.record_every == 0:
                steps.append(step)
                losses.append(obs.losses)
                weights.append(wv.as_normalized().weights)
                raw.append(wv.weights)
                objective.append(obj)
                dist.append(problem.distance_to_optimum(params))
            grad = wv.weights @ obs.gradients if obs.gradients is not None else None
            if uncertain:
                g = np.zeros(params.size) if grad is None else grad
                full = optimizer.step(np.concatenate([params, strategy.log_vars_]),
                                      np.concatenate([g, strategy.log_var_grad_]))
                params = full[: params.size]
                strategy.set_log_vars(full[params.size :])
            elif grad is not None:
                params = optimizer.step(params, grad)
        except (NonFiniteLossError, NonFiniteGradientError, ValueError, FloatingPointError) as exc:
            valid, error = False, f"step {step}: {exc}"
            logger.warning("run %s/%s seed %s aborted at %s", config.name, config.strategy["name"], config.seed, error)
            break

    final = {"steps_run": step if valid else step - 1, "has_optimum": problem.optimum is not None}
    if valid:
        try:
            final["losses"] = problem.evaluate(params).losses.tolist()
        except (NonFiniteLossError, ValueError) as exc:
            valid, error = False, f"final evaluation: {exc}"
    final.setdefault("losses", [math.nan] * n)
    final["dist_to_opt"] = problem.distance_to_optimum(params) if valid else math.nan
    final["objective"] = objective[-1] if objective else math.nan

    def _stack(rows):
        return np.array(rows, dtype=float).reshape(len(rows), n)

    return RunRecord(
        loss_names=list(problem.loss_names),
        steps=np.array(steps, dtype=int),
        losses=_stack(losses),
        weights=_stack(weights),
        objective=np.array(objective, dtype=float),
        dist_to_opt=np.array(dist, dtype=float),
        raw_weights=_stack(raw) if not strategy.normalized else None,
        strategy=config.strategy["name"],
        seed=int(config.seed),
        experiment=config.name,
        valid=valid,
        error=error,
        final=final,
        config=config,
    )


def run_many(configs, jobs=1):
    configs = list(configs)
    for c in configs:
        c.validate()
    if jobs == 1 or len(configs) <= 1:
        return [run_experiment(c) for c in configs]
    return Parallel(n_jobs=jobs)(delayed(run_experiment)(c) for c in configs)


class MetricDirection(str, enum.Enum):
    LOWER = "lower"
    HIGHER = "higher"


def compute_win_rate(a, b, directions=None) -> float:
    """Fraction of instances on which ``a`` beats ``b`` by majority over metrics.

    Per instance, count metrics where ``a`` is strictly better and where
    ``b`` is strictly better (respecting each metric's direction). The side
    with more wins takes the instance; equal counts split it 0.5/0.5. NaN
    counts as worse than any number.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"metric tables differ in shape: {a.shape} vs {b.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError("need at least one instance and one metric")
    if directions is None:
        directions = [MetricDirection.LOWER] * a.shape[1]
    directions = [MetricDirection(d) for d in directions]
    if len(directions) != a.shape[1]:
        raise ValueError(f"{len(directions)} directions for {a.shape[1]} metrics")
    sign = np.array([1.0 if d is MetricDirection.LOWER else -1.0 for d in directions])
    # orient so that lower is better, NaN worst
    a_ = np.where(np.isnan(a), np.inf, a * sign)
    b_ = np.where(np.isnan(b), np.inf, b * sign)
    a_wins = (a_ < b_).sum(axis=1)
    b_wins = (b_ < a_).sum(axis=1)
    score = np.where(a_wins > b_wins, 1.0, np.where(a_wins < b_wins, 0.0, 0.5))
    return float(score.sum() / score.size)


def sweep(base: RunConfig, axis: str, values, jobs=1):
    """One run per value of ``axis`` with everything else (including the seed) fixed."""
    if axis not in AXES:
        raise ConfigError("axis", f"unknown axis {axis!r}; valid: {', '.join(AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("values", "empty value list")
    configs = []
    for v in values:
        if axis in ("lr", "temperature"):
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise ConfigError("values", f"{axis} values must be numbers, got {v!r}") from None
        configs.append(replace(base.with_axis(axis, v), name=f"{base.name}-{axis}-{v}"))
    return run_many(configs, jobs)


def compare(base: RunConfig, strategies, seeds=32, jobs=1, strategy_params=None):
    """Run every strategy over a seed battery and build the pairwise win-rate matrix.

    Returns ``(records, win_rates)`` where ``records[name]`` lists one
    record per seed and ``win_rates[i, j]`` is the win rate of strategy
    ``i`` over strategy ``j`` across seeds.
    """
    strategies = list(strategies)
    if not strategies:
        raise ConfigError("strategies", "empty strategy list")
    if int(seeds) < 1:
        raise ConfigError("seeds", "must be >= 1")
    strategy_params = dict(strategy_params or {})
    base_name, base_params = RunConfig._split(base.strategy)
    strategy_params.setdefault(base_name, base_params)
    configs = [
        replace(base.with_strategy(s, strategy_params.get(s)), seed=int(base.seed) + k)
        for s in strategies
        for k in range(int(seeds))
    ]
    flat = run_many(configs, jobs)
    records = {s: flat[i * int(seeds) : (i + 1) * int(seeds)] for i, s in enumerate(strategies)}
    tables = {s: np.array([r.metric_vector() for r in recs]) for s, recs in records.items()}
    m = len(strategies)
    win = np.empty((m, m))
    for i, si in enumerate(strategies):
        for j, sj in enumerate(strategies):
            win[i, j] = compute_win_rate(tables[si], tables[sj])
    return records, win


def write_records(records, out_dir) -> list:
    """Write each record to ``<out_dir>/<experiment>/<strategy>_<seed>.csv``."""
    return [r.to_csv(Path(out_dir) / r.experiment / r.filename) for r in records]


def write_summary(records, path):
    rows = [r.summary_row() for r in records]
    fields = []
    for row in rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in v)
    return v


def format_win_matrix(strategies, win) -> str:
    """Render the win-rate matrix; entry ``(i, j)`` is the rate of row ``i`` over column ``j``."""
    width = max(8, *(len(s) for s in strategies)) + 2
    first = max(width, len("row vs column") + 2)
    lines = ["row vs column".ljust(first) + "".join(s.rjust(width) for s in strategies)]
    for i, s in enumerate(strategies):
        lines.append(s.ljust(first) + "".join(f"{win[i, j]:.3f}".rjust(width) for j in range(len(strategies))))
    return "\n".join(lines)


def format_summary_table(records) -> str:
    header = f"{'run':<32}{'valid':>7}{'final_objective':>18}{'final_dist':>14}"
    lines = [header]
    for r in records:
        lines.append(
            f"{r.experiment + '/' + r.strategy:<32}{str(r.valid):>7}"
            f"{r.final.get('objective', math.nan):>18.6g}{r.final.get('dist_to_opt', math.nan):>14.6g}"
        )
    return "\n".join(lines)
