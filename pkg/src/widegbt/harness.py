"""Experiment protocols: width sweeps, random hyperparameter search, and the
fixed-tree-budget comparison between wide and standard training.

Searches sample configurations with a seeded PCG64 generator, so a (seed,
space, n_trials) triple fully determines the trials.  Standard-mode searches
pin q = d with the identity-kind matrix but consume the same random draws as
wide mode, so the two modes explore paired configurations.  Trials are
independent; ``WB_THREADS`` caps the worker pool (1 disables it), and reports
are keyed by trial index so completion order never changes the output.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .beta import BETA_KINDS, BetaSpec
from .booster import LOSS_FOR_TASK, BoostParams, EvalTrace, train
from .dataset import Dataset, SplitSpec, train_test_split
from .tree import TreeParams

MODES = ("wb", "gb", "budgeted_gb")


@dataclass(frozen=True)
class SearchSpace:
    """Sampling ranges for the random search.

    ``q`` is drawn from [d, q_factor * d] so the search can always fall back
    to standard boosting by picking q = d; depth is uniform over the integer
    range, the learning rate log-uniform, lambda/gamma uniform.
    """

    max_depth: tuple[int, int] = (2, 8)
    eta: tuple[float, float] = (0.01, 0.5)
    reg_lambda: tuple[float, float] = (0.0, 10.0)
    gamma: tuple[float, float] = (0.0, 5.0)
    q_factor: int = 3
    beta_kinds: tuple[str, ...] = BETA_KINDS
    rounds: int = 100

    def __post_init__(self) -> None:
        if self.max_depth[0] > self.max_depth[1] or self.max_depth[0] < 1:
            raise ValueError("bad max_depth range")
        if not 0.0 < self.eta[0] <= self.eta[1] <= 1.0:
            raise ValueError("bad eta range")
        if self.reg_lambda[0] > self.reg_lambda[1] or self.reg_lambda[0] < 0:
            raise ValueError("bad reg_lambda range")
        if self.gamma[0] > self.gamma[1] or self.gamma[0] < 0:
            raise ValueError("bad gamma range")
        if self.q_factor < 1:
            raise ValueError("q_factor must be >= 1")
        if not self.beta_kinds:
            raise ValueError("beta_kinds must be non-empty")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class TrialRecord:
    """One sampled configuration and its outcome."""

    config: dict
    best_metric: float
    best_round: int
    tree_count: int
    wall_time: float
    error: str | None = None


@dataclass
class ExperimentReport:
    dataset: str
    mode: str
    trials: list[TrialRecord] = field(default_factory=list)
    best: TrialRecord | None = None
    pct_improvement: float | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "mode": self.mode,
            "trials": [asdict(t) for t in self.trials],
            "best": asdict(self.best) if self.best is not None else None,
            "pct_improvement": self.pct_improvement,
        }


def sample_configs(
    space: SearchSpace, d: int, n_trials: int, seed: int, mode: str
) -> list[dict]:
    """Draw trial configurations; gb mode pins q=d and the identity kind.

    The gb path consumes the same draws as wb, so trial i shares its depth,
    learning rate and regularization across modes.
    """
    if mode not in ("wb", "gb"):
        raise ValueError(f"mode must be 'wb' or 'gb', got {mode!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    configs = []
    for i in range(n_trials):
        depth = int(rng.integers(space.max_depth[0], space.max_depth[1] + 1))
        eta = float(np.exp(rng.uniform(math.log(space.eta[0]), math.log(space.eta[1]))))
        lam = float(rng.uniform(*space.reg_lambda))
        gam = float(rng.uniform(*space.gamma))
        q = int(rng.integers(d, space.q_factor * d + 1))
        kind = space.beta_kinds[int(rng.integers(len(space.beta_kinds)))]
        beta_seed = int(rng.integers(0, 2**63))
        if mode == "gb":
            q, kind = d, "I"
        configs.append(
            {
                "trial": i,
                "max_depth": depth,
                "eta": eta,
                "reg_lambda": lam,
                "gamma": gam,
                "q": q,
                "beta_kind": kind,
                "beta_seed": beta_seed,
                "rounds": space.rounds,
            }
        )
    return configs


def _params_from_config(config: dict, d: int, task: str) -> BoostParams:
    return BoostParams(
        rounds=config["rounds"],
        learning_rate=config["eta"],
        tree=TreeParams(
            max_depth=config["max_depth"],
            reg_lambda=config["reg_lambda"],
            gamma=config["gamma"],
        ),
        beta=BetaSpec(config["beta_kind"], config["q"], d, config["beta_seed"]),
        loss_kind=LOSS_FOR_TASK[task],
    )


def run_trial(
    train_data: Dataset, test_data: Dataset, config: dict, objective: str | None = None
) -> TrialRecord:
    """Train one configuration and record its best test metric over rounds."""
    start = time.perf_counter()
    tree_count = config["rounds"] * config["q"]
    try:
        params = _params_from_config(config, train_data.d, train_data.task)
        _, trace = train(train_data, params, eval_data=test_data, eval_metric=objective)
        best_round = int(np.argmin(trace.test_metric))
        return TrialRecord(
            config=config,
            best_metric=float(trace.test_metric[best_round]),
            best_round=best_round,
            tree_count=tree_count,
            wall_time=time.perf_counter() - start,
        )
    except Exception as exc:  # trial failures are recorded, not fatal
        return TrialRecord(
            config=config,
            best_metric=float("inf"),
            best_round=-1,
            tree_count=tree_count,
            wall_time=time.perf_counter() - start,
            error=f"{type(exc).__name__}: {exc}",
        )


def worker_count() -> int:
    raw = os.environ.get("WB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"WB_THREADS must be an integer, got {raw!r}") from None


def _run_trials(
    train_data: Dataset, test_data: Dataset, configs: list[dict], objective: str | None
) -> list[TrialRecord]:
    workers = min(worker_count(), len(configs))
    if workers <= 1:
        return [run_trial(train_data, test_data, c, objective) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_trial, train_data, test_data, c, objective) for c in configs
        ]
        return [f.result() for f in futures]


def _pick_best(trials: list[TrialRecord]) -> TrialRecord:
    ok = [t for t in trials if t.error is None]
    if not ok:
        raise RuntimeError("every trial failed")
    return min(ok, key=lambda t: (t.best_metric, t.config["trial"]))


def random_search(
    data: Dataset,
    space: SearchSpace,
    n_trials: int,
    seed: int,
    mode: str,
    split: SplitSpec = SplitSpec(0.2, 0),
    objective: str | None = None,
    dataset_name: str = "dataset",
) -> ExperimentReport:
    """Sample n_trials configurations, train each, and report the best trial."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    train_data, test_data = train_test_split(data, split)
    configs = sample_configs(space, data.d, n_trials, seed, mode)
    trials = _run_trials(train_data, test_data, configs, objective)
    return ExperimentReport(
        dataset=dataset_name, mode=mode, trials=trials, best=_pick_best(trials)
    )


def budgeted_gb(
    data: Dataset,
    wb_best: TrialRecord,
    space: SearchSpace,
    n_trials: int,
    seed: int,
    split: SplitSpec = SplitSpec(0.2, 0),
    objective: str | None = None,
    dataset_name: str = "dataset",
) -> ExperimentReport:
    """Standard-mode search whose round count matches the wide winner's tree budget.

    Rounds are wb_best.tree_count // d, so the maximum tree counts of the two
    searches are equal.
    """
    rounds = wb_best.tree_count // data.d
    gb_space = SearchSpace(
        max_depth=space.max_depth,
        eta=space.eta,
        reg_lambda=space.reg_lambda,
        gamma=space.gamma,
        q_factor=space.q_factor,
        beta_kinds=space.beta_kinds,
        rounds=rounds,
    )
    report = random_search(
        data,
        gb_space,
        n_trials,
        seed,
        mode="gb",
        split=split,
        objective=objective,
        dataset_name=dataset_name,
    )
    report.mode = "budgeted_gb"
    if report.best is not None and report.best.best_metric > 0:
        report.pct_improvement = percent_improvement(
            wb_best.best_metric, report.best.best_metric
        )
    return report


def percent_improvement(candidate: float, baseline: float) -> float:
    """How much lower (better) the candidate metric is than the baseline, in %."""
    return 100.0 * (baseline - candidate) / baseline


def width_sweep(
    data: Dataset,
    widths: list[int],
    fixed: BoostParams,
    split: SplitSpec = SplitSpec(0.2, 0),
) -> dict[int, EvalTrace]:
    """Train once per output width with otherwise identical settings.

    Widths below the label dimension use the all-random matrix kind (the
    identity kinds need q >= d); wider points keep ``fixed.beta.kind``.
    Returns the per-width training traces, whose test series are the
    per-round error curves.
    """
    if not widths:
        raise ValueError("widths must be non-empty")
    train_data, test_data = train_test_split(data, split)
    d = data.d
    traces = {}
    for q in widths:
        kind = fixed.beta.kind if q >= d else "R"
        params = BoostParams(
            rounds=fixed.rounds,
            learning_rate=fixed.learning_rate,
            tree=fixed.tree,
            beta=BetaSpec(kind, q, d, fixed.beta.seed),
            loss_kind=fixed.loss_kind,
            base_score=fixed.base_score,
        )
        try:
            _, trace = train(train_data, params, eval_data=test_data)
        except Exception as exc:
            raise RuntimeError(f"width sweep failed at q={q}: {exc}") from exc
        traces[q] = trace
    return traces
