"""Regret oracle, episode replay and multi-shuffle aggregation."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.stats

from .dataset import WarfarinDataset
from .errors import DomainError, PolicyError, SingularMatrixError, WarfarinBanditsError
from .linalg import least_squares
from .reward import RewardTable

log = logging.getLogger(__name__)

METRICS = ("cumulative_regret", "incorrect_fraction", "right_fraction")
ORACLE_FALLBACK_RIDGE = 1e-8


@dataclass(frozen=True)
class RegretOracle:
    """Per-arm linear reward models; row ``i`` of ``betas`` belongs to arm ``i``."""

    betas: np.ndarray

    def values(self, X) -> np.ndarray:
        """Predicted reward of every arm, shape ``(n, n_arms)`` (or ``(n_arms,)`` for one context)."""
        return np.asarray(X, dtype=np.float64) @ self.betas.T

    def regrets(self, X) -> np.ndarray:
        v = self.values(X)
        return v.max(axis=-1, keepdims=True) - v

    def best_arms(self, X) -> np.ndarray:
        return np.argmax(self.values(X), axis=-1)


def _fit_arm(X, y):
    for ridge in (0.0, ORACLE_FALLBACK_RIDGE):
        try:
            return least_squares(X, y, ridge)
        except SingularMatrixError:
            continue
    # Rank-deficient encodings (one-hot blocks plus a bias column): minimum-norm solution.
    return np.linalg.lstsq(X, y, rcond=None)[0]


def fit_oracle_to_rewards(X, rewards, label: str = "custom") -> RegretOracle:
    """Least-squares fit of column ``i`` of ``rewards`` (shape ``(n, n_arms)``) on ``X``."""
    X = np.asarray(X, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or rewards.ndim != 2 or rewards.shape[0] != X.shape[0]:
        raise ValueError(f"contexts {X.shape} and rewards {rewards.shape} must be non-empty and aligned")
    betas = np.stack([_fit_arm(X, rewards[:, arm]) for arm in range(rewards.shape[1])])
    log.info("fitted regret oracle (table=%s, n=%d)", label, X.shape[0])
    return RegretOracle(betas)


def fit_oracle(X, true_buckets, table: RewardTable) -> RegretOracle:
    """Fit each arm's reward under ``table`` over every patient."""
    true_buckets = np.asarray(true_buckets, dtype=np.int64)
    if true_buckets.ndim != 1 or np.shape(X)[0] != true_buckets.shape[0]:
        raise ValueError(f"contexts {np.shape(X)} and buckets {true_buckets.shape} are not aligned")
    return fit_oracle_to_rewards(X, table.entries[true_buckets], table.label)


def expected_regret(oracle: RegretOracle, x, chosen) -> float:
    v = oracle.values(x)
    return float(v.max() - v[int(chosen)])


@dataclass(frozen=True)
class EpisodeTrace:
    order: np.ndarray
    chosen: np.ndarray
    true_bucket: np.ndarray
    reward: np.ndarray
    regret: np.ndarray
    cumulative_regret: np.ndarray
    incorrect_fraction: np.ndarray

    def __len__(self) -> int:
        return len(self.chosen)

    @property
    def right_fraction(self) -> np.ndarray:
        return 1.0 - self.incorrect_fraction

    def metric(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t", "patient", "chosen", "true_bucket", "reward", "expected_regret",
                    "cumulative_regret", "incorrect_fraction"])
        for t in range(len(self)):
            w.writerow([t + 1, int(self.order[t]), int(self.chosen[t]), int(self.true_bucket[t]),
                        repr(float(self.reward[t])), repr(float(self.regret[t])),
                        repr(float(self.cumulative_regret[t])), repr(float(self.incorrect_fraction[t]))])


def run_episode(policy, dataset: WarfarinDataset, order, table: RewardTable, oracle: RegretOracle,
                policy_name: str | None = None) -> EpisodeTrace:
    """Replay patients in ``order`` through a fresh policy."""
    order = np.asarray(order, dtype=np.int64)
    n = len(dataset)
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("order must be a permutation of the dataset indices")
    name = policy_name or getattr(policy, "kind", type(policy).__name__)
    X, buckets, doses = dataset.X, dataset.buckets, dataset.doses
    regret_table = oracle.regrets(X)
    rewards_table = table.entries

    chosen = np.empty(n, dtype=np.int64)
    reward = np.empty(n)
    regret = np.empty(n)
    for t, i in enumerate(order):
        x = X[i]
        try:
            a = int(policy.select(x))
            r = rewards_table[buckets[i], a]
            policy.update(x, a, r, true_dose=doses[i])
        except PolicyError as exc:
            raise PolicyError(str(exc), step=t + 1, policy=name) from exc
        except (WarfarinBanditsError, ArithmeticError) as exc:
            raise PolicyError(f"{type(exc).__name__}: {exc}", step=t + 1, policy=name) from exc
        chosen[t] = a
        reward[t] = r
        regret[t] = regret_table[i, a]

    true_bucket = buckets[order]
    incorrect = np.cumsum(chosen != true_bucket)
    return EpisodeTrace(
        order=order,
        chosen=chosen,
        true_bucket=true_bucket,
        reward=reward,
        regret=regret,
        cumulative_regret=np.cumsum(regret),
        incorrect_fraction=incorrect / np.arange(1, n + 1),
    )


def run_realizable_episode(policy, X, oracle: RegretOracle) -> EpisodeTrace:
    """Replay contexts in order where the reward of each arm is exactly ``x @ beta_arm``."""
    X = np.asarray(X, dtype=np.float64)
    values = oracle.values(X)
    best = values.argmax(axis=1)
    regret_table = values.max(axis=1, keepdims=True) - values
    n = X.shape[0]
    chosen = np.empty(n, dtype=np.int64)
    reward = np.empty(n)
    for t in range(n):
        a = int(policy.select(X[t]))
        chosen[t] = a
        reward[t] = values[t, a]
        policy.update(X[t], a, reward[t])
    regret = regret_table[np.arange(n), chosen]
    return EpisodeTrace(
        order=np.arange(n),
        chosen=chosen,
        true_bucket=best,
        reward=reward,
        regret=regret,
        cumulative_regret=np.cumsum(regret),
        incorrect_fraction=np.cumsum(chosen != best) / np.arange(1, n + 1),
    )


# -- aggregation ----------------------------------------------------------------

def t_critical(df: int, level: float = 0.95) -> float:
    """Two-sided Student-t critical value for confidence ``level``."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    if int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df}")
    return float(scipy.stats.t.ppf(0.5 + level / 2.0, int(df)))


@dataclass(frozen=True)
class AggregateCurve:
    metric: str
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_runs: int
    level: float

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self.mean) + 1)

    @property
    def half_width(self) -> np.ndarray:
        return self.ci_high - self.mean


def aggregate(samples, metric: str = "metric", level: float = 0.95) -> AggregateCurve:
    """Mean and t-interval across runs; ``samples`` has shape ``(n_runs, T)``."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < 2:
        raise DomainError("at least two runs are needed for a confidence interval")
    mean = samples.mean(axis=0)
    half = t_critical(n - 1, level) * samples.std(axis=0, ddof=1) / np.sqrt(n)
    constant = np.all(samples == samples[0], axis=0)
    mean[constant] = samples[0, constant]
    half[constant] = 0.0
    return AggregateCurve(metric, mean, mean - half, mean + half, n, level)


def shuffle_order(seed: int, run: int, n: int) -> np.ndarray:
    """Permutation for ``run`` under ``seed``: PCG64 seeded by SeedSequence((seed, run))."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(run)])))
    return rng.permutation(n)


@dataclass
class ExperimentResult:
    policy: str
    traces: list[EpisodeTrace]
    curves: dict[str, AggregateCurve]

    def final(self, metric: str) -> tuple[float, float, float]:
        c = self.curves[metric]
        return float(c.mean[-1]), float(c.ci_low[-1]), float(c.ci_high[-1])


def run_experiment(
    make_policy: Callable[[], object],
    dataset: WarfarinDataset,
    table: RewardTable,
    oracle: RegretOracle,
    n_runs: int = 20,
    seed: int = 0,
    level: float = 0.95,
    n_jobs: int = 1,
    policy_name: str | None = None,
    orders: Sequence[np.ndarray] | None = None,
) -> ExperimentResult:
    """Replay ``n_runs`` shuffles, each with a freshly built policy, and aggregate the curves.

    Results are independent of ``n_jobs``: episodes are collected in run order.
    """
    if n_runs < 2:
        raise DomainError("n_runs must be at least 2 to form a confidence interval")
    if orders is None:
        orders = [shuffle_order(seed, r, len(dataset)) for r in range(n_runs)]
    elif len(orders) != n_runs:
        raise ValueError("need exactly one order per run")
    name = policy_name or "policy"

    def one(order):
        return run_episode(make_policy(), dataset, order, table, oracle, policy_name=name)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            traces = list(pool.map(one, orders))
    else:
        traces = [one(o) for o in orders]

    curves = {
        m: aggregate(np.stack([tr.metric(m) for tr in traces]), m, level) for m in METRICS
    }
    return ExperimentResult(name, traces, curves)


def write_curves_csv(results: Sequence[ExperimentResult], stream, stride: int = 1) -> None:
    """Long-format curves ``t,metric,policy,mean,ci_low,ci_high``; the last step is always kept."""
    if stride < 1:
        raise ValueError("stride must be positive")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["t", "metric", "policy", "mean", "ci_low", "ci_high"])
    for res in results:
        for metric in METRICS:
            c = res.curves[metric]
            T = len(c.mean)
            steps = list(range(0, T, stride))
            if steps and steps[-1] != T - 1:
                steps.append(T - 1)
            for k in steps:
                w.writerow([k + 1, metric, res.policy, repr(float(c.mean[k])),
                            repr(float(c.ci_low[k])), repr(float(c.ci_high[k]))])


def first_disjoint_step(a: AggregateCurve, b: AggregateCurve) -> int | None:
    """Earliest 1-based t after which the two intervals never overlap again."""
    disjoint = (a.ci_high < b.ci_low) | (b.ci_high < a.ci_low)
    if not disjoint[-1]:
        return None
    overlapping = np.flatnonzero(~disjoint)
    return 1 if overlapping.size == 0 else int(overlapping[-1]) + 2

