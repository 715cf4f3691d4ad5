"""Multi-run experiment harness: the minority game and two baselines.

Random streams are derived from ``(seed, policy, run_index, slot)`` with
:class:`numpy.random.SeedSequence`, slot 0 belonging to the engine and slot
``1 + i`` to player ``i``.  Adding runs, players or policies therefore
never perturbs existing streams, and every run is a pure function of the
parameters.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .game import GameState, RoundRecord, init_history, init_players, play_round, settle_round
from .params import SystemParams
from .planner import PlanResult, plan
from .stats import tau_tail_prob

POLICIES = ("mg", "random", "optimal")
_POLICY_TAG = {"mg": 0, "random": 1, "optimal": 2}


def stream(seed: int, policy: str, run_index: int, slot: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_POLICY_TAG[policy], run_index, slot))
    return np.random.default_rng(ss)


def player_streams(params: SystemParams, policy: str, run_index: int) -> list[np.random.Generator]:
    return [stream(params.seed, policy, run_index, 1 + i) for i in range(params.M)]


@dataclass
class RunResult:
    """Column-wise store of one run's round records."""

    policy: str
    run_index: int
    c_th: int
    actions: np.ndarray  # (rounds, M) int8
    utilities: np.ndarray  # (rounds, M) int8
    attendance: np.ndarray
    winning_bit: np.ndarray
    jobs_per_server: np.ndarray
    qoe_tail: np.ndarray
    final_scores: list[list[int]] | None = field(default=None, repr=False)

    @classmethod
    def from_records(
        cls, policy: str, run_index: int, c_th: int, records: Sequence[RoundRecord], **extra
    ) -> RunResult:
        return cls(
            policy=policy,
            run_index=run_index,
            c_th=c_th,
            actions=np.array([r.actions for r in records], dtype=np.int8),
            utilities=np.array([r.utilities for r in records], dtype=np.int8),
            attendance=np.array([r.attendance for r in records], dtype=np.int64),
            winning_bit=np.array([r.winning_bit for r in records], dtype=np.int8),
            jobs_per_server=np.array([r.jobs_per_server for r in records], dtype=float),
            qoe_tail=np.array([r.qoe_tail for r in records], dtype=float),
            **extra,
        )

    @property
    def rounds(self) -> int:
        return len(self.attendance)

    @property
    def per_player_cumulative_utility(self) -> np.ndarray:
        return self.utilities.sum(axis=0, dtype=np.int64)

    @property
    def mean_utility(self) -> np.ndarray:
        """Per-round utility averaged over servers."""
        return self.utilities.mean(axis=1)

    @property
    def records(self) -> Iterator[RoundRecord]:
        for i in range(self.rounds):
            yield RoundRecord(
                t=i + 1,
                actions=tuple(int(a) for a in self.actions[i]),
                attendance=int(self.attendance[i]),
                winning_bit=int(self.winning_bit[i]),
                utilities=tuple(int(u) for u in self.utilities[i]),
                jobs_per_server=float(self.jobs_per_server[i]),
                qoe_tail=float(self.qoe_tail[i]),
            )


def resolve_cut_off(params: SystemParams) -> tuple[PlanResult, int]:
    """Planner output and the cut-off the game runs with."""
    result = plan(params)
    c_th = result.game_cut_off if params.c_th_override is None else params.c_th_override
    return result, c_th


def _tail_prob_fn(params: SystemParams, result: PlanResult):
    dm = result.delay_moments
    return functools.lru_cache(maxsize=None)(
        lambda k: tau_tail_prob(k, dm, params.deadline)
    )


def run_mg(params: SystemParams, run_index: int) -> RunResult:
    result, c_th = resolve_cut_off(params)
    tail_prob = _tail_prob_fn(params, result)
    players = init_players(
        params.M, params.S, params.memory, player_streams(params, "mg", run_index)
    )
    history = init_history(params.memory, stream(params.seed, "mg", run_index, 0))
    state = GameState(history, c_th, players, params.scoring_mode)
    records = [
        play_round(state, K_T=params.K_T, tail_prob=tail_prob) for _ in range(params.rounds)
    ]
    return RunResult.from_records(
        "mg", run_index, c_th, records, final_scores=[list(p.scores) for p in players]
    )


def run_random_baseline(params: SystemParams, run_index: int) -> RunResult:
    """Every server flips a fair coin each round."""
    result, c_th = resolve_cut_off(params)
    tail_prob = _tail_prob_fn(params, result)
    coins = np.stack(
        [rng.integers(0, 2, size=params.rounds) for rng in player_streams(params, "random", run_index)],
        axis=1,
    )
    records = [
        settle_round(t + 1, [int(a) for a in coins[t]], c_th, params.K_T, tail_prob)
        for t in range(params.rounds)
    ]
    return RunResult.from_records("random", run_index, c_th, records)


def run_optimal_baseline(params: SystemParams, run_index: int) -> RunResult:
    """A central scheduler activates exactly ``c_th`` servers, round-robin."""
    result, c_th = resolve_cut_off(params)
    tail_prob = _tail_prob_fn(params, result)
    M = params.M
    records = []
    for t in range(params.rounds):
        start = (t * c_th) % M
        actions = [0] * M
        for j in range(c_th):
            actions[(start + j) % M] = 1
        records.append(settle_round(t + 1, actions, c_th, params.K_T, tail_prob))
    return RunResult.from_records("optimal", run_index, c_th, records)


RUNNERS = {"mg": run_mg, "random": run_random_baseline, "optimal": run_optimal_baseline}


def _run_one(args: tuple[SystemParams, str, int]) -> RunResult:
    params, policy, run_index = args
    return RUNNERS[policy](params, run_index)


def run_experiment(
    params: SystemParams, policies: Sequence[str] = POLICIES, workers: int = 1
) -> dict[str, list[RunResult]]:
    """All runs of every policy; results are independent of ``workers``."""
    for policy in policies:
        if policy not in RUNNERS:
            raise ValueError(f"unknown policy {policy!r}")
    plan(params)  # fail fast before spawning work
    jobs = [(params, policy, i) for policy in policies for i in range(params.runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(job) for job in jobs]
    out: dict[str, list[RunResult]] = {p: [] for p in policies}
    for (_, policy, _), res in zip(jobs, done):
        out[policy].append(res)
    return out


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float


def cross_run(values: Sequence[float]) -> Estimate:
    """Mean and standard error across runs, with exactly rounded sums.

    A single run has no spread estimate; its standard error is reported as 0.
    """
    n = len(values)
    if n == 0:
        raise ValueError("no runs to aggregate")
    mean = math.fsum(values) / n
    if n < 2:
        return Estimate(mean, 0.0)
    ss = math.fsum((v - mean) ** 2 for v in values)
    return Estimate(mean, math.sqrt(ss / (n - 1) / n))


@dataclass
class PolicyMetrics:
    runs: int
    rounds: int
    c_th: int
    tail_start: int
    mean_attendance: Estimate
    attendance_variance: Estimate
    mean_utility: Estimate
    tail_mean_utility: Estimate
    mean_qoe_tail: Estimate
    qoe_series: list[float]

    def summary(self) -> dict:
        return {
            "runs": self.runs,
            "rounds": self.rounds,
            "c_th": self.c_th,
            "tail_start_round": self.tail_start + 1,
            "mean_attendance": vars(self.mean_attendance),
            "attendance_variance": vars(self.attendance_variance),
            "mean_utility": vars(self.mean_utility),
            "tail_mean_utility": vars(self.tail_mean_utility),
            "mean_qoe_tail": vars(self.mean_qoe_tail),
        }


@dataclass
class AggregateMetrics:
    tail_fraction: float
    policies: dict[str, PolicyMetrics]

    def to_dict(self, include_series: bool = True) -> dict:
        out: dict = {"tail_fraction": self.tail_fraction, "policies": {}}
        for name, pm in self.policies.items():
            entry = pm.summary()
            if include_series:
                entry["qoe_series"] = pm.qoe_series
            out["policies"][name] = entry
        return out


def tail_start(rounds: int, tail_fraction: float) -> int:
    """Index of the first round in the trailing window."""
    width = max(1, round(tail_fraction * rounds))
    return rounds - min(width, rounds)


def _policy_metrics(runs: Sequence[RunResult], tail_fraction: float) -> PolicyMetrics:
    rounds = runs[0].rounds
    if any(r.rounds != rounds for r in runs):
        raise ValueError("all runs of a policy must have the same number of rounds")
    start = tail_start(rounds, tail_fraction)
    tail_att = [r.attendance[start:].astype(float) for r in runs]
    qoe = np.array([r.qoe_tail for r in runs])
    series = [math.fsum(col) / len(runs) for col in qoe.T]
    return PolicyMetrics(
        runs=len(runs),
        rounds=rounds,
        c_th=runs[0].c_th,
        tail_start=start,
        mean_attendance=cross_run([float(a.mean()) for a in tail_att]),
        attendance_variance=cross_run([float(a.var()) for a in tail_att]),
        mean_utility=cross_run([float(r.mean_utility.mean()) for r in runs]),
        tail_mean_utility=cross_run([float(r.mean_utility[start:].mean()) for r in runs]),
        mean_qoe_tail=cross_run([float(np.mean(r.qoe_tail)) for r in runs]),
        qoe_series=series,
    )


def aggregate(
    results: Mapping[str, Sequence[RunResult]], tail_fraction: float = 0.5
) -> AggregateMetrics:
    """Cross-run means and standard errors per policy."""
    lengths = {r.rounds for runs in results.values() for r in runs}
    if len(lengths) > 1:
        raise ValueError(f"runs differ in length: {sorted(lengths)}")
    return AggregateMetrics(
        tail_fraction=tail_fraction,
        policies={name: _policy_metrics(runs, tail_fraction) for name, runs in results.items()},
    )


def utility_ordering(metrics: AggregateMetrics, z: float = 2.0) -> dict[str, bool]:
    """Whether optimal > mg > random, each gap beyond ``z`` combined standard errors."""
    u = {name: pm.mean_utility for name, pm in metrics.policies.items()}

    def clears(hi: Estimate, lo: Estimate) -> bool:
        return hi.mean - lo.mean > z * math.hypot(hi.stderr, lo.stderr)

    return {
        "optimal_above_mg": clears(u["optimal"], u["mg"]),
        "mg_above_random": clears(u["mg"], u["random"]),
    }
