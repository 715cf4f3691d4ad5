"""Minority-game engine for distributed server activation.

Each server (player) holds ``S`` strategy tables mapping the last ``m``
winning bits to a predicted winning action (1 = active, 0 = inactive).
Every round all players act against the same history; the central unit
then broadcasts one bit, ``w = 1`` iff the attendance is at most the
cut-off.  Players see only that bit: the attendance and the cut-off never
reach :func:`select_action`.

Histories are packed into an ``m``-bit integer with the most recent bit in
the least significant position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVE = 1
INACTIVE = 0
MAX_MEMORY = 16


@dataclass(frozen=True)
class Strategy:
    """Lookup table indexed by the packed ``m``-bit history."""

    table: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.table)
        if n < 2 or n & (n - 1):
            raise ValueError(f"table length must be 2**m, got {n}")

    @property
    def memory(self) -> int:
        return len(self.table).bit_length() - 1

    def predict(self, history_index: int) -> int:
        return self.table[history_index]


@dataclass
class PlayerState:
    strategies: list[Strategy]
    scores: list[int]
    rng: np.random.Generator = field(repr=False)
    current_strategy_index: int | None = None

    def __post_init__(self) -> None:
        if not self.strategies or len(self.strategies) != len(self.scores):
            raise ValueError("need S >= 1 strategies and one score per strategy")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    actions: tuple[int, ...]
    attendance: int
    winning_bit: int
    utilities: tuple[int, ...]
    jobs_per_server: float  # nan when nobody is active
    qoe_tail: float


@dataclass
class GameState:
    history: tuple[int, ...]
    c_th: int
    players: list[PlayerState]
    scoring_mode: str = "virtual"
    round: int = 1

    @property
    def memory(self) -> int:
        return len(self.history)

    @property
    def history_index(self) -> int:
        return pack_history(self.history)


def pack_history(bits: Sequence[int]) -> int:
    idx = 0
    for bit in bits:
        idx = (idx << 1) | bit
    return idx


def draw_strategies(S: int, m: int, rng: np.random.Generator) -> list[Strategy]:
    """``S`` distinct tables drawn uniformly from all ``2**(2**m)`` tables."""
    size = 1 << m
    if math.log2(S) > size:
        raise ValueError(f"cannot draw S={S} distinct strategies from 2**{size} tables")
    seen: set[tuple[int, ...]] = set()
    out = []
    while len(out) < S:
        table = tuple(int(v) for v in rng.integers(0, 2, size=size))
        if table in seen:
            continue
        seen.add(table)
        out.append(Strategy(table))
    return out


def init_players(
    M: int, S: int, m: int, rngs: Sequence[np.random.Generator]
) -> list[PlayerState]:
    """Players with fresh strategies and zero scores, one stream per player."""
    if M < 1 or S < 1:
        raise ValueError("need M >= 1 and S >= 1")
    if not 1 <= m <= MAX_MEMORY:
        raise ValueError(f"memory must lie in [1, {MAX_MEMORY}], got {m}")
    if len(rngs) != M:
        raise ValueError(f"need one random stream per player, got {len(rngs)} for M={M}")
    return [PlayerState(draw_strategies(S, m, rng), [0] * S, rng) for rng in rngs]


def init_history(m: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(v) for v in rng.integers(0, 2, size=m))


def select_action(player: PlayerState, history_index: int, t: int) -> int:
    """Pick the strategy to play this round and return its prediction.

    Round 1 picks uniformly; later rounds take the best-scoring strategy
    with uniform tie-breaking from the player's own stream.
    """
    scores = player.scores
    if t == 1:
        idx = int(player.rng.integers(len(scores)))
    else:
        best = max(scores)
        tied = [i for i, v in enumerate(scores) if v == best]
        idx = tied[0] if len(tied) == 1 else tied[int(player.rng.integers(len(tied)))]
    player.current_strategy_index = idx
    return player.strategies[idx].predict(history_index)


def winning_bit(attendance: int, c_th: int) -> int:
    return 1 if attendance <= c_th else 0


def realized_utility(action: int, attendance: int, c_th: int) -> int:
    """1 for being on the winning side this round, else 0."""
    if action == ACTIVE:
        return 1 if attendance <= c_th else 0
    return 1 if attendance > c_th else 0


def update_scores(
    player: PlayerState, played_action: int, w: int, history_index: int, mode: str = "virtual"
) -> None:
    """Reinforce strategies whose prediction matched the broadcast bit.

    ``literal`` rewards only the strategy that was played; ``virtual``
    rewards every strategy that would have predicted ``w``.
    """
    if mode == "literal":
        if player.current_strategy_index is None:
            raise ValueError("no strategy was played this round")
        if played_action == w:
            player.scores[player.current_strategy_index] += 1
    elif mode == "virtual":
        for i, strategy in enumerate(player.strategies):
            if strategy.table[history_index] == w:
                player.scores[i] += 1
    else:
        raise ValueError(f"unknown scoring mode {mode!r}")


def settle_round(
    t: int,
    actions: Sequence[int],
    c_th: int,
    K_T: float | None = None,
    tail_prob=None,
) -> RoundRecord:
    """Attendance, broadcast bit, utilities and QoE tail for fixed actions.

    ``tail_prob(k)`` maps jobs per active server to ``Pr[tau > T]``; a round
    with no active server has undefined load and tail probability 1.
    """
    attendance = sum(actions)
    w = winning_bit(attendance, c_th)
    utilities = tuple(realized_utility(a, attendance, c_th) for a in actions)
    if attendance == 0 or K_T is None:
        jobs = math.nan
    else:
        jobs = K_T / attendance
    if tail_prob is None:
        qoe = math.nan
    elif attendance == 0:
        qoe = 1.0
    else:
        qoe = float(tail_prob(jobs))
    return RoundRecord(t, tuple(actions), attendance, w, utilities, jobs, qoe)


def play_round(
    state: GameState,
    *,
    K_T: float | None = None,
    tail_prob=None,
    order: Sequence[int] | None = None,
    forced_actions: Sequence[int] | None = None,
) -> RoundRecord:
    """Advance ``state`` by one round in place and return its record.

    ``order`` permutes the evaluation order of players and
    ``forced_actions`` overrides their choices; both exist for testing.
    """
    players = state.players
    h = state.history_index
    t = state.round
    actions = [0] * len(players)
    for i in range(len(players)) if order is None else order:
        actions[i] = select_action(players[i], h, t)
    if forced_actions is not None:
        if len(forced_actions) != len(players):
            raise ValueError("forced_actions needs one entry per player")
        actions = [int(a) for a in forced_actions]
    record = settle_round(t, actions, state.c_th, K_T, tail_prob)
    for player, action in zip(players, actions):
        update_scores(player, action, record.winning_bit, h, state.scoring_mode)
    state.history = state.history[1:] + (record.winning_bit,)
    state.round += 1
    return record
