import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from mecgame.game import (
    GameState,
    PlayerState,
    Strategy,
    draw_strategies,
    init_history,
    init_players,
    pack_history,
    play_round,
    realized_utility,
    select_action,
    update_scores,
    winning_bit,
)


def rngs(n, seed=0):
    return [np.random.default_rng([seed, i]) for i in range(n)]


def make_state(M=21, S=2, m=5, c_th=15, seed=0, mode="virtual"):
    players = init_players(M, S, m, rngs(M, seed))
    history = init_history(m, np.random.default_rng([seed, 999]))
    return GameState(history, c_th, players, mode)


def test_init_players_shape():
    players = init_players(21, 2, 5, rngs(21))
    assert len(players) == 21
    for p in players:
        assert len(p.strategies) == 2
        assert p.scores == [0, 0]
        assert all(len(s.table) == 32 for s in p.strategies)
        assert p.strategies[0] != p.strategies[1]


def test_init_players_deterministic():
    a = init_players(21, 2, 5, rngs(21, 4))
    b = init_players(21, 2, 5, rngs(21, 4))
    assert [p.strategies for p in a] == [p.strategies for p in b]


def test_draw_strategies_exhausts_small_pool():
    tables = draw_strategies(4, 1, np.random.default_rng(0))
    assert sorted(s.table for s in tables) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(ValueError):
        draw_strategies(5, 1, np.random.default_rng(0))


def test_init_players_validation():
    with pytest.raises(ValueError):
        init_players(3, 2, 0, rngs(3))
    with pytest.raises(ValueError):
        init_players(3, 2, 17, rngs(3))
    with pytest.raises(ValueError):
        init_players(3, 2, 5, rngs(2))


def test_strategy_table_must_be_power_of_two():
    with pytest.raises(ValueError):
        Strategy((0, 1, 1))
    assert Strategy((0,) * 8).memory == 3


def _player(scores, tables=((1, 1), (0, 0)), seed=0):
    return PlayerState([Strategy(t) for t in tables], list(scores), np.random.default_rng(seed))


def test_select_action_strict_argmax():
    p = _player((5, 3))
    assert select_action(p, 0, t=2) == 1
    assert p.current_strategy_index == 0


def test_select_action_ties_are_fair():
    # chi-square goodness of fit over 10^4 seeded tie-breaks
    p = _player((4, 4), seed=123)
    picks = [0, 0]
    for _ in range(10_000):
        select_action(p, 0, t=5)
        picks[p.current_strategy_index] += 1
    assert chisquare(picks).pvalue > 0.001


def test_select_action_first_round_ignores_scores():
    p = _player((100, 0), seed=5)
    picks = [0, 0]
    for _ in range(4000):
        select_action(p, 0, t=1)
        picks[p.current_strategy_index] += 1
    assert chisquare(picks).pvalue > 0.001


def test_single_strategy_always_selected():
    p = PlayerState([Strategy((1, 0))], [0], np.random.default_rng(0))
    for t in range(1, 20):
        select_action(p, t % 2, t)
        assert p.current_strategy_index == 0


def test_player_facing_input_is_history_and_own_state():
    assert list(inspect.signature(select_action).parameters) == ["player", "history_index", "t"]


@pytest.mark.parametrize(
    "attendance,c_th,w", [(10, 15, 1), (16, 15, 0), (15, 15, 1), (0, 15, 1), (21, 15, 0)]
)
def test_winning_bit(attendance, c_th, w):
    assert winning_bit(attendance, c_th) == w


@pytest.mark.parametrize(
    "action,attendance,expected",
    [(1, 10, 1), (0, 10, 0), (0, 16, 1), (1, 16, 0), (1, 15, 1), (0, 15, 0)],
)
def test_realized_utility(action, attendance, expected):
    assert realized_utility(action, attendance, 15) == expected


def test_update_scores_literal():
    p = _player((3, 7))
    p.current_strategy_index = 0
    update_scores(p, 1, 1, 0, "literal")
    assert p.scores == [4, 7]
    update_scores(p, 0, 1, 0, "literal")
    assert p.scores == [4, 7]


def test_update_scores_virtual():
    p = _player((3, 7))
    p.current_strategy_index = 0
    update_scores(p, 1, 0, 0, "virtual")
    assert p.scores == [3, 8]


def test_update_scores_unknown_mode():
    p = _player((0, 0))
    p.current_strategy_index = 0
    with pytest.raises(ValueError):
        update_scores(p, 1, 1, 0, "bogus")


def test_forced_rounds():
    state = make_state()
    rec = play_round(state, forced_actions=[1] * 21)
    assert (rec.attendance, rec.winning_bit, sum(rec.utilities)) == (21, 0, 0)
    rec = play_round(state, forced_actions=[0] * 21)
    assert (rec.attendance, rec.winning_bit, sum(rec.utilities)) == (0, 1, 0)
    assert rec.qoe_tail != rec.qoe_tail  # no tail function supplied


def test_empty_round_load_conventions():
    state = make_state()
    rec = play_round(state, K_T=500, tail_prob=lambda k: 0.0, forced_actions=[0] * 21)
    assert np.isnan(rec.jobs_per_server)
    assert rec.qoe_tail == 1.0


def _records(seed, rounds, mode="virtual", order=None):
    state = make_state(seed=seed, mode=mode)
    return [play_round(state, order=order) for _ in range(rounds)]


def test_engine_determinism():
    assert _records(3, 10_000) == _records(3, 10_000)


@pytest.mark.parametrize("mode", ["literal", "virtual"])
def test_simultaneity_under_permuted_evaluation(mode):
    order = list(np.random.default_rng(1).permutation(21))
    assert _records(8, 2000, mode) == _records(8, 2000, mode, order=order)


def _check_invariants(M, S, m, c_th, mode, seed, rounds):
    state = make_state(M, S, m, c_th, seed, mode)
    emitted = list(state.history)
    prev_scores = [list(p.scores) for p in state.players]
    for t in range(1, rounds + 1):
        assert state.round == t
        assert state.history == tuple(emitted[-m:])
        rec = play_round(state)
        assert rec.attendance == sum(rec.actions)
        assert 0 <= rec.attendance <= M
        assert rec.winning_bit == (1 if rec.attendance <= c_th else 0)
        expected = rec.attendance if rec.winning_bit else M - rec.attendance
        assert sum(rec.utilities) == expected
        for a, u in zip(rec.actions, rec.utilities):
            assert u == realized_utility(a, rec.attendance, c_th)
        for p, before in zip(state.players, prev_scores):
            assert all(0 <= b <= s <= t for b, s in zip(before, p.scores))
            assert sum(s - b for b, s in zip(before, p.scores)) <= (S if mode == "virtual" else 1)
        prev_scores = [list(p.scores) for p in state.players]
        emitted.append(rec.winning_bit)
    assert state.history == tuple(emitted[-m:])


@settings(max_examples=25, deadline=None)
@given(
    M=st.integers(2, 25),
    S=st.integers(1, 4),
    m=st.integers(1, 6),
    c_frac=st.floats(0, 1),
    mode=st.sampled_from(["literal", "virtual"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_engine_invariants_property(M, S, m, c_frac, mode, seed):
    _check_invariants(M, S, m, round(c_frac * M), mode, seed, rounds=200)


def test_pack_history():
    assert pack_history((1, 0, 1)) == 5
    assert pack_history((0, 0, 0, 1)) == 1
