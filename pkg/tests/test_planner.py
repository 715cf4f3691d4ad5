import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mecgame.params import ConfigError, load_config
from mecgame.planner import (
    ApproximationWarning,
    EconomicParams,
    InfeasiblePlanError,
    beta_sweep,
    c_bounds,
    derive,
    k_max,
    k_min,
    plan,
    price_for,
    reward,
)
from mecgame.stats import DelayMoments, tau_tail_prob

from .oracles import k_max_bisect


@pytest.fixture
def sec4():
    return load_config("paper_sec4")


def test_reward():
    econ = EconomicParams(r_th=100, e_f=50, e_j=5, e_p=20)
    assert reward(0, econ) == -50
    assert reward(10, econ) == 100
    assert reward(k_min(econ), econ) == pytest.approx(100, rel=1e-15)


def test_k_min():
    assert k_min(EconomicParams(100, 50, 5, 20)) == 10
    with pytest.warns(UserWarning):
        assert k_min(EconomicParams(0, 0, 5, 20)) == 0
    with pytest.raises(ValueError):
        EconomicParams(100, 50, 5, 5)
    with pytest.raises(ValueError):
        k_min(EconomicParams(100, 50, 5))


def test_k_max_half_beta_collapses():
    dm = DelayMoments(2.0, 3.0)
    assert k_max(dm, 50.0, 0.5) == pytest.approx(25.0, rel=1e-15)


def test_k_max_monotone_in_beta():
    dm = DelayMoments(10.0, 6.0)
    ks = [k_max(dm, 350.0, b) for b in (0.01, 0.05, 0.2)]
    assert ks[0] < ks[1] < ks[2]


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1])
def test_k_max_domain(beta):
    with pytest.raises(ValueError):
        k_max(DelayMoments(1.0, 1.0), 10.0, beta)


def test_k_max_needs_positive_mean():
    with pytest.raises(ValueError):
        k_max(DelayMoments(-1.0, 1.0), 10.0, 0.05)


@given(
    mean=st.floats(0.01, 50.0),
    var=st.floats(0.01, 50.0),
    deadline=st.floats(0.1, 1000.0),
    beta=st.floats(0.001, 0.499),
)
def test_k_max_inverts_tail_probability(mean, var, deadline, beta):
    dm = DelayMoments(mean, var)
    k = k_max(dm, deadline, beta)
    assert tau_tail_prob(k, dm, deadline) == pytest.approx(beta, abs=1e-9)


@pytest.mark.parametrize(
    "mean,var,deadline,beta",
    [(10.0, 6.0, 350.0, 0.05), (3.2, 4.0, 0.35, 0.05), (0.5, 0.01, 10.0, 0.3), (1.0, 9.0, 2.0, 0.01)],
)
def test_k_max_matches_bisection(mean, var, deadline, beta):
    assert k_max(DelayMoments(mean, var), deadline, beta) == pytest.approx(
        k_max_bisect(mean, var, deadline, beta), rel=1e-7
    )


def test_c_bounds():
    assert c_bounds(500, 10, 50) == (10, 50)
    c_min, c_max = c_bounds(500, 25, 25)
    assert c_min == c_max


def test_plan_reference_config(sec4):
    result = plan(sec4)
    assert result.c_th == 15
    assert result.c_th_ceil == 16
    assert result.game_cut_off == 16
    # quadrature-checked moments under the millisecond reading
    assert result.mu_theta == pytest.approx(10.0000026997143917691, rel=1e-13)
    assert result.var_theta == pytest.approx(5.9999811019919691587, rel=1e-12)
    assert result.k_min == pytest.approx(result.k_max, rel=1e-9)
    assert result.c_min == pytest.approx(result.c_max, rel=1e-9)
    assert result.c_th_real == pytest.approx(result.c_min, rel=1e-15)
    assert tau_tail_prob(result.k_max, result.delay_moments, sec4.deadline) == pytest.approx(
        0.05, abs=1e-9
    )


def test_plan_literal_units_infeasible():
    params = load_config("paper_sec4_literal")
    with pytest.warns(ApproximationWarning):
        result = derive(params)
    assert result.k_max < 1
    with pytest.raises(InfeasiblePlanError), warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        plan(params)


def test_price_fixpoint_and_perturbation(sec4):
    result = plan(sec4)
    econ = EconomicParams(sec4.R_th, sec4.e_f, sec4.e_j, result.e_p_star)
    assert k_min(econ) == pytest.approx(result.k_max, rel=1e-12)
    dearer = plan(sec4.replace(e_p=result.e_p_star * 1.1))
    assert dearer.k_min < dearer.k_max
    assert dearer.c_max > dearer.c_th_real


def test_price_for_is_inverse_of_k_min():
    econ = EconomicParams(100, 50, 5)
    for kmax in (0.5, 3.0, 33.3, 1e4):
        price = price_for(econ, kmax)
        assert k_min(EconomicParams(100, 50, 5, price)) == pytest.approx(kmax, rel=1e-12)


def test_beta_domain_rejected(sec4):
    with pytest.raises(ConfigError):
        sec4.replace(beta=0.6)
    with pytest.raises(ValueError):
        derive(sec4, beta=0.5)


def test_clt_warning():
    params = load_config("paper_sec4").replace(deadline=100.0)
    with pytest.warns(ApproximationWarning):
        derive(params)


def test_beta_sweep_rows(sec4):
    betas = [0.01 * i for i in range(1, 46)]
    rows = beta_sweep(sec4, betas)
    assert [r.beta for r in rows] == betas
    assert all(r.feasible for r in rows)
    single = beta_sweep(sec4, [sec4.beta])[0].result
    assert single == plan(sec4)
    for prev, cur in zip(rows, rows[1:]):
        assert cur.result.k_max > prev.result.k_max
        assert cur.result.c_th_real < prev.result.c_th_real
        assert cur.result.e_p_star < prev.result.e_p_star
    # each row independently against bisection on the tail probability
    for row in rows:
        r = row.result
        assert r.k_max == pytest.approx(
            k_max_bisect(r.mu_theta, r.var_theta, sec4.deadline, r.beta), rel=1e-7
        )


def test_beta_sweep_marks_bad_rows(sec4):
    rows = beta_sweep(sec4.replace(M=15), [0.05, 0.2, 0.7])
    assert rows[0].status.startswith("infeasible")  # ceil cut-off 16 > 15
    assert rows[1].feasible  # 14.79 -> 15
    assert rows[2].result is None and rows[2].status.startswith("error")
