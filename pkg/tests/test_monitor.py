"""Functional evaluation, decrease checking, falsification sweeps."""
import numpy as np
import pytest

from krasovskii import (
    Certificate,
    CertificateError,
    CoupledSystem,
    Derivation,
    DiscreteDelaySystem,
    SwitchedDelaySystem,
    build_certificate,
    check_decrease,
    constant_signal,
    eval_V_coupled,
    eval_V_discrete,
    eval_V_neutral,
    eval_V_switched,
    falsify,
    functional_series,
    identity,
    simulate_discrete,
    simulate_switched_delay,
)
from krasovskii.monitor import TOL_MONO

from _generators import (
    certified_run_coupled,
    certified_run_discrete,
    certified_run_neutral,
    certified_run_switched,
)

A2 = np.array([[-2.0, 0.0], [0.0, -2.0]])
B1 = np.array([[1.0, 1.0], [1.0, 0.0]])
B2 = np.array([[0.0, 1.0], [3.0, 0.0]])
PAIR = SwitchedDelaySystem((A2, A2), ((B1, B2),), (1.0,))


def cert_of(kind, nu, mu, beta=0.0):
    return Certificate(kind=kind, nu=np.asarray(nu, float),
                       mu=tuple(np.asarray(m, float) for m in mu),
                       beta=float(beta),
                       derivation=Derivation(slack=np.nan, lp_iterations=0))


# ---------------------------------------------------------------------------
# pointwise V evaluation
# ---------------------------------------------------------------------------

def test_eval_switched_constant_window():
    cert = cert_of("switched_delay", [7.0, 4.0], [[13.0, 7.5]])
    window = np.ones((5, 2))  # spans tau = 1 at h = 1/4
    v = eval_V_switched(cert, window, 0.25, identity())
    # head 7+4 plus tail (13+7.5) * integral of 1 over one unit
    assert v == pytest.approx(11.0 + 20.5)


def test_eval_switched_linear_window():
    cert = cert_of("switched_delay", [2.0], [[3.0]])
    window = np.linspace(0.0, 1.0, 5)[:, None]
    v = eval_V_switched(cert, window, 0.25, identity())
    assert v == pytest.approx(2.0 + 3.0 * 0.5)  # trapezoid of a ramp


def test_eval_switched_channel_lags():
    cert = cert_of("switched_delay", [1.0], [[2.0], [4.0]])
    window = np.ones((5, 1))
    # channel delays 1 and 4 steps at h = 1: integrals 1 and 4
    v = eval_V_switched(cert, window, 1.0, identity(), lags=(1, 4))
    assert v == pytest.approx(1.0 + 2.0 * 1.0 + 4.0 * 4.0)
    with pytest.raises(ValueError, match="insufficient history"):
        eval_V_switched(cert, window, 1.0, identity(), lags=(1, 5))
    with pytest.raises(ValueError, match="need 2 lags"):
        eval_V_switched(cert, window, 1.0, identity(), lags=(1,))


def test_eval_coupled_and_neutral_hand_values():
    cc = cert_of("coupled", [2.0], [[3.0]])
    v = eval_V_coupled(cc, [1.0], [[2.0], [1.0]], 0.5)
    assert v == pytest.approx(2.0 + 3.0 * 0.75)
    assert eval_V_coupled(cc, [-1.0], [[5.0]], 0.5) == pytest.approx(2.0)  # tau = 0

    nc = cert_of("neutral", [2.0], [[3.0]])
    v = eval_V_neutral(nc, [[1.0], [0.8]], [[0.25]], 0.5)
    assert v == pytest.approx(2.0 * 0.55 + 3.0 * 0.45)


def test_eval_discrete_hand_value():
    cert = cert_of("discrete", [1e6], [[5.5e5]])
    v = eval_V_discrete(cert, np.ones((3, 1)), identity())
    assert v == pytest.approx(1e6 + 1.1e6)
    # zero-lag channel contributes no memory term
    cert0 = cert_of("discrete", [2.0], [[9.0]])
    assert eval_V_discrete(cert0, [[1.5]], identity(), lags=(0,)) == pytest.approx(3.0)


def test_series_matches_pointwise_eval():
    traj, cert = certified_run_switched(np.random.default_rng(3))
    V = functional_series(cert, traj, traj.nonlinearity)
    full = traj.full_x
    k_max = max(traj.lags)
    for i in (0, 7, V.size - 1):
        window = full[i:k_max + i + 1]
        v = eval_V_switched(cert, window, traj.h, traj.nonlinearity,
                            lags=traj.lags)
        assert V[i] == pytest.approx(v, rel=1e-12)


def test_series_class_mismatch():
    traj, _ = certified_run_switched(np.random.default_rng(3))
    with pytest.raises(CertificateError, match="does not match"):
        functional_series(cert_of("discrete", [1.0, 1.0], [[1.0, 1.0]]), traj,
                          identity())


# ---------------------------------------------------------------------------
# decrease checking
# ---------------------------------------------------------------------------

def test_certified_scenarios_pass():
    for maker in (certified_run_switched, certified_run_coupled,
                  certified_run_neutral, certified_run_discrete):
        for trial in range(3):
            rng = np.random.default_rng([11, trial])
            traj, cert = maker(rng)
            report = check_decrease(traj, cert, traj.nonlinearity)
            assert report.passed, (maker.__name__, trial, report.violations[:2])
            assert report.worst <= 0.0
            assert report.V.shape == traj.t.shape
            assert report.margins.size == traj.t.size - 1


def test_monitor_meta_fields():
    traj, cert = certified_run_switched(np.random.default_rng(0))
    report = check_decrease(traj, cert, traj.nonlinearity, rate_checks=17, seed=5)
    assert report.meta["class"] == "switched_delay"
    assert report.meta["tol_mono"] == TOL_MONO
    assert 0 < report.meta["rate_checked"] <= 17
    assert report.meta["rate_skipped"] >= 0
    none = check_decrease(traj, cert, traj.nonlinearity, rate_checks=0)
    assert none.meta["rate_checked"] == 0


def test_forged_certificate_is_caught():
    # history large in the past, small now: the delayed channel pumps the
    # state up, so a functional without the memory term must rise
    hist = lambda t: np.array([0.1 - 4.9 * t, 0.1 - 4.9 * t])
    traj = simulate_switched_delay(PAIR, identity(), constant_signal(2, 2),
                                   hist, 2.0, 1 / 8)
    forged = cert_of("switched_delay", [7.0, 4.0], [[0.01, 0.01]])
    report = check_decrease(traj, forged, identity())
    assert not report.passed
    first = report.violations[0]
    assert first.check == "monotonic"
    assert first.v_after > first.v_before
    assert first.time == traj.t[first.step]
    assert report.worst > 0.0
    # the genuine certificate passes on the same trajectory
    good = check_decrease(traj, build_certificate(PAIR), identity())
    assert good.passed


def test_forged_discrete_certificate():
    sys_ = DiscreteDelaySystem(([[0.3]],), (([[0.4]],),), (2,))
    window = np.array([[1.0], [1.0], [0.01]])
    traj = simulate_discrete(sys_, identity(), [1] * 8, window, 8)
    forged = cert_of("discrete", [1.0], [[1e-9]])
    report = check_decrease(traj, forged, identity())
    assert not report.passed
    assert all(v.check == "monotonic" for v in report.violations)
    good = check_decrease(traj, build_certificate(sys_), identity())
    assert good.passed


def test_inflated_beta_trips_rate_check():
    traj, cert = certified_run_switched(np.random.default_rng(8))
    greedy = Certificate(kind=cert.kind, nu=cert.nu, mu=cert.mu,
                         beta=1e9, derivation=cert.derivation)
    report = check_decrease(traj, greedy, traj.nonlinearity, rate_checks=50)
    assert not report.passed
    assert any(v.check == "rate" for v in report.violations)
    assert not any(v.check == "monotonic" for v in report.violations)


# ---------------------------------------------------------------------------
# falsification
# ---------------------------------------------------------------------------

UNSTABLE_COUPLED = CoupledSystem(A=[[[-1.0]]], B=[[[1.0]]], C=[[[1.0]]],
                                 D=[[[0.5]]], tau=0.5)


def test_falsify_finds_growth():
    res = falsify(UNSTABLE_COUPLED, budget=10, seed=0)
    assert res.found
    assert res.best_ratio > 10.0
    assert res.trajectory is not None
    assert len(res.ratios) == 10
    assert res.ratios[res.best_index] == res.best_ratio
    assert "error" not in res.scenario


def test_falsify_deterministic():
    a = falsify(UNSTABLE_COUPLED, budget=6, seed=3)
    b = falsify(UNSTABLE_COUPLED, budget=6, seed=3)
    assert a.ratios == b.ratios and a.best_index == b.best_index
    c = falsify(UNSTABLE_COUPLED, budget=6, seed=4)
    assert c.ratios != a.ratios


def test_falsify_parallel_matches_serial(monkeypatch):
    serial = falsify(UNSTABLE_COUPLED, budget=6, seed=1)
    monkeypatch.setenv("KRASOVSKII_THREADS", "4")
    parallel = falsify(UNSTABLE_COUPLED, budget=6, seed=1)
    assert serial.ratios == parallel.ratios
    assert serial.best_index == parallel.best_index


def test_falsify_stable_system_finds_nothing():
    calm = SwitchedDelaySystem(([[-3.0]],), (([[0.5]],),), (1.0,))
    res = falsify(calm, budget=8, seed=0, horizon=8.0)
    assert not res.found
    assert res.best_ratio <= 1.0
    with pytest.raises(ValueError):
        falsify(calm, budget=0)


def test_falsify_discrete_uses_integer_grid():
    # growth must survive bounded admissible f: saturating draws plateau,
    # so give the sweep enough scenarios to hit an expanding one
    grow = DiscreteDelaySystem(([[1.5]],), (([[0.05]],),), (1,))
    res = falsify(grow, budget=12, seed=0, horizon=40)
    assert res.found
    assert res.trajectory.kind == "discrete"
    assert res.trajectory.h == 1.0
