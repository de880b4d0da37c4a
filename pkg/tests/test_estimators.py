"""Estimator-style certifier wrappers: sklearn protocol plus fit semantics."""
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from krasovskii import (
    CoupledCertifier,
    CoupledSystem,
    DiscreteCertifier,
    DiscreteDelaySystem,
    InfeasibleSystemError,
    NeutralCertifier,
    NeutralSystem,
    StructuralError,
    SwitchedDelayCertifier,
    SwitchedDelaySystem,
    class_tag,
    simulate_switched_delay,
)
from krasovskii.monitor import functional_series

from _generators import random_switched_delay, scenario_switched

A2 = np.array([[-2.0, 0.0], [0.0, -2.0]])
B1 = np.array([[1.0, 1.0], [1.0, 0.0]])
B2 = np.array([[0.0, 1.0], [3.0, 0.0]])
PAIR = SwitchedDelaySystem((A2, A2), ((B1, B2),), (1.0,))

SCALAR_COUPLED = CoupledSystem(A=[[[-2.0]]], B=[[[1.0]]], C=[[[1.0]]],
                               D=[[[0.25]]], tau=0.25)
SCALAR_NEUTRAL = NeutralSystem(A=[[[-2.0]]], G=[[[0.4]]], D=[[0.25]], tau=0.5)
SCALAR_DISCRETE = DiscreteDelaySystem(([[0.3]],), (([[0.4]],),), (2,))


# ---------------------------------------------------------------------------
# sklearn parameter protocol
# ---------------------------------------------------------------------------

def test_params_roundtrip():
    est = SwitchedDelayCertifier()
    assert est.get_params() == {"nu_cap": 1e6, "slack_threshold": 1e-9,
                                "tuple_cap": 100_000}
    est.set_params(nu_cap=50.0)
    assert est.nu_cap == 50.0
    cc = CoupledCertifier(max_halvings=7)
    assert cc.get_params()["max_halvings"] == 7


def test_clone_drops_fitted_state():
    est = SwitchedDelayCertifier(nu_cap=100.0).fit(PAIR)
    assert hasattr(est, "certificate_")
    fresh = clone(est)
    assert fresh.nu_cap == 100.0
    assert not hasattr(fresh, "certificate_")


def test_unfitted_raises():
    est = SwitchedDelayCertifier()
    with pytest.raises(NotFittedError):
        est.transform(None)
    with pytest.raises(NotFittedError):
        est.score(None)


# ---------------------------------------------------------------------------
# fit semantics
# ---------------------------------------------------------------------------

def test_fit_exposes_certificate():
    est = SwitchedDelayCertifier()
    out = est.fit(PAIR)
    assert out is est
    assert est.system_ is PAIR
    assert est.certificate_.kind == "switched_delay"
    np.testing.assert_allclose(est.nu_, [1e6, 6e5], rtol=1e-9)
    np.testing.assert_allclose(est.mu_[0], [1.9e6, 1.1e6], rtol=1e-9)
    assert est.beta_ == pytest.approx(1e5, rel=1e-9)
    assert est.margins_.passed


def test_fit_forwards_nu_cap():
    est = SwitchedDelayCertifier(nu_cap=100.0).fit(PAIR)
    assert np.all(est.nu_ <= 100.0 + 1e-9)
    assert est.beta_ == pytest.approx(10.0, rel=1e-9)


def test_fit_rejects_wrong_system_class():
    with pytest.raises(TypeError, match="expects a SwitchedDelaySystem"):
        SwitchedDelayCertifier().fit(SCALAR_COUPLED)
    with pytest.raises(TypeError, match="expects a CoupledSystem"):
        CoupledCertifier().fit(PAIR)


def test_fit_propagates_builder_errors():
    # composite -0.2 + 0.8 = 0.6 is not Hurwitz
    bad = SwitchedDelaySystem(([[-0.2]],), (([[0.8]],),), (1.0,))
    with pytest.raises(InfeasibleSystemError):
        SwitchedDelayCertifier().fit(bad)
    broken = SwitchedDelaySystem(([[-2.0]],), (([[-1.0]],),), (1.0,))
    with pytest.raises(StructuralError):
        SwitchedDelayCertifier().fit(broken)


def test_all_four_certifiers_fit():
    cases = [
        (SwitchedDelayCertifier(), PAIR),
        (CoupledCertifier(), SCALAR_COUPLED),
        (NeutralCertifier(), SCALAR_NEUTRAL),
        (DiscreteCertifier(), SCALAR_DISCRETE),
    ]
    for est, system in cases:
        est.fit(system)
        assert est.certificate_.kind == class_tag(system)
        assert est.beta_ > 0.0
        assert est.margins_.passed
        assert est.mu_ == est.certificate_.mu


def test_discrete_exact_values():
    est = DiscreteCertifier().fit(SCALAR_DISCRETE)
    np.testing.assert_allclose(est.nu_, [1e6], rtol=1e-9)
    np.testing.assert_allclose(est.mu_[0], [5.5e5], rtol=1e-9)
    assert est.beta_ == pytest.approx(1.5e5, rel=1e-9)


# ---------------------------------------------------------------------------
# transform / monitor / score on trajectories
# ---------------------------------------------------------------------------

def test_transform_monitor_score():
    rng = np.random.default_rng(17)
    system = random_switched_delay(rng)
    est = SwitchedDelayCertifier().fit(system)
    variant, f, sig, hist, horizon, h = scenario_switched(rng, system)
    traj = simulate_switched_delay(variant, f, sig, hist, horizon, h)
    V = est.transform(traj)
    np.testing.assert_array_equal(
        V, functional_series(est.certificate_, traj, traj.nonlinearity))
    report = est.monitor(traj)
    assert report.passed
    assert est.score(traj) == 1.0
    quick = est.monitor(traj, rate_checks=0)
    assert quick.meta["rate_checked"] == 0
