"""Certificate builders: hand oracles, guarantees, honest failure paths."""
import numpy as np
import pytest

from krasovskii import (
    Certificate,
    CertificateError,
    ConstructionError,
    CoupledSystem,
    Derivation,
    DiscreteDelaySystem,
    InfeasibleSystemError,
    NeutralSystem,
    StructuralError,
    SwitchedDelaySystem,
    build_certificate,
    build_coupled,
    build_discrete,
    build_discrete_multi,
    build_multi_delay,
    build_neutral,
    build_switched_coupled,
    build_switched_delay,
    class_tag,
    feasibility_problem_for,
    verify_certificate,
)

from _generators import (
    random_coupled,
    random_discrete,
    random_neutral,
    random_switched_delay,
)

A2 = np.array([[-2.0, 0.0], [0.0, -2.0]])
B1 = np.array([[1.0, 1.0], [1.0, 0.0]])
B2 = np.array([[0.0, 1.0], [3.0, 0.0]])
PAIR = SwitchedDelaySystem((A2, A2), ((B1, B2),), (1.0,))


def hand_cert(nu, mu, kind="switched_delay"):
    return Certificate(kind=kind, nu=np.asarray(nu, float),
                       mu=(np.asarray(mu, float),), beta=0.0,
                       derivation=Derivation(slack=np.nan, lp_iterations=0))


# ---------------------------------------------------------------------------
# switched delay
# ---------------------------------------------------------------------------

def test_pair_certificate_exact_values():
    cert = build_switched_delay(PAIR)
    assert cert.kind == "switched_delay"
    # LP optimum nu = (1e6, 6e5) with slack 2e5; the channel max of B^T nu
    # is (1.8e6, 1e6) and half the slack is folded into mu
    np.testing.assert_allclose(cert.nu, [1e6, 6e5], rtol=1e-9)
    np.testing.assert_allclose(cert.mu[0], [1.9e6, 1.1e6], rtol=1e-9)
    assert cert.beta == pytest.approx(1e5, rel=1e-9)
    assert cert.derivation.slack == pytest.approx(2e5, rel=1e-9)
    np.testing.assert_allclose(cert.derivation.w[0], [1.8e6, 1e6], rtol=1e-9)
    report = verify_certificate(PAIR, cert)
    assert report.passed
    assert report.worst == pytest.approx(-1e5, rel=1e-9)


def test_hand_certificate_verifies():
    # nu = (7,4): channel max of B^T nu is (12, 7); mu between that and -A^T nu
    report = verify_certificate(PAIR, hand_cert([7.0, 4.0], [13.0, 7.5]))
    assert report.passed
    assert report.worst == pytest.approx(-0.5)
    entries = dict(report.entries)
    # per-family worst over coordinates: state rows are (-1, -0.5)
    assert entries["state[0]"] == pytest.approx(-0.5)
    assert entries["delay[0][0]"] == pytest.approx(-0.5)
    assert entries["delay[0][1]"] == pytest.approx(-0.5)


def test_hand_certificate_halved_mu_fails():
    report = verify_certificate(PAIR, hand_cert([7.0, 4.0], [6.5, 3.75]))
    assert not report.passed
    assert dict(report.entries)["delay[0][0]"] == pytest.approx(4.5)


def test_verify_rejects_class_mismatch():
    with pytest.raises(CertificateError, match="does not match"):
        verify_certificate(PAIR, hand_cert([1.0, 1.0], [1.0, 1.0], kind="discrete"))


def test_infeasible_pair_raises():
    # scalar pair with cross composite -0.2 + 0.8 = 0.6 > 0
    sys_ = SwitchedDelaySystem(([[-0.2]], [[-0.9]]),
                               (([[0.1]], [[0.8]]),), (1.0,))
    with pytest.raises(InfeasibleSystemError, match="infeasible"):
        build_multi_delay(sys_)


def test_structural_gate():
    bad = SwitchedDelaySystem((A2,), ((np.array([[0.0, -1.0], [0.0, 0.0]]),),), (1.0,))
    with pytest.raises(StructuralError) as ei:
        build_multi_delay(bad)
    assert len(ei.value.violations) == 1


def test_single_delay_builder_guards_channels():
    two = SwitchedDelaySystem((A2,), ((B1,), (B2,)), (1.0, 2.0))
    with pytest.raises(ValueError):
        build_switched_delay(two)


def test_tuple_cap():
    A = tuple(np.array([[-5.0]]) for _ in range(3))
    chan = tuple(np.array([[0.1]]) for _ in range(3))
    sys_ = SwitchedDelaySystem(A, (chan, chan), (1.0, 2.0))  # 27 composites
    with pytest.raises(ConstructionError, match="above the cap"):
        build_multi_delay(sys_, tuple_cap=10)
    assert len(feasibility_problem_for(sys_).matrices) == 27


def test_multi_delay_margin_guarantee():
    # beta >= slack / (2 l) by the even slack split
    rng = np.random.default_rng(31)
    for _ in range(40):
        sys_ = random_switched_delay(rng, L=2)
        cert = build_multi_delay(sys_)
        assert cert.beta >= cert.derivation.slack / 4.0 - 1e-6
        assert verify_certificate(sys_, cert).passed


def test_nu_cap_option():
    cert = build_multi_delay(PAIR, nu_cap=100.0)
    assert np.all(cert.nu <= 100.0 + 1e-9)
    assert cert.beta == pytest.approx(10.0, rel=1e-9)  # scales with the cap


# ---------------------------------------------------------------------------
# coupled
# ---------------------------------------------------------------------------

SCALAR_COUPLED = CoupledSystem(A=[[[-2.0]]], B=[[[1.0]]], C=[[[1.0]]],
                               D=[[[0.25]]], tau=0.25)


def test_coupled_scalar():
    cert = build_coupled(SCALAR_COUPLED)
    assert cert.kind == "coupled"
    assert cert.beta > 0.0
    d = cert.derivation
    assert d.v is not None and d.eps is not None and d.eps > 0.0
    # hand inequalities: A^T nu + C^T mu << 0 and B^T nu + (D-I)^T mu << 0
    nu, mu = cert.nu[0], cert.mu[0][0]
    assert -2.0 * nu + mu < 0.0
    assert nu - 0.75 * mu < 0.0


def test_coupled_dispatch_consistency():
    a = build_coupled(SCALAR_COUPLED)
    b = build_switched_coupled(SCALAR_COUPLED)
    np.testing.assert_array_equal(a.nu, b.nu)
    np.testing.assert_array_equal(a.mu[0], b.mu[0])
    assert a.beta == b.beta
    with pytest.raises(ValueError):
        build_coupled(CoupledSystem(A=[[[-2.0]]] * 2, B=[[[1.0]]] * 2,
                                    C=[[[1.0]]] * 2, D=[[[0.25]]] * 2, tau=0.5))


def test_coupled_unstable_composite_infeasible():
    # A + B (I-D)^{-1} C = -1 + 2 = 1: not Hurwitz
    sys_ = CoupledSystem(A=[[[-1.0]]], B=[[[1.0]]], C=[[[1.0]]],
                         D=[[[0.5]]], tau=0.5)
    with pytest.raises(InfeasibleSystemError, match="not Hurwitz"):
        build_coupled(sys_)


def test_coupled_no_common_contraction_direction():
    # each D is Schur but they share no v with D^T v << v
    D1 = np.array([[0.5, 0.6], [0.0, 0.5]])
    D2 = np.array([[0.5, 0.0], [0.6, 0.5]])
    sys_ = CoupledSystem(A=[[[-9.0]]] * 2,
                         B=[np.array([[0.01, 0.01]])] * 2,
                         C=[np.array([[0.01], [0.01]])] * 2,
                         D=[D1, D2], tau=0.5)
    with pytest.raises(ConstructionError, match="no common contraction direction"):
        build_switched_coupled(sys_)


def test_coupled_elementwise_max_can_fail_honestly():
    # mode-dependent difference parts where the channelwise max of the
    # per-mode mu requirements breaks the difference inequality: the builder
    # must refuse rather than emit an unsound certificate
    sys_ = CoupledSystem(
        A=[[[-2.4575060764953673]], [[-3.6684635030470005]]],
        B=[[[0.9340435159562497, 0.35779519670907023]],
           [[0.5715298307297609, 0.32186939107594215]]],
        C=[[[0.5943000301996968], [0.33791122550713326]],
           [[0.39161900052816123], [0.8902743520047923]]],
        D=[[[0.10789985692835537, 0.2960138937258701],
            [0.03990728820163279, 0.3955059701353639]],
           [[0.37387169605712456, 0.11370048542165227],
            [0.41633000963508426, 0.027819816532467314]]],
        tau=0.5)
    with pytest.raises(ConstructionError, match="failed verification"):
        build_switched_coupled(sys_)


# ---------------------------------------------------------------------------
# neutral
# ---------------------------------------------------------------------------

def test_neutral_scalar():
    sys_ = NeutralSystem(A=[[[-2.0]]], G=[[[0.4]]], D=[[0.25]], tau=0.5)
    cert = build_neutral(sys_)
    assert cert.kind == "neutral"
    assert cert.beta > 0.0
    assert cert.derivation.eps is not None
    assert verify_certificate(sys_, cert).passed


def test_neutral_sign_indefinite_data():
    # negative D and G: only the majorant matters
    sys_ = NeutralSystem(A=[[[-3.0]]], G=[[[-0.4]]], D=[[-0.25]], tau=1.0)
    cert = build_neutral(sys_)
    assert verify_certificate(sys_, cert).passed


def test_neutral_contraction_failure():
    # |D| passes the Schur gate (radius 0.99) but its contraction direction
    # needs v2 > 2e6 v1, beyond the LP box: the v-search must fail cleanly
    D = np.array([[0.99, 2e4], [0.0, 0.99]])
    sys_ = NeutralSystem(A=[-3.0 * np.eye(2)], G=[0.1 * np.eye(2)], D=D, tau=1.0)
    with pytest.raises(ConstructionError, match="contraction"):
        build_neutral(sys_)


def test_neutral_infeasible_majorant():
    # |B| (I-|D|)^{-1} = 0.9/0.5 = 1.8 vs A = -1: composite positive
    sys_ = NeutralSystem(A=[[[-1.0]]], G=[[[0.9]]], D=[[0.5]], tau=1.0)
    # B = A D + G = 0.4, composite -1 + 0.4/0.5 = -0.2: actually Hurwitz;
    # push G up so the majorant composite turns positive
    sys_ = NeutralSystem(A=[[[-1.0]]], G=[[[1.1]]], D=[[0.5]], tau=1.0)
    with pytest.raises(InfeasibleSystemError):
        build_neutral(sys_)


# ---------------------------------------------------------------------------
# discrete
# ---------------------------------------------------------------------------

def test_discrete_scalar_exact():
    sys_ = DiscreteDelaySystem(([[0.3]],), (([[0.4]],),), (2,))
    cert = build_discrete(sys_)
    assert cert.kind == "discrete"
    # nu rides the cap; w = slack = 0.3 nu, d = 0.4 nu, mu = d + w/2
    np.testing.assert_allclose(cert.nu, [1e6], rtol=1e-9)
    np.testing.assert_allclose(cert.mu[0], [5.5e5], rtol=1e-9)
    assert cert.beta == pytest.approx(1.5e5, rel=1e-9)
    assert verify_certificate(sys_, cert).passed


def test_discrete_multi_consistency():
    sys_ = DiscreteDelaySystem(([[0.3]],), (([[0.4]],),), (2,))
    a, b = build_discrete(sys_), build_discrete_multi(sys_)
    np.testing.assert_array_equal(a.nu, b.nu)
    assert a.beta == b.beta
    with pytest.raises(ValueError):
        build_discrete(DiscreteDelaySystem(([[0.3]],),
                                           (([[0.2]],), ([[0.2]],)), (1, 2)))


def test_discrete_infeasible():
    sys_ = DiscreteDelaySystem(([[0.7]],), (([[0.4]],),), (1,))  # sums to 1.1
    with pytest.raises(InfeasibleSystemError):
        build_discrete(sys_)


def test_discrete_margin_guarantee():
    rng = np.random.default_rng(77)
    for _ in range(40):
        sys_ = random_discrete(rng, L=2)
        cert = build_discrete_multi(sys_)
        assert cert.beta >= cert.derivation.slack / 4.0 - 1e-6


# ---------------------------------------------------------------------------
# dispatch and sweeps
# ---------------------------------------------------------------------------

def test_class_tags():
    assert class_tag(PAIR) == "switched_delay"
    assert class_tag(SCALAR_COUPLED) == "coupled"
    assert class_tag(NeutralSystem(A=[[[-2.0]]], G=[[[0.4]]], D=[[0.25]], tau=0.5)) == "neutral"
    assert class_tag(DiscreteDelaySystem(([[0.3]],), (([[0.4]],),), (1,))) == "discrete"
    with pytest.raises(TypeError):
        class_tag(42)
    with pytest.raises(TypeError):
        build_certificate(42)


def test_build_certificate_dispatch():
    assert build_certificate(PAIR).kind == "switched_delay"
    assert build_certificate(SCALAR_COUPLED).kind == "coupled"
    capped = build_certificate(PAIR, nu_cap=100.0)
    assert np.all(capped.nu <= 100.0 + 1e-9)


def test_builders_sound_over_random_draws():
    rng = np.random.default_rng(123)
    for make in (random_switched_delay, random_discrete, random_coupled, random_neutral):
        for _ in range(25):
            sys_ = make(rng)
            cert = build_certificate(sys_)
            report = verify_certificate(sys_, cert)
            assert report.passed, f"{class_tag(sys_)}: {report.entries}"
            assert cert.beta > 0.0
            assert np.all(cert.nu >= 1.0 - 1e-9)
            assert all(np.all(m > 0.0) for m in cert.mu)
