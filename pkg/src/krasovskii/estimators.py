"""Estimator-style wrappers around the certificate builders.

Each certifier follows the scikit-learn protocol: construct with plain
hyperparameters, fit on a system descriptor, and read the learned
coefficients back as trailing-underscore attributes.  fit raises the
builder's typed errors unchanged (structural violations, infeasibility,
construction failure), so a fitted certifier always holds a verified
certificate.

    cert = SwitchedDelayCertifier().fit(system)
    cert.nu_, cert.mu_, cert.beta_
    V = cert.transform(trajectory)        # functional samples along a run
    cert.score(trajectory)                # fraction of steps passing

The mathematical content lives in the builder functions; these classes
only add the fit/transform surface and parameter bookkeeping.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .certificates import (
    build_discrete_multi,
    build_multi_delay,
    build_neutral,
    build_switched_coupled,
    verify_certificate,
)
from .feasibility import NU_CAP, SLACK_THRESHOLD
from .monitor import MonitorReport, check_decrease, functional_series
from .simulate import Trajectory
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    SwitchedDelaySystem,
)


class _CertifierMixin:
    """Shared fit/transform plumbing; subclasses supply _accepts and _build."""

    _accepts: type = object

    def fit(self, system, y=None):
        """Construct and verify a certificate for the given system."""
        if not isinstance(system, self._accepts):
            raise TypeError(
                f"{type(self).__name__} expects a {self._accepts.__name__}, "
                f"got {type(system).__name__}")
        cert = self._build(system)
        self.system_ = system
        self.certificate_ = cert
        self.nu_ = cert.nu
        self.mu_ = cert.mu
        self.beta_ = cert.beta
        self.margins_ = verify_certificate(system, cert)
        return self

    def transform(self, trajectory: Trajectory) -> np.ndarray:
        """Functional samples V(t_k) along a trajectory of the fitted class."""
        check_is_fitted(self, "certificate_")
        return functional_series(self.certificate_, trajectory)

    def monitor(self, trajectory: Trajectory, **kwargs) -> MonitorReport:
        """Full decrease report for one trajectory."""
        check_is_fitted(self, "certificate_")
        return check_decrease(trajectory, self.certificate_, **kwargs)

    def score(self, trajectory: Trajectory, y=None) -> float:
        """Fraction of trajectory steps passing the decrease checks."""
        report = self.monitor(trajectory)
        steps = report.margins.size
        if steps == 0:
            return 1.0
        bad = len({v.step for v in report.violations})
        return 1.0 - bad / steps


class SwitchedDelayCertifier(_CertifierMixin, BaseEstimator):
    """Certifier for switched systems with one or more discrete delays."""

    _accepts = SwitchedDelaySystem

    def __init__(self, nu_cap: float = NU_CAP,
                 slack_threshold: float = SLACK_THRESHOLD,
                 tuple_cap: int = 100_000):
        self.nu_cap = nu_cap
        self.slack_threshold = slack_threshold
        self.tuple_cap = tuple_cap

    def _build(self, system):
        return build_multi_delay(system, nu_cap=self.nu_cap,
                                 slack_threshold=self.slack_threshold,
                                 tuple_cap=self.tuple_cap)


class CoupledCertifier(_CertifierMixin, BaseEstimator):
    """Certifier for (switched) coupled differential-difference systems."""

    _accepts = CoupledSystem

    def __init__(self, nu_cap: float = NU_CAP,
                 slack_threshold: float = SLACK_THRESHOLD,
                 max_halvings: int = 60):
        self.nu_cap = nu_cap
        self.slack_threshold = slack_threshold
        self.max_halvings = max_halvings

    def _build(self, system):
        return build_switched_coupled(system, nu_cap=self.nu_cap,
                                      slack_threshold=self.slack_threshold,
                                      max_halvings=self.max_halvings)


class NeutralCertifier(_CertifierMixin, BaseEstimator):
    """Certifier for switched neutral systems via the majorant reduction."""

    _accepts = NeutralSystem

    def __init__(self, nu_cap: float = NU_CAP,
                 slack_threshold: float = SLACK_THRESHOLD,
                 max_halvings: int = 60):
        self.nu_cap = nu_cap
        self.slack_threshold = slack_threshold
        self.max_halvings = max_halvings

    def _build(self, system):
        return build_neutral(system, nu_cap=self.nu_cap,
                             slack_threshold=self.slack_threshold,
                             max_halvings=self.max_halvings)


class DiscreteCertifier(_CertifierMixin, BaseEstimator):
    """Certifier for switched discrete-time systems with integer lags."""

    _accepts = DiscreteDelaySystem

    def __init__(self, nu_cap: float = NU_CAP,
                 slack_threshold: float = SLACK_THRESHOLD,
                 tuple_cap: int = 100_000):
        self.nu_cap = nu_cap
        self.slack_threshold = slack_threshold
        self.tuple_cap = tuple_cap

    def _build(self, system):
        return build_discrete_multi(system, nu_cap=self.nu_cap,
                                    slack_threshold=self.slack_threshold,
                                    tuple_cap=self.tuple_cap)
