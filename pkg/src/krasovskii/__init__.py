"""Stability certificates for switched positive delay systems.

Decide absolute stability of five system classes (switched retarded,
multi-delay, coupled differential-difference, neutral, and discrete) by
strict linear feasibility; construct explicit functional coefficients
(nu, mu, beta); simulate trajectories; and monitor the certified decrease.
"""

from .certificates import (
    Certificate,
    CertificateError,
    ConstructionError,
    Derivation,
    InfeasibleSystemError,
    MarginReport,
    StructuralError,
    build_certificate,
    build_coupled,
    build_discrete,
    build_discrete_multi,
    build_multi_delay,
    build_neutral,
    build_switched_coupled,
    build_switched_delay,
    class_tag,
    difference_problem_for,
    feasibility_problem_for,
    verify_certificate,
)
from .estimators import (
    CoupledCertifier,
    DiscreteCertifier,
    NeutralCertifier,
    SwitchedDelayCertifier,
)
from .feasibility import (
    FeasibilityProblem,
    FeasibilityResult,
    brute_force_feasible,
    check_vector,
    find_common_vector,
)
from .matrices import (
    is_metzler,
    is_nonnegative,
    m_matrix_inverse,
    metzler_hurwitz,
    perron_root,
    schur_cohn_nonneg,
    tilde_transform,
)
from .monitor import (
    FalsificationResult,
    MonitorReport,
    Violation,
    check_decrease,
    eval_V_coupled,
    eval_V_discrete,
    eval_V_neutral,
    eval_V_switched,
    falsify,
    functional_series,
)
from .schema import (
    SchemaError,
    TOOL_VERSION,
    certificate_from_json,
    certificate_to_json,
    load_certificate,
    load_system,
    system_from_json,
    system_to_json,
)
from .simulate import (
    Trajectory,
    constant_history,
    random_history,
    simulate_coupled,
    simulate_discrete,
    simulate_neutral,
    simulate_switched_delay,
    snap_signal,
    trace_csv_text,
    write_trace_csv,
)
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    Nonlinearity,
    StructuralViolation,
    SwitchedDelaySystem,
    SwitchingSignal,
    constant_signal,
    eval_nonlinearity,
    identity,
    neutral_comparison,
    parse_nonlinearity,
    random_nonlinearity,
    sample_signal,
    validate,
)

__version__ = TOOL_VERSION

__all__ = [
    "Certificate", "CertificateError", "ConstructionError", "Derivation",
    "InfeasibleSystemError", "MarginReport", "StructuralError",
    "build_certificate", "build_coupled", "build_discrete",
    "build_discrete_multi", "build_multi_delay", "build_neutral",
    "build_switched_coupled", "build_switched_delay", "class_tag",
    "difference_problem_for", "feasibility_problem_for", "verify_certificate",
    "CoupledCertifier", "DiscreteCertifier", "NeutralCertifier",
    "SwitchedDelayCertifier",
    "FeasibilityProblem", "FeasibilityResult", "brute_force_feasible",
    "check_vector", "find_common_vector",
    "is_metzler", "is_nonnegative", "m_matrix_inverse", "metzler_hurwitz",
    "perron_root", "schur_cohn_nonneg", "tilde_transform",
    "FalsificationResult", "MonitorReport", "Violation", "check_decrease",
    "eval_V_coupled", "eval_V_discrete", "eval_V_neutral", "eval_V_switched",
    "falsify", "functional_series",
    "SchemaError", "TOOL_VERSION", "certificate_from_json",
    "certificate_to_json", "load_certificate", "load_system",
    "system_from_json", "system_to_json",
    "Trajectory", "constant_history", "random_history", "simulate_coupled",
    "simulate_discrete", "simulate_neutral", "simulate_switched_delay",
    "snap_signal", "trace_csv_text", "write_trace_csv",
    "CoupledSystem", "DiscreteDelaySystem", "NeutralSystem", "Nonlinearity",
    "StructuralViolation", "SwitchedDelaySystem", "SwitchingSignal",
    "constant_signal", "eval_nonlinearity", "identity", "neutral_comparison",
    "parse_nonlinearity", "random_nonlinearity", "sample_signal", "validate",
    "__version__",
]
