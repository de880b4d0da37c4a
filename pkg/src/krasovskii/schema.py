"""JSON system descriptions, certificate files, and run reports.

System files are plain JSON: a class tag, the dimensions, matrices as
nested row-major arrays, and the delays.  Parse errors name the exact JSON
path of the offending field ("$.B[0][1]"), and loading then re-serializing
a valid file is value-identical.  All floats serialize through Python's
shortest round-trip repr, so every reported number survives the trip at
full double precision.
"""
from __future__ import annotations

import hashlib
import json
from importlib import metadata

import numpy as np

from .certificates import Certificate, Derivation, MarginReport
from .monitor import FalsificationResult, MonitorReport
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    StructuralViolation,
    SwitchedDelaySystem,
)

try:
    TOOL_VERSION = metadata.version("krasovskii")
except metadata.PackageNotFoundError:  # running from a source tree
    TOOL_VERSION = "0.1.0"

CLASS_TAGS = ("switched_delay", "coupled", "switched_coupled", "neutral", "discrete")


class SchemaError(ValueError):
    """Malformed system or certificate document; path names the bad field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# ---------------------------------------------------------------------------
# Low-level parsing with path diagnostics
# ---------------------------------------------------------------------------

def _locate_bad_number(node, path: str) -> None:
    # walk the nested lists to point at the first non-numeric/non-finite leaf
    if isinstance(node, bool) or not isinstance(node, (int, float, list)):
        raise SchemaError(path, f"expected a number or array, got {type(node).__name__}")
    if isinstance(node, list):
        for i, sub in enumerate(node):
            _locate_bad_number(sub, f"{path}[{i}]")
        return
    if not np.isfinite(node):
        raise SchemaError(path, f"non-finite value {node!r}")


def _parse_array(node, path: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        _locate_bad_number(node, path)
        raise SchemaError(path, "ragged array")
    if not np.all(np.isfinite(arr)):
        _locate_bad_number(node, path)
    if arr.shape != shape:
        raise SchemaError(path, f"expected shape {list(shape)}, got {list(arr.shape)}")
    return arr


def _field(doc: dict, key: str, path: str = "$"):
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return doc[key]


def _int_field(doc: dict, key: str, path: str = "$", minimum: int = 1) -> int:
    val = _field(doc, key, path)
    if isinstance(val, bool) or not isinstance(val, int):
        raise SchemaError(f"{path}.{key}", f"expected an integer, got {type(val).__name__}")
    if val < minimum:
        raise SchemaError(f"{path}.{key}", f"must be >= {minimum}, got {val}")
    return val


def _mode_stack(doc: dict, key: str, N: int, rows: int, cols: int) -> tuple[np.ndarray, ...]:
    node = _field(doc, key)
    if not isinstance(node, list) or len(node) != N:
        raise SchemaError(f"$.{key}", f"expected a list of {N} matrices")
    return tuple(_parse_array(node[s], f"$.{key}[{s}]", (rows, cols)) for s in range(N))


def _channel_stack(doc: dict, key: str, L: int, N: int, size: int):
    # B is a list of L channels, each a list of N square matrices
    node = _field(doc, key)
    if not isinstance(node, list) or len(node) != L:
        raise SchemaError(f"$.{key}", f"expected one matrix stack per delay channel ({L})")
    out = []
    for r in range(L):
        chan = node[r]
        if not isinstance(chan, list) or len(chan) != N:
            raise SchemaError(f"$.{key}[{r}]", f"expected a list of {N} matrices")
        out.append(tuple(_parse_array(chan[s], f"$.{key}[{r}][{s}]", (size, size))
                         for s in range(N)))
    return tuple(out)


def _delays(doc: dict, key: str, count: int | None, integer: bool) -> tuple:
    node = _field(doc, key)
    if not isinstance(node, list) or not node:
        raise SchemaError(f"$.{key}", "expected a nonempty list")
    if count is not None and len(node) != count:
        raise SchemaError(f"$.{key}", f"expected {count} entries, got {len(node)}")
    out = []
    for i, v in enumerate(node):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"$.{key}[{i}]", "expected a number")
        if integer:
            if v != int(v):
                raise SchemaError(f"$.{key}[{i}]", "discrete delays must be integers")
            v = int(v)
        if v < 0:
            raise SchemaError(f"$.{key}[{i}]", "delays must be nonnegative")
        out.append(v)
    return tuple(out)


def _scalar_delay(doc: dict, key: str = "tau") -> float:
    val = _field(doc, key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError(f"$.{key}", "expected a number")
    if val < 0:
        raise SchemaError(f"$.{key}", "delays must be nonnegative")
    return float(val)


# ---------------------------------------------------------------------------
# System files
# ---------------------------------------------------------------------------

def system_from_json(doc):
    """Build a system object from a SystemFile dict."""
    if not isinstance(doc, dict):
        raise SchemaError("$", f"expected a JSON object, got {type(doc).__name__}")
    tag = _field(doc, "class")
    if tag not in CLASS_TAGS:
        raise SchemaError("$.class", f"unknown class {tag!r}; expected one of {list(CLASS_TAGS)}")
    n = _int_field(doc, "n")
    N = _int_field(doc, "N")
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise SchemaError("$.label", "expected a string")

    if tag == "switched_delay":
        delays = _delays(doc, "delays", None, integer=False)
        A = _mode_stack(doc, "A", N, n, n)
        B = _channel_stack(doc, "B", len(delays), N, n)
        return SwitchedDelaySystem(A, B, tuple(float(t) for t in delays), label=label)

    if tag in ("coupled", "switched_coupled"):
        if tag == "coupled" and N != 1:
            raise SchemaError("$.N", "class 'coupled' requires N = 1 (use 'switched_coupled')")
        if tag == "switched_coupled" and N < 2:
            raise SchemaError("$.N", "class 'switched_coupled' requires N >= 2 (use 'coupled')")
        m = _int_field(doc, "m")
        tau = _scalar_delay(doc)
        A = _mode_stack(doc, "A", N, n, n)
        B = _mode_stack(doc, "B", N, n, m)
        C = _mode_stack(doc, "C", N, m, n)
        D = _mode_stack(doc, "D", N, m, m)
        return CoupledSystem(A, B, C, D, tau, label=label)

    if tag == "neutral":
        tau = _scalar_delay(doc)
        A = _mode_stack(doc, "A", N, n, n)
        G = _mode_stack(doc, "G", N, n, n)
        D = _parse_array(_field(doc, "D"), "$.D", (n, n))
        return NeutralSystem(A, G, D, tau, label=label)

    # discrete
    delays = _delays(doc, "delays", None, integer=True)
    A = _mode_stack(doc, "A", N, n, n)
    B = _channel_stack(doc, "B", len(delays), N, n)
    return DiscreteDelaySystem(A, B, delays, label=label)


def system_to_json(system) -> dict:
    """Serialize a system to its SystemFile dict (inverse of system_from_json)."""
    if isinstance(system, SwitchedDelaySystem):
        doc = {"class": "switched_delay", "n": system.n, "N": system.num_modes,
               "delays": [float(t) for t in system.delays],
               "A": [a.tolist() for a in system.A],
               "B": [[b.tolist() for b in chan] for chan in system.B]}
    elif isinstance(system, CoupledSystem):
        tag = "coupled" if system.num_modes == 1 else "switched_coupled"
        doc = {"class": tag, "n": system.n, "m": system.m, "N": system.num_modes,
               "tau": float(system.tau),
               "A": [a.tolist() for a in system.A],
               "B": [b.tolist() for b in system.B],
               "C": [c.tolist() for c in system.C],
               "D": [d.tolist() for d in system.D]}
    elif isinstance(system, NeutralSystem):
        doc = {"class": "neutral", "n": system.n, "N": system.num_modes,
               "tau": float(system.tau),
               "A": [a.tolist() for a in system.A],
               "G": [g.tolist() for g in system.G],
               "D": system.D.tolist()}
    elif isinstance(system, DiscreteDelaySystem):
        doc = {"class": "discrete", "n": system.n, "N": system.num_modes,
               "delays": [int(d) for d in system.delays],
               "A": [a.tolist() for a in system.A],
               "B": [[b.tolist() for b in chan] for chan in system.B]}
    else:
        raise TypeError(f"unsupported system type {type(system).__name__}")
    if system.label:
        doc["label"] = system.label
    return doc


def load_system(path: str):
    """Read a SystemFile from disk: returns (system, raw bytes for hashing)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return system_from_json(doc), raw


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

def _vec_json(node, path: str) -> np.ndarray:
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        _locate_bad_number(node, path)
        raise SchemaError(path, "ragged array")
    if arr.ndim != 1 or arr.size == 0:
        raise SchemaError(path, "expected a nonempty vector")
    if not np.all(np.isfinite(arr)):
        _locate_bad_number(node, path)
    return arr


def certificate_to_json(cert: Certificate, system_sha256: str | None = None) -> dict:
    d = cert.derivation
    doc = {
        "class": cert.kind,
        "nu": cert.nu.tolist(),
        "mu": [m.tolist() for m in cert.mu],
        "beta": float(cert.beta),
        "derivation": {
            "slack": float(d.slack),
            "lp_iterations": int(d.lp_iterations),
            "q": None if d.q is None else d.q.tolist(),
            "w": None if d.w is None else [w.tolist() for w in d.w],
            "v": None if d.v is None else d.v.tolist(),
            "eps": None if d.eps is None else float(d.eps),
        },
    }
    if system_sha256:
        doc["system_sha256"] = system_sha256
    return doc


def certificate_from_json(doc) -> Certificate:
    if not isinstance(doc, dict):
        raise SchemaError("$", f"expected a JSON object, got {type(doc).__name__}")
    tag = _field(doc, "class")
    known = ("switched_delay", "coupled", "neutral", "discrete")
    if tag not in known:
        raise SchemaError("$.class", f"unknown certificate class {tag!r}")
    nu = _vec_json(_field(doc, "nu"), "$.nu")
    mu_node = _field(doc, "mu")
    if not isinstance(mu_node, list) or not mu_node:
        raise SchemaError("$.mu", "expected a nonempty list of vectors")
    mu = tuple(_vec_json(mu_node[r], f"$.mu[{r}]") for r in range(len(mu_node)))
    beta = _field(doc, "beta")
    if isinstance(beta, bool) or not isinstance(beta, (int, float)):
        raise SchemaError("$.beta", "expected a number")
    der_node = doc.get("derivation") or {}
    der = Derivation(
        slack=float(der_node.get("slack", float("nan"))),
        lp_iterations=int(der_node.get("lp_iterations", 0)),
        q=None if der_node.get("q") is None else _vec_json(der_node["q"], "$.derivation.q"),
        w=None if der_node.get("w") is None else tuple(
            _vec_json(w, f"$.derivation.w[{i}]") for i, w in enumerate(der_node["w"])),
        v=None if der_node.get("v") is None else _vec_json(der_node["v"], "$.derivation.v"),
        eps=None if der_node.get("eps") is None else float(der_node["eps"]),
    )
    return Certificate(kind=tag, nu=nu, mu=mu, beta=float(beta), derivation=der)


def load_certificate(path: str) -> Certificate:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return certificate_from_json(doc)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def input_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def report_skeleton(path: str, raw: bytes) -> dict:
    return {
        "tool": {"name": "krasovskii", "version": TOOL_VERSION},
        "input": {"path": str(path), "sha256": input_hash(raw)},
    }


def violations_to_json(violations: list[StructuralViolation]) -> list[dict]:
    return [{"matrix": v.matrix, "entry": list(v.entry), "rule": v.rule,
             "detail": v.detail} for v in violations]


def margin_report_to_json(report: MarginReport) -> dict:
    return {"entries": {name: float(val) for name, val in report.entries},
            "worst": float(report.worst), "beta_check": float(report.beta_check),
            "passed": bool(report.passed)}


def monitor_report_to_json(report: MonitorReport, include_series: bool = False) -> dict:
    doc = {
        "class": report.kind,
        "passed": bool(report.passed),
        "steps": int(report.margins.size),
        "worst_excess": float(report.worst),
        "v_initial": float(report.V[0]) if report.V.size else 0.0,
        "v_final": float(report.V[-1]) if report.V.size else 0.0,
        "violations": [
            {"step": v.step, "time": v.time, "v_before": v.v_before,
             "v_after": v.v_after, "margin": v.margin, "check": v.check}
            for v in report.violations
        ],
        "meta": report.meta,
    }
    if include_series:
        doc["V"] = report.V.tolist()
        doc["margins"] = report.margins.tolist()
    return doc


def falsification_to_json(result: FalsificationResult) -> dict:
    return {
        "found": bool(result.found),
        "best_ratio": float(result.best_ratio),
        "best_index": int(result.best_index),
        "scenario": result.scenario,
        "budget": len(result.ratios),
        "ratios_over_one": int(sum(1 for r in result.ratios if r > 1.0)),
    }


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True)
