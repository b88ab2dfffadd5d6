"""Scenario files: JSON descriptions of an operator, a compactum and analyses.

A scenario looks like::

    {
      "schema_version": 1,
      "name": "diag-fixture",
      "operator": {"family": "diagonal", "entries": [0.5, 1.0]},
      "compactum": {"generators": [[0, 1]]},
      "parameters": {"alpha": 0.5, "epsilon": 0.01},
      "analyses": ["asymptotic_report"]
    }

Everything is validated by :func:`parse_scenario` before any numerical work
starts; unknown keys are rejected with the offending field and its line.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import schur

from ._jsonutil import decode_complex
from .attractor import Compactum
from .ergodic import spectral_projection
from .errors import ScenarioError, SlowvecError
from .norms import compute_stable_split
from .operators import (
    Operator,
    make_cyclic_shift,
    make_split_operator,
    make_stochastic,
    make_swap,
    make_truncated_shift,
    operator_from_json,
)

SCHEMA_VERSION = 1

TOP_KEYS = {"schema_version", "name", "operator", "compactum", "parameters", "analyses", "output"}
OUTPUT_KEYS = {"dir", "stem"}

# analysis name -> execution stage; stages run in the order listed here
STAGES = ("split", "norms", "slow", "attractor", "ergodic", "summary")
ANALYSES = {
    "stable_split": "split",
    "power_bound": "norms",
    "p_isometry": "norms",
    "eps_eigenvector": "slow",
    "certify_slow": "slow",
    "synthesize_slow": "slow",
    "slow_subspace": "slow",
    "cesaro_fixed": "slow",
    "star_condition": "attractor",
    "greedy": "attractor",
    "attractor_hull": "attractor",
    "verify_attraction": "attractor",
    "ergodic_projection": "ergodic",
    "net_bound": "ergodic",
    "flattening": "ergodic",
    "asymptotic_report": "summary",
}
NEEDS_ALPHA = {"star_condition", "greedy", "attractor_hull", "net_bound", "flattening", "asymptotic_report"}
NEEDS_COMPACTUM = NEEDS_ALPHA | {"verify_attraction"}

# parameter name -> (kind, default)
PARAMETERS = {
    "alpha": ("open_unit", None),
    "epsilon": ("positive", 0.01),
    "delta": ("positive", 0.1),
    "m": ("nonneg_int", 4),
    "l": ("positive_int", 1),
    "k": ("positive_int", 6),
    "depth": ("nonneg_int", 8),
    "lambda": ("unimodular", None),
    "x": ("vector", None),
    "norm_kind": ("norm_kind", "original"),
    "horizon": ("positive_int", 512),
    "horizon_p": ("positive_int", 512),
    "sample_count": ("positive_int", 32),
    "sphere_samples": ("positive_int", 16),
    "seed": ("int", 0),
    "peripheral_tol": ("positive", 1e-6),
    "proj_tol": ("positive", 1e-8),
    "flatten_bound": ("positive", 1.0 / 3.0),
    "m_cap": ("nonneg_int", 256),
    "attraction_epsilon": ("positive", 0.01),
}

OPERATOR_FAMILIES = {
    "identity": {"dim"},
    "diagonal": {"entries"},
    "cyclic_shift": {"dim"},
    "truncated_shift": {"dim", "direction"},
    "swap": set(),
    "split": {"peripheral", "contraction_radius", "interior_dim", "conditioning", "seed"},
    "stochastic": {"dim", "seed", "doubly"},
}
COMPACTUM_FAMILIES = {
    "basis": {"scale", "indices"},
    "peripheral": {"margin"},
}


@dataclass(frozen=True)
class Scenario:
    name: str
    operator_desc: dict
    compactum_desc: dict | None
    parameters: dict
    analyses: list
    output: dict = field(default_factory=dict)
    source: str | None = None

    def ordered_analyses(self) -> list:
        return sorted(self.analyses, key=lambda a: (STAGES.index(ANALYSES[a]), self.analyses.index(a)))

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "operator": self.operator_desc,
            "parameters": self.parameters,
            "analyses": self.analyses,
        }
        if self.compactum_desc is not None:
            out["compactum"] = self.compactum_desc
        if self.output:
            out["output"] = self.output
        return out


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Validator:
    def __init__(self, text):
        self.text = text

    def fail(self, message, fld):
        leaf = fld.split(".")[-1].split("[")[0]
        raise ScenarioError(message, fld, _line_of(self.text, leaf))

    def keys(self, obj, allowed, where):
        if not isinstance(obj, dict):
            self.fail(f"{where} must be an object", where)
        for key in obj:
            if key not in allowed:
                self.fail(f"unknown key {key!r} in {where}", f"{where}.{key}" if where != "scenario" else key)

    def number(self, value, fld):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(f"{fld} must be a finite number, got {value!r}", fld)
        return float(value)

    def integer(self, value, fld):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"{fld} must be an integer, got {value!r}", fld)
        return value

    def complex_scalar(self, value, fld):
        if isinstance(value, dict):
            if set(value) == {"angle"}:
                return complex(np.exp(1j * self.number(value["angle"], fld)))
            if set(value) == {"re", "im"}:
                return complex(self.number(value["re"], fld), self.number(value["im"], fld))
            self.fail(f"{fld} must be a number, {{re, im}} or {{angle}}", fld)
        return complex(self.number(value, fld))

    def vector(self, value, fld):
        try:
            v = decode_complex(value)
        except (TypeError, ValueError, KeyError):
            self.fail(f"{fld} must be a vector of numbers or {{re, im}} arrays", fld)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            self.fail(f"{fld} must be a nonempty finite vector", fld)
        return v

    def parameter(self, name, value):
        kind, _ = PARAMETERS[name]
        fld = f"parameters.{name}"
        if kind == "open_unit":
            a = self.number(value, fld)
            if not 0.0 < a < 1.0:
                self.fail(f"invalid alpha: {value!r} is not in (0, 1)", fld)
        elif kind == "positive":
            if not self.number(value, fld) > 0:
                self.fail(f"{name} must be positive, got {value!r}", fld)
        elif kind == "nonneg_int":
            if self.integer(value, fld) < 0:
                self.fail(f"{name} must be >= 0, got {value!r}", fld)
        elif kind == "positive_int":
            if self.integer(value, fld) < 1:
                self.fail(f"{name} must be >= 1, got {value!r}", fld)
        elif kind == "int":
            self.integer(value, fld)
        elif kind == "unimodular":
            lam = self.complex_scalar(value, fld)
            if abs(abs(lam) - 1.0) > 1e-9:
                self.fail(f"lambda must have modulus 1, got {value!r}", fld)
        elif kind == "vector":
            self.vector(value, fld)
        elif kind == "norm_kind":
            if value not in ("original", "sup", "quotient-p"):
                self.fail(f"norm_kind must be original, sup or quotient-p, got {value!r}", fld)


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    """Parse and fully validate a scenario document.

    Raises
    ------
    ScenarioError
        On malformed JSON (with its line) or on any invalid field.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", None, exc.lineno) from None
    v = _Validator(text)
    v.keys(obj, TOP_KEYS, "scenario")
    if "schema_version" not in obj:
        v.fail("missing schema_version", "schema_version")
    if obj["schema_version"] != SCHEMA_VERSION:
        v.fail(f"unsupported schema_version {obj['schema_version']!r} (expected {SCHEMA_VERSION})", "schema_version")
    if "operator" not in obj:
        v.fail("missing operator", "operator")
    op_desc = obj["operator"]
    _validate_operator(v, op_desc)

    params = obj.get("parameters", {})
    v.keys(params, set(PARAMETERS), "parameters")
    for name, value in params.items():
        v.parameter(name, value)

    analyses = obj.get("analyses", ["asymptotic_report"])
    if not isinstance(analyses, list) or not analyses:
        v.fail("analyses must be a nonempty list", "analyses")
    for name in analyses:
        if name not in ANALYSES:
            v.fail(f"unknown analysis {name!r}", "analyses")
    if len(set(analyses)) != len(analyses):
        v.fail("analyses must not repeat", "analyses")
    if NEEDS_ALPHA & set(analyses) and "alpha" not in params:
        v.fail("alpha is required by " + ", ".join(sorted(NEEDS_ALPHA & set(analyses))), "parameters.alpha")

    comp_desc = obj.get("compactum")
    if comp_desc is not None:
        _validate_compactum(v, comp_desc)
    elif NEEDS_COMPACTUM & set(analyses):
        v.fail("a compactum is required by " + ", ".join(sorted(NEEDS_COMPACTUM & set(analyses))), "compactum")

    output = obj.get("output", {})
    v.keys(output, OUTPUT_KEYS, "output")
    name = obj.get("name", Path(source).stem if source else "scenario")
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        v.fail(f"name must be a simple file stem, got {name!r}", "name")
    scenario = Scenario(name, op_desc, comp_desc, params, analyses, output, source)
    _validate_dimensions(v, scenario)
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def _validate_operator(v, desc):
    if not isinstance(desc, dict):
        v.fail("operator must be an object", "operator")
    if "matrix" in desc:
        v.keys(desc, {"matrix"}, "operator")
        m = desc["matrix"]
        v.keys(m, {"dim", "re", "im", "power_bound"}, "operator.matrix")
        try:
            operator_from_json(m)
        except (SlowvecError, KeyError, TypeError, ValueError) as exc:
            v.fail(f"invalid inline matrix: {exc}", "operator.matrix")
        return
    family = desc.get("family")
    if family not in OPERATOR_FAMILIES:
        v.fail(f"unknown operator family {family!r}", "operator.family")
    v.keys(desc, OPERATOR_FAMILIES[family] | {"family"}, "operator")
    try:
        build_operator(desc)
    except SlowvecError as exc:
        v.fail(f"invalid {family} operator: {exc}", "operator")
    except (TypeError, ValueError, KeyError) as exc:
        v.fail(f"invalid {family} operator parameters: {exc}", "operator")


def _validate_compactum(v, desc):
    if not isinstance(desc, dict):
        v.fail("compactum must be an object", "compactum")
    if "generators" in desc:
        v.keys(desc, {"generators"}, "compactum")
        gens = desc["generators"]
        if not isinstance(gens, list) or not gens:
            v.fail("compactum.generators must be a nonempty list", "compactum.generators")
        vecs = [v.vector(g, f"compactum.generators[{i}]") for i, g in enumerate(gens)]
        if len({len(g) for g in vecs}) != 1:
            v.fail("generators must share one dimension", "compactum.generators")
        return
    family = desc.get("family")
    if family not in COMPACTUM_FAMILIES:
        v.fail(f"unknown compactum family {family!r}", "compactum.family")
    v.keys(desc, COMPACTUM_FAMILIES[family] | {"family"}, "compactum")
    if "scale" in desc and not v.number(desc["scale"], "compactum.scale") > 0:
        v.fail("compactum.scale must be positive", "compactum.scale")
    if "margin" in desc and not v.number(desc["margin"], "compactum.margin") >= 1:
        v.fail("compactum.margin must be >= 1", "compactum.margin")


def _validate_dimensions(v, scenario):
    dim = build_operator(scenario.operator_desc).dim
    desc = scenario.compactum_desc
    if desc is not None and "generators" in desc:
        gdim = len(decode_complex(desc["generators"][0]))
        if gdim != dim:
            v.fail(f"generators have dimension {gdim} but the operator has dimension {dim}", "compactum.generators")
    if desc is not None and "indices" in desc:
        idx = desc["indices"]
        if not isinstance(idx, list) or not idx or not all(isinstance(i, int) and 0 <= i < dim for i in idx):
            v.fail(f"compactum.indices must list coordinates in [0, {dim})", "compactum.indices")
    if "x" in scenario.parameters and len(decode_complex(scenario.parameters["x"])) != dim:
        v.fail(f"parameters.x must have dimension {dim}", "parameters.x")


def _complex_value(value):
    if isinstance(value, dict) and set(value) == {"angle"}:
        return complex(np.exp(1j * float(value["angle"])))
    if isinstance(value, dict):
        return complex(float(value["re"]), float(value["im"]))
    return complex(value)


def build_operator(desc: dict) -> Operator:
    """Instantiate the operator described by a (validated) operator desc."""
    if "matrix" in desc:
        return operator_from_json(desc["matrix"])
    family = desc["family"]
    if family == "identity":
        return Operator(np.eye(int(desc["dim"])), power_bound=1.0, meta={"family": "identity"})
    if family == "diagonal":
        entries = np.array([_complex_value(e) for e in desc["entries"]])
        return Operator(np.diag(entries), meta={"family": "diagonal"})
    if family == "cyclic_shift":
        return make_cyclic_shift(int(desc["dim"]))
    if family == "truncated_shift":
        return make_truncated_shift(int(desc["dim"]), desc.get("direction", "right"))
    if family == "swap":
        return make_swap()
    if family == "split":
        return make_split_operator(
            [_complex_value(p) for p in desc.get("peripheral", [])],
            contraction_radius=float(desc.get("contraction_radius", 0.5)),
            interior_dim=int(desc.get("interior_dim", 0)),
            conditioning=float(desc.get("conditioning", 1.0)),
            seed=int(desc.get("seed", 0)),
        )
    if family == "stochastic":
        return make_stochastic(int(desc["dim"]), int(desc.get("seed", 0)), bool(desc.get("doubly", False)))
    raise ScenarioError(f"unknown operator family {family!r}", "operator.family")


def peripheral_compactum(T: Operator, margin: float = 1.1) -> Compactum:
    """``hull{R u_j}`` over an orthonormal basis ``u_j`` of the peripheral subspace.

    ``R = margin * sqrt(p) * c`` with ``p`` the peripheral count and ``c`` a
    bound on ``sup_n ||T^n Q||`` for the spectral projection ``Q`` onto that
    subspace, so that every ``T^n Q x`` with ``||x|| <= 1`` lies inside.  For
    ``codim X_0 = 0`` the hull of ``0.01 e_1`` is returned instead.
    """
    split = compute_stable_split(T)
    if split.codim == 0:
        return Compactum(0.01 * np.eye(T.dim)[:1])
    # leading Schur vectors of the reordered form span the invariant subspace
    _, z, sdim = schur(T.entries, output="complex", sort=lambda lam: abs(lam) >= 1.0 - split.peripheral_tol)
    basis = z[:, :sdim]
    q = np.zeros((T.dim, T.dim), dtype=complex)
    for lam, _ in split.peripheral_clusters():
        q += spectral_projection(T, lam / abs(lam))
    c = max(T.power_bound or 0.0, _orbit_bound(T, q))
    radius = margin * math.sqrt(sdim) * c
    return Compactum(radius * basis.T)


def _orbit_bound(T, q, horizon=64):
    best, m = 0.0, q.copy()
    for _ in range(horizon + 1):
        best = max(best, float(np.linalg.norm(m, 2)))
        m = T.entries @ m
    return best


def build_compactum(desc: dict | None, T: Operator) -> Compactum | None:
    if desc is None:
        return None
    if "generators" in desc:
        return Compactum(np.array([decode_complex(g) for g in desc["generators"]]))
    if desc["family"] == "basis":
        scale = float(desc.get("scale", math.sqrt(T.dim)))
        idx = desc.get("indices", list(range(T.dim)))
        return Compactum(scale * np.eye(T.dim)[idx])
    return peripheral_compactum(T, float(desc.get("margin", 1.1)))
