"""Execute the analyses named in a scenario and collect per-analysis records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from ._jsonutil import decode_complex, to_jsonable
from .attractor import (
    build_attractor_hull,
    check_star_condition,
    greedy_decompose,
    random_unit_vectors,
    verify_attraction,
)
from .errors import HorizonExhaustedError, NetCardinalityError, NoSlowVectorsError, SlowRefusal, SlowvecError, StepExhaustedError
from .ergodic import ergodic_projection, flattening_check, net_dimension_bound
from .norms import build_norm_context, compute_stable_split, quotient_p_isometry_check
from .operators import estimate_power_bound
from .report import AnalysisConfig, asymptotic_report
from .scenario import ANALYSES, PARAMETERS, Scenario, build_compactum, build_operator
from .slow import (
    cesaro_fixed_check,
    certify_slow,
    eps_eigenvector,
    reverify_certificate,
    select_lambda,
    slow_subspace,
    synthesize_slow,
)

PASS, INCONCLUSIVE, FAIL, ERROR = "pass", "inconclusive", "fail", "error"


@dataclass
class RunResult:
    scenario: Scenario
    records: list

    @property
    def status(self) -> str:
        statuses = {r["status"] for r in self.records}
        if statuses & {ERROR, FAIL}:
            return ERROR
        return INCONCLUSIVE if INCONCLUSIVE in statuses else PASS

    @property
    def exit_code(self) -> int:
        return {PASS: 0, INCONCLUSIVE: 2, ERROR: 1}[self.status]

    def summary(self) -> dict:
        return to_jsonable(
            {
                "schema_version": 1,
                "scenario": self.scenario.name,
                "status": self.status,
                "exit_code": self.exit_code,
                "analyses": self.records,
            }
        )


class _Context:
    """Lazily computed shared objects (operator, split, norm context, ...)."""

    def __init__(self, scenario, workers):
        self.scenario = scenario
        self.params = {name: default for name, (_, default) in PARAMETERS.items()}
        self.params.update(scenario.parameters)
        self.workers = workers
        self.T = build_operator(scenario.operator_desc)
        self._K = None
        self._split = None
        self._ctx = None
        self._cert = None

    def p(self, name):
        value = self.params[name]
        if name == "lambda" and value is not None:
            if isinstance(value, dict) and "angle" in value:
                return complex(np.exp(1j * value["angle"]))
            return complex(decode_complex(value))
        if name == "x" and value is not None:
            return decode_complex(value)
        return value

    @property
    def K(self):
        if self._K is None:
            self._K = build_compactum(self.scenario.compactum_desc, self.T)
        return self._K

    @property
    def split(self):
        if self._split is None:
            self._split = compute_stable_split(self.T, self.p("peripheral_tol"))
        return self._split

    @property
    def ctx(self):
        if self._ctx is None:
            self._ctx = build_norm_context(self.T, self.p("horizon"), self.p("horizon_p"), seed=self.p("seed"))
        return self._ctx

    def lam(self):
        lam = self.p("lambda")
        if lam is not None:
            return lam
        if self.split.codim == 0:
            return 1.0 + 0j
        return select_lambda(self.split)[0]

    def unit_x(self):
        x = self.p("x")
        if x is None:
            x = random_unit_vectors(self.T.dim, 1, self.p("seed"))[0]
        return x / np.linalg.norm(x)

    def certificate(self):
        if self._cert is None:
            self._cert = synthesize_slow(self.T, self.p("epsilon"), self.ctx, self.split)
        return self._cert


def _stable_split(c):
    s = c.split
    ok = True
    truth = c.T.meta.get("x0_basis")
    out = {"codim": s.codim, "peripheral_multiplicities": s.peripheral_clusters(), "split": s}
    if truth is not None and truth.shape[1] == s.x0_basis.shape[1] and truth.shape[1]:
        angle = float(np.max(subspace_angles(truth, s.x0_basis)))
        out["principal_angle_to_truth"] = angle
        ok = angle <= 1e-6
    if "peripheral" in c.T.meta:
        out["constructed_codim"] = len(c.T.meta["peripheral"])
        ok &= s.codim == len(c.T.meta["peripheral"])
    return (PASS if ok else FAIL), out


def _power_bound(c):
    est = estimate_power_bound(c.T, c.p("horizon"))
    return (PASS if est.bounded else FAIL), {"c_hat": est.c_hat, "verdict": est.verdict}


def _p_isometry(c):
    rep = quotient_p_isometry_check(c.split, c.ctx, seed=c.p("seed"))
    return (PASS if rep.max_deviation <= 1e-6 else FAIL), rep


def _eps_eigenvector(c):
    ev = eps_eigenvector(c.T, c.lam(), c.p("norm_kind"), c.ctx)
    return PASS, ev


def _certify_slow(c):
    kind = c.p("norm_kind")
    x = c.unit_x()
    if kind != "original":
        x = x / c.ctx.norm(x, kind)
    try:
        cert = certify_slow(c.T, x, c.lam(), c.p("epsilon"), c.p("horizon"), kind, c.ctx)
    except SlowRefusal as exc:
        return PASS, {"certified": False, **exc.to_dict()}
    return (PASS if reverify_certificate(c.T, cert, c.ctx) else FAIL), {"certified": True, "certificate": cert}


def _synthesize_slow(c):
    try:
        cert = c.certificate()
    except NoSlowVectorsError as exc:
        return (PASS if c.split.codim == 0 else FAIL), {"result": "no slow vectors", "message": str(exc)}
    except HorizonExhaustedError as exc:
        return INCONCLUSIVE, exc.to_dict()
    ok = reverify_certificate(c.T, cert, c.ctx) and c.split.codim > 0
    return (PASS if ok else FAIL), {"certificate": cert, "reverified": ok}


def _slow_subspace(c):
    try:
        sub = slow_subspace(c.T, c.lam(), c.p("epsilon"), c.p("l"), c.ctx, c.split, c.p("sphere_samples"), c.p("seed"))
    except HorizonExhaustedError as exc:
        return INCONCLUSIVE, exc.to_dict()
    ok = all(reverify_certificate(c.T, cert, c.ctx) for cert in sub.certificates)
    return (PASS if ok else FAIL), sub


def _cesaro_fixed(c):
    delta, m = c.p("delta"), c.p("m")
    eps = delta / (m + 2)
    try:
        cert = synthesize_slow(c.T, eps, c.ctx, c.split)
    except HorizonExhaustedError as exc:
        return INCONCLUSIVE, exc.to_dict()
    rep = cesaro_fixed_check(c.T, delta, m, cert, ctx=c.ctx)
    return (PASS if rep.passed else FAIL), rep


def _star(c):
    rep = check_star_condition(c.T, c.K, c.p("alpha"), c.p("sample_count"), c.p("horizon"), c.p("seed"))
    return (PASS if rep.status == "pass" else INCONCLUSIVE), rep


def _greedy(c):
    alpha, k = c.p("alpha"), c.p("k")
    try:
        dec = greedy_decompose(c.T, c.K, alpha, c.unit_x(), k, c.p("horizon"))
    except StepExhaustedError as exc:
        return INCONCLUSIVE, exc.to_dict()
    final = float(np.linalg.norm(dec.reconstruct_residual(c.T)))
    chain = all(r <= alpha**i + 1e-8 for i, r in enumerate(dec.residual_norms))
    t_sum = float(sum(abs(t) for t in dec.t_values))
    ok = chain and final <= alpha**k + 1e-8 and t_sum <= 1.0 / (1.0 - alpha) + 1e-9
    return (PASS if ok else FAIL), {"decomposition": dec, "reconstructed_residual": final, "t_sum": t_sum}


def _attractor_hull(c):
    hull = build_attractor_hull(c.T, c.K, c.p("alpha"), c.p("depth"))
    return PASS, {"generator_count": len(hull.generators), "compactum": hull}


def _verify_attraction(c):
    hull = build_attractor_hull(c.T, c.K, c.p("alpha") or 0.5, c.p("depth"))
    rep = verify_attraction(c.T, hull, c.p("attraction_epsilon"), c.p("sample_count"), c.p("horizon"), c.p("seed"))
    return (PASS if rep.all_success else INCONCLUSIVE), rep


def _ergodic(c):
    proj = ergodic_projection(c.T, c.lam(), proj_tol=c.p("proj_tol"))
    return PASS, proj


def _net_bound(c):
    try:
        rep = net_dimension_bound(c.T, c.K, c.p("alpha"), c.lam(), c.p("horizon"), seed=c.p("seed"))
    except NetCardinalityError as exc:
        return INCONCLUSIVE, exc.to_dict()
    return (PASS if rep.bound_holds else FAIL), rep


def _flattening(c):
    rep = flattening_check(c.T, c.K, c.p("alpha"), c.lam(), c.p("flatten_bound"), c.p("horizon"), c.p("m_cap"))
    return (PASS if rep.passed else INCONCLUSIVE), rep


def _asymptotic(c):
    cfg = AnalysisConfig(
        horizon=c.p("horizon"),
        horizon_p=c.p("horizon_p"),
        epsilon=c.p("epsilon"),
        sample_count=c.p("sample_count"),
        seed=c.p("seed"),
        peripheral_tol=c.p("peripheral_tol"),
        proj_tol=c.p("proj_tol"),
        flatten_bound=c.p("flatten_bound"),
        m_cap=c.p("m_cap"),
        sphere_samples=c.p("sphere_samples"),
        workers=c.workers,
    )
    rep = asymptotic_report(c.T, c.K, c.p("alpha"), cfg)
    status = {"pass": PASS, "inconclusive": INCONCLUSIVE}.get(rep.status, ERROR)
    return status, rep


HANDLERS = {
    "stable_split": _stable_split,
    "power_bound": _power_bound,
    "p_isometry": _p_isometry,
    "eps_eigenvector": _eps_eigenvector,
    "certify_slow": _certify_slow,
    "synthesize_slow": _synthesize_slow,
    "slow_subspace": _slow_subspace,
    "cesaro_fixed": _cesaro_fixed,
    "star_condition": _star,
    "greedy": _greedy,
    "attractor_hull": _attractor_hull,
    "verify_attraction": _verify_attraction,
    "ergodic_projection": _ergodic,
    "net_bound": _net_bound,
    "flattening": _flattening,
    "asymptotic_report": _asymptotic,
}
assert set(HANDLERS) == set(ANALYSES)


def run_scenario(scenario: Scenario, horizon: int | None = None, workers: int = 1) -> RunResult:
    """Run every analysis of ``scenario`` in stage order.

    Errors are caught per analysis and recorded with their stage label so
    that later analyses still run.
    """
    if horizon is not None:
        params = dict(scenario.parameters, horizon=horizon)
        scenario = Scenario(
            scenario.name, scenario.operator_desc, scenario.compactum_desc, params, scenario.analyses,
            scenario.output, scenario.source,
        )
    c = _Context(scenario, workers)
    records = []
    for name in scenario.ordered_analyses():
        record = {"analysis": name, "stage": ANALYSES[name]}
        try:
            status, result = HANDLERS[name](c)
            record.update(status=status, result=to_jsonable(result))
        except SlowvecError as exc:
            record.update(status=ERROR, error=exc.to_dict())
        records.append(record)
    return RunResult(scenario, records)
