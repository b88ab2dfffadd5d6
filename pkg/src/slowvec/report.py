"""End-to-end asymptotic analysis of one operator against one compactum.

:func:`asymptotic_report` chains the attraction check, the stable split,
per-eigenvalue dimension bounds, ergodic projections with the flattening
search, and slow-vector synthesis into one summary.  Each stage records its
own status so that a failure downstream does not hide results upstream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._jsonutil import to_jsonable
from .attractor import Compactum, check_star_condition
from .errors import HorizonExhaustedError, NetCardinalityError, NoSlowVectorsError, SlowvecError
from .ergodic import ergodic_projection, flattening_check, net_dimension_bound
from .norms import build_norm_context, compute_stable_split
from .operators import DEFAULT_HORIZON, Operator
from .slow import reverify_certificate, slow_subspace, synthesize_slow

__all__ = ["AnalysisConfig", "AsymptoticReport", "asymptotic_report"]

PASS, INCONCLUSIVE, FAIL, ERROR = "pass", "inconclusive", "fail", "error"


@dataclass(frozen=True)
class AnalysisConfig:
    horizon: int = DEFAULT_HORIZON
    horizon_p: int = DEFAULT_HORIZON
    epsilon: float = 0.01
    sample_count: int = 32
    seed: int = 0
    peripheral_tol: float = 1e-6
    proj_tol: float = 1e-8
    flatten_bound: float = 1.0 / 3.0
    m_cap: int = 256
    sphere_samples: int = 16
    net_samples: int = 1024
    workers: int = 1


@dataclass(frozen=True)
class AsymptoticReport:
    status: str
    codim: int | None
    multiplicities: list
    max_slow_dimension: int
    stages: dict
    verdicts: dict

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "codim_x0": self.codim,
            "peripheral_multiplicities": self.multiplicities,
            "max_slow_dimension": self.max_slow_dimension,
            "verdicts": self.verdicts,
            "stages": self.stages,
        }


def _error_stage(exc):
    out = {"status": ERROR}
    out.update(exc.to_dict() if isinstance(exc, SlowvecError) else {"error": type(exc).__name__, "message": str(exc)})
    return out


def _per_lambda(T, K, alpha, lam, mult, ctx, split, cfg):
    """Net dimension bound, ergodic projection, flattening and slow subspace at one eigenvalue."""
    out = {"lambda": lam, "multiplicity": mult}
    try:
        out["net_bound"] = net_dimension_bound(T, K, alpha, lam, cfg.horizon, net_samples=cfg.net_samples, seed=cfg.seed)
    except NetCardinalityError as exc:
        # a resource limit, like an exhausted horizon: the bound is untested, not refuted
        out["net_bound"] = {"status": INCONCLUSIVE, **exc.to_dict()}
    except SlowvecError as exc:
        out["net_bound"] = _error_stage(exc)
    try:
        proj = ergodic_projection(T, lam, proj_tol=cfg.proj_tol)
        out["ergodic"] = proj
        out["flattening"] = flattening_check(
            T, K, alpha, lam, cfg.flatten_bound, cfg.horizon, cfg.m_cap, projection=proj
        )
    except SlowvecError as exc:
        out["ergodic"] = _error_stage(exc)
    try:
        sub = slow_subspace(T, lam, cfg.epsilon, mult, ctx, split, cfg.sphere_samples, cfg.seed)
        out["slow_subspace"] = sub
        out["slow_dimension"] = sub.dim
        out["slow_reverified"] = all(reverify_certificate(T, c, ctx) for c in sub.certificates)
    except HorizonExhaustedError as exc:
        out["slow_subspace"] = {"status": INCONCLUSIVE, **exc.to_dict()}
        out["slow_dimension"] = 0
    except SlowvecError as exc:
        out["slow_subspace"] = _error_stage(exc)
        out["slow_dimension"] = 0
    return out


def asymptotic_report(T: Operator, K: Compactum, alpha: float, config: AnalysisConfig | None = None) -> AsymptoticReport:
    """Run every analysis stage and collect stage-by-stage verdicts.

    The overall status is ``"error"`` if a stage raised or a consistency
    verdict failed, ``"inconclusive"`` if only horizon-limited checks fell
    short, and ``"pass"`` otherwise.
    """
    cfg = AnalysisConfig() if config is None else config
    stages, verdicts = {}, {}
    inconclusive = False

    try:
        star = check_star_condition(T, K, alpha, cfg.sample_count, cfg.horizon, cfg.seed)
        stages["star_condition"] = star
        inconclusive |= star.status != "pass"
    except SlowvecError as exc:
        stages["star_condition"] = _error_stage(exc)

    try:
        ctx = build_norm_context(T, cfg.horizon, cfg.horizon_p, seed=cfg.seed)
        split = compute_stable_split(T, cfg.peripheral_tol)
        stages["stable_split"] = {"status": PASS, "codim": split.codim, "dim": T.dim, "c_hat": ctx.c_hat}
    except SlowvecError as exc:
        stages["stable_split"] = _error_stage(exc)
        return AsymptoticReport(ERROR, None, [], 0, _serial(stages), verdicts)

    clusters = split.peripheral_clusters() if split.codim else []
    multiplicities = [{"lambda": lam / abs(lam), "multiplicity": mult} for lam, mult in clusters]
    args = [(T, K, alpha, lam / abs(lam), mult, ctx, split, cfg) for lam, mult in clusters]
    if cfg.workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_lambda = list(pool.map(lambda a: _per_lambda(*a), args))
    else:
        per_lambda = [_per_lambda(*a) for a in args]
    stages["peripheral"] = per_lambda

    try:
        cert = synthesize_slow(T, cfg.epsilon, ctx, split)
        stages["synthesize_slow"] = {"status": PASS, "certificate": cert, "reverified": reverify_certificate(T, cert, ctx)}
        has_slow = True
    except NoSlowVectorsError as exc:
        stages["synthesize_slow"] = {"status": PASS, "result": "no slow vectors", "message": str(exc)}
        has_slow = False
    except HorizonExhaustedError as exc:
        stages["synthesize_slow"] = {"status": INCONCLUSIVE, **exc.to_dict()}
        inconclusive = True
        has_slow = None
    except SlowvecError as exc:
        stages["synthesize_slow"] = _error_stage(exc)
        has_slow = None

    if has_slow is not None:
        verdicts["codim_zero_iff_no_slow_vectors"] = (split.codim == 0) == (not has_slow)
    if has_slow:
        verdicts["certificate_reverified"] = bool(stages["synthesize_slow"]["reverified"])
    verdicts["multiplicities_sum_to_codim"] = sum(m for _, m in clusters) == split.codim
    for entry in per_lambda:
        key = f"lambda={_fmt(entry['lambda'])}"
        net_bound = entry["net_bound"]
        if isinstance(net_bound, dict) and net_bound["status"] == INCONCLUSIVE:
            inconclusive = True
        if not isinstance(net_bound, dict):
            verdicts[f"{key}: kernel fits net span"] = net_bound.bound_holds
        flat = entry.get("flattening")
        if flat is not None:
            if flat.passed and not isinstance(net_bound, dict):
                verdicts[f"{key}: slow dimension <= dim ker"] = entry["slow_dimension"] <= net_bound.dim_ker
            inconclusive |= not flat.passed
        if "slow_reverified" in entry:
            verdicts[f"{key}: subspace certificates reverified"] = entry["slow_reverified"]
        if isinstance(entry["slow_subspace"], dict) and entry["slow_subspace"]["status"] == INCONCLUSIVE:
            inconclusive = True

    stages_json = _serial(stages)
    errored = _has_error(stages_json) or not all(verdicts.values())
    status = ERROR if errored else (INCONCLUSIVE if inconclusive else PASS)
    max_slow = max((e["slow_dimension"] for e in per_lambda), default=0)
    return AsymptoticReport(status, split.codim, multiplicities, max_slow, stages_json, verdicts)


def _fmt(z):
    z = complex(z)
    re = 0.0 if abs(z.real) < 5e-7 else z.real
    im = 0.0 if abs(z.imag) < 5e-7 else z.imag
    return f"{re:.6f}{im:+.6f}j"


def _serial(obj):
    return to_jsonable(obj)


def _has_error(obj):
    if isinstance(obj, dict):
        return obj.get("status") == ERROR or any(_has_error(v) for v in obj.values())
    if isinstance(obj, list):
        return any(_has_error(v) for v in obj)
    return False
