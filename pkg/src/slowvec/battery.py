"""Randomized consistency battery over seeded split operators.

Each instance is a :func:`make_split_operator` draw together with the
peripheral compactum of :func:`peripheral_compactum`; every invariant below
is recorded as one :class:`Check` row.  Instances are independent, so they
can be evaluated in parallel and merged in index order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .attractor import check_star_condition, greedy_decompose, hull_distance, random_unit_vectors
from .errors import NoSlowVectorsError, SlowvecError
from .ergodic import (
    cesaro_mean,
    cesaro_rate_constant,
    eigenspace_dimension,
    ergodic_projection,
    flattening_check,
    net_dimension_bound,
)
from .norms import build_norm_context, compute_stable_split, quotient_p_isometry_check
from .operators import estimate_power_bound, make_split_operator
from .scenario import SCHEMA_VERSION, peripheral_compactum
from .slow import reverify_certificate, synthesize_slow

ALPHA = 0.6
EPSILON = 0.01
ANGLE_GRID = 12


@dataclass(frozen=True)
class Check:
    instance: int
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class InstanceResult:
    index: int
    params: dict
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold, passed=None):
        value = float(value)
        ok = value <= threshold if passed is None else bool(passed)
        self.checks.append(Check(self.index, name, value, float(threshold), ok))

    def scenario(self) -> dict:
        """A scenario reproducing this instance through ``run``."""
        return {
            "schema_version": SCHEMA_VERSION,
            "name": f"suite-instance-{self.index:03d}",
            "operator": {"family": "split", **self.params},
            "compactum": {"family": "peripheral"},
            "parameters": {"alpha": ALPHA, "epsilon": EPSILON},
            "analyses": ["stable_split", "p_isometry", "synthesize_slow", "star_condition", "greedy", "asymptotic_report"],
        }


def instance_params(seed: int, count: int) -> list:
    """Deterministic operator parameters for ``count`` instances."""
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        p = int(rng.integers(0, 4))
        slots = [int(s) for s in sorted(rng.choice(ANGLE_GRID, size=p, replace=False))]
        angles = [2 * np.pi * s / ANGLE_GRID for s in slots]
        out.append(
            {
                "peripheral": [{"angle": float(a)} for a in angles],
                "contraction_radius": float(np.round(rng.uniform(0.2, 0.8), 6)),
                "interior_dim": int(rng.integers(1, 6)),
                "conditioning": float(np.round(10 ** rng.uniform(0.0, 1.0), 6)),
                "seed": int(rng.integers(0, 2**31 - 1)),
            }
        )
    return out


def _build(params):
    peripheral = [np.exp(1j * p["angle"]) for p in params["peripheral"]]
    return make_split_operator(
        peripheral,
        contraction_radius=params["contraction_radius"],
        interior_dim=params["interior_dim"],
        conditioning=params["conditioning"],
        seed=params["seed"],
    )


def run_instance(index: int, params: dict) -> InstanceResult:
    res = InstanceResult(index, params)
    try:
        _battery(res, _build(params))
    except SlowvecError as exc:
        res.add(f"unexpected error: {type(exc).__name__}: {exc}", 1.0, 0.0, passed=False)
    return res


def _battery(res, T):
    p = len(res.params["peripheral"])
    rng = np.random.default_rng(res.params["seed"])
    est = estimate_power_bound(T)
    res.add("operators: power bound verdict is bounded", est.c_hat, T.power_bound + 1e-9, passed=est.bounded)
    res.add("operators: C_hat <= constructed bound", est.c_hat, T.power_bound * (1 + 1e-9))

    split = compute_stable_split(T)
    res.add("norms: codim X0 equals constructed peripheral count", abs(split.codim - p), 0.0)
    truth = T.meta["x0_basis"]
    if truth.shape[1] and split.x0_basis.shape[1] == truth.shape[1]:
        res.add("norms: principal angle to true X0", np.max(subspace_angles(truth, split.x0_basis)), 1e-6)
    ctx = build_norm_context(T, samples=2, seed=res.params["seed"])
    if split.codim:
        iso = quotient_p_isometry_check(split, ctx, samples=4, seed=res.index)
        res.add("norms: quotient operator is a p-isometry", iso.max_deviation, 1e-6)

    try:
        cert = synthesize_slow(T, EPSILON, ctx, split)
        has_slow = True
        res.add("slow: certificate re-verifies", 0.0, 0.0, passed=reverify_certificate(T, cert, ctx))
        res.add("slow: eigen-residual below epsilon", cert.eigen_residual, EPSILON, passed=cert.eigen_residual < EPSILON)
        res.add("slow: orbit stays above 1 - epsilon", -cert.min_orbit_norm, -(1 - EPSILON), passed=cert.min_orbit_norm > 1 - EPSILON)
    except NoSlowVectorsError:
        has_slow = False
    res.add("consistency: codim X0 = 0 iff no slow vectors", 0.0, 0.0, passed=(split.codim == 0) == (not has_slow))

    K = peripheral_compactum(T)
    star = check_star_condition(T, K, ALPHA, sample_count=8, seed=res.index)
    res.add("attractor: attraction condition passes on samples", 1.0 - star.pass_fraction, 0.0)
    x = random_unit_vectors(T.dim, 1, res.params["seed"])[0]
    k = 6
    dec = greedy_decompose(T, K, ALPHA, x, k)
    worst = max(r - ALPHA**i for i, r in enumerate(dec.residual_norms))
    res.add("attractor: greedy residual chain", worst, 1e-8)
    res.add("attractor: greedy reconstruction", np.linalg.norm(dec.reconstruct_residual(T)), ALPHA**k + 1e-8)
    res.add("attractor: greedy sum |t_i| <= 1/(1-alpha)", sum(abs(t) for t in dec.t_values), 1 / (1 - ALPHA) + 1e-9)
    y = 2.0 * K.radius() * (rng.standard_normal(T.dim) + 1j * rng.standard_normal(T.dim)) / np.sqrt(2 * T.dim)
    d1, c1 = hull_distance(y, K, 1.0)
    d_half, _ = hull_distance(y, K, 0.5)
    d2, _ = hull_distance(2.0 * y, K, 2.0)
    res.add("attractor: hull coefficients within the l1 ball", np.abs(c1).sum(), 1.0 + 1e-9)
    res.add("attractor: hull distance recomputes", abs(d1 - np.linalg.norm(y - K.combine(c1))), 1e-9)
    res.add("attractor: hull distance monotone in scale", d1 - d_half, 1e-9)
    res.add("attractor: hull distance scale covariance", abs(d2 - 2.0 * d1), 1e-6)

    lams = {1.0 + 0j}
    lams.update(complex(np.exp(1j * q["angle"])) for q in res.params["peripheral"])
    eye = np.eye(T.dim)
    a = T.entries
    for lam in sorted(lams, key=lambda z: np.angle(z) % (2 * np.pi)):
        tag = f"lambda={np.angle(lam) % (2 * np.pi):.4f}"
        proj = ergodic_projection(T, lam)
        P = proj.P
        res.add(f"ergodic[{tag}]: P^2 = P", np.linalg.norm(P @ P - P, 2), 1e-8)
        res.add(f"ergodic[{tag}]: TP = lambda P", np.linalg.norm(a @ P - lam * P, 2), 1e-8)
        res.add(f"ergodic[{tag}]: PT = lambda P", np.linalg.norm(P @ a - lam * P, 2), 1e-8)
        res.add(f"ergodic[{tag}]: Cesaro vs spectral projection", proj.discrepancy, 1e-8)
        s16 = cesaro_mean(T, lam, 16).matrix
        res.add(f"ergodic[{tag}]: S_m commutes with T", np.linalg.norm(s16 @ a - a @ s16, 2), 1e-10)
        rate = cesaro_rate_constant(T, lam, P, est.c_hat)
        for m in (8, 64):
            sm = cesaro_mean(T, lam, m).matrix
            res.add(f"ergodic[{tag}]: Cesaro rate at m={m}", np.linalg.norm(sm - P, 2), rate / (m + 1) + 1e-9)
        dim_ker = eigenspace_dimension(T, lam)
        if dim_ker:
            v = np.linalg.svd(a - lam * eye)[2][-1].conj()
            dev = np.linalg.norm(s16 @ v - v)
            res.add(f"ergodic[{tag}]: mean fixes eigenvectors", dev, 1e-12 + 1e2 * np.linalg.norm(a @ v - lam * v))
        net_bound = net_dimension_bound(T, K, ALPHA, lam, net_samples=256, witness_count=2, seed=res.index)
        res.add(f"ergodic[{tag}]: dim ker fits net span", net_bound.dim_ker - net_bound.dim_net_span, 0.0)
        if dim_ker:
            flat = flattening_check(T, K, ALPHA, lam, projection=proj)
            res.add(f"ergodic[{tag}]: flattening reaches 1/3", flat.value, 1.0 / 3.0, passed=flat.passed)


def run_suite(seed: int, count: int, workers: int = 1) -> list:
    params = instance_params(seed, count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_instance, range(count), params))
    return [run_instance(i, p) for i, p in enumerate(params)]
