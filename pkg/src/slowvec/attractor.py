"""Attracting compacta and the greedy decomposition of orbits.

A :class:`Compactum` is the balanced convex hull of finitely many
generators, ``{sum_i c_i g_i : sum_i |c_i| <= 1}`` with complex ``c_i``.
Distances to it are convex programs over the complex l1 ball, solved by
accelerated projected gradient with a conditional-gradient duality gap as
the stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._jsonutil import complex_array, decode_complex
from .errors import ConvergenceError, InvalidParameterError, StepExhaustedError
from .operators import DEFAULT_HORIZON, Operator

__all__ = [
    "Compactum",
    "GreedyDecomposition",
    "AttractionReport",
    "hull_distance",
    "check_star_condition",
    "greedy_decompose",
    "build_attractor_hull",
    "verify_attraction",
    "random_unit_vectors",
]

GAP_TOL = 1e-9
MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class Compactum:
    """Balanced convex hull of the rows of ``generators``."""

    generators: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.array(self.generators, dtype=complex))
        if g.shape[0] == 0 or g.size == 0:
            raise InvalidParameterError("a compactum needs at least one generator")
        if not np.all(np.isfinite(g)):
            raise InvalidParameterError("generators must be finite")
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """Generators as columns."""
        return self.generators.T

    def combine(self, coeffs) -> np.ndarray:
        return self.matrix @ np.asarray(coeffs, dtype=complex)

    def radius(self) -> float:
        return float(np.max(np.linalg.norm(self.generators, axis=1)))

    def to_dict(self) -> dict:
        return {"generators": [complex_array(g) for g in self.generators]}

    @classmethod
    def from_dict(cls, obj) -> "Compactum":
        return cls(np.array([decode_complex(g) for g in obj["generators"]]))


def _project_l1(c, radius):
    """Euclidean projection onto ``{c in C^g : sum |c_i| <= radius}``."""
    mags = np.abs(c)
    if mags.sum() <= radius:
        return c
    u = np.sort(mags)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, len(u) + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1)
    new = np.maximum(mags - theta, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(mags > 0, c / np.where(mags > 0, mags, 1.0), 0.0)
    return new * phase


def _solve_hull(x, G, scale, gap_tol, max_iter):
    """Minimize ``0.5 ||x - G c||^2`` over ``sum |c_i| <= scale``.

    Returns ``(c, gap, iterations)`` where ``gap`` is the Frank-Wolfe
    duality gap ``Re <grad, c - s>`` at the returned ``c``, an upper bound
    on its suboptimality.

    The gap bounds ``d^2 - d_opt^2`` by ``2 gap``, so the iteration stops once
    ``gap <= gap_tol * d``.  The distance ``d`` is then within ``2 gap_tol``
    of the optimum, including at points on or inside the hull, where a
    threshold on ``gap`` alone would only give ``sqrt(2 gap_tol)``.
    """
    g = G.shape[1]
    lip = float(np.linalg.norm(G, 2)) ** 2
    c = np.zeros(g, dtype=complex)
    if lip == 0.0:
        return c, 0.0, 0
    gh = G.conj().T
    ghx = gh @ x
    gram = gh @ G
    y = c.copy()
    t = 1.0
    gap = np.inf
    for it in range(max_iter):
        grad = gram @ c - ghx
        gap = float(np.real(np.vdot(grad, c))) + scale * float(np.max(np.abs(grad)))
        dist = float(np.linalg.norm(x - G @ c))
        if gap <= gap_tol * dist or dist <= gap_tol:
            return c, gap, it
        grad_y = gram @ y - ghx
        c_new = _project_l1(y - grad_y / lip, scale)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        # gradient-based adaptive restart
        if np.real(np.vdot(y - c_new, c_new - c)) > 0:
            t_new = 1.0
            y = c_new
        else:
            y = c_new + ((t - 1.0) / t_new) * (c_new - c)
        c, t = c_new, t_new
    raise ConvergenceError(f"hull projection did not reach duality gap {gap_tol:g} in {max_iter} iterations", gap)


def hull_distance(x, K: Compactum, scale: float = 1.0, gap_tol: float = GAP_TOL, max_iter: int = MAX_ITER):
    """Distance from ``x`` to ``scale * K`` and the attaining coefficients.

    Returns
    -------
    distance : float
        ``||x - G c||`` recomputed from the returned coefficients.
    coeffs : ndarray of complex
        ``c`` with ``sum |c_i| <= scale``.

    Raises
    ------
    ConvergenceError
        If the duality gap is still above ``gap_tol`` after ``max_iter``
        iterations; carries the last gap.
    """
    if scale < 0:
        raise InvalidParameterError("scale must be nonnegative")
    x = np.asarray(x, dtype=complex)
    G = K.matrix
    if scale == 0.0:
        return float(np.linalg.norm(x)), np.zeros(G.shape[1], dtype=complex)
    c, _, _ = _solve_hull(x, G, scale, gap_tol, max_iter)
    return float(np.linalg.norm(x - G @ c)), c


class _HullScanner:
    """Distances from many vectors to one scaled hull, with cheap lower bounds.

    ``||(I - Q Q^H) y||`` (distance to the span of the generators) and
    ``||y|| - scale * max ||g||`` both bound the hull distance from below and
    let most scanned powers be skipped without solving.
    """

    def __init__(self, K, gap_tol=GAP_TOL, max_iter=MAX_ITER):
        self.K = K
        self.gap_tol = gap_tol
        self.max_iter = max_iter
        u, sv, _ = np.linalg.svd(K.matrix, full_matrices=False)
        rank = int(np.sum(sv > 1e-12 * max(sv.max(), 1e-300)))
        self.q = u[:, :rank]
        self.radius = K.radius()

    def lower_bounds(self, ys, scale):
        """``ys`` has one vector per row."""
        perp = ys - (ys @ self.q.conj()) @ self.q.T
        lb_span = np.linalg.norm(perp, axis=1)
        lb_ball = np.linalg.norm(ys, axis=1) - scale * self.radius
        return np.maximum(lb_span, lb_ball)

    def distance(self, y, scale):
        return hull_distance(y, self.K, scale, self.gap_tol, self.max_iter)

    def first_below(self, ys, scale, target, strict=False):
        """First row index whose hull distance meets ``target``.

        Returns ``(index, distance, coeffs, best_index)``; ``index`` is None
        when no row qualifies, and then ``distance`` is the smallest distance
        among the rows that were solved (attained at ``best_index``).
        """
        lb = self.lower_bounds(ys, scale)
        best = (np.inf, None, None)
        for j in np.flatnonzero(lb < target if strict else lb <= target):
            dist, c = self.distance(ys[j], scale)
            if (dist < target) if strict else (dist <= target):
                return int(j), dist, c, int(j)
            if dist < best[0]:
                best = (dist, int(j), c)
        if best[1] is None:
            j = int(np.argmin(lb))
            dist, c = self.distance(ys[j], scale)
            best = (dist, j, c)
        return None, best[0], best[2], best[1]

    def minimum(self, ys, scale):
        """Exact minimum of hull distances over the rows, pruning by lower bounds."""
        lb = self.lower_bounds(ys, scale)
        order = np.argsort(lb, kind="stable")
        best = (np.inf, -1)
        for j in order:
            if lb[j] >= best[0]:
                break
            dist, _ = self.distance(ys[j], scale)
            if dist < best[0]:
                best = (dist, int(j))
        return best


def random_unit_vectors(dim: int, count: int, seed: int) -> np.ndarray:
    """Seeded complex Gaussian vectors normalized to the unit sphere (one per row)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _orbit_rows(a, x, horizon):
    out = np.empty((horizon + 1, len(x)), dtype=complex)
    out[0] = x
    for n in range(horizon):
        out[n + 1] = a @ out[n]
    return out


@dataclass(frozen=True)
class AttractionSample:
    x: np.ndarray
    best_n: int
    best_distance: float
    passed: bool


@dataclass(frozen=True)
class AttractionReport:
    """Scanned-minimum surrogate of ``liminf_n rho(T^n x, K) < alpha``.

    A scan only bounds the liminf from above, so a pass is sound while a
    fail is ``"horizon-limited-fail"``: inconclusive, never a refutation.
    With ``exhaustive=False`` the scan of a sample stops at its first
    passing power.
    """

    alpha: float
    horizon: int
    samples: list
    pass_fraction: float
    exhaustive: bool = False

    @property
    def status(self) -> str:
        return "pass" if self.pass_fraction == 1.0 else "horizon-limited-fail"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "horizon": self.horizon,
            "pass_fraction": self.pass_fraction,
            "status": self.status,
            "exhaustive": self.exhaustive,
            "samples": [{"best_n": s.best_n, "best_distance": s.best_distance, "passed": s.passed} for s in self.samples],
        }


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"invalid alpha: {alpha!r} is not in (0, 1)")


def check_star_condition(
    T: Operator,
    K: Compactum,
    alpha: float,
    sample_count: int = 32,
    horizon: int = DEFAULT_HORIZON,
    seed: int = 0,
    vectors=None,
    exhaustive: bool = False,
) -> AttractionReport:
    """Test ``min_{n <= horizon} rho(T^n x, K) < alpha`` on seeded unit vectors.

    ``vectors`` (one per row) replaces the random sample when given.
    """
    _check_alpha(alpha)
    xs = random_unit_vectors(T.dim, sample_count, seed) if vectors is None else np.atleast_2d(np.asarray(vectors, dtype=complex))
    scanner = _HullScanner(K)
    rows = []
    for x in xs:
        ys = _orbit_rows(T.entries, x, horizon)
        if exhaustive:
            dist, n = scanner.minimum(ys, 1.0)
        else:
            _, dist, _, n = scanner.first_below(ys, 1.0, alpha, strict=True)
        rows.append(AttractionSample(x, int(n), float(dist), bool(dist < alpha)))
    frac = sum(r.passed for r in rows) / len(rows)
    return AttractionReport(alpha, horizon, rows, frac, exhaustive)


@dataclass(frozen=True)
class GreedyStep:
    t: complex
    a: np.ndarray
    n: int
    coeffs: np.ndarray


@dataclass(frozen=True)
class GreedyDecomposition:
    """Steps ``(t_i, a_i, n_i)`` of the recursive approximation of ``T^{m_1} x``.

    ``residual_norms[0] = ||x||`` and ``residual_norms[i]`` is the norm after
    step ``i`` (at most ``alpha^i``).  ``m_values[j] = n_j + ... + n_k``.
    """

    x: np.ndarray
    steps: list
    m_values: list
    residual_norms: list
    alpha: float

    @property
    def t_values(self):
        return [s.t for s in self.steps]

    def reconstruct_residual(self, T: Operator) -> np.ndarray:
        """``T^{m_1} x - sum_j t_j T^{m_{j+1}} a_j`` (with ``m_{k+1} = 0``), from matrix powers."""
        a = T.entries
        ms = list(self.m_values) + [0]
        out = np.linalg.matrix_power(a, ms[0]) @ self.x
        for j, step in enumerate(self.steps):
            out = out - step.t * (np.linalg.matrix_power(a, ms[j + 1]) @ step.a)
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "steps": [{"t": s.t, "n": s.n, "a": s.a} for s in self.steps],
            "m_values": self.m_values,
            "residual_norms": self.residual_norms,
        }


def greedy_decompose(
    T: Operator,
    K: Compactum,
    alpha: float,
    x,
    k: int,
    horizon: int = DEFAULT_HORIZON,
) -> GreedyDecomposition:
    """Run ``k`` steps of the greedy attraction recursion from ``x``.

    Step ``i`` scans ``n = 1..horizon`` for the first power with
    ``rho(T^n r, alpha^(i-1) K) <= alpha^i`` where ``r`` is the current
    residual; the nearest hull point ``t_i a_i`` is subtracted.

    Raises
    ------
    StepExhaustedError
        If some step finds no qualifying ``n``; carries the best distance.
    """
    _check_alpha(alpha)
    x = T.check_vector(x)
    scanner = _HullScanner(K)
    residual = x
    steps, res_norms = [], [float(np.linalg.norm(x))]
    for i in range(1, k + 1):
        scale = alpha ** (i - 1)
        target = alpha**i
        ys = _orbit_rows(T.entries, residual, horizon)[1:]
        j, dist, c, _ = scanner.first_below(ys, scale, target)
        if j is None:
            raise StepExhaustedError(
                f"step {i}: no n <= {horizon} brings the residual within {target:.3g} of {scale:.3g}*K",
                i,
                float(dist),
                target,
            )
        point = K.combine(c)
        t = float(np.sum(np.abs(c)))
        a = point / t if t > 0 else np.zeros_like(point)
        residual = ys[j] - point
        steps.append(GreedyStep(complex(t), a, j + 1, c))
        res_norms.append(float(np.linalg.norm(residual)))
    ns = [s.n for s in steps]
    m_values = [int(sum(ns[j:])) for j in range(len(ns))]
    return GreedyDecomposition(x, steps, m_values, res_norms, alpha)


def build_attractor_hull(T: Operator, K: Compactum, alpha: float, depth: int) -> Compactum:
    """Generators ``h T^i g`` for ``i <= depth``, ``h = 1 / (1 - alpha)``, deduplicated."""
    _check_alpha(alpha)
    if depth < 0:
        raise InvalidParameterError("depth must be nonnegative")
    h = 1.0 / (1.0 - alpha)
    gens = []
    for g in K.generators:
        v = h * g
        for _ in range(depth + 1):
            gens.append(v)
            v = T.entries @ v
    unique = []
    for v in gens:
        if not any(np.linalg.norm(v - u) <= 1e-12 * max(1.0, np.linalg.norm(u)) for u in unique):
            unique.append(v)
    return Compactum(np.array(unique))


@dataclass(frozen=True)
class AttractionVerification:
    epsilon: float
    horizon: int
    rows: list
    all_success: bool

    @property
    def status(self) -> str:
        return "pass" if self.all_success else "horizon-limited-fail"

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "horizon": self.horizon, "status": self.status, "rows": self.rows}


def verify_attraction(
    T: Operator,
    K_hat: Compactum,
    epsilon: float,
    samples=32,
    horizon: int = DEFAULT_HORIZON,
    seed: int = 0,
) -> AttractionVerification:
    """For each sample find the first ``n`` with ``rho(T^n x, K_hat) < epsilon``.

    ``samples`` is a count of seeded unit vectors or an explicit array of
    vectors (one per row).
    """
    if not epsilon > 0:
        raise InvalidParameterError("epsilon must be positive")
    if np.ndim(samples) == 0:
        xs = random_unit_vectors(T.dim, int(samples), seed)
    else:
        xs = np.atleast_2d(np.asarray(samples, dtype=complex))
    scanner = _HullScanner(K_hat)
    rows = []
    for x in xs:
        ys = _orbit_rows(T.entries, x, horizon)
        n, dist, _, _ = scanner.first_below(ys, 1.0, epsilon, strict=True)
        rows.append({"success": n is not None, "n": n, "distance": float(dist)})
    return AttractionVerification(epsilon, horizon, rows, all(r["success"] for r in rows))
