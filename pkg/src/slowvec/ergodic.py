"""Cesàro means, the mean-ergodic projection and the flattening check.

``S_{m,lambda} = (1/(m+1)) sum_{i=0}^m T^i / lambda^i`` converges to the
projection ``P`` onto ``ker(T - lambda I)`` along the closure of
``range(T - lambda I)``.  :func:`ergodic_projection` computes ``P`` from
the means and cross-checks it against the spectral (Schur/Sylvester)
eigenprojection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, schur, solve_sylvester

from .errors import (
    InvalidParameterError,
    InvalidSpectrumError,
    NetCardinalityError,
    NumericalInstabilityError,
)
from .operators import DEFAULT_HORIZON, Operator

__all__ = [
    "CesaroMean",
    "ErgodicProjection",
    "cesaro_mean",
    "spectral_projection",
    "ergodic_projection",
    "cesaro_rate_constant",
    "epsilon_net",
    "NetDimensionReport",
    "FlatteningReport",
    "eigenspace_dimension",
    "net_dimension_bound",
    "kkm_dimension_bound",
    "flattening_value",
    "flattening_check",
]

PROJ_TOL = 1e-8
_WIDE = np.clongdouble


def _unimodular(lam):
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise InvalidSpectrumError(f"lambda must lie on the unit circle, got |lambda| = {abs(lam)!r}")
    return lam


@dataclass(frozen=True)
class CesaroMean:
    m: int
    lam: complex
    matrix: np.ndarray


def cesaro_mean(T: Operator, lam: complex = 1.0, m: int = 0) -> CesaroMean:
    """Running-sum evaluation of ``S_{m,lambda}``, one product per term.

    Powers and the running sum are carried in extended precision (where the
    platform has it) and rounded once at the end, so the result is a
    polynomial in T up to a single rounding and commutes with T to about
    ``eps * ||T|| * ||S||`` regardless of ``m``.
    """
    lam = _unimodular(lam)
    if m < 0:
        raise InvalidParameterError("m must be nonnegative")
    u = (T.entries / lam).astype(_WIDE)
    power = np.eye(T.dim, dtype=_WIDE)
    acc = power.copy()
    for _ in range(m):
        power = u @ power
        acc += power
    return CesaroMean(m, lam, (acc / (m + 1)).astype(complex))


def spectral_projection(T: Operator, lam: complex = 1.0, cluster_tol: float = 1e-6) -> np.ndarray:
    """Eigenprojection onto the ``lambda``-eigenspace along the other invariant subspace.

    With the ordered Schur form ``T = Z [[R11, R12], [0, R22]] Z^H`` and
    ``R11 Y - Y R22 = -R12``, the projection is ``Z [[I, -Y], [0, 0]] Z^H``.
    """
    a = T.entries
    d = T.dim
    r, z, k = schur(a, output="complex", sort=lambda mu: abs(mu - lam) < cluster_tol)
    if k == 0:
        return np.zeros((d, d), dtype=complex)
    if k == d:
        return np.eye(d, dtype=complex)
    y = solve_sylvester(r[:k, :k], -r[k:, k:], -r[:k, k:])
    block = np.zeros((d, d), dtype=complex)
    block[:k, :k] = np.eye(k)
    block[:k, k:] = -y
    return z @ block @ z.conj().T


@dataclass(frozen=True)
class ErgodicProjection:
    """Limit of the Cesàro means together with its convergence record.

    ``convergence_history`` holds ``(m, ||S_m - S_{2m+1}||)`` along the
    doubling sequence ``m = 2^j - 1``.
    """

    lam: complex
    P: np.ndarray
    m_used: int
    convergence_history: list
    spectral: np.ndarray
    discrepancy: float
    converged: bool
    polish_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "P": self.P,
            "m_used": self.m_used,
            "converged": self.converged,
            "polish_steps": self.polish_steps,
            "discrepancy": self.discrepancy,
            "convergence_history": [{"m": m, "diff": d} for m, d in self.convergence_history],
        }


def ergodic_projection(
    T: Operator,
    lam: complex = 1.0,
    tol: float = 0.5,
    m_cap: int = 2**16,
    proj_tol: float = PROJ_TOL,
    polish_tol: float = 1e-14,
    max_polish: int = 64,
) -> ErgodicProjection:
    """Mean-ergodic projection for ``lambda`` from Cesàro means.

    The number of averaged terms doubles until ``||S_m - S_{2m+1}|| < tol``
    or ``m_cap`` is passed.  The mean ``S`` equals ``P + E`` with
    ``PE = EP = 0`` and ``E`` of spectral radius below one, so squaring
    ``S`` (itself an average of the powers) drives ``E`` to zero.  Once the
    eigenvalues of ``S`` sit near 0 or 1 the iteration switches to
    ``S <- 3S^2 - 2S^3``, which converges to the same idempotent without
    amplifying rounding in the ``lambda``-component.  Rounding grows with
    ``m``, hence the loose default ``tol``; the long Cesàro tail is left to
    the polishing steps.

    Raises
    ------
    NumericalInstabilityError
        If the polished mean and the spectral projection differ by more
        than ``proj_tol`` in operator norm.
    """
    lam = _unimodular(lam)
    d = T.dim
    u = T.entries / lam
    eye = np.eye(d, dtype=complex)
    terms = 1
    acc = eye.copy()
    u_pow = u.copy()
    history = []
    converged = False
    while True:
        acc_next = acc + u_pow @ acc
        diff = float(np.linalg.norm(acc_next / (2 * terms) - acc / terms, 2))
        history.append((terms - 1, diff))
        acc, u_pow, terms = acc_next, u_pow @ u_pow, 2 * terms
        if diff < tol:
            converged = True
            break
        if terms - 1 > m_cap:
            break
    s = acc / terms
    steps = 0
    prev_change = np.inf
    squaring = True
    for _ in range(max_polish):
        s2 = s @ s
        # squaring doubles the rounding drift of the lambda-component; once
        # the other components are small, 3S^2 - 2S^3 (flat at 0 and 1) takes over
        s_next = s2 if squaring else 3.0 * s2 - 2.0 * (s2 @ s)
        change = float(np.linalg.norm(s_next - s, 2))
        # stalled at rounding level: further steps only accumulate drift
        if not squaring and change > 0.5 * prev_change and change < 1e-8 * max(1.0, np.linalg.norm(s, 2)):
            break
        s, prev_change, steps = s_next, change, steps + 1
        if change < polish_tol * max(1.0, np.linalg.norm(s, 2)):
            break
        if squaring:
            ev = np.linalg.eigvals(s)
            squaring = not np.all((np.abs(ev) < 0.25) | (np.abs(ev - 1.0) < 1e-6))
    spectral = spectral_projection(T, lam)
    discrepancy = float(np.linalg.norm(s - spectral, 2))
    if discrepancy > proj_tol:
        raise NumericalInstabilityError(
            f"Cesaro and spectral projections disagree by {discrepancy:.3g} (> {proj_tol:g})",
            cesaro=s,
            spectral=spectral,
            discrepancy=discrepancy,
        )
    return ErgodicProjection(lam, s, terms - 1, history, spectral, discrepancy, converged, steps)


def cesaro_rate_constant(T: Operator, lam: complex, P: np.ndarray, c_hat: float) -> float:
    """``C'`` with ``||S_{m,lambda} - P|| <= C' / (m + 1)``.

    On ``range(I - P)`` the sum of powers telescopes through the reduced
    resolvent ``R = (I - U + P)^-1 (I - P)``, ``U = T / lambda``, giving
    ``C' = (1 + c_hat) ||R||``.
    """
    u = T.entries / complex(lam)
    eye = np.eye(T.dim)
    reduced = np.linalg.solve(eye - u + P, eye - P)
    return float((1.0 + c_hat) * np.linalg.norm(reduced, 2))


@dataclass(frozen=True)
class NetResult:
    points: np.ndarray
    radius: float
    mesh: float
    verified: bool


def _hull_samples(generators, count, rng):
    g = generators.shape[0]
    mags = rng.dirichlet(np.ones(g), size=count)
    phases = np.exp(2j * np.pi * rng.random((count, g)))
    return (mags * phases) @ generators


def epsilon_net(
    K, radius: float, samples: int = 2048, seed: int = 0, cap: int = 512, slack: float = 1.0
) -> NetResult:
    """Greedy farthest-point ``radius``-net of the balanced hull of ``K``.

    Candidates are seeded points on the boundary of the hull (coefficients
    on the complex l1 sphere) plus the phase-rotated generators and 0.  The
    candidates are covered to ``slack * radius``; a slack below one leaves
    room for the gaps between candidates.  The mesh is re-measured
    afterwards on a fresh sample and ``verified`` records whether it stayed
    within ``radius``.
    """
    rng = np.random.default_rng(seed)
    gens = K.generators
    rot = np.exp(2j * np.pi * np.arange(8) / 8)
    cand = np.vstack([_hull_samples(gens, samples, rng), (rot[:, None, None] * gens[None]).reshape(-1, gens.shape[1]), np.zeros((1, gens.shape[1]))])
    start = int(np.argmax(np.linalg.norm(cand, axis=1)))
    chosen = [start]
    dist = np.linalg.norm(cand - cand[start], axis=1)
    while dist.max() > slack * radius:
        if len(chosen) >= cap:
            raise NetCardinalityError(f"net for radius {radius:g} needs more than {cap} points", cap)
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(cand - cand[nxt], axis=1))
    points = cand[chosen]
    fresh = _hull_samples(gens, samples, rng)
    mesh = float(np.max(np.min(np.linalg.norm(fresh[:, None, :] - points[None, :, :], axis=2), axis=1)))
    return NetResult(points, radius, mesh, mesh <= radius)


@dataclass(frozen=True)
class NetDimensionReport:
    lam: complex
    dim_ker: int
    dim_net_span: int
    net_size: int
    net_mesh: float
    net_mesh_verified: bool
    bound_holds: bool
    witnesses: list = field(default_factory=list)

    @property
    def witnesses_ok(self) -> bool:
        return all(w["distance"] < 1.0 for w in self.witnesses)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dim_ker": self.dim_ker,
            "dim_net_span": self.dim_net_span,
            "net_size": self.net_size,
            "net_mesh": self.net_mesh,
            "net_mesh_verified": self.net_mesh_verified,
            "bound_holds": self.bound_holds,
            "witnesses_ok": self.witnesses_ok,
            "witnesses": self.witnesses,
        }


def eigenspace_dimension(T: Operator, lam: complex, null_tol: float | None = None) -> int:
    if null_tol is None:
        null_tol = 1e-8 * max(1.0, T.norm())
    sv = np.linalg.svd(T.entries - lam * np.eye(T.dim), compute_uv=False)
    return int(np.sum(sv <= null_tol))


def net_dimension_bound(
    T: Operator,
    K,
    alpha: float,
    lam: complex = 1.0,
    horizon: int = DEFAULT_HORIZON,
    null_tol: float | None = None,
    net_samples: int = 2048,
    witness_count: int = 8,
    seed: int = 0,
    cap: int = 512,
) -> NetDimensionReport:
    """Bound ``dim ker(T - lambda I)`` by the span of a ``(1 - alpha)``-net of K.

    Also exercises the mechanism behind the bound: unit vectors ``z``
    orthogonal to the net span have ``rho(z, Y) = 1``, and under the
    attraction condition some power brings ``T^n z`` strictly closer.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    net = epsilon_net(K, 1.0 - alpha, net_samples, seed, cap)
    u, sv, _ = np.linalg.svd(net.points.T, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * max(sv.max(initial=0.0), 1e-300))) if sv.size else 0
    dim_ker = eigenspace_dimension(T, lam, null_tol)
    witnesses = []
    if rank < T.dim:
        y_perp = u[:, rank:]
        y_basis = u[:, :rank]
        rng = np.random.default_rng(seed + 1)
        for _ in range(witness_count):
            c = rng.standard_normal(T.dim - rank) + 1j * rng.standard_normal(T.dim - rank)
            z = y_perp @ (c / np.linalg.norm(c))
            best = (1.0, None)
            v = z
            for n in range(1, horizon + 1):
                v = T.entries @ v
                dist = float(np.linalg.norm(v - y_basis @ (y_basis.conj().T @ v)))
                if dist < best[0]:
                    best = (dist, n)
                if dist < 1.0 - 1e-12:
                    break
            witnesses.append({"n": best[1], "distance": best[0]})
    return NetDimensionReport(
        lam=complex(lam),
        dim_ker=dim_ker,
        dim_net_span=rank,
        net_size=len(net.points),
        net_mesh=net.mesh,
        net_mesh_verified=net.verified,
        bound_holds=dim_ker <= rank,
        witnesses=witnesses,
    )


kkm_dimension_bound = net_dimension_bound  # alternative name used by external callers


def flattening_value(T: Operator, P: np.ndarray, lam: complex, m: int, n: int) -> float:
    """``||T^n S_{m,lambda} - lambda^n P||`` in the operator norm."""
    s = cesaro_mean(T, lam, m).matrix
    tn = np.linalg.matrix_power(T.entries, n)
    return float(np.linalg.norm(tn @ s - lam**n * P, 2))


@dataclass(frozen=True)
class FlatteningReport:
    """Outcome of the flattening search.

    ``value`` is the tail maximum of ``||T^n S_m - lambda^n P||`` at the
    reported ``m`` (the best one seen when ``passed`` is false).  The
    witness is a unit vector with ``Px = 0`` maximizing ``||T^n S_m x||``
    at the worst tail power.
    """

    lam: complex
    alpha: float
    bound: float
    passed: bool
    m: int
    value: float
    worst_n: int
    witness: np.ndarray
    witness_value: float
    hull_value: float
    window: tuple
    history: list

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "alpha": self.alpha,
            "bound": self.bound,
            "passed": self.passed,
            "m": self.m,
            "value": self.value,
            "worst_n": self.worst_n,
            "witness": self.witness,
            "witness_value": self.witness_value,
            "hull_value": self.hull_value,
            "window": list(self.window),
        }


def flattening_check(
    T: Operator,
    K,
    alpha: float,
    lam: complex = 1.0,
    bound: float = 1.0 / 3.0,
    horizon: int = DEFAULT_HORIZON,
    m_cap: int = 256,
    window: tuple = (0.5, 1.0),
    projection: ErgodicProjection | None = None,
) -> FlatteningReport:
    """Smallest ``m <= m_cap`` whose tail value ``max_n ||T^n S_m - lambda^n P||`` is ``<= bound``.

    The tail is ``n`` in ``[window[0] * horizon, window[1] * horizon]``.
    ``hull_value`` is ``max_g ||(S_m - P) g||`` over the generators of K.
    """
    lam = _unimodular(lam)
    if projection is None:
        projection = ergodic_projection(T, lam)
    P = projection.P
    d = T.dim
    a = T.entries
    n_lo = int(np.floor(window[0] * horizon))
    n_hi = int(np.floor(window[1] * horizon))
    ns = np.arange(n_lo, n_hi + 1)
    err = np.empty((len(ns), d, d), dtype=complex)
    tn = np.linalg.matrix_power(a, n_lo)
    for j, n in enumerate(ns):
        err[j] = tn - lam**n * P
        tn = a @ tn
    u = a / lam
    power = np.eye(d, dtype=complex)
    acc = power.copy()
    history = []
    best = None
    for m in range(m_cap + 1):
        if m:
            power = u @ power
            acc += power
        s = acc / (m + 1)
        vals = np.linalg.norm(err @ s, ord=2, axis=(1, 2))
        j = int(np.argmax(vals))
        value = float(vals[j])
        history.append((m, value))
        if best is None or value < best[1]:
            best = (m, value, j, s)
        if value <= bound:
            break
    m, value, j, s = best
    ker_p = null_space(P, rcond=1e-8)
    if ker_p.shape[1]:
        w_mat = err[j] @ s @ ker_p
        _, sv, vh = np.linalg.svd(w_mat)
        witness = ker_p @ vh[0].conj()
        witness_value = float(sv[0])
    else:
        witness = np.zeros(d, dtype=complex)
        witness_value = 0.0
    diff = s - P
    hull_value = float(np.max(np.linalg.norm(K.generators @ diff.T, axis=1))) if K is not None else float("nan")
    return FlatteningReport(
        lam=lam,
        alpha=alpha,
        bound=bound,
        passed=value <= bound,
        m=m,
        value=value,
        worst_n=int(ns[j]),
        witness=witness,
        witness_value=witness_value,
        hull_value=hull_value,
        window=(n_lo, n_hi),
        history=history,
    )
