"""Almost-eigenvectors and slow vectors.

A unit vector ``x`` is epsilon-slow when ``||Tx - lambda x|| < epsilon`` for
some unimodular ``lambda`` and ``||T^n x|| > 1 - epsilon`` for every ``n``.
Here "every n" means every ``n`` up to a horizon, and the norm is one of

``"original"``
    the Euclidean norm of X;
``"sup"``
    the renorm ``max_{k <= H} ||T^k x||``, in which T is a contraction;
``"quotient-p"``
    the p-seminorm, which only separates points of ``X / X_0``.

:func:`synthesize_slow` builds slow vectors the constructive way: an
eigenvector of the quotient operator is lifted to X and pushed forward by
T until its stable part has died out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import minimum_filter1d

from .ergodic import cesaro_mean
from .errors import (
    HorizonExhaustedError,
    InsufficientMultiplicityError,
    InvalidParameterError,
    InvalidSpectrumError,
    NoSlowVectorsError,
    PreconditionError,
    SlowRefusal,
)
from .norms import NormContext, StableSplit, windowed_max
from .operators import DEFAULT_HORIZON, Operator, orbit, orbit_norms

__all__ = [
    "NORM_KINDS",
    "EpsEigenvector",
    "SlowCertificate",
    "SlowSubspace",
    "CesaroFixedReport",
    "eps_eigenvector",
    "certify_slow",
    "reverify_certificate",
    "synthesize_slow",
    "select_lambda",
    "slow_subspace",
    "cesaro_fixed_check",
]

NORM_KINDS = ("original", "sup", "quotient-p")


def _check_kind(kind, ctx):
    if kind not in NORM_KINDS:
        raise InvalidParameterError(f"norm_kind must be one of {NORM_KINDS}, got {kind!r}")
    if kind != "original" and ctx is None:
        raise InvalidParameterError(f"norm_kind {kind!r} needs a NormContext")


def _unimodular(lam):
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise InvalidSpectrumError(f"lambda must be unimodular within 1e-12, got |lambda| = {abs(lam)!r}")
    return lam


def _norm(x, kind, ctx):
    return float(np.linalg.norm(x)) if kind == "original" else ctx.norm(x, kind)


@dataclass(frozen=True)
class EpsEigenvector:
    lam: complex
    x: np.ndarray
    residual: float
    norm_kind: str
    singular_value: float


def eps_eigenvector(T: Operator, lam: complex, norm_kind: str = "original", ctx: NormContext | None = None) -> EpsEigenvector:
    """Best Euclidean almost-eigenvector for ``lam``, rescored in ``norm_kind``.

    ``x`` is the right singular vector of ``T - lam I`` for the smallest
    singular value.  It is then normalized in ``norm_kind`` and ``residual``
    is ``||Tx - lam x||`` in that norm.  A vector of zero p-seminorm cannot
    be normalized; its residual is reported as infinite.
    """
    lam = _unimodular(lam)
    _check_kind(norm_kind, ctx)
    a = T.entries
    _, sv, vh = np.linalg.svd(a - lam * np.eye(T.dim))
    x = vh[-1].conj()
    # fix the phase so the largest entry is real positive
    j = int(np.argmax(np.abs(x)))
    x = x * (abs(x[j]) / x[j])
    if norm_kind == "original":
        return EpsEigenvector(lam, x, float(np.linalg.norm(a @ x - lam * x)), norm_kind, float(sv[-1]))
    scale = _norm(x, norm_kind, ctx)
    if scale <= 0.0:
        return EpsEigenvector(lam, x, float("inf"), norm_kind, float(sv[-1]))
    x = x / scale
    return EpsEigenvector(lam, x, _norm(a @ x - lam * x, norm_kind, ctx), norm_kind, float(sv[-1]))


@dataclass(frozen=True)
class SlowCertificate:
    """Measured witness that ``x`` is epsilon-slow up to ``horizon``.

    ``k`` is the number of forward iterations applied during synthesis
    (0 for vectors certified directly).
    """

    lam: complex
    x: np.ndarray
    epsilon: float
    horizon: int
    min_orbit_norm: float
    eigen_residual: float
    norm_kind: str
    k: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "x": self.x,
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "min_orbit_norm": self.min_orbit_norm,
            "eigen_residual": self.eigen_residual,
            "norm_kind": self.norm_kind,
            "k": self.k,
        }


def _orbit_norms_kind(T, x, horizon, kind, ctx):
    if kind == "original":
        return orbit_norms(T.entries, x, horizon)
    if kind == "sup":
        return ctx.sup_norms_along(x, horizon)
    _, _, hp = ctx.p_interval(x)
    return ctx.p_norms_along(x, horizon, horizon_p=hp)


def certify_slow(
    T: Operator,
    x,
    lam: complex,
    epsilon: float,
    horizon: int = DEFAULT_HORIZON,
    norm_kind: str = "original",
    ctx: NormContext | None = None,
) -> SlowCertificate:
    """Certify ``||Tx - lam x|| < epsilon`` and ``||T^n x|| > 1 - epsilon`` for ``n <= horizon``.

    Raises
    ------
    PreconditionError
        If ``x`` is not normalized (within 1e-9) in ``norm_kind``.
    SlowRefusal
        If either inequality fails.  ``reason`` says which; orbit failures
        carry the first failing ``n``.
    """
    lam = _unimodular(lam)
    _check_kind(norm_kind, ctx)
    x = T.check_vector(x)
    nx = _norm(x, norm_kind, ctx)
    if abs(nx - 1.0) > 1e-9:
        raise PreconditionError(f"x must have unit {norm_kind} norm, got {nx!r}")
    residual = _norm(T.entries @ x - lam * x, norm_kind, ctx)
    if not residual < epsilon:
        raise SlowRefusal(f"eigen-residual {residual:.6g} is not below epsilon={epsilon:g}", "residual", residual)
    norms = _orbit_norms_kind(T, x, horizon, norm_kind, ctx)
    bad = np.flatnonzero(norms <= 1.0 - epsilon)
    if bad.size:
        n = int(bad[0])
        raise SlowRefusal(
            f"||T^{n} x|| = {norms[n]:.6g} is not above 1 - epsilon = {1.0 - epsilon:g}", "orbit", float(norms[n]), n
        )
    return SlowCertificate(lam, x, epsilon, horizon, float(norms.min()), residual, norm_kind)


def _matrix_powers(a, count):
    out = np.empty((count + 1,) + a.shape, dtype=complex)
    out[0] = np.eye(a.shape[0])
    for n in range(count):
        out[n + 1] = out[n] @ a
    return out


def reverify_certificate(T: Operator, cert: SlowCertificate, ctx: NormContext | None = None) -> bool:
    """Recheck a certificate from explicit matrix powers.

    The orbit is rebuilt from the stacked matrix powers ``T^n`` (accumulated
    as matrix products, not vector iterates) and the sup windows with a
    strided view, so no code is shared with the path used by
    :func:`certify_slow`.
    """
    a = T.entries
    x = cert.x

    def norms_upto(v, count):
        return np.linalg.norm(_matrix_powers(a, count) @ v, axis=1)

    r = a @ x - cert.lam * x
    if cert.norm_kind == "original":
        residual = np.linalg.norm(r)
        min_norm = norms_upto(x, cert.horizon).min()
    else:
        h = ctx.horizon_sup
        if cert.norm_kind == "sup":
            offset = 0
        else:
            offset = ctx.p_interval(x)[2]
        xs = norms_upto(x, offset + cert.horizon + h)
        rs = norms_upto(r, offset + h)
        sup_x = sliding_window_view(xs, h + 1).max(axis=1)
        sup_r = sliding_window_view(rs, h + 1).max(axis=1)
        residual = sup_r[offset]
        min_norm = sup_x[offset : offset + cert.horizon + 1].min()
    tol = 1e-9
    return bool(
        residual < cert.epsilon
        and min_norm > 1.0 - cert.epsilon
        and abs(residual - cert.eigen_residual) <= tol * max(1.0, residual)
        and abs(min_norm - cert.min_orbit_norm) <= tol
    )


def select_lambda(split: StableSplit, tol: float = 1e-6):
    """Peripheral eigenvalue of largest quotient multiplicity, ties to smallest argument."""
    clusters = split.peripheral_clusters(tol)
    lam, mult = max(clusters, key=lambda c: c[1])
    return lam / abs(lam), mult


def _forward_scan(ctx, orbit_x, orbit_r, horizon, epsilon, k_cap):
    """Per-k sup-norm residuals and orbit minima of ``T^k x / ||T^k x||_sup``.

    ``orbit_x[j] = ||T^j x||`` and ``orbit_r[j] = ||T^j (Tx - lam x)||``
    (columns are independent samples).  Returns ``(residual, min_norm)``
    arrays of shape ``(k_cap + 1, ...)``.
    """
    h = ctx.horizon_sup
    w_x = windowed_max(orbit_x, h + 1)
    w_r = windowed_max(orbit_r, h + 1)
    min_w = minimum_filter1d(w_x, horizon + 1, axis=0, origin=0)[(horizon + 1) // 2 :][: k_cap + 1]
    base = w_x[: k_cap + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return w_r[: k_cap + 1] / base, min_w / base


def synthesize_slow(
    T: Operator,
    epsilon: float,
    ctx: NormContext,
    split: StableSplit,
    horizon: int | None = None,
    k_cap: int | None = None,
) -> SlowCertificate:
    """Construct a sup-norm epsilon-slow vector, or prove there are none.

    1. pick a peripheral eigenvalue ``lam`` of the quotient operator;
    2. take its eigenvector in quotient coordinates (a p-norm almost
       eigenvector of residual far below ``epsilon / 2``);
    3. lift it to X through the complement basis and normalize in the
       p-seminorm;
    4. apply T until ``T^k x``, normalized in the sup-norm, certifies.

    Raises
    ------
    NoSlowVectorsError
        If ``codim X_0 = 0``: every orbit tends to zero.
    HorizonExhaustedError
        If no ``k <= k_cap`` certifies (default ``k_cap = 4 * horizon_p``).
    """
    if split.codim == 0:
        raise NoSlowVectorsError("no slow vectors: X_0 = X (every orbit tends to 0)")
    horizon = ctx.horizon_sup if horizon is None else horizon
    k_cap = 4 * ctx.horizon_p if k_cap is None else k_cap
    lam, _ = select_lambda(split)
    q = eps_eigenvector(split.quotient_operator, lam)
    x = split.lift(q.x)
    x = x / ctx.p_seminorm(x)
    length = k_cap + horizon + ctx.horizon_sup + 1
    traj = orbit(T, x, length)
    r_norms = np.linalg.norm(traj.powers[1:] - lam * traj.powers[:-1], axis=1)
    residual, min_norm = _forward_scan(ctx, traj.norms, r_norms, horizon, epsilon, k_cap)
    ok = np.flatnonzero((residual < epsilon) & (min_norm > 1.0 - epsilon))
    for k in ok[:8]:
        v = traj.powers[k] / ctx.sup_norm(traj.powers[k])
        try:
            cert = certify_slow(T, v, lam, epsilon, horizon, "sup", ctx)
        except SlowRefusal:
            continue
        return replace(cert, k=int(k))
    best = int(np.nanargmin(residual))
    raise HorizonExhaustedError(
        f"no forward iterate up to k_cap={k_cap} certifies epsilon={epsilon:g}",
        k_cap,
        best_residual=float(residual[best]),
        best_min_norm=float(min_norm[best]),
    )


@dataclass(frozen=True)
class SlowSubspace:
    """Span of ``dim`` lifted quotient eigenvectors pushed forward by ``T^k0``.

    In finite dimensions the attainable dimension is capped by the
    multiplicity of ``lam``; ``finite_surrogate`` marks this in reports.
    """

    lam: complex
    basis: np.ndarray
    dim: int
    epsilon: float
    sphere_samples: int
    worst_certificate: SlowCertificate
    k0: int
    certificates: list = field(default_factory=list, repr=False)
    finite_surrogate: bool = True

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dim": self.dim,
            "epsilon": self.epsilon,
            "sphere_samples": self.sphere_samples,
            "k0": self.k0,
            "worst_certificate": self.worst_certificate,
            "finite_surrogate": self.finite_surrogate,
            "basis": [b for b in self.basis.T],
        }


def slow_subspace(
    T: Operator,
    lam: complex,
    epsilon: float,
    l: int,
    ctx: NormContext,
    split: StableSplit,
    sphere_samples: int = 64,
    seed: int = 0,
    horizon: int | None = None,
    angle_tol: float = 1e-6,
    k_cap: int | None = None,
) -> SlowSubspace:
    """An ``l``-dimensional subspace whose sampled unit sphere is epsilon-slow.

    A single forward exponent ``k0`` is chosen for all samples, so the
    basis of the result is ``T^k0`` applied to the lifted eigenvectors.

    Raises
    ------
    InsufficientMultiplicityError
        If fewer than ``l`` quotient eigenvalues lie within ``angle_tol`` of ``lam``.
    """
    lam = _unimodular(lam)
    horizon = ctx.horizon_sup if horizon is None else horizon
    k_cap = 4 * ctx.horizon_p if k_cap is None else k_cap
    if split.codim == 0:
        raise InsufficientMultiplicityError("codim X_0 = 0: no peripheral spectrum", l, 0)
    mult = int(np.sum(np.abs(split.peripheral_eigvals - lam) <= angle_tol))
    if l > mult or l < 1:
        raise InsufficientMultiplicityError(
            f"not enough peripheral multiplicity: requested {l}, lambda={lam:.6g} has {mult}", l, mult
        )
    q = split.quotient_operator.entries
    _, _, vh = np.linalg.svd(q - lam * np.eye(split.codim))
    w = split.lift(vh[-l:].conj().T)
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((l, sphere_samples)) + 1j * rng.standard_normal((l, sphere_samples))
    coef /= np.linalg.norm(coef, axis=0)
    xs = w @ coef
    p_scale = np.array([ctx.p_seminorm(xs[:, j]) for j in range(sphere_samples)])
    xs = xs / p_scale
    length = k_cap + horizon + ctx.horizon_sup + 1
    traj = orbit(T, xs, length)
    r_norms = np.linalg.norm(traj.powers[1:] - lam * traj.powers[:-1], axis=1)
    residual, min_norm = _forward_scan(ctx, traj.norms, r_norms, horizon, epsilon, k_cap)
    ok = np.flatnonzero(np.all((residual < epsilon) & (min_norm > 1.0 - epsilon), axis=1))
    for k0 in ok[:8]:
        certs = []
        try:
            for j in range(sphere_samples):
                v = traj.powers[k0][:, j]
                certs.append(certify_slow(T, v / ctx.sup_norm(v), lam, epsilon, horizon, "sup", ctx))
        except SlowRefusal:
            continue
        certs = [replace(c, k=int(k0)) for c in certs]
        worst = min(certs, key=lambda c: min(epsilon - c.eigen_residual, c.min_orbit_norm - (1.0 - epsilon)))
        basis = np.linalg.matrix_power(T.entries, int(k0)) @ w
        return SlowSubspace(lam, basis, l, epsilon, sphere_samples, worst, int(k0), certs)
    raise HorizonExhaustedError(f"no common k0 <= {k_cap} makes all {sphere_samples} samples slow", k_cap)


@dataclass(frozen=True)
class CesaroFixedReport:
    lam: complex
    m: int
    delta: float
    mean_deviation: float
    min_orbit_norm: float
    passed: bool


def cesaro_fixed_check(
    T: Operator,
    delta: float,
    m: int,
    cert: SlowCertificate,
    horizon: int | None = None,
    ctx: NormContext | None = None,
) -> CesaroFixedReport:
    """Check that the Cesàro mean nearly fixes a slow vector and keeps it long.

    With ``y = S_{m,lam} x`` the report carries ``||y - x||`` and
    ``min_n ||T^n y||`` in the certificate's norm; it passes when the first is
    below ``delta`` and the second above ``1 - delta``.  The certificate must
    have ``epsilon <= delta / (m + 2)``.
    """
    budget = delta / (m + 2)
    if cert.epsilon > budget * (1 + 1e-12):
        raise PreconditionError(f"certificate epsilon {cert.epsilon:g} exceeds delta/(m+2) = {budget:g}")
    _check_kind(cert.norm_kind, ctx)
    horizon = cert.horizon if horizon is None else horizon
    s = cesaro_mean(T, cert.lam, m).matrix
    y = s @ cert.x
    dev = _norm(y - cert.x, cert.norm_kind, ctx)
    min_norm = float(_orbit_norms_kind(T, y, horizon, cert.norm_kind, ctx).min())
    return CesaroFixedReport(cert.lam, m, delta, dev, min_norm, dev < delta and min_norm > 1.0 - delta)
