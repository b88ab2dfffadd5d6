"""Renorming and the quotient by the stable subspace.

``sup_norm(x) = max_{n <= H} ||T^n x||`` is an equivalent norm in which T is
(up to the horizon) a contraction.  ``p_seminorm(x)`` is the limit of
``sup_norm(T^n x)``; it vanishes exactly on ``X_0`` and T is an isometry for
it.  :func:`compute_stable_split` finds ``X_0`` through an ordered Schur form
and exposes the quotient operator ``[T]`` on ``X / X_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.ndimage import maximum_filter1d

from ._jsonutil import complex_array
from .errors import AmbiguousSplitError, NotPowerBoundedError, InvalidParameterError
from .operators import DEFAULT_HORIZON, Operator, estimate_power_bound, orbit_norms

__all__ = [
    "NormContext",
    "StableSplit",
    "IsometryReport",
    "build_norm_context",
    "compute_stable_split",
    "quotient_p_isometry_check",
    "cluster_eigenvalues",
]

PERIPHERAL_TOL = 1e-6
P_GAP_TOL = 1e-9
P_HORIZON_CAP = 2**15


def windowed_max(norms: np.ndarray, width: int) -> np.ndarray:
    """``out[j] = max(norms[j : j + width])`` along axis 0 (valid part only)."""
    count = norms.shape[0] - width + 1
    return maximum_filter1d(norms, width, axis=0, origin=0)[width // 2 : width // 2 + count]


@dataclass(frozen=True)
class NormContext:
    """Evaluators for the sup-renorm and the p-seminorm of one operator.

    ``cauchy_gaps`` holds ``sup_norm(T^(hp/2) x) - sup_norm(T^hp x)`` for a
    few seeded samples, a diagnostic for how far the p-seminorm estimate is
    from its limit.
    """

    operator: Operator
    horizon_sup: int = DEFAULT_HORIZON
    horizon_p: int = DEFAULT_HORIZON
    c_hat: float = 1.0
    p_gap_tol: float = P_GAP_TOL
    p_horizon_cap: int = P_HORIZON_CAP
    cauchy_gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def sup_norms_along(self, x, count: int) -> np.ndarray:
        """``sup_norm(T^n x)`` for ``n = 0..count``; columns of ``x`` are independent."""
        x = self.operator.check_vector(x)
        norms = orbit_norms(self.operator.entries, x, count + self.horizon_sup)
        return windowed_max(norms, self.horizon_sup + 1)

    def sup_norm(self, x) -> float:
        return float(self.sup_norms_along(x, 0)[0])

    def p_interval(self, x):
        """Return ``(estimate, cauchy_gap, horizon_used)`` for the p-seminorm of ``x``.

        The estimate ``sup_norm(T^hp x)`` is an upper bound for the limit.
        ``hp`` starts at ``horizon_p`` and doubles until the gap falls below
        ``p_gap_tol`` (relative to ``sup_norm(x)``) or the cap is reached.
        """
        x = self.operator.check_vector(x)
        hp = self.horizon_p
        while True:
            w = self.sup_norms_along(x, hp)
            scale = max(w[0], np.finfo(float).tiny)
            gap = float(w[hp // 2] - w[hp])
            if gap <= self.p_gap_tol * scale or 2 * hp > self.p_horizon_cap:
                return float(w[hp]), gap, hp
            hp *= 2

    def p_seminorm(self, x) -> float:
        return self.p_interval(x)[0]

    def p_norms_along(self, x, count: int, horizon_p: int | None = None) -> np.ndarray:
        """p-seminorm estimates of ``T^n x`` for ``n = 0..count`` at a fixed ``horizon_p``."""
        hp = self.horizon_p if horizon_p is None else horizon_p
        w = self.sup_norms_along(x, count + hp)
        return w[hp : hp + count + 1]

    def norm(self, x, kind: str) -> float:
        if kind == "original":
            return float(np.linalg.norm(x))
        if kind == "sup":
            return self.sup_norm(x)
        if kind == "quotient-p":
            return self.p_seminorm(x)
        raise InvalidParameterError(f"unknown norm kind {kind!r}")

    def cauchy_gap(self, x) -> float:
        return self.p_interval(x)[1]


def build_norm_context(
    T: Operator,
    horizon_sup: int = DEFAULT_HORIZON,
    horizon_p: int = DEFAULT_HORIZON,
    samples: int = 8,
    seed: int = 0,
) -> NormContext:
    """Build sup/p evaluators after checking that T looks power-bounded.

    Raises
    ------
    NotPowerBoundedError
        If :func:`estimate_power_bound` flags the operator.
    """
    est = estimate_power_bound(T, horizon_sup)
    if not est.bounded:
        raise NotPowerBoundedError(
            f"operator is suspect-unbounded (C_hat={est.c_hat:.4g}, overflow_step={est.overflow_step})"
        )
    ctx = NormContext(T, horizon_sup=horizon_sup, horizon_p=horizon_p, c_hat=est.c_hat)
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(samples):
        x = rng.standard_normal(T.dim) + 1j * rng.standard_normal(T.dim)
        w = ctx.sup_norms_along(x / np.linalg.norm(x), horizon_p)
        gaps.append(w[horizon_p // 2] - w[horizon_p])
    object.__setattr__(ctx, "cauchy_gaps", np.array(gaps))
    return ctx


def cluster_eigenvalues(eigvals, tol: float = 1e-6):
    """Group nearby eigenvalues; returns ``[(center, multiplicity), ...]``.

    Clusters are ordered by argument in ``[0, 2 pi)``, then modulus.
    """
    eigvals = np.asarray(eigvals, dtype=complex)
    remaining = list(range(len(eigvals)))
    clusters = []
    while remaining:
        i = remaining.pop(0)
        members = [i] + [j for j in remaining if abs(eigvals[j] - eigvals[i]) <= tol]
        remaining = [j for j in remaining if j not in members]
        clusters.append((complex(np.mean(eigvals[members])), len(members)))
    clusters.sort(key=lambda c: (principal_angle(c[0]), -abs(c[0])))
    return clusters


def principal_angle(z, tol: float = 1e-9) -> float:
    """Argument of ``z`` in ``[0, 2 pi)``, with values within ``tol`` of ``2 pi`` snapped to 0."""
    t = float(np.angle(z)) % (2 * np.pi)
    return 0.0 if t > 2 * np.pi - tol else round(t, 12)


@dataclass(frozen=True)
class StableSplit:
    """``X = X_0 (+) L'`` with ``L'`` the orthogonal complement of ``X_0``.

    Quotient coordinates of ``x`` are ``complement_basis^H x``, the
    minimal-norm representative of ``x + X_0``.  ``quotient_operator`` is
    ``[T]`` in those coordinates.
    """

    operator: Operator
    x0_basis: np.ndarray
    complement_basis: np.ndarray
    codim: int
    quotient_operator: Operator | None
    peripheral_eigvals: np.ndarray
    peripheral_tol: float = PERIPHERAL_TOL

    def quotient(self, x) -> np.ndarray:
        return self.complement_basis.conj().T @ np.asarray(x, dtype=complex)

    def lift(self, y) -> np.ndarray:
        return self.complement_basis @ np.asarray(y, dtype=complex)

    def distance_to_x0(self, x) -> float:
        return float(np.linalg.norm(self.quotient(x)))

    def peripheral_clusters(self, tol: float = 1e-6):
        return cluster_eigenvalues(self.peripheral_eigvals, tol)

    def to_dict(self) -> dict:
        return {
            "dim": self.operator.dim,
            "codim": self.codim,
            "x0_basis": [complex_array(b) for b in self.x0_basis.T],
            "complement_basis": [complex_array(b) for b in self.complement_basis.T],
            "peripheral_eigvals": complex_array(self.peripheral_eigvals),
        }


def compute_stable_split(
    T: Operator,
    peripheral_tol: float = PERIPHERAL_TOL,
    semisimple_tol: float = 1e-8,
    cluster_tol: float = 1e-6,
) -> StableSplit:
    """Split off the stable subspace ``X_0`` via an ordered complex Schur form.

    Eigenvalues of modulus below ``1 - 2 * peripheral_tol`` are interior and
    span ``X_0``; moduli at or above ``1 - peripheral_tol`` are peripheral.
    Anything in between is refused rather than guessed.

    Raises
    ------
    NotPowerBoundedError
        An eigenvalue lies outside the closed unit disc, or a peripheral
        eigenvalue is defective (a nontrivial Jordan block on the circle
        forces polynomial growth of the powers).
    AmbiguousSplitError
        Some eigenvalue modulus falls in the ambiguity band below the cut.
    """
    a = T.entries
    cut = 1.0 - peripheral_tol
    eig = np.linalg.eigvals(a)
    mods = np.abs(eig)
    if np.any(mods > 1.0 + peripheral_tol):
        raise NotPowerBoundedError(f"spectral radius {mods.max():.12g} exceeds 1")
    band = (mods < cut) & (mods >= 1.0 - 2 * peripheral_tol)
    if np.any(band):
        gap = float(np.min(np.abs(mods[band] - cut)))
        raise AmbiguousSplitError(
            f"eigenvalue modulus {mods[band].max():.12g} lies within {peripheral_tol:g} of the cut {cut:.12g}", gap
        )
    r, z, sdim = schur(a, output="complex", sort=lambda lam: abs(lam) < cut)
    x0 = z[:, :sdim]
    comp = z[:, sdim:]
    r22 = r[sdim:, sdim:]
    peripheral = np.diag(r22).copy()
    if r22.size:
        _check_semisimple(r22, semisimple_tol, cluster_tol)
        quotient = Operator(r22, power_bound=T.power_bound, meta={"family": "quotient"})
    else:
        quotient = None
    return StableSplit(
        operator=T,
        x0_basis=x0,
        complement_basis=comp,
        codim=z.shape[0] - sdim,
        quotient_operator=quotient,
        peripheral_eigvals=peripheral,
        peripheral_tol=peripheral_tol,
    )


def _check_semisimple(r22, tol, cluster_tol):
    scale = max(1.0, np.linalg.norm(r22, 2))
    eye = np.eye(r22.shape[0])
    for center, mult in cluster_eigenvalues(np.diag(r22), cluster_tol):
        sv = np.linalg.svd(r22 - center * eye, compute_uv=False)
        nullity = int(np.sum(sv <= tol * scale))
        if nullity < mult:
            raise NotPowerBoundedError(
                f"peripheral eigenvalue {center:.6g} has algebraic multiplicity {mult} "
                f"but geometric multiplicity {nullity}; powers cannot stay bounded"
            )


@dataclass(frozen=True)
class IsometryReport:
    max_deviation: float
    deviations: np.ndarray
    samples: int


def quotient_p_isometry_check(split: StableSplit, ctx: NormContext, samples: int = 16, seed: int = 0) -> IsometryReport:
    """Measure ``|p([T][x]) - p([x])|`` over seeded random quotient vectors."""
    if split.codim == 0:
        return IsometryReport(0.0, np.zeros(0), 0)
    rng = np.random.default_rng(seed)
    q = split.quotient_operator.entries
    devs = np.empty(samples)
    for s in range(samples):
        y = rng.standard_normal(split.codim) + 1j * rng.standard_normal(split.codim)
        y /= np.linalg.norm(y)
        devs[s] = abs(ctx.p_seminorm(split.lift(q @ y)) - ctx.p_seminorm(split.lift(y)))
    return IsometryReport(float(devs.max()), devs, samples)
