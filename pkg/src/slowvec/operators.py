"""Power-bounded operators on finite-dimensional complex Euclidean space.

An :class:`Operator` is a square complex matrix together with an optional
certified bound ``C`` on all of its powers.  The factories in this module
build the operator families used throughout the package: cyclic and
truncated shifts, random operators with a prescribed peripheral spectrum,
and Markov (row-stochastic) matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    InvalidSpectrumError,
)

__all__ = [
    "Operator",
    "Trajectory",
    "PowerBoundEstimate",
    "make_cyclic_shift",
    "make_truncated_shift",
    "make_split_operator",
    "make_stochastic",
    "make_swap",
    "estimate_power_bound",
    "orbit",
    "orbit_norms",
    "operator_to_json",
    "operator_from_json",
]

DEFAULT_HORIZON = 512
GROWTH_TOL = 1.5
DECAY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Operator:
    """A square complex matrix standing in for ``T: X -> X``.

    Parameters
    ----------
    entries : (dim, dim) array_like
        Matrix of the operator.  Stored as a read-only complex array.
    power_bound : float, optional
        Certified or estimated ``C`` with ``sup_n ||T^n|| <= C``.
    meta : mapping, optional
        Auxiliary construction data (ground-truth bases, norm conversion
        factors).  Not part of equality.
    """

    entries: np.ndarray
    power_bound: float | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidDimensionError(f"operator must be a nonempty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidParameterError("operator entries must be finite")
        if self.power_bound is not None and not (self.power_bound >= 0):
            raise InvalidParameterError("power_bound must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, x):
        return self.entries @ x

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.power_bound == other.power_bound and np.array_equal(self.entries, other.entries)

    __hash__ = None

    def norm(self) -> float:
        """Euclidean operator norm."""
        return float(np.linalg.norm(self.entries, 2))

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(f"vector of length {x.shape[0]} for operator of dim {self.dim}")
        return x

    def validate_power_bound(self, horizon: int = DEFAULT_HORIZON, tol: float = 1e-9) -> bool:
        """Check ``max_{n <= horizon} ||T^n|| <= power_bound * (1 + tol)``."""
        if self.power_bound is None:
            return True
        est = estimate_power_bound(self, horizon)
        return est.c_hat <= self.power_bound * (1 + tol)


@dataclass(frozen=True)
class Trajectory:
    """The orbit ``x, Tx, ..., T^horizon x``; ``powers[n]`` is ``T^n x``."""

    start: np.ndarray
    powers: np.ndarray
    norms: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.norms) - 1


@dataclass(frozen=True)
class PowerBoundEstimate:
    c_hat: float
    verdict: str
    norms: np.ndarray
    overflow_step: int | None = None

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded-up-to-horizon"

    def __iter__(self):
        # allows ``c_hat, verdict = estimate_power_bound(...)``
        return iter((self.c_hat, self.verdict))


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise InvalidDimensionError(f"dim must be a positive integer, got {dim!r}")
    return int(dim)


def make_cyclic_shift(dim: int) -> Operator:
    """Permutation ``e_i -> e_{i+1 mod dim}``; unitary, so ``C = 1``."""
    dim = _check_dim(dim)
    a = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    a[(idx + 1) % dim, idx] = 1.0
    return Operator(a, power_bound=1.0, meta={"family": "cyclic_shift"})


def make_truncated_shift(dim: int, direction: str = "right") -> Operator:
    """Finite section of the right or left shift on ``l_2``.

    Both truncations are nilpotent of order ``dim``.  The right one is the
    section of an isometry and has near-eigenvectors for every unimodular
    ``lambda`` once ``dim`` is large; the left one has none.
    """
    dim = _check_dim(dim)
    a = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim - 1)
    if direction == "right":
        a[idx + 1, idx] = 1.0
    elif direction == "left":
        a[idx, idx + 1] = 1.0
    else:
        raise InvalidParameterError(f"direction must be 'left' or 'right', got {direction!r}")
    return Operator(a, power_bound=1.0, meta={"family": f"truncated_shift_{direction}"})


def make_swap() -> Operator:
    return Operator(np.array([[0.0, 1.0], [1.0, 0.0]]), power_bound=1.0, meta={"family": "swap"})


def _contraction_block(n, radius, rng):
    """Upper triangular block, spectral radius <= radius, norm <= (1 + radius) / 2."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    mods = radius * rng.random(n)
    phases = np.exp(2j * np.pi * rng.random(n))
    block = np.diag(mods * phases)
    if n > 1:
        upper = np.triu(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), k=1)
        scale = 0.5 * (1.0 - radius) / np.linalg.norm(upper, 2)
        block = block + scale * upper
    return block


def make_split_operator(
    peripheral: Sequence[complex],
    contraction_radius: float = 0.5,
    interior_dim: int = 0,
    conditioning: float = 1.0,
    seed: int = 0,
) -> Operator:
    """Random ``S D S^-1`` with ``D = diag(peripheral) (+) contraction``.

    The stable subspace ``X_0`` is ``S`` applied to the contraction block, so
    ``codim X_0 = len(peripheral)`` by construction.  The ground truth is
    kept in ``meta``: ``x0_basis`` (orthonormal columns spanning ``X_0``),
    ``peripheral``, ``interior_eigvals`` and the similarity ``S`` with its
    inverse.

    Parameters
    ----------
    peripheral : sequence of complex
        Unimodular eigenvalues (each ``|lambda| = 1`` within 1e-12).
    contraction_radius : float
        Upper bound in ``[0, 1)`` on the moduli of the interior eigenvalues.
    interior_dim : int
        Size of the decaying block.
    conditioning : float
        Condition number of ``S`` (``>= 1``); also the certified power bound.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    """
    peripheral = np.asarray(list(peripheral), dtype=complex)
    if np.any(np.abs(np.abs(peripheral) - 1.0) > 1e-12):
        raise InvalidSpectrumError(f"peripheral eigenvalues must be unimodular, got {peripheral}")
    if not 0.0 <= contraction_radius < 1.0:
        raise InvalidParameterError(f"contraction_radius must lie in [0, 1), got {contraction_radius}")
    if conditioning < 1.0:
        raise InvalidParameterError(f"conditioning must be >= 1, got {conditioning}")
    if interior_dim < 0:
        raise InvalidDimensionError("interior_dim must be nonnegative")
    p = len(peripheral)
    dim = _check_dim(p + interior_dim)

    rng = np.random.default_rng(seed)
    interior = _contraction_block(interior_dim, contraction_radius, rng)
    d = np.zeros((dim, dim), dtype=complex)
    d[:p, :p] = np.diag(peripheral)
    d[p:, p:] = interior

    if dim == 1 or conditioning == 1.0:
        sigma = np.ones(dim)
    else:
        t = np.concatenate([[0.0], np.sort(rng.random(dim - 2)), [1.0]])
        sigma = conditioning ** t[::-1]
    u = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1), dtype=complex)
    v = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1), dtype=complex)
    s = (u * sigma) @ v.conj().T
    s_inv = (v / sigma) @ u.conj().T
    a = s @ d @ s_inv
    if dim == 1:
        a = d.copy()

    x0_basis = np.linalg.qr(s[:, p:])[0] if interior_dim else np.zeros((dim, 0), dtype=complex)
    meta = {
        "family": "split",
        "x0_basis": x0_basis,
        "peripheral": peripheral,
        "interior_eigvals": np.diag(interior).copy(),
        "similarity": s,
        "similarity_inv": s_inv,
        "seed": seed,
    }
    return Operator(a, power_bound=float(sigma.max() / sigma.min()), meta=meta)


def make_stochastic(dim: int, seed: int = 0, doubly: bool = False) -> Operator:
    """Random positive row-stochastic (optionally doubly stochastic) matrix.

    Powers of a row-stochastic matrix have max-row-sum norm exactly 1, so the
    Euclidean power bound is certified as ``sqrt(dim)`` from
    ``||A||_2 <= sqrt(dim) ||A||_inf``.  The conversion factor is recorded in
    ``meta`` instead of being re-estimated.
    """
    dim = _check_dim(dim)
    rng = np.random.default_rng(seed)
    a = rng.random((dim, dim)) + 0.05
    if doubly:
        for _ in range(10_000):
            a /= a.sum(axis=0, keepdims=True)
            a /= a.sum(axis=1, keepdims=True)
            if np.max(np.abs(a.sum(axis=0) - 1.0)) < 1e-14:
                break
    else:
        a /= a.sum(axis=1, keepdims=True)
    factor = math.sqrt(dim)
    meta = {"family": "stochastic", "doubly": doubly, "sup_norm_power_bound": 1.0, "conversion_factor": factor}
    return Operator(a, power_bound=factor, meta=meta)


def estimate_power_bound(T: Operator, horizon: int = DEFAULT_HORIZON, growth_tol: float = GROWTH_TOL) -> PowerBoundEstimate:
    """Estimate ``C = max_{n <= horizon} ||T^n||``.

    The verdict is ``"suspect-unbounded"`` when the running maximum of
    ``||T^n||`` grows by more than ``growth_tol`` over the second half of the
    horizon, or when powering overflows.  Comparing maxima rather than the
    two endpoint norms keeps bounded operators whose norms oscillate (several
    peripheral eigenvalues under a non-unitary similarity) from being
    flagged when ``n = horizon // 2`` happens to sit in a trough.
    """
    if horizon < 1:
        raise InvalidParameterError("horizon must be >= 1")
    a = T.entries
    p = np.eye(T.dim, dtype=complex)
    norms = np.empty(horizon + 1)
    norms[0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, horizon + 1):
            p = a @ p
            nrm = np.linalg.norm(p, 2) if np.all(np.isfinite(p)) else np.inf
            if not np.isfinite(nrm):
                return PowerBoundEstimate(np.inf, "suspect-unbounded", norms[:n], overflow_step=n)
            norms[n] = nrm
    c_hat = float(norms.max())
    half = float(norms[: horizon // 2 + 1].max())
    grows = c_hat > growth_tol * half
    verdict = "suspect-unbounded" if grows else "bounded-up-to-horizon"
    return PowerBoundEstimate(c_hat, verdict, norms)


def orbit(T: Operator, x, horizon: int) -> Trajectory:
    """Iterate ``x -> Tx`` ``horizon`` times (matrix-vector products only)."""
    x = T.check_vector(x)
    if horizon < 0:
        raise InvalidParameterError("horizon must be nonnegative")
    out = np.empty((horizon + 1,) + x.shape, dtype=complex)
    out[0] = x
    a = T.entries
    for n in range(horizon):
        out[n + 1] = a @ out[n]
    norms = np.linalg.norm(out.reshape(horizon + 1, T.dim, -1), axis=1)
    if x.ndim == 1:
        norms = norms[:, 0]
    out.setflags(write=False)
    return Trajectory(start=x, powers=out, norms=norms)


def orbit_norms(a: np.ndarray, x: np.ndarray, horizon: int, block: int = 32) -> np.ndarray:
    """Norms ``||T^n x||`` for ``n = 0..horizon``; ``x`` may hold columns.

    The orbit advances ``block`` steps at a time through one product with
    the stacked powers ``T^1..T^block``.
    """
    squeeze = x.ndim == 1
    v = x.reshape(x.shape[0], -1).astype(complex)
    d = a.shape[0]
    out = np.empty((horizon + 1, v.shape[1]))
    out[0] = np.linalg.norm(v, axis=0)
    block = max(1, min(block, horizon))
    stack = np.empty((block, d, d), dtype=complex)
    stack[0] = a
    for j in range(1, block):
        stack[j] = a @ stack[j - 1]
    flat = stack.reshape(block * d, d)
    n = 0
    while n < horizon:
        step = min(block, horizon - n)
        chunk = (flat[: step * d] @ v).reshape(step, d, -1)
        out[n + 1 : n + step + 1] = np.sqrt(np.einsum("sij,sij->sj", chunk.real, chunk.real) + np.einsum("sij,sij->sj", chunk.imag, chunk.imag))
        v = chunk[-1]
        n += step
    return out[:, 0] if squeeze else out


def operator_to_json(T: Operator) -> dict:
    return {
        "dim": T.dim,
        "re": T.entries.real.ravel().tolist(),
        "im": T.entries.imag.ravel().tolist(),
        "power_bound": T.power_bound,
    }


def operator_from_json(obj: Mapping[str, Any]) -> Operator:
    """Inverse of :func:`operator_to_json`.

    ``re`` and ``im`` may be flat row-major lists (with ``dim``) or nested
    row lists, in which case ``dim`` is optional.
    """
    re = np.asarray(obj["re"], dtype=float)
    dim = _check_dim(obj["dim"] if "dim" in obj else re.shape[0])
    re = re.reshape(dim, dim)
    im = np.asarray(obj.get("im", np.zeros(dim * dim)), dtype=float).reshape(dim, dim)
    pb = obj.get("power_bound")
    return Operator(re + 1j * im, power_bound=None if pb is None else float(pb))
