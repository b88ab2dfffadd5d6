"""Slow vectors: almost-eigenvectors whose orbits refuse to shrink.

Run with ``python3 demos/02_slow_vectors.py``.
"""

# %% Setup
import numpy as np

import slowvec as sv

T = sv.make_split_operator([np.exp(1j * np.pi / 4)], contraction_radius=0.6, interior_dim=3, conditioning=10.0, seed=11)
ctx = sv.build_norm_context(T)
split = sv.compute_stable_split(T)

# %% A small residual is not enough on its own
# The left shift is nilpotent, yet a ramp vector is a decent almost-fixed
# vector.  Its orbit still dies after eight steps, so certification fails.
shift = sv.make_truncated_shift(8, "left")
ramp = np.arange(1.0, 9.0)
ramp /= np.linalg.norm(ramp)
print(f"ramp residual ||Tx - x|| = {np.linalg.norm(shift @ ramp - ramp):.3f}")
try:
    sv.certify_slow(shift, ramp, 1.0, 0.9, horizon=10)
except sv.SlowRefusal as refusal:
    print(f"refused: {refusal} (reason: {refusal.reason})")

# %% Synthesizing a certified slow vector
# synthesize_slow works in the sup-renormed norm, where the peripheral part
# acts isometrically, and searches k = 0, 1, ... until the certificate holds.
cert = sv.synthesize_slow(T, 0.01, ctx, split)
print(f"lambda = {cert.lam:.4f}, k = {cert.k}, residual {cert.eigen_residual:.2e}, min orbit norm {cert.min_orbit_norm:.6f}")
print("independent re-verification:", sv.reverify_certificate(T, cert, ctx))

# %% Operators without a peripheral part have none
nilpotent = sv.make_split_operator([], contraction_radius=0.5, interior_dim=10, conditioning=5.0, seed=1)
try:
    sv.synthesize_slow(nilpotent, 0.01, sv.build_norm_context(nilpotent), sv.compute_stable_split(nilpotent))
except sv.NoSlowVectorsError as exc:
    print("nilpotent-plus-contraction:", exc)

# %% A whole subspace of them at a repeated eigenvalue
double = sv.make_split_operator([1.0, 1.0, -1.0], contraction_radius=0.5, interior_dim=4, conditioning=5.0, seed=2)
sub = sv.slow_subspace(double, 1.0, 0.01, 2, sv.build_norm_context(double), sv.compute_stable_split(double), sphere_samples=16)
print(f"slow subspace at lambda = 1: dimension {sub.dim}, {len(sub.certificates)} sphere samples certified at k0 = {sub.k0}")
