"""Where do orbits go to die?  Splitting off the stable subspace.

Run with ``python3 demos/01_stable_subspace.py``.
"""

# %% A power-bounded operator with a known answer
# make_split_operator builds S D S^-1 where D holds two unimodular
# eigenvalues and a five-dimensional decaying block.  The similarity S has
# condition number 20, so powers can grow transiently before settling.
import numpy as np
from scipy.linalg import subspace_angles

import slowvec as sv

T = sv.make_split_operator([1.0, np.exp(2j * np.pi / 3)], contraction_radius=0.7, interior_dim=5, conditioning=20.0, seed=4)
print(f"dimension {T.dim}, constructed power bound {T.power_bound:.2f}")

# %% How large do the powers get?
est = sv.estimate_power_bound(T)
print(f"max ||T^n|| over n <= 512: {est.c_hat:.3f}  ({est.verdict})")

# %% The stable subspace X0 = {x : T^n x -> 0}
# The ordered Schur form separates the decaying block from the peripheral
# one.  Its codimension is the number of unimodular eigenvalues.
split = sv.compute_stable_split(T)
truth = T.meta["x0_basis"]
print(f"codim X0 = {split.codim}; principal angle to the constructed X0: {np.max(subspace_angles(truth, split.x0_basis)):.1e}")

# %% Orbits of stable vectors decay, the rest do not
x_stable = split.x0_basis[:, 0]
x_generic = sv.random_unit_vectors(T.dim, 1, seed=0)[0]
for label, x in (("stable", x_stable), ("generic", x_generic)):
    norms = sv.orbit(T, x, 200).norms
    print(f"{label:>8}: ||T^n x|| at n = 0, 50, 200 -> {norms[0]:.3f}, {norms[50]:.2e}, {norms[200]:.2e}")

# %% On the quotient the operator is an isometry for the limit seminorm
ctx = sv.build_norm_context(T)
iso = sv.quotient_p_isometry_check(split, ctx)
print(f"max | p(Tx) - p(x) | on sampled quotient vectors: {iso.max_deviation:.1e}")
