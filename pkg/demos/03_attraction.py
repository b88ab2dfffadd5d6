"""Attracting compacta and the greedy decomposition.

Run with ``python3 demos/03_attraction.py``.
"""

# %% A compactum is the balanced convex hull of finitely many generators
import numpy as np

import slowvec as sv
from slowvec.scenario import peripheral_compactum

K = sv.Compactum(np.array([[0.0, 1.0]]))
dist, coeffs = sv.hull_distance([0.3, 0.8], K)
print(f"distance from (0.3, 0.8) to hull(e2): {dist:.6f}, nearest point {K.combine(coeffs).real}")

# %% Does every orbit come close to K?
# Along the orbit of diag(0.5, 1) the first coordinate halves at every step,
# so the distance to hull(e2) tends to zero.
T = sv.Operator(np.diag([0.5, 1.0]))
star = sv.check_star_condition(T, K, alpha=0.5, sample_count=16)
print(f"attraction check: pass fraction {star.pass_fraction:.2f} ({star.status})")

# A rotation never approaches a thin segment; only a horizon-limited
# failure can be reported, never a proof of non-attraction.
rot = sv.make_cyclic_shift(8)
star = sv.check_star_condition(rot, sv.Compactum(np.eye(8)[:1]), alpha=0.3, sample_count=4)
print(f"cyclic shift against hull(e1): pass fraction {star.pass_fraction:.2f} ({star.status})")

# %% Peeling an orbit apart
# Each greedy step waits until a power of the residual comes within
# alpha^i of alpha^(i-1) K, then subtracts the nearest hull point.
S = sv.make_split_operator([1.0, -1.0], contraction_radius=0.6, interior_dim=4, conditioning=4.0, seed=3)
K_S = peripheral_compactum(S)
x = sv.random_unit_vectors(S.dim, 1, seed=5)[0]
dec = sv.greedy_decompose(S, K_S, alpha=0.6, x=x, k=8)
for i, r in enumerate(dec.residual_norms):
    print(f"  step {i}: residual {r:.2e}  <=  0.6^{i} = {0.6**i:.2e}")
print(f"powers used n_i = {[s.n for s in dec.steps]}, total weight sum |t_i| = {sum(abs(t) for t in dec.t_values):.3f} <= 2.5")

# %% The hull of the first few images attracts the unit ball
K_hat = sv.build_attractor_hull(S, K_S, alpha=0.6, depth=4)
check = sv.verify_attraction(S, K_hat, epsilon=0.01, samples=8)
print(f"{len(K_hat.generators)} generators; every sample within 0.01: {check.all_success}; steps needed {[r['n'] for r in check.rows]}")
