"""Cesàro means, the ergodic projection and flattening.

Run with ``python3 demos/04_ergodic_means.py``.
"""

# %% Averages of powers converge to a projection
import numpy as np

import slowvec as sv
from slowvec.scenario import peripheral_compactum

swap = sv.make_swap()
print("S_1 of the swap matrix:\n", sv.cesaro_mean(swap, 1.0, 1).matrix.real)

T = sv.make_split_operator([1.0, 1j], contraction_radius=0.8, interior_dim=5, conditioning=30.0, seed=7)
for lam in (1.0, 1j):
    proj = sv.ergodic_projection(T, lam)
    print(
        f"lambda = {lam}: rank P = {np.linalg.matrix_rank(proj.P, tol=1e-8)}, doubling stopped at m = {proj.m_used}, "
        f"agreement with the spectral projection {proj.discrepancy:.1e}"
    )

# %% How fast?  The error decays like C'/(m + 1)
P = sv.ergodic_projection(T, 1.0).P
rate = sv.cesaro_rate_constant(T, 1.0, P, sv.estimate_power_bound(T).c_hat)
for m in (4, 16, 64, 256):
    err = np.linalg.norm(sv.cesaro_mean(T, 1.0, m).matrix - P, 2)
    print(f"  m = {m:>3}: ||S_m - P|| = {err:.2e}   bound {rate / (m + 1):.2e}")

# %% Eigenspaces fit inside the span of a net of K
K = peripheral_compactum(T)
for lam in (1.0, 1j, -1.0):
    rep = sv.net_dimension_bound(T, K, alpha=0.6, lam=lam, net_samples=256)
    print(f"lambda = {lam}: dim ker(T - lambda) = {rep.dim_ker} <= dim span(net) = {rep.dim_net_span}")

# %% Flattening: late powers of T S_m look like P
D = sv.Operator(np.diag([0.9, 1.0]))
rep = sv.flattening_check(D, sv.Compactum(np.array([[0.0, 1.0]])), alpha=0.5, horizon=16)
print(f"diag(0.9, 1), tail n in [8, 16]: m = {rep.m} brings max ||T^n S_m - P|| to {rep.value:.4f} <= 1/3")
