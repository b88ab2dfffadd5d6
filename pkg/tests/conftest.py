import numpy as np
import pytest

from slowvec import Operator, make_split_operator


def gapped_peripheral(rng, count, slots=12):
    """``count`` distinct unimodular eigenvalues on a grid of ``slots`` angles (gap >= 2 pi / slots)."""
    picks = sorted(rng.choice(slots, size=count, replace=False))
    return [complex(np.exp(2j * np.pi * k / slots)) for k in picks]


def random_split(seed, max_peripheral=3, max_interior=6, conditioning=10.0, radius=0.8, with_one=False):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, max_peripheral + 1))
    per = gapped_peripheral(rng, p)
    if with_one and not any(abs(z - 1) < 1e-12 for z in per):
        per[0] = 1.0 + 0j
    return make_split_operator(per, radius, int(rng.integers(1, max_interior + 1)), conditioning, seed)


def diag(*entries):
    return Operator(np.diag(np.asarray(entries, dtype=complex)))


def unit(dim, index):
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _simplex_grid(count, step):
    """Magnitude vectors on a lattice of spacing ``step`` with sum <= 1."""
    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    mesh = np.stack(np.meshgrid(*([ticks] * count), indexing="ij"), -1).reshape(-1, count)
    return mesh[mesh.sum(axis=1) <= 1.0 + 1e-12]


def _grid_values(x, gens, mags, phases):
    coeffs = mags * np.exp(1j * phases)
    return np.linalg.norm(x[None, :] - coeffs @ gens, axis=1)


def grid_hull_distance(x, gens, step=1e-2, coarse=0.1, phase_slots=12, starts=6):
    """Brute-force reference for the distance to the balanced hull of ``gens`` (rows).

    Coefficients are searched in polar form.  An exhaustive coarse lattice
    (magnitudes at ``coarse``, ``phase_slots`` phases) seeds a lattice
    descent.  The descent visits every neighbour on the ``{-1, 0, 1}`` stencil
    at spacings decreasing to ``step``, for magnitudes and phases alike.
    Every visited point is feasible, so the result is an upper bound.
    """
    x = np.asarray(x, dtype=complex)
    gens = np.atleast_2d(np.asarray(gens, dtype=complex))
    count = gens.shape[0]
    mags = _simplex_grid(count, coarse)
    angle_ticks = 2 * np.pi * np.arange(phase_slots) / phase_slots
    phases = np.stack(np.meshgrid(*([angle_ticks] * count), indexing="ij"), -1).reshape(-1, count)
    mi, pi = np.meshgrid(np.arange(len(mags)), np.arange(len(phases)), indexing="ij")
    mi, pi = mi.ravel(), pi.ravel()
    vals = _grid_values(x, gens, mags[mi], phases[pi])
    order = np.argsort(vals)[:starts]
    stencil = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * (2 * count)), indexing="ij"), -1).reshape(-1, 2 * count)
    best = float(vals[order[0]])
    for idx in order:
        r, phi = mags[mi[idx]].copy(), phases[pi[idx]].copy()
        current = float(vals[idx])
        for spacing in (0.05, 0.02, step):
            while True:
                cand_r = np.clip(r[None, :] + spacing * stencil[:, :count], 0.0, None)
                cand_p = phi[None, :] + spacing * stencil[:, count:]
                feasible = cand_r.sum(axis=1) <= 1.0 + 1e-12
                cand_v = np.where(feasible, _grid_values(x, gens, cand_r, cand_p), np.inf)
                j = int(np.argmin(cand_v))
                if cand_v[j] >= current - 1e-15:
                    break
                r, phi, current = cand_r[j], cand_p[j], float(cand_v[j])
        best = min(best, current)
    return best


ACCEPTANCE_LINES = []


def report_criterion(number, title, passed, detail):
    """Record and print the one-line verdict of an acceptance criterion."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
