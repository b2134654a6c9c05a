"""Wasserstein-1 and bounded-Lipschitz distances on the unit circle.

Measures are either atoms ``(positions, masses)`` or grid functions, read as
atoms of mass ``rho_j h`` at the cell centers.

* W1 uses the circle formula  min_c  int |F_a - F_b - c| dx,  whose minimizer is
  a length-weighted median of the CDF difference.
* d_BL is the value of the LP  max sum_i mu_i psi_i  subject to |psi_i| <= 1 and
  |psi_i - psi_{i+1}| <= gap_i around the ring.  Neighbour constraints suffice
  because the circle distance between two points is the length of the shorter
  arc, a sum of consecutive gaps.

The ``*_oracle`` functions solve the same problems by unrelated routes (a full
transport LP, brute-force matching, an all-pairs Lipschitz LP) and exist for
testing and the ``oracle`` CLI verb.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix

from ..core import Grid1D, disp
from ..errors import MassMismatch

MASS_TOL = 1e-9


def _check_equal_mass(ma: float, mb: float) -> None:
    if abs(ma - mb) > MASS_TOL * max(1.0, abs(ma), abs(mb)):
        raise MassMismatch(f"masses differ: {ma!r} vs {mb!r}")


def _merge(xa, wa, xb, wb):
    """Union of support points in [0,1) with net signed mass a - b."""
    x = np.concatenate([np.asarray(xa, float), np.asarray(xb, float)]) % 1.0
    m = np.concatenate([np.asarray(wa, float), -np.asarray(wb, float)])
    order = np.argsort(x, kind="stable")
    return x[order], m[order]


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cw = np.cumsum(w)
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(v[min(k, len(v) - 1)])


def w1_atoms(xa, wa, xb, wb) -> float:
    """W1 between two atomic measures of equal mass on the circle."""
    _check_equal_mass(float(np.sum(wa)), float(np.sum(wb)))
    x, m = _merge(xa, wa, xb, wb)
    cdf = np.cumsum(m)
    gaps = np.diff(np.concatenate([x, [x[0] + 1.0]]))
    c = _weighted_median(cdf, gaps)
    return float(np.sum(np.abs(cdf - c) * gaps))


def w1_distance(rho1, rho2, grid: Grid1D) -> float:
    """W1 between two grid densities (atoms at cell centers)."""
    rho1 = np.asarray(rho1, float)
    rho2 = np.asarray(rho2, float)
    _check_equal_mass(grid.integrate(rho1), grid.integrate(rho2))
    cdf = np.cumsum((rho1 - rho2) * grid.h)
    c = float(np.median(cdf))
    return float(np.sum(np.abs(cdf - c)) * grid.h)


def _ring_lp(mass: np.ndarray, gaps: np.ndarray) -> float:
    """max mass . psi  s.t. |psi| <= 1, |psi_i - psi_{i+1 mod n}| <= gaps_i."""
    n = len(mass)
    if n == 1:
        return float(abs(mass[0]))
    if not np.any(mass):
        return 0.0
    i = np.arange(n)
    j = (i + 1) % n
    if n == 2:
        # both arcs join the same pair; keep the shorter one
        i, j, gaps = i[:1], j[:1], np.array([min(gaps)])
    k = len(i)
    rows = np.concatenate([np.arange(k), np.arange(k), k + np.arange(k), k + np.arange(k)])
    cols = np.concatenate([i, j, i, j])
    vals = np.concatenate([np.ones(k), -np.ones(k), -np.ones(k), np.ones(k)])
    a_ub = coo_matrix((vals, (rows, cols)), shape=(2 * k, n)).tocsr()
    b_ub = np.concatenate([gaps, gaps])
    res = linprog(-mass, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"d_BL linear program failed: {res.message}")
    return float(-res.fun)


def dbl_atoms(xa, wa, xb, wb, require_equal_mass: bool = True) -> float:
    """Bounded-Lipschitz distance between two atomic measures on the circle."""
    if require_equal_mass:
        _check_equal_mass(float(np.sum(wa)), float(np.sum(wb)))
    x, m = _merge(xa, wa, xb, wb)
    # coincident points merge into one LP variable
    keep = np.concatenate([[True], np.diff(x) > 0])
    ids = np.cumsum(keep) - 1
    xu = x[keep]
    mu = np.bincount(ids, m)
    gaps = np.diff(np.concatenate([xu, [xu[0] + 1.0]]))
    return _ring_lp(mu, gaps)


def dbl_signed(mu, grid: Grid1D) -> float:
    """Dual bounded-Lipschitz norm of a signed grid density (any net mass)."""
    return _ring_lp(np.asarray(mu, float) * grid.h, np.full(grid.n_cells, grid.h))


def dbl_distance(rho1, rho2, grid: Grid1D, require_equal_mass: bool = True) -> float:
    """d_BL between grid densities; test functions have sup norm and Lipschitz constant <= 1."""
    rho1 = np.asarray(rho1, float)
    rho2 = np.asarray(rho2, float)
    if require_equal_mass:
        _check_equal_mass(grid.integrate(rho1), grid.integrate(rho2))
    return dbl_signed(rho1 - rho2, grid)


def circle_distance(x, y):
    return np.abs(disp(x, y))


# ---------------------------------------------------------------------------
# oracles


def w1_transport_lp_oracle(xa, wa, xb, wb) -> float:
    """W1 from the full transport LP with circle cost |x - y|."""
    xa, wa, xb, wb = (np.asarray(a, float) for a in (xa, wa, xb, wb))
    _check_equal_mass(wa.sum(), wb.sum())
    na, nb = len(xa), len(xb)
    cost = circle_distance(xa[:, None], xb[None, :]).ravel()
    rows = []
    for i in range(na):
        r = np.zeros((na, nb))
        r[i, :] = 1
        rows.append(r.ravel())
    for j in range(nb):
        r = np.zeros((na, nb))
        r[:, j] = 1
        rows.append(r.ravel())
    b = np.concatenate([wa, wb * wa.sum() / wb.sum()])
    res = linprog(cost, A_eq=np.array(rows), b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(res.fun)


def w1_matching_oracle(xa, xb) -> float:
    """W1 between uniform empirical measures of equal size by exhaustive matching.

    Brute force over permutations for n <= 8, otherwise the Hungarian method.
    """
    xa, xb = np.asarray(xa, float), np.asarray(xb, float)
    n = len(xa)
    if len(xb) != n:
        raise MassMismatch("matching oracle needs equal atom counts")
    cost = circle_distance(xa[:, None], xb[None, :])
    if n <= 8:
        best = min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
        return float(best) / n
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum()) / n


def split_equal_mass(x, counts):
    """Split atoms with integer multiplicities into unit atoms."""
    return np.repeat(np.asarray(x, float), np.asarray(counts, int))


def dbl_allpairs_oracle(xa, wa, xb, wb) -> float:
    """d_BL LP with a Lipschitz constraint between every pair of support points."""
    x = np.concatenate([np.asarray(xa, float), np.asarray(xb, float)]) % 1.0
    m = np.concatenate([np.asarray(wa, float), -np.asarray(wb, float)])
    n = len(x)
    rows, b = [], []
    for i in range(n):
        for j in range(i + 1, n):
            d = float(circle_distance(x[i], x[j]))
            r = np.zeros(n)
            r[i], r[j] = 1.0, -1.0
            rows.append(r)
            rows.append(-r)
            b += [d, d]
    res = linprog(-m, A_ub=np.array(rows), b_ub=np.array(b), bounds=(-1.0, 1.0),
                  method="highs-ds")
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(-res.fun)
