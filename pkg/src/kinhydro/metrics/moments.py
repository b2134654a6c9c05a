"""Both sides of the moment error inequalities, evaluated on the grid.

Each check is returned as a ``GapRow(name, lhs, rhs, satisfied)``.  The
unnamed constants of the continuous statements are made explicit for the
discrete setting, where d_BL is the ring LP of :mod:`.transport`:

* C_u  = ||u||_inf + Lip_h(u)        bounds the BL norm of psi u
* C_uu = ||u||_inf^2 + 2 ||u||_inf Lip_h(u)   bounds the BL norm of psi u^2

Lip_h is the largest neighbour difference quotient of the grid values, which
is the Lipschitz constant of their piecewise-linear interpolant.  With these
constants every grid inequality below holds exactly, so a violation signals a
bug rather than discretization error.

The monokinetic check compares f_N (the particles) with the grid-atomic
measure sum_j rho_j h delta_(x_j, u_j).  Its left side is replaced by the
cost of an explicit coupling, an upper bound for d_BL; on the right side the
distance between the densities is replaced by the position cost of the same
coupling.  The resulting inequality is exact, by the triangle inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Grid1D, disp
from ..fields import interpolate
from .entropy import est_l1_check
from .transport import dbl_signed

TOL_ABS = 1e-12
TOL_REL = 1e-9

CHECK_NAMES = ("l1_momentum", "bl_momentum", "l1_convection", "bl_convection",
               "monokinetic", "est_l1")


@dataclass(frozen=True)
class GapRow:
    name: str
    lhs: float
    rhs: float
    satisfied: bool


def _row(name: str, lhs: float, rhs: float) -> GapRow:
    return GapRow(name, float(lhs), float(rhs), bool(lhs <= rhs + TOL_ABS + TOL_REL * abs(rhs)))


def grid_lipschitz(values, grid: Grid1D) -> float:
    return float(np.max(np.abs(np.roll(values, -1) - values))) / grid.h


def monokinetic_coupling(positions, velocities, rho, u, grid: Grid1D):
    """Cost of a cyclic monotone coupling between particles and grid atoms.

    Particles are sorted on the circle and laid out on the quantile axis;
    atom j takes the quantile interval of its cumulative mass, rotated by the
    median offset of the two distribution functions.  Returns
    (total cost in (x, v), position cost).
    """
    order = np.argsort(positions, kind="stable")
    xp = positions[order]
    vp = velocities[order]
    n = len(xp)
    mass = np.clip(rho, 0.0, None) * grid.h
    mass = mass / mass.sum()
    cdf_atoms = np.concatenate([[0.0], np.cumsum(mass)])
    cdf_atoms[-1] = 1.0
    # offset: median of F_particles - F_atoms at the atom locations
    f_part = np.searchsorted(xp, grid.x, side="right") / n
    shift = float(np.median(f_part - cdf_atoms[1:]))
    breaks = np.concatenate([np.arange(n + 1) / n, (cdf_atoms + shift) % 1.0, [0.0, 1.0]])
    breaks = np.unique(np.clip(breaks, 0.0, 1.0))
    lengths = np.diff(breaks)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    keep = lengths > 0
    lengths, mids = lengths[keep], mids[keep]
    k = np.minimum((mids * n).astype(np.int64), n - 1)
    j = np.searchsorted(cdf_atoms, (mids - shift) % 1.0, side="right") - 1
    j = np.clip(j, 0, grid.n_cells - 1)
    dx = np.abs(disp(xp[k], grid.x[j]))
    dv = vp[k] - u[j]
    return float(np.sum(lengths * np.hypot(dx, dv))), float(np.sum(lengths * dx))


def moment_gap_checks(rho_eps, u_eps, rho, u, grid: Grid1D, ensemble=None,
                      with_entropy: bool = False) -> list[GapRow]:
    """Evaluate (lhs, rhs) for the momentum, convection and monokinetic bounds.

    ``ensemble`` enables the monokinetic row; ``with_entropy`` adds the
    est_l1 row (needs rho > 0).
    """
    rho_eps, u_eps, rho, u = (np.asarray(a, float) for a in (rho_eps, u_eps, rho, u))
    du = u_eps - u
    mass_eps = grid.integrate(np.abs(rho_eps))
    k_int = grid.integrate(rho_eps * du**2)
    root = math.sqrt(mass_eps * k_int)
    u_max = float(np.max(np.abs(u)))
    lip = grid_lipschitz(u, grid)
    c_u = u_max + lip
    c_uu = u_max**2 + 2.0 * u_max * lip
    l1_rho = grid.integrate(np.abs(rho_eps - rho))
    dbl_rho = dbl_signed(rho_eps - rho, grid)

    m_eps, m = rho_eps * u_eps, rho * u
    q_eps, q = rho_eps * u_eps**2, rho * u**2
    rows = [
        _row("l1_momentum", grid.integrate(np.abs(m_eps - m)), root + u_max * l1_rho),
        _row("bl_momentum", dbl_signed(m_eps - m, grid), root + c_u * dbl_rho),
        _row("l1_convection", grid.integrate(np.abs(q_eps - q)),
             k_int + 2.0 * u_max * root + 3.0 * u_max**2 * l1_rho),
        _row("bl_convection", dbl_signed(q_eps - q, grid),
             k_int + 2.0 * c_u * root + (2.0 * c_u**2 + c_uu) * dbl_rho),
    ]
    if ensemble is not None:
        x, v = ensemble.positions, ensemble.velocities
        ue_p = interpolate(u_eps, x, grid)
        u_p = interpolate(u, x, grid)
        spread = math.sqrt(float(np.mean((v - ue_p) ** 2)))
        mismatch = math.sqrt(float(np.mean((ue_p - u_p) ** 2)))
        cost, pos_cost = monokinetic_coupling(x, v, rho, u, grid)
        rows.append(_row("monokinetic", cost, spread + mismatch + (1.0 + lip) * pos_cost))
    if with_entropy:
        chk = est_l1_check(rho_eps, rho, grid)
        rows.append(_row("est_l1", chk["lhs"], chk["rhs"]))
    return rows
