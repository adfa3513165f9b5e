"""Relaxation Riemann solver and the implicit acoustic substep.

The acoustic system is solved in characteristic variables: w_plus rides
at speed +a, w_minus at -a, and j_inv is stationary.  Each family gives
a linear system whose element blocks are banded; upwind interface
coupling adds one entry per interior interface, a periodic mesh closes
the band with a single corner entry handled by a rank-one update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .basis import GaussLobattoBasis
from .field import (
    ConservedState,
    CharacteristicTriple,
    FarField,
    LagrangeState,
    Periodic,
    SolutionField,
    from_characteristic,
    to_characteristic,
    to_lagrange,
)
from .thermo import GasModel


class AcousticSolveError(RuntimeError):
    """The banded characteristic solve failed or left a large residual."""


class SubcharacteristicError(RuntimeError):
    """The chosen wave speed a fell below the stiffness of the updated state."""

    def __init__(self, used, required):
        super().__init__(
            f"wave speed a = {used:.6g} below the subcharacteristic bound {required:.6g}"
        )
        self.used = used
        self.required = required


class StarState(NamedTuple):
    u_star: Union[float, np.ndarray]
    pi_star: Union[float, np.ndarray]
    tau_l_star: Union[float, np.ndarray]
    tau_r_star: Union[float, np.ndarray]


def riemann_star(w_left: LagrangeState, w_right: LagrangeState, a: float) -> StarState:
    """Intermediate states of the half Riemann problem for wave speed a."""
    if not a > 0:
        raise ValueError(f"wave speed a must be positive, got {a!r}")
    if np.any(~(np.asarray(w_left.tau) > 0)) or np.any(~(np.asarray(w_right.tau) > 0)):
        raise ValueError("riemann_star needs admissible trace states (tau > 0)")
    u_star = 0.5 * (w_left.vel + w_right.vel) + (w_left.pi - w_right.pi) / (2.0 * a)
    pi_star = 0.5 * (w_left.pi + w_right.pi) + 0.5 * a * (w_left.vel - w_right.vel)
    tau_l_star = w_left.tau + (u_star - w_left.vel) / a
    tau_r_star = w_right.tau + (w_right.vel - u_star) / a
    return StarState(u_star, pi_star, tau_l_star, tau_r_star)


def acoustic_flux(w_left: LagrangeState, w_right: LagrangeState, a: float):
    """Upwind acoustic flux triple (-u*, pi*, a**2 u*)."""
    s = riemann_star(w_left, w_right, a)
    return (-s.u_star, s.pi_star, a * a * s.u_star)


def select_a(model: GasModel, field: SolutionField, safety: float = 1.05) -> float:
    """Wave speed safety * max sqrt(-p'(tau)) over all nodes (and ghosts)."""
    if not safety >= 1.0:
        raise ValueError(f"safety factor must be >= 1, got {safety!r}")
    if np.any(~(field.rho > 0)):
        raise ValueError("select_a needs positive densities")
    peak = np.max(-model.pressure_derivative(1.0 / field.rho))
    if isinstance(field.boundary, FarField):
        for state in (field.boundary.left, field.boundary.right):
            peak = max(peak, -model.pressure_derivative(1.0 / state.rho))
    return safety * float(np.sqrt(peak))


@dataclass
class AcousticResult:
    """Implicit acoustic update at t_(n+1-), with interface stars and L factors."""

    tau: np.ndarray
    vel: np.ndarray
    pi: np.ndarray
    w_plus: np.ndarray
    j_inv: np.ndarray
    w_minus: np.ndarray
    star_u: np.ndarray
    star_pi: np.ndarray
    l_factor: np.ndarray
    a_used: float

    @property
    def lagrange(self) -> LagrangeState:
        return LagrangeState(tau=self.tau, vel=self.vel, pi=self.pi)


def _scatter_band(blocks):
    """Pack per-element dense blocks into solve_banded storage with (l, u) = (p, p)."""
    n, m, _ = blocks.shape
    p = m - 1
    ab = np.zeros((2 * p + 1, n * m))
    for k in range(m):
        for l in range(m):
            ab[p + k - l, l::m] = blocks[:, k, l]
    return ab


def _solve_with_corner(p, ab, rhs, corner):
    """Banded solve, optionally with one out-of-band corner entry (rank-one update)."""
    # Finite checks are skipped: the caller verifies the assembled residual of
    # every solve and raises on anything non-finite, so the scans would only
    # repeat that guard on the hot path.
    try:
        if corner is None:
            return solve_banded((p, p), ab, rhs, overwrite_ab=True, check_finite=False)
        row, col, val = corner
        b = np.zeros((rhs.size, 2))
        b[:, 0] = rhs
        b[row, 1] = 1.0
        x = solve_banded((p, p), ab, b, overwrite_ab=True, overwrite_b=True, check_finite=False)
    except np.linalg.LinAlgError as err:  # pragma: no cover - depends on LAPACK
        raise AcousticSolveError(f"banded solve failed: {err}") from err
    xb, xe = x[:, 0], x[:, 1]
    denom = 1.0 + val * xe[col]
    if not np.isfinite(denom) or denom == 0.0:
        raise AcousticSolveError("singular periodic closure in the acoustic solve")
    return xb - (val * xb[col] / denom) * xe


def _check_residual(blocks, x2d, rhs_eff, edge, side, periodic, label):
    """Verify A x = b for the assembled cyclic/bordered system."""
    n = x2d.shape[0]
    ax = np.einsum("jkl,jl->jk", blocks, x2d)
    if side == "plus":
        if periodic and n > 1:
            ax[:, 0] -= edge * np.roll(x2d[:, -1], 1)
        elif not periodic and n > 1:
            ax[1:, 0] -= edge[1:] * x2d[:-1, -1]
    else:
        if periodic and n > 1:
            ax[:, -1] -= edge * np.roll(x2d[:, 0], -1)
        elif not periodic and n > 1:
            ax[:-1, -1] -= edge[:-1] * x2d[1:, 0]
    resid = np.linalg.norm(ax.ravel() - rhs_eff)
    scale = max(np.linalg.norm(rhs_eff), np.finfo(float).tiny)
    if not resid <= 1e-12 * scale:
        raise AcousticSolveError(
            f"{label} characteristic solve residual {resid / scale:.3e} exceeds 1e-12"
        )


def _interface_lagrange(w: LagrangeState, boundary, ghost_left, ghost_right):
    """Lagrange trace states on both sides of every interface."""
    n = w.tau.shape[0]

    def edges(arr, g_l, g_r):
        lt = np.empty(n + 1)
        rt = np.empty(n + 1)
        lt[1:] = arr[:, -1]
        rt[:-1] = arr[:, 0]
        if isinstance(boundary, Periodic):
            lt[0] = arr[-1, -1]
            rt[-1] = arr[0, 0]
        else:
            lt[0] = g_l
            rt[-1] = g_r
        return lt, rt

    gl = ghost_left or LagrangeState(np.nan, np.nan, np.nan)
    gr = ghost_right or LagrangeState(np.nan, np.nan, np.nan)
    lt_tau, rt_tau = edges(w.tau, gl.tau, gr.tau)
    lt_vel, rt_vel = edges(w.vel, gl.vel, gr.vel)
    lt_pi, rt_pi = edges(w.pi, gl.pi, gr.pi)
    return LagrangeState(lt_tau, lt_vel, lt_pi), LagrangeState(rt_tau, rt_vel, rt_pi)


def ghost_lagrange(model: GasModel, boundary):
    """Equilibrium Lagrange ghost states for a far-field boundary, else (None, None)."""
    if not isinstance(boundary, FarField):
        return None, None
    return (
        to_lagrange(model, boundary.left),
        to_lagrange(model, boundary.right),
    )


def solve_acoustic_step(
    model: GasModel,
    basis: GaussLobattoBasis,
    field: SolutionField,
    a: float,
    dt: float,
    momentum_source=None,
) -> AcousticResult:
    """One implicit acoustic substep of size dt at wave speed a.

    Equilibrium data (pi reset to p(tau)) is transformed to characteristic
    variables, the two propagating families are solved with upwind interface
    coupling, j_inv is copied, and the Lagrange state is reconstructed.
    Raises SubcharacteristicError when the updated specific volumes demand a
    larger a (the caller may retry) and InadmissibleStateError when the
    reconstruction leaves the admissible set.

    An optional nodal momentum forcing s (velocity equation gains +tau*s)
    enters the implicit solves antisymmetrically: +a*tau^n*s*dt on the
    forward family, the negative on the backward one.  The forcing then
    cancels out of pi and j_inv and contributes exactly dt*tau^n*s to the
    velocity, so a discrete velocity equilibrium (forcing balancing the
    pressure gradient) is a steady state of the substep for any dt.
    """
    if not a > 0:
        raise ValueError(f"wave speed a must be positive, got {a!r}")
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt!r}")
    if field.degree != basis.degree:
        raise ValueError(
            f"field degree {field.degree} does not match basis degree {basis.degree}"
        )

    w_n = to_lagrange(model, ConservedState(field.rho, field.mom))
    c_n = to_characteristic(w_n, a)
    forcing = None
    if momentum_source is not None:
        forcing = (dt * a) * w_n.tau * np.asarray(momentum_source, dtype=float)
    n, m = field.rho.shape
    p = m - 1
    lam = dt / field.h
    coef = (2.0 * a * lam) * w_n.tau
    periodic = isinstance(field.boundary, Periodic)
    gl, gr = ghost_lagrange(model, field.boundary)
    eye = np.eye(m)

    # Forward family: rows couple node 0 to the left neighbor's last node.
    blocks = eye[None, :, :] + coef[:, :, None] * basis.diff[None, :, :]
    edge0 = coef[:, 0] / basis.weights[0]
    blocks[:, 0, 0] += edge0
    rhs = (c_n.w_plus + forcing if forcing is not None else c_n.w_plus).ravel().copy()
    corner = None
    if periodic:
        if n == 1:
            blocks[0, 0, -1] -= edge0[0]
        else:
            corner = (0, n * m - 1, -edge0[0])
    else:
        rhs[0] += edge0[0] * (gl.pi + a * gl.vel)
    ab = _scatter_band(blocks)
    if n > 1:
        cols = np.arange(1, n) * m - 1
        ab[p + 1, cols] = -edge0[1:]
    wp1 = _solve_with_corner(p, ab, rhs, corner).reshape(n, m)
    _check_residual(blocks, wp1, rhs, edge0, "plus", periodic, "forward")

    # Backward family: mirror coupling, node p to the right neighbor's first node.
    blocks = eye[None, :, :] - coef[:, :, None] * basis.diff[None, :, :]
    edgep = coef[:, -1] / basis.weights[-1]
    blocks[:, -1, -1] += edgep
    rhs = (c_n.w_minus - forcing if forcing is not None else c_n.w_minus).ravel().copy()
    corner = None
    if periodic:
        if n == 1:
            blocks[0, -1, 0] -= edgep[0]
        else:
            corner = (n * m - 1, 0, -edgep[-1])
    else:
        rhs[-1] += edgep[-1] * (gr.pi - a * gr.vel)
    ab = _scatter_band(blocks)
    if n > 1:
        cols = np.arange(1, n) * m
        ab[p - 1, cols] = -edgep[:-1]
    wm1 = _solve_with_corner(p, ab, rhs, corner).reshape(n, m)
    _check_residual(blocks, wm1, rhs, edgep, "minus", periodic, "backward")

    j_new = c_n.j_inv.copy()
    w_1 = from_characteristic(CharacteristicTriple(wp1, j_new, wm1), a)

    # Subcharacteristic condition over the segment between tau^n and tau^(n+1-):
    # -p' decreases in tau, so the segment max sits at the pointwise minimum.
    tau_floor = np.minimum(w_n.tau, w_1.tau)
    need = np.max(-model.pressure_derivative(tau_floor))
    if gl is not None:
        need = max(need, -model.pressure_derivative(gl.tau))
        need = max(need, -model.pressure_derivative(gr.tau))
    need = float(np.sqrt(need))
    if a < need:
        raise SubcharacteristicError(used=a, required=need)

    left_tr, right_tr = _interface_lagrange(w_1, field.boundary, gl, gr)
    star = riemann_star(left_tr, right_tr, a)

    # L factor in flux-difference form.
    ip = (w_1.vel * basis.weights[None, :]) @ basis.diff
    lam_k = (2.0 * lam) / basis.weights
    l_factor = 1.0 - lam_k[None, :] * ip
    l_factor[:, -1] += lam_k[-1] * star.u_star[1:]
    l_factor[:, 0] -= lam_k[0] * star.u_star[:-1]

    return AcousticResult(
        tau=w_1.tau,
        vel=w_1.vel,
        pi=w_1.pi,
        w_plus=wp1,
        j_inv=j_new,
        w_minus=wm1,
        star_u=np.asarray(star.u_star),
        star_pi=np.asarray(star.pi_star),
        l_factor=l_factor,
        a_used=a,
    )
