"""Explicit upwind transport substep acting on the conserved DG unknowns."""

from __future__ import annotations

import numpy as np

from .basis import GaussLobattoBasis
from .field import ConservedState, SolutionField, interface_traces


def upwind_state(left: ConservedState, right: ConservedState, u_star) -> ConservedState:
    """Donor trace per interface: left when u* > 0, right otherwise (ties go right)."""
    take_left = np.asarray(u_star) > 0.0
    return ConservedState(
        rho=np.where(take_left, left.rho, right.rho),
        mom=np.where(take_left, left.mom, right.mom),
    )


def transport_step(
    basis: GaussLobattoBasis,
    field: SolutionField,
    star_u: np.ndarray,
    dt: float,
):
    """Advance the conserved DOFs through the transport substep.

    field holds the state right after the acoustic substep; star_u holds the
    interface transport velocities from the same substep (n_elem + 1 values).
    Returns the updated (rho, mom) arrays.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt!r}")
    rho, mom = field.rho, field.mom
    n = field.n_elem
    if star_u.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} interface velocities, got {star_u.shape}")
    lam = dt / field.h
    vel = mom / rho

    ddx = basis.diff.T
    new_rho = rho - (2.0 * lam) * vel * (rho @ ddx)
    new_mom = mom - (2.0 * lam) * vel * (mom @ ddx)

    left_tr, right_tr = interface_traces(field)
    hat = upwind_state(left_tr, right_tr, star_u)
    lam0 = 2.0 * lam / basis.weights[0]
    lamp = 2.0 * lam / basis.weights[-1]
    new_rho[:, -1] -= lamp * star_u[1:] * (hat.rho[1:] - rho[:, -1])
    new_mom[:, -1] -= lamp * star_u[1:] * (hat.mom[1:] - mom[:, -1])
    new_rho[:, 0] += lam0 * star_u[:-1] * (hat.rho[:-1] - rho[:, 0])
    new_mom[:, 0] += lam0 * star_u[:-1] * (hat.mom[:-1] - mom[:, 0])
    return new_rho, new_mom


def add_source(rho, mom, source, x, t, dt):
    """Nodewise explicit source contribution dt * s(x, t); returns new arrays."""
    s_rho, s_mom = source(x, t)
    return rho + dt * np.asarray(s_rho), mom + dt * np.asarray(s_mom)
