"""Mean-preserving nodal limiters: positivity, density envelope, entropy ceiling.

All limiters blend nodal values toward the cell average, so cell means
(and hence conservation) are untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import GaussLobattoBasis
from .field import Periodic, SolutionField
from .thermo import GasModel


class LimiterError(RuntimeError):
    """A limiter met a state it cannot repair (inadmissible cell mean)."""


@dataclass(frozen=True)
class LimiterConfig:
    eps_pos: float = 1e-12
    entropy_enabled: bool = True
    density_enabled: bool = False
    root_tol: float = 1e-12
    mean_level: str = "new"

    def __post_init__(self):
        if not 0.0 < self.eps_pos <= 1e-6:
            raise ValueError(f"eps_pos must lie in (0, 1e-6], got {self.eps_pos!r}")
        if not self.root_tol > 0:
            raise ValueError(f"root_tol must be positive, got {self.root_tol!r}")
        if self.mean_level not in ("new", "old"):
            raise ValueError(f"mean_level must be 'new' or 'old', got {self.mean_level!r}")


def _blend_rows(arr, means, theta, rows):
    out = arr.copy()
    out[rows] = means[rows, None] + theta[rows, None] * (arr[rows] - means[rows, None])
    return out


def positivity_limit(
    basis: GaussLobattoBasis,
    rho: np.ndarray,
    mom: np.ndarray,
    eps_pos: float = 1e-12,
    mean_level: str = "new",
    mean_rho_old: np.ndarray | None = None,
):
    """Scale both components toward the cell mean until min density >= eps_pos.

    mean_level selects whose density mean feeds the scaling factor: the
    current one ("new") or a caller-supplied earlier one ("old").  The blend
    itself is always centered on the current means.  Returns (rho, mom,
    theta); elements with min density already above eps_pos pass through
    bitwise unchanged.
    """
    half_w = 0.5 * basis.weights
    mean_rho = rho @ half_w
    mean_mom = mom @ half_w
    if np.any(mean_rho <= eps_pos):
        j = int(np.argmin(mean_rho))
        raise LimiterError(
            f"cell mean density {mean_rho[j]:.3e} at element {j} is not above eps_pos"
        )
    rho_min = rho.min(axis=1)
    theta = np.ones(rho.shape[0])
    need = rho_min < eps_pos
    if np.any(need):
        if mean_level == "new":
            ref = mean_rho
        else:
            if mean_rho_old is None:
                raise ValueError("mean_level='old' needs mean_rho_old")
            ref = np.asarray(mean_rho_old)
        th = (ref[need] - eps_pos) / (mean_rho[need] - rho_min[need])
        # shave a few ulps so cancellation cannot undershoot the eps_pos floor
        theta[need] = np.clip(th * (1.0 - 1e-15), 0.0, 1.0)
    rows = np.flatnonzero(theta < 1.0)
    if rows.size == 0:
        return rho, mom, theta
    return (
        _blend_rows(rho, mean_rho, theta, rows),
        _blend_rows(mom, mean_mom, theta, rows),
        theta,
    )


def density_bounds(field: SolutionField):
    """Per-element density envelope over the element and both neighbors.

    The transport substep is a convex combination over a three-element
    stencil, so a maximum principle for any convex function of the state
    holds for cell means; +/- density are linear, hence the envelope.
    Far-field ends extend the stencil with the ghost density; periodic
    domains wrap.  Returns (lower, upper), each of length n_elem.
    """

    rho = field.rho
    emin = rho.min(axis=1)
    emax = rho.max(axis=1)
    if isinstance(field.boundary, Periodic):
        lmin, rmin = np.roll(emin, 1), np.roll(emin, -1)
        lmax, rmax = np.roll(emax, 1), np.roll(emax, -1)
    else:
        gl = float(field.boundary.left.rho)
        gr = float(field.boundary.right.rho)
        lmin = np.concatenate(([gl], emin[:-1]))
        rmin = np.concatenate((emin[1:], [gr]))
        lmax = np.concatenate(([gl], emax[:-1]))
        rmax = np.concatenate((emax[1:], [gr]))
    lower = np.minimum(emin, np.minimum(lmin, rmin))
    upper = np.maximum(emax, np.maximum(lmax, rmax))
    return lower, upper


def density_limit(
    basis: GaussLobattoBasis,
    rho: np.ndarray,
    mom: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
):
    """Blend toward the cell mean until nodal density lies in [lower, upper].

    Density is linear along the blend segment, so the scaling factor has a
    closed form per bound; the element factor is the smaller of the two.  A
    mean already outside the envelope (possible when a step outran the
    a-posteriori CFL bound) admits no enforcing blend; such elements are
    flattened to their mean, which the run report exposes through theta = 0.
    Returns (rho, mom, theta).
    """
    half_w = 0.5 * basis.weights
    mean_rho = rho @ half_w
    mean_mom = mom @ half_w
    rho_min = rho.min(axis=1)
    rho_max = rho.max(axis=1)
    scale = np.maximum(np.abs(lower), np.abs(upper))
    atol = 1e-13 * np.maximum(1.0, scale)
    theta = np.ones(rho.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        need_lo = rho_min < lower - atol
        th_lo = np.where(
            need_lo, (mean_rho - lower) / (mean_rho - rho_min), 1.0
        )
        need_hi = rho_max > upper + atol
        th_hi = np.where(
            need_hi, (upper - mean_rho) / (rho_max - mean_rho), 1.0
        )
    theta = np.clip(np.minimum(th_lo, th_hi), 0.0, 1.0)
    rows = np.flatnonzero(theta < 1.0)
    if rows.size == 0:
        return rho, mom, theta
    return (
        _blend_rows(rho, mean_rho, theta, rows),
        _blend_rows(mom, mean_mom, theta, rows),
        theta,
    )


def entropy_bounds(model: GasModel, field: SolutionField) -> np.ndarray:
    """Per-element ceiling: max volumetric total energy over the element and
    both full neighbor elements (ghost states at far-field ends).

    The cell mean provably stays below the max over the element's own nodes
    and the two facing neighbor traces, so it stays below this wider bound a
    fortiori and the blend toward the mean is always feasible.  The full
    neighborhood is needed for the nodal ceiling: an upwind foot can land
    well inside the neighbor element, where a monotone profile exceeds its
    facing trace value by O(h), and clipping that legitimate value each step
    would cap smooth runs at first order."""

    energy = model.total_energy(field.rho, field.mom)
    emax = energy.max(axis=1)
    if isinstance(field.boundary, Periodic):
        lmax = np.roll(emax, 1)
        rmax = np.roll(emax, -1)
    else:
        gl = float(model.total_energy(field.boundary.left.rho, field.boundary.left.mom))
        gr = float(model.total_energy(field.boundary.right.rho, field.boundary.right.mom))
        lmax = np.concatenate(([gl], emax[:-1]))
        rmax = np.concatenate((emax[1:], [gr]))
    return np.maximum(emax, np.maximum(lmax, rmax))


def entropy_limit(
    model: GasModel,
    basis: GaussLobattoBasis,
    rho: np.ndarray,
    mom: np.ndarray,
    bounds: np.ndarray,
    root_tol: float = 1e-12,
    max_iter: int = 60,
):
    """Blend toward the cell mean until nodal total energy stays below bounds.

    The scaling factor per element is the smallest over its offending nodes
    of the largest admissible blend parameter, found by bisection (the
    energy is convex along the blend segment).  Returns (rho, mom, theta).
    """
    n = rho.shape[0]
    if bounds.shape != (n,):
        raise ValueError(f"expected {n} bounds, got {bounds.shape}")
    energy = model.total_energy(rho, mom)
    over = energy > bounds[:, None]
    theta = np.ones(n)
    if not over.any():
        return rho, mom, theta

    half_w = 0.5 * basis.weights
    mean_rho = rho @ half_w
    mean_mom = mom @ half_w
    jj, kk = np.nonzero(over)
    r_node = rho[jj, kk]
    m_node = mom[jj, kk]
    r_bar = mean_rho[jj]
    m_bar = mean_mom[jj]
    ceil = bounds[jj]

    # A mean above the bound admits no blend that enforces it (blending is
    # toward the mean); fall back to the fully flattened element, theta = 0.
    # This arises only when the step outran the a-posteriori CFL bound, which
    # the run report exposes; the limiter stays total rather than failing.
    # Excess within atol is treated as a feasible mean so roundoff cannot
    # flatten an element.
    g0 = model.total_energy(r_bar, m_bar) - ceil
    atol = max(root_tol, 1e-12) * max(1.0, float(np.max(np.abs(bounds))))

    # Inline the volumetric energy kappa*rho**gamma/(gamma-1) + mom**2/(2 rho)
    # inside the loop: the endpoints were validated positive above and a convex
    # blend of positive densities stays positive, so the guarded accessor would
    # only add per-iteration overhead.
    coef = model.kappa / (model.gamma - 1.0)
    gam = model.gamma
    d_r = r_node - r_bar
    d_m = m_node - m_bar
    lo = np.zeros(jj.size)
    hi = np.ones(jj.size)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid = r_bar + mid * d_r
        m_mid = m_bar + mid * d_m
        g_mid = coef * r_mid**gam + 0.5 * m_mid * m_mid / r_mid - ceil
        ok = g_mid <= 0.0
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
        if hi[0] - lo[0] <= root_tol and np.max(hi - lo) <= root_tol:
            break

    theta_node = np.where(g0 > atol, 0.0, lo)
    np.minimum.at(theta, jj, theta_node)
    rows = np.flatnonzero(theta < 1.0)
    return (
        _blend_rows(rho, mean_rho, theta, rows),
        _blend_rows(mom, mean_mom, theta, rows),
        theta,
    )
