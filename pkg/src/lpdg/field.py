"""State containers and variable transforms for the nodal DG solution.

Degrees of freedom are stored element-major, node-minor, one array per
conserved component.  The transform helpers work on scalars and arrays
alike; the named tuples carry either.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Union

import numpy as np

from .basis import GaussLobattoBasis
from .thermo import GasModel


class InadmissibleStateError(ValueError):
    """A state left the admissible set (rho > 0, tau > 0)."""


class ConservedState(NamedTuple):
    rho: Union[float, np.ndarray]
    mom: Union[float, np.ndarray]


class LagrangeState(NamedTuple):
    tau: Union[float, np.ndarray]
    vel: Union[float, np.ndarray]
    pi: Union[float, np.ndarray]


class CharacteristicTriple(NamedTuple):
    w_plus: Union[float, np.ndarray]
    j_inv: Union[float, np.ndarray]
    w_minus: Union[float, np.ndarray]


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class FarField:
    """Constant ghost states imposed outside both ends of the mesh."""

    left: ConservedState
    right: ConservedState


Boundary = Union[Periodic, FarField]

PERIODIC = Periodic()


def _locate_nonpositive(values):
    """Index tuple (up to three shown) of non-positive entries for error text."""
    idx = np.argwhere(~(np.asarray(values) > 0))
    shown = ", ".join(str(tuple(i)) for i in idx[:3])
    more = "" if len(idx) <= 3 else f" and {len(idx) - 3} more"
    return shown + more


def to_lagrange(model: GasModel, u: ConservedState) -> LagrangeState:
    """Equilibrium Lagrange variables (tau, vel, pi) with pi = p(tau)."""
    rho = np.asarray(u.rho, dtype=float)
    mom = np.asarray(u.mom, dtype=float)
    if np.any(~(rho > 0)):
        raise InadmissibleStateError(f"non-positive density at {_locate_nonpositive(rho)}")
    tau = 1.0 / rho
    vel = mom / rho
    return LagrangeState(tau=tau, vel=vel, pi=model.pressure(tau))


def to_conservative(w: LagrangeState) -> ConservedState:
    tau = np.asarray(w.tau, dtype=float)
    if np.any(~(tau > 0)):
        raise InadmissibleStateError(
            f"non-positive specific volume at {_locate_nonpositive(tau)}"
        )
    rho = 1.0 / tau
    return ConservedState(rho=rho, mom=np.asarray(w.vel, dtype=float) * rho)


def to_characteristic(w: LagrangeState, a: float) -> CharacteristicTriple:
    """Characteristic variables of the relaxation system for wave speed a > 0."""
    if not a > 0:
        raise ValueError(f"wave speed a must be positive, got {a!r}")
    pi = np.asarray(w.pi, dtype=float)
    vel = np.asarray(w.vel, dtype=float)
    tau = np.asarray(w.tau, dtype=float)
    return CharacteristicTriple(
        w_plus=pi + a * vel,
        j_inv=pi + a * a * tau,
        w_minus=pi - a * vel,
    )


def from_characteristic(c: CharacteristicTriple, a: float) -> LagrangeState:
    """Invert to_characteristic; rejects reconstructions with tau <= 0."""
    if not a > 0:
        raise ValueError(f"wave speed a must be positive, got {a!r}")
    w_plus = np.asarray(c.w_plus, dtype=float)
    w_minus = np.asarray(c.w_minus, dtype=float)
    pi = 0.5 * (w_plus + w_minus)
    vel = (w_plus - w_minus) / (2.0 * a)
    tau = (np.asarray(c.j_inv, dtype=float) - pi) / (a * a)
    if np.any(~(tau > 0)):
        raise InadmissibleStateError(
            f"characteristic reconstruction gave tau <= 0 at {_locate_nonpositive(tau)}"
        )
    return LagrangeState(tau=tau, vel=vel, pi=pi)


@dataclass
class SolutionField:
    """Nodal DG solution on a uniform mesh of n_elem cells of width h."""

    x_left: float
    h: float
    rho: np.ndarray
    mom: np.ndarray
    boundary: Boundary

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.mom = np.asarray(self.mom, dtype=float)
        if self.rho.ndim != 2 or self.rho.shape != self.mom.shape:
            raise ValueError(
                f"dof arrays must share a 2d shape, got {self.rho.shape} and {self.mom.shape}"
            )
        if not self.h > 0:
            raise ValueError(f"element width must be positive, got {self.h!r}")

    @property
    def n_elem(self):
        return self.rho.shape[0]

    @property
    def degree(self):
        return self.rho.shape[1] - 1

    def node_coords(self, basis: GaussLobattoBasis) -> np.ndarray:
        """Physical node coordinates, shape (n_elem, p+1)."""
        j = np.arange(self.n_elem)[:, None]
        return self.x_left + (j + 0.5 * (basis.nodes[None, :] + 1.0)) * self.h

    def copy(self) -> "SolutionField":
        return replace(self, rho=self.rho.copy(), mom=self.mom.copy())

    def with_dofs(self, rho, mom) -> "SolutionField":
        return replace(self, rho=rho, mom=mom)


def project_initial(
    model: GasModel,
    u0: Callable[[np.ndarray], ConservedState],
    n_elem: int,
    h: float,
    x_left: float,
    basis: GaussLobattoBasis,
    boundary: Boundary = PERIODIC,
) -> SolutionField:
    """Collocate u0 at the mesh nodes; the data must be admissible everywhere."""
    if not n_elem >= 1:
        raise ValueError(f"need at least one element, got {n_elem}")
    probe = SolutionField(
        x_left=x_left,
        h=h,
        rho=np.ones((n_elem, basis.n_nodes)),
        mom=np.zeros((n_elem, basis.n_nodes)),
        boundary=boundary,
    )
    x = probe.node_coords(basis)
    u = u0(x)
    rho = np.broadcast_to(np.asarray(u.rho, dtype=float), x.shape).copy()
    mom = np.broadcast_to(np.asarray(u.mom, dtype=float), x.shape).copy()
    if np.any(~(rho > 0)):
        raise InadmissibleStateError(
            f"initial data has non-positive density at {_locate_nonpositive(rho)}"
        )
    if isinstance(boundary, FarField):
        for side, state in (("left", boundary.left), ("right", boundary.right)):
            if not np.asarray(state.rho) > 0:
                raise InadmissibleStateError(f"{side} far-field state has rho <= 0")
    return SolutionField(x_left=x_left, h=h, rho=rho, mom=mom, boundary=boundary)


def cell_mean(basis: GaussLobattoBasis, field: SolutionField, j: int) -> ConservedState:
    """Quadrature cell average of element j."""
    if not 0 <= j < field.n_elem:
        raise ValueError(f"element index {j} out of range")
    half_w = 0.5 * basis.weights
    return ConservedState(
        rho=float(half_w @ field.rho[j]), mom=float(half_w @ field.mom[j])
    )


def field_means(basis: GaussLobattoBasis, rho: np.ndarray, mom: np.ndarray) -> ConservedState:
    """Cell averages of every element at once."""
    half_w = 0.5 * basis.weights
    return ConservedState(rho=rho @ half_w, mom=mom @ half_w)


def neighbor_dofs(field: SolutionField, j: int):
    """Trace pair (left neighbor's last node, right neighbor's first node) of element j."""
    if not 0 <= j < field.n_elem:
        raise ValueError(f"element index {j} out of range")
    n = field.n_elem
    if isinstance(field.boundary, Periodic):
        jl, jr = (j - 1) % n, (j + 1) % n
        left = ConservedState(field.rho[jl, -1], field.mom[jl, -1])
        right = ConservedState(field.rho[jr, 0], field.mom[jr, 0])
        return left, right
    left = (
        field.boundary.left
        if j == 0
        else ConservedState(field.rho[j - 1, -1], field.mom[j - 1, -1])
    )
    right = (
        field.boundary.right
        if j == n - 1
        else ConservedState(field.rho[j + 1, 0], field.mom[j + 1, 0])
    )
    return left, right


def interface_traces(field: SolutionField):
    """Conserved trace pairs at the n_elem + 1 interfaces.

    Interface i sits at x_left + i*h; the left trace comes from element
    i-1's last node and the right trace from element i's first node,
    with ghost or wrapped values at the ends.
    """
    n = field.n_elem
    lt_rho = np.empty(n + 1)
    lt_mom = np.empty(n + 1)
    rt_rho = np.empty(n + 1)
    rt_mom = np.empty(n + 1)
    lt_rho[1:] = field.rho[:, -1]
    lt_mom[1:] = field.mom[:, -1]
    rt_rho[:-1] = field.rho[:, 0]
    rt_mom[:-1] = field.mom[:, 0]
    if isinstance(field.boundary, Periodic):
        lt_rho[0] = field.rho[-1, -1]
        lt_mom[0] = field.mom[-1, -1]
        rt_rho[-1] = field.rho[0, 0]
        rt_mom[-1] = field.mom[0, 0]
    else:
        lt_rho[0] = field.boundary.left.rho
        lt_mom[0] = field.boundary.left.mom
        rt_rho[-1] = field.boundary.right.rho
        rt_mom[-1] = field.boundary.right.mom
    return ConservedState(lt_rho, lt_mom), ConservedState(rt_rho, rt_mom)
