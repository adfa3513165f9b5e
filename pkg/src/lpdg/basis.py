"""Gauss-Lobatto nodal basis on the reference element [-1, 1].

Nodes are the roots of (1 - s^2) P_p'(s); the associated quadrature
weights integrate polynomials up to degree 2p - 1 exactly.  The
differentiation matrix acts on nodal values, diff[k, l] = l_l'(s_k),
and each of its rows sums to zero by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

MAX_DEGREE = 8

_cache: dict[int, "GaussLobattoBasis"] = {}


@dataclass(frozen=True)
class GaussLobattoBasis:
    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray
    bary: np.ndarray

    @property
    def n_nodes(self):
        return self.degree + 1

    def inner_product(self, h, f, g):
        """Collocation inner product (h/2) * sum_k w_k f_k g_k on an element of width h."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape != (self.n_nodes,) or g.shape != (self.n_nodes,):
            raise ValueError(
                f"expected nodal vectors of length {self.n_nodes}, "
                f"got {f.shape} and {g.shape}"
            )
        if not h > 0:
            raise ValueError(f"element width must be positive, got {h!r}")
        return 0.5 * h * np.sum(self.weights * f * g)

    def interpolation_matrix(self, s):
        """Matrix V with V[m, k] = l_k(s_m), rows barycentric, exact at nodes."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        d = s[:, None] - self.nodes[None, :]
        hit = d == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            c = self.bary[None, :] / d
            v = c / np.sum(c, axis=1, keepdims=True)
        on_node = hit.any(axis=1)
        if np.any(on_node):
            v[on_node] = hit[on_node].astype(float)
        return v

    def lagrange_eval(self, k, s):
        """Value of the k-th Lagrange basis polynomial at point(s) s."""
        if not 0 <= k <= self.degree:
            raise ValueError(f"basis index {k} out of range for degree {self.degree}")
        scalar = np.ndim(s) == 0
        vals = self.interpolation_matrix(s)[:, k]
        return float(vals[0]) if scalar else vals


def _legendre_basis_coeffs(p):
    c = np.zeros(p + 1)
    c[p] = 1.0
    return c


def gauss_lobatto(p: int) -> GaussLobattoBasis:
    """Return the (cached) Gauss-Lobatto basis of degree p, 1 <= p <= 8."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"degree must be an integer in [1, {MAX_DEGREE}], got {p!r}")
    p = int(p)
    if p in _cache:
        return _cache[p]

    nodes = np.empty(p + 1)
    nodes[0] = -1.0
    nodes[-1] = 1.0
    if p >= 2:
        dP = npleg.legder(_legendre_basis_coeffs(p))
        d2P = npleg.legder(dP)
        x = np.sort(npleg.legroots(dP).real)
        for _ in range(100):
            step = npleg.legval(x, dP) / npleg.legval(x, d2P)
            x = x - step
            if np.max(np.abs(step)) < 1e-15:
                break
        nodes[1:-1] = x

    pp = npleg.legval(nodes, _legendre_basis_coeffs(p))
    weights = 2.0 / (p * (p + 1) * pp * pp)

    # Barycentric weights and the nodal differentiation matrix.
    dist = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dist, 1.0)
    bary = 1.0 / np.prod(dist, axis=1)
    diff = (bary[None, :] / bary[:, None]) / dist
    np.fill_diagonal(diff, 0.0)
    np.fill_diagonal(diff, -np.sum(diff, axis=1))

    for arr in (nodes, weights, diff, bary):
        arr.setflags(write=False)
    basis = GaussLobattoBasis(degree=p, nodes=nodes, weights=weights, diff=diff, bary=bary)
    _cache[p] = basis
    return basis
