"""Isentropic polytropic gas law and derived thermodynamic quantities.

All state functions are written in terms of the specific volume tau = 1/rho
and accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _require_positive(name, value):
    if np.any(~(np.asarray(value) > 0)):
        raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class GasModel:
    """Pressure law p(tau) = kappa * tau**(-gamma)."""

    kappa: float
    gamma: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma!r}")

    @classmethod
    def from_mach(cls, mach, gamma):
        """Nondimensional variant with kappa = 1 / (gamma * mach**2)."""
        if not mach > 0:
            raise ValueError(f"mach must be positive, got {mach!r}")
        return cls(kappa=1.0 / (gamma * mach * mach), gamma=gamma)

    def pressure(self, tau):
        _require_positive("tau", tau)
        return self.kappa * tau ** (-self.gamma)

    def pressure_derivative(self, tau):
        """dp/dtau, strictly negative."""
        _require_positive("tau", tau)
        return -self.kappa * self.gamma * tau ** (-self.gamma - 1.0)

    def internal_energy(self, tau):
        """Specific internal energy e with e'(tau) = -p(tau)."""
        _require_positive("tau", tau)
        return self.kappa * tau ** (1.0 - self.gamma) / (self.gamma - 1.0)

    def sound_speed(self, tau):
        """Eulerian sound speed c(tau) = tau * sqrt(-p'(tau))."""
        return tau * np.sqrt(-self.pressure_derivative(tau))

    def total_energy(self, rho, mom):
        """Volumetric total energy rho*e(1/rho) + mom**2/(2*rho), strictly convex."""
        _require_positive("rho", rho)
        return rho * self.internal_energy(1.0 / rho) + 0.5 * mom * mom / rho
