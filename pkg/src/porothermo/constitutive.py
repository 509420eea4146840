"""Pointwise constitutive relations and the two heat-flux routes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .history import GradientHistory, HistoryTransforms
from .kernel import FrequencyGrid
from .material import MaterialParams


@dataclass(frozen=True)
class GeneralizedStrain:
    """(strain F, porosity gradient pi, porosity change psi); fields may be arrays."""

    F: np.ndarray | float
    pi: np.ndarray | float
    psi: np.ndarray | float


@dataclass(frozen=True)
class GeneralizedStress:
    S: np.ndarray | float
    h: np.ndarray | float
    g: np.ndarray | float


def _coef(p: MaterialParams, *names):
    return tuple(np.asarray(getattr(p, n), dtype=float) for n in names)


def strain_of(u: np.ndarray, dx: float) -> np.ndarray:
    """du/dx: central differences inside, second-order one-sided at the ends."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] < 3:
        raise ValueError("strain needs at least 3 grid points")
    return np.gradient(u, dx, edge_order=2)


def elastic_response(p: MaterialParams, e: GeneralizedStrain) -> GeneralizedStress:
    C, A, xi, D, B, b = _coef(p, "C", "A", "xi", "D", "B", "b")
    return GeneralizedStress(
        S=C * e.F + D * e.pi + B * e.psi,
        h=D * e.F + A * e.pi + b * e.psi,
        g=-B * e.F - b * e.pi - xi * e.psi,
    )


def form_energy(p: MaterialParams, f: GeneralizedStrain, gbar: GeneralizedStrain):
    """The symmetric bilinear form whose diagonal is the stored energy W*."""
    C, A, xi, D, B, b = _coef(p, "C", "A", "xi", "D", "B", "b")
    two_f = (
        C * f.F * gbar.F
        + xi * f.psi * gbar.psi
        + A * f.pi * gbar.pi
        + B * (f.F * gbar.psi + gbar.F * f.psi)
        + D * (f.F * gbar.pi + gbar.F * f.pi)
        + b * (f.psi * gbar.pi + gbar.psi * f.pi)
    )
    return 0.5 * two_f


def stored_energy(p: MaterialParams, e: GeneralizedStrain):
    return form_energy(p, e, e)


def total_response(p: MaterialParams, e: GeneralizedStrain, theta) -> GeneralizedStress:
    Mc, a, m = _coef(p, "Mc", "a", "m")
    el = elastic_response(p, e)
    return GeneralizedStress(S=el.S + Mc * theta, h=el.h + a * theta, g=el.g - m * theta)


def heating_rate(p: MaterialParams, E_dot, pi_dot, phi_dot, theta_dot):
    """rho*tau = -theta0 (Mc E' + a pi' + m phi') + rho c theta'."""
    Mc, a, m, theta0, rho, c = _coef(p, "Mc", "a", "m", "theta0", "rho", "c")
    return -theta0 * (Mc * E_dot + a * pi_dot + m * phi_dot) + rho * c * theta_dot


def heat_flux_time(kernel, h: GradientHistory, t: float, theta0) -> np.ndarray:
    """q(t) = theta0 int_0^inf K'(s) thbar^t(s) ds.

    Trapezoid over [0, s*] on the lag grid, plus the exact tail
    -theta0 * Theta * K(s*) where the integrated history is constant.
    """
    lag = h.lag_series(t)
    dt = h.dt
    thbar = np.zeros_like(lag)
    thbar[1:] = np.cumsum(0.5 * dt * (lag[1:] + lag[:-1]), axis=0)
    s = np.arange(lag.shape[0]) * dt
    kd = kernel.derivative(s)[:, None]
    f = kd * thbar
    body = dt * (f.sum(axis=0) - 0.5 * (f[0] + f[-1]))
    tail = -thbar[-1] * kernel.value(s[-1])
    return np.asarray(theta0) * (body + tail)


def heat_flux_direct(kernel, h: GradientHistory, t: float, theta0) -> np.ndarray:
    """Oracle form -theta0 int_0^inf K(s) g(t-s) ds by trapezoid on the lag grid."""
    lag = h.lag_series(t)
    s = np.arange(lag.shape[0]) * h.dt
    f = kernel.value(s)[:, None] * lag
    body = h.dt * (f.sum(axis=0) - 0.5 * (f[0] + f[-1]))
    return -np.asarray(theta0) * body


def heat_flux_freq(kernel, ht: HistoryTransforms, grid: FrequencyGrid, theta0) -> np.ndarray:
    """q = (2 theta0 / pi) int K'^S(w) thbar^S(w) dw on the grid."""
    if grid.omega.size == 0:
        raise ValueError("empty frequency grid")
    ks = kernel.derivative_sine(grid.omega)
    return np.asarray(theta0) * 2.0 / math.pi * grid.integrate(ks[:, None] * ht.sine)


def flux_bound_rhs(K0: float, theta0, c, memory) -> np.ndarray:
    """K0 theta0 c (2 rho Psi_M - 2 W* - rho c theta^2 / theta0) = K0 theta0 c * 2 * memory."""
    return K0 * np.asarray(theta0) * np.asarray(c) * 2.0 * np.asarray(memory)


__all__ = [
    "GeneralizedStrain",
    "GeneralizedStress",
    "strain_of",
    "elastic_response",
    "form_energy",
    "stored_energy",
    "total_response",
    "heating_rate",
    "heat_flux_time",
    "heat_flux_direct",
    "heat_flux_freq",
    "flux_bound_rhs",
]
