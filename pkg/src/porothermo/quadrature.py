"""Oscillatory quadrature on piecewise-linear data and Gauss-Legendre panels."""

from __future__ import annotations

import math

import numpy as np

_SERIES_CUTOFF = 0.05
_SERIES_TERMS = 12


def linear_moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (int_0^1 (1-u) e^{ixu} du, int_0^1 u e^{ixu} du).

    A power series is used for |x| below a cutoff, where the closed forms
    lose digits to cancellation.
    """
    x = np.asarray(x, dtype=float)
    ix = 1j * x
    small = np.abs(x) < _SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.exp(ix)
        full = (e - 1.0) / ix
        upper = e / ix + (e - 1.0) / (x * x)
    if np.any(small):
        xs = ix[small]
        s_full = np.zeros_like(xs)
        s_upper = np.zeros_like(xs)
        term = np.ones_like(xs)
        for n in range(_SERIES_TERMS):
            # term = (ix)^n / n!
            s_full += term / (n + 1)
            s_upper += term / (n + 2)
            term = term * xs / (n + 1)
        full = np.where(small, 0, full)
        upper = np.where(small, 0, upper)
        full[small] = s_full
        upper[small] = s_upper
    return full - upper, upper


def filon_linear(values: np.ndarray, ds: float, omega: np.ndarray) -> np.ndarray:
    """Integral of exp(i*omega*s) times the piecewise-linear interpolant of ``values``.

    ``values`` holds samples at s_j = j*ds along axis 0 (extra axes are
    independent series).  The result has shape (len(omega),) + values.shape[1:]
    and is exact for piecewise-linear data at any omega.
    """
    values = np.asarray(values, dtype=float)
    omega = np.asarray(omega, dtype=float)
    n = values.shape[0]
    if n < 2:
        return np.zeros(omega.shape + values.shape[1:], dtype=complex)
    lo, hi = linear_moments(omega * ds)
    s = np.arange(n - 1) * ds
    phase = ds * np.exp(1j * np.outer(omega, s))  # (n_omega, n-1)
    flat = values.reshape(n, -1)
    left = phase @ flat[:-1]
    right = phase @ flat[1:]
    out = lo[:, None] * left + hi[:, None] * right
    return out.reshape(omega.shape + values.shape[1:])


def gauss_legendre_panels(upper: float, panel_width: float, nodes: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on (0, upper]."""
    n_panels = max(1, math.ceil(upper / panel_width))
    edges = np.linspace(0.0, upper, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts
