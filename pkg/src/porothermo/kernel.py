"""Relaxation conductivity K(s), its transforms and dissipativity checks.

Transform convention (half-line sine/cosine, inverted with a 2/pi factor)::

    f^S(w) = int_0^inf f(s) sin(ws) ds,    f(s) = (2/pi) int_0^inf f^S(w) sin(ws) dw
    int_0^inf f g ds = (2/pi) int_0^inf f^S g^S dw

so that K(0) = -(2/pi) int_0^inf K'^S(w)/w dw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import sici

from .checks import AdmissibilityReport, Violation
from .quadrature import filon_linear, gauss_legendre_panels

RECONSTRUCTION_TOL = 1e-6


@dataclass(frozen=True)
class PronyKernel:
    """K(s) = sum_p k_p exp(-s / tau_p)."""

    k: tuple[float, ...]
    tau: tuple[float, ...]

    def __post_init__(self):
        if len(self.k) != len(self.tau) or not self.k:
            raise ValueError("prony kernel needs matching, nonempty k and tau")
        if any(v <= 0 for v in self.k) or any(v <= 0 for v in self.tau):
            raise ValueError("prony magnitudes and relaxation times must be positive")

    @classmethod
    def single(cls, k: float, tau: float) -> "PronyKernel":
        return cls((float(k),), (float(tau),))

    @property
    def _k(self) -> np.ndarray:
        return np.asarray(self.k)

    @property
    def _tau(self) -> np.ndarray:
        return np.asarray(self.tau)

    @property
    def time_scale(self) -> float:
        return float(min(self.tau))

    @property
    def slow_scale(self) -> float:
        return float(max(self.tau))

    @property
    def support(self) -> float:
        return 0.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return np.sum(self._k * np.exp(-s[..., None] / self._tau), axis=-1)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return -np.sum(self._k / self._tau * np.exp(-s[..., None] / self._tau), axis=-1)

    def cosine(self, omega):
        w = np.asarray(omega, dtype=float)[..., None]
        a = 1.0 / self._tau
        return np.sum(self._k * a / (w * w + a * a), axis=-1)

    def derivative_sine(self, omega):
        w = np.asarray(omega, dtype=float)[..., None]
        a = 1.0 / self._tau
        return -np.sum(self._k * a * w / (w * w + a * a), axis=-1)

    def reconstruction_tail(self, omega_max: float) -> float:
        # -(2/pi) int_W^inf K'^S/w dw, in closed form per term
        return float(np.sum(self._k * (1.0 - 2.0 / math.pi * np.arctan(omega_max * self._tau))))

    def to_dict(self) -> dict:
        return {"type": "prony", "terms": [{"k": k, "tau": t} for k, t in zip(self.k, self.tau)]}


@dataclass(frozen=True)
class TabulatedKernel:
    """K sampled on s_i = i*ds, zero beyond the last sample.

    Point values use monotone cubic (PCHIP) interpolation; transforms use
    Filon quadrature on the piecewise-linear interpolant.
    """

    ds: float
    values: tuple[float, ...]
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.ds <= 0 or v.size < 3:
            raise ValueError("tabulated kernel needs ds > 0 and at least 3 samples")
        if v[0] <= 0:
            raise ValueError("K(0) must be positive")
        if abs(v[-1]) > 1e-9 * v[0]:
            raise ValueError("tabulated kernel does not decay: K(inf) = 0 requires last sample <= 1e-9 K(0)")
        s = np.arange(v.size) * self.ds
        object.__setattr__(self, "_interp", PchipInterpolator(s, v, extrapolate=False))

    @property
    def support(self) -> float:
        return (len(self.values) - 1) * self.ds

    @property
    def time_scale(self) -> float:
        v = np.asarray(self.values)
        area = np.trapezoid(v, dx=self.ds)
        return float(area / v[0])

    @property
    def slow_scale(self) -> float:
        return self.time_scale

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return np.nan_to_num(self._interp(s), nan=0.0)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.nan_to_num(self._interp.derivative()(s), nan=0.0)

    def cosine(self, omega):
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        out = filon_linear(np.asarray(self.values), self.ds, w).real
        return out.reshape(np.shape(omega))

    def derivative_sine(self, omega):
        # by parts: int_0^S K' sin = K(S) sin(wS) - w int_0^S K cos
        w = np.asarray(omega, dtype=float)
        tail = self.values[-1] * np.sin(w * self.support)
        return tail - w * self.cosine(w)

    def reconstruction_tail(self, omega_max: float) -> float:
        # For the piecewise-linear interpolant, K^C(w) = -(f'(0+) + sum_j J_j cos(w s_j)) / w^2
        # with J_j the slope jumps, plus the jump to zero after the last sample.
        v = np.asarray(self.values)
        slopes = np.append(np.diff(v) / self.ds, 0.0)
        jumps = np.diff(slopes)
        s_j = np.arange(1, v.size) * self.ds
        x = omega_max * s_j
        si, _ = sici(x)
        cos_tail = s_j * (np.cos(x) / x - (0.5 * math.pi - si))  # int_W^inf cos(w s)/w^2 dw
        body = -slopes[0] / omega_max - np.sum(jumps * cos_tail)
        s_last = self.support
        edge = v[-1] * (0.5 * math.pi - sici(omega_max * s_last)[0])
        return float(2.0 / math.pi * (body + edge))

    def to_dict(self) -> dict:
        return {"type": "tabulated", "ds": self.ds, "values": list(self.values)}


MemoryKernel = Union[PronyKernel, TabulatedKernel]


def kernel_from_dict(data: dict) -> MemoryKernel:
    kind = data.get("type")
    if kind == "prony":
        unknown = set(data) - {"type", "terms"}
        if unknown:
            raise ValueError(f"unknown kernel keys: {sorted(unknown)}")
        terms = data["terms"]
        return PronyKernel(tuple(float(t["k"]) for t in terms), tuple(float(t["tau"]) for t in terms))
    if kind == "tabulated":
        unknown = set(data) - {"type", "ds", "values"}
        if unknown:
            raise ValueError(f"unknown kernel keys: {sorted(unknown)}")
        return TabulatedKernel(float(data["ds"]), tuple(float(v) for v in data["values"]))
    raise ValueError(f"unknown kernel type {kind!r}")


@dataclass(frozen=True)
class FrequencyGrid:
    omega: np.ndarray
    weights: np.ndarray
    omega_max: float

    def __post_init__(self):
        if self.omega.size == 0:
            raise ValueError("empty frequency grid")
        if np.any(self.omega <= 0) or np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def integrate(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=([0], [axis]))


def default_grid(k: MemoryKernel, t_max: float, nodes_per_panel: int = 8,
                 omega_max: float | None = None) -> FrequencyGrid:
    """Gauss-Legendre panels on (0, omega_max], omega_max = 80/tau_min by default.

    History transforms oscillate in w at the rate t_max, so panel widths are
    tied to pi/t_max: that width up to omega_max/4, twice it beyond, where
    the integrands are already small.  Slow kernel terms put a peak of width
    1/tau_max at the origin, which gets its own finer band.
    """
    upper = omega_max if omega_max is not None else 80.0 / k.time_scale
    knee = upper / 4.0
    width = math.pi / max(t_max, k.support, 1e-12)
    width = min(width, knee / 4.0)
    peak = 1.0 / k.slow_scale
    parts = []
    start = 0.0
    if 0.5 * peak < width:
        start = min(8.0 * peak, knee / 2.0)
        parts.append(gauss_legendre_panels(start, 0.5 * peak, nodes_per_panel))
    for lo, hi, wd in ((start, knee, width), (knee, upper, 2.0 * width)):
        w, wt = gauss_legendre_panels(hi - lo, wd, nodes_per_panel)
        parts.append((lo + w, wt))
    return FrequencyGrid(omega=np.concatenate([p[0] for p in parts]),
                         weights=np.concatenate([p[1] for p in parts]), omega_max=float(upper))


def kernel_eval(k: MemoryKernel, s: float) -> tuple[float, float]:
    if np.any(np.asarray(s) < 0):
        raise ValueError("kernel is defined for s >= 0 only")
    return k.value(s), k.derivative(s)


def kernel_transforms(k: MemoryKernel, omega) -> tuple[np.ndarray, np.ndarray]:
    """(sine transform of K', cosine transform of K) at positive frequencies."""
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("transforms are evaluated at omega > 0")
    return k.derivative_sine(omega), k.cosine(omega)


def reconstruct_k0(k: MemoryKernel, grid: FrequencyGrid) -> float:
    """-(2/pi) int_0^inf K'^S(w)/w dw: grid quadrature plus the tail past omega_max."""
    body = -2.0 / math.pi * grid.integrate(k.derivative_sine(grid.omega) / grid.omega)
    return float(body + k.reconstruction_tail(grid.omega_max))


def dissipativity_check(k: MemoryKernel, grid: FrequencyGrid,
                        tol: float = RECONSTRUCTION_TOL) -> AdmissibilityReport:
    ks, kc = kernel_transforms(k, grid.omega)
    violations = []
    if np.any(ks >= 0):
        violations.append(Violation("sine transform of K' not negative", float(ks.max())))
    if np.any(kc <= 0):
        violations.append(Violation("cosine transform of K not positive", float(kc.min())))
    k0 = float(k.value(0.0))
    rel = abs(reconstruct_k0(k, grid) - k0) / k0
    if rel > tol:
        violations.append(Violation("K(0) reconstruction", rel))
    return AdmissibilityReport(passed=not violations, violations=tuple(violations))
