"""Temperature-gradient histories and their integrated/transformed forms.

Samples live on a uniform grid t_k = k*dt and are reconstructed piecewise
linearly; before the earliest stored sample the gradient is zero.  All
quadratures (integrated history, transforms, convolutions) use the same
reconstruction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernel import FrequencyGrid
from .quadrature import filon_linear, linear_moments


class SequencingError(ValueError):
    """Raised when a sample is appended out of order."""


class GradientHistory:
    """Append-only gradient record for one or more spatial stations.

    ``initial`` optionally prescribes the gradient at times -dt, -2dt, ...
    (row m-1 holds time -m*dt).
    """

    def __init__(self, dt: float, n_stations: int = 1, initial: np.ndarray | None = None,
                 capacity: int = 64):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.n_stations = int(n_stations)
        self._buf = np.zeros((max(capacity, 1), self.n_stations))
        self._n = 0
        if initial is None:
            self.initial = np.zeros((0, self.n_stations))
        else:
            init = np.asarray(initial, dtype=float)
            self.initial = init.reshape(init.shape[0], -1) * np.ones((1, self.n_stations))

    def __len__(self) -> int:
        return self._n

    @property
    def values(self) -> np.ndarray:
        return self._buf[: self._n]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self._n) * self.dt

    @property
    def initial_length(self) -> float:
        return self.initial.shape[0] * self.dt

    def record(self, t: float, g) -> "GradientHistory":
        expected = self._n * self.dt
        if abs(t - expected) > 1e-9 * max(self.dt, abs(expected)):
            raise SequencingError(f"expected sample at t={expected:.12g}, got t={t:.12g}")
        if self._n == self._buf.shape[0]:
            grown = np.zeros((2 * self._buf.shape[0], self.n_stations))
            grown[: self._n] = self._buf[: self._n]
            self._buf = grown
        self._buf[self._n] = g
        self._n += 1
        return self

    def index_of(self, t: float) -> int:
        n = int(round(t / self.dt))
        if n < 0 or n >= self._n or abs(n * self.dt - t) > 1e-9 * max(self.dt, abs(t)):
            raise ValueError(f"t={t} is not a recorded sample time")
        return n

    def lag_series(self, t: float) -> np.ndarray:
        """Gradient at lags s_j = j*dt before t, j = 0 .. n + len(initial)."""
        if self._n == 0:
            raise ValueError("empty history")
        n = self.index_of(t)
        recent = self._buf[: n + 1][::-1]
        return np.concatenate([recent, self.initial], axis=0)

    def decimated(self) -> "GradientHistory":
        """Every second sample (dt doubled); loses accuracy at the O(dt^2) level."""
        out = GradientHistory(2 * self.dt, self.n_stations, self.initial[1::2] if len(self.initial) else None)
        vals = self.values[::2]
        out._buf = vals.copy() if len(vals) else out._buf
        out._n = len(vals)
        return out

    def to_csv(self, path: str | Path, station: int = 0) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "g"])
            for t, g in zip(self.times, self.values[:, station]):
                w.writerow([repr(float(t)), repr(float(g))])


def record_sample(h: GradientHistory, t: float, g) -> GradientHistory:
    return h.record(t, g)


def _cumulative(lag: np.ndarray, dt: float) -> np.ndarray:
    c = np.zeros_like(lag)
    c[1:] = np.cumsum(0.5 * dt * (lag[1:] + lag[:-1]), axis=0)
    return c


def integrated_history(h: GradientHistory, t: float, s) -> tuple[np.ndarray, np.ndarray]:
    """(integrated history at lag s, its total over the whole past).

    Returns arrays of shape (n_stations,) for scalar s, (len(s), n_stations)
    for array s.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("lag s must be nonnegative")
    lag = h.lag_series(t)
    c = _cumulative(lag, h.dt)
    total = c[-1]
    flat = np.atleast_1d(s_arr)
    j = np.minimum((flat / h.dt).astype(int), lag.shape[0] - 1)
    frac = flat - j * h.dt
    beyond = j >= lag.shape[0] - 1
    jn = np.minimum(j + 1, lag.shape[0] - 1)
    slope = (lag[jn] - lag[j]) / h.dt
    val = c[j] + frac[:, None] * lag[j] + 0.5 * frac[:, None] ** 2 * slope
    val = np.where(beyond[:, None], total[None, :], val)
    return (val[0] if s_arr.ndim == 0 else val), total


@dataclass(frozen=True)
class HistoryTransforms:
    sine: np.ndarray      # (n_omega, n_stations)
    cosine: np.ndarray
    total: np.ndarray     # (n_stations,)
    t: float


def abel_tail(total, s_star: float, omega) -> tuple[np.ndarray, np.ndarray]:
    """Abel-regularised sine/cosine transforms of total * 1{s >= s_star}."""
    omega = np.asarray(omega, dtype=float)[:, None]
    total = np.atleast_1d(total)[None, :]
    return total * np.cos(omega * s_star) / omega, -total * np.sin(omega * s_star) / omega


def history_transforms(h: GradientHistory, t: float, grid: FrequencyGrid) -> HistoryTransforms:
    """Sine/cosine transforms of the integrated history at time t.

    The integrated history is split into the compactly supported part on
    [0, s*] and the constant tail Theta for s >= s*.  The compact part is
    integrated by parts against the piecewise-linear gradient (exact Filon
    quadrature); the tail takes its Abel-regularised closed form.
    """
    lag = h.lag_series(t)
    w = grid.omega
    s_star = (lag.shape[0] - 1) * h.dt
    total = _cumulative(lag, h.dt)[-1]
    G = filon_linear(lag, h.dt, w)                      # int_0^s* g(t-s) e^{iws} ds
    edge = np.exp(1j * w * s_star)[:, None] * total[None, :]
    compact = (edge - G) / (1j * w[:, None])            # int_0^s* thbar e^{iws} ds
    tail_s, tail_c = abel_tail(total, s_star, w)
    return HistoryTransforms(
        sine=compact.imag + tail_s,
        cosine=compact.real + tail_c,
        total=total,
        t=float(t),
    )


def memory_energy(kernel, transforms: HistoryTransforms, grid: FrequencyGrid) -> np.ndarray:
    """-(1/pi) int w K'^S(w) [(thbar^S)^2 + (thbar^C)^2] dw, per station."""
    ks = kernel.derivative_sine(grid.omega)
    dens = grid.omega[:, None] * ks[:, None] * (transforms.sine**2 + transforms.cosine**2)
    return -grid.integrate(dens) / math.pi


class RecursiveTransforms:
    """Time-marching form of the history transforms.

    Keeps H(w) = int_0^inf g(t-s) e^{iws} ds per station, which for a
    piecewise-linear gradient advances exactly as
    H(t+dt) = e^{iw dt} H(t) + dt*(lo(w dt) g(t+dt) + hi(w dt) g(t)).
    The integrated-history transforms are thbar^S = Re H / w and
    thbar^C = -Im H / w.
    """

    def __init__(self, kernel, grid: FrequencyGrid, dt: float, n_stations: int):
        self.grid = grid
        w = grid.omega
        self.rot = np.exp(1j * w * dt)[:, None]
        lo, hi = linear_moments(w * dt)
        self.lo = (dt * lo)[:, None]
        self.hi = (dt * hi)[:, None]
        ks = kernel.derivative_sine(w)
        self._mem_w = -grid.weights * ks / w / math.pi          # memory weights on |H|^2
        self._flux_w = 2.0 / math.pi * grid.weights * ks / w    # flux weights on Re H
        self.H = np.zeros((w.size, n_stations), dtype=complex)
        self._step = np.concatenate([self.lo, self.hi], axis=1)     # (n_omega, 2)

    def advance(self, g_old: np.ndarray, g_new: np.ndarray) -> None:
        self.H *= self.rot
        self.H += self._step @ np.stack([g_new, g_old]).astype(complex)

    def memory(self) -> np.ndarray:
        flat = self.H.view(np.float64)                    # interleaved real/imag parts
        return (self._mem_w @ (flat * flat)).reshape(-1, 2).sum(axis=1)

    def flux(self, theta0) -> np.ndarray:
        return theta0 * (self._flux_w @ self.H.real)
