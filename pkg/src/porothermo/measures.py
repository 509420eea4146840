"""Energy densities, identity residuals, surface power measures and decay checks.

Every routine reads a frozen Trajectory.  Face quantities (strain energy,
memory energy, fluxes) are mapped to nodes by averaging the two adjacent
faces, which preserves volume integrals exactly under the half-cell node
weights used by the integrator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .constitutive import GeneralizedStrain, form_energy
from .history import history_transforms, memory_energy
from .kernel import FrequencyGrid
from .simulator import Station, Trajectory

TOL_DECAY = 1e-2
FLOOR = 1e-8


class MeasureError(ValueError):
    pass


def face_to_node(vals: np.ndarray) -> np.ndarray:
    out = np.empty(vals.shape[:-1] + (vals.shape[-1] + 1,))
    out[..., 1:-1] = 0.5 * (vals[..., 1:] + vals[..., :-1])
    out[..., 0] = vals[..., 0]
    out[..., -1] = vals[..., -1]
    return out


def _face_avg(a):
    return 0.5 * (a[..., 1:] + a[..., :-1])


def _strains(traj: Trajectory, idx=slice(None)):
    dx = traj.grid.dx
    u, phi = traj.u[idx], traj.phi[idx]
    return GeneralizedStrain(F=np.diff(u, axis=-1) / dx, pi=np.diff(phi, axis=-1) / dx, psi=_face_avg(phi))


def _face_material(traj: Trajectory):
    from .material import MaterialParams

    return MaterialParams(**traj.coef["face"])


# -- energy -------------------------------------------------------------


@dataclass(frozen=True)
class EnergyDensityRecord:
    """Per-node densities at one time; psiM = wstar + thermal + memory."""

    t: float
    x: np.ndarray
    kinetic: np.ndarray
    wstar: np.ndarray
    thermal: np.ndarray
    memory: np.ndarray

    @property
    def psiM(self) -> np.ndarray:
        return self.wstar + self.thermal + self.memory

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.psiM


def _wstar_faces(traj: Trajectory, idx=slice(None)):
    e = _strains(traj, idx)
    return form_energy(_face_material(traj), e, e)


def _kinetic_nodes(traj: Trajectory, idx=slice(None)):
    c = traj.coef["node"]
    return 0.5 * c["rho"] * (traj.v[idx] ** 2 + c["chi"] * traj.w[idx] ** 2)


def _thermal_nodes(traj: Trajectory, idx=slice(None)):
    c = traj.coef["node"]
    return 0.5 * c["rho"] * c["c"] * traj.theta[idx] ** 2 / c["theta0"]


def energy_densities(traj: Trajectory, t: float, grid: FrequencyGrid | None = None) -> EnergyDensityRecord:
    """Densities at a recorded time, with the memory term rebuilt from the gradient history."""
    if traj.history is None or len(traj.history) == 0:
        raise MeasureError("trajectory carries no gradient history")
    n = traj.history.index_of(t)
    grid = grid or traj.freq
    ht = history_transforms(traj.history, traj.t[n], grid)
    mem = memory_energy(traj.scenario.kernel, ht, grid)
    return EnergyDensityRecord(
        t=float(traj.t[n]),
        x=traj.grid.x,
        kinetic=_kinetic_nodes(traj, n),
        wstar=face_to_node(_wstar_faces(traj, n)),
        thermal=_thermal_nodes(traj, n),
        memory=face_to_node(mem),
    )


def energy_density_series(traj: Trajectory) -> np.ndarray:
    """Total density K + rho Psi_M per node at every step, memory from the recorded transforms."""
    return (_kinetic_nodes(traj) + _thermal_nodes(traj)
            + face_to_node(_wstar_faces(traj) + traj.memory))


def total_energy(traj: Trajectory) -> np.ndarray:
    return energy_density_series(traj) @ traj.coef["vol"]


def conservation_drift(traj: Trajectory) -> tuple[float, float]:
    """(max relative drift of the total energy after the loads stop, load end time)."""
    ld = traj.scenario.load
    t_end = ld.t_end if (ld.amplitude != 0 and ld.is_boundary) or any(
        (traj.scenario.body.f, traj.scenario.body.ell, traj.scenario.body.r)) else 0.0
    i0 = int(np.searchsorted(traj.t, t_end - 1e-12))
    E = total_energy(traj)
    if i0 >= E.size or E[i0] == 0:
        return 0.0, t_end
    return float(np.max(np.abs(E[i0:] - E[i0])) / abs(E[i0])), t_end


# -- pointwise identities -----------------------------------------------


@dataclass(frozen=True)
class ResidualSeries:
    t: np.ndarray           # evaluation times
    residual: np.ndarray    # max normalised residual at each time
    scale: float

    @property
    def max(self) -> float:
        return float(self.residual.max(initial=0.0))


def dissipation_residual(traj: Trajectory, indices=None) -> ResidualSeries:
    """Rate of rho Psi_M against the supplied power, per face.

    Centered differences over one simulation step around each evaluation
    step n; states entering the right side are the averages of steps n-1
    and n+1, which makes the quadratic parts agree exactly, while the
    memory part compares its recorded energy with -q g / theta0.
    """
    if traj.n_steps < 2:
        raise MeasureError("need at least three recorded times")
    if indices is None:
        indices = traj.output_indices()
    idx = np.array([i for i in indices if 0 < i < traj.n_steps], dtype=int)
    if idx.size == 0:
        idx = np.arange(1, traj.n_steps)
    f = traj.coef["face"]
    dt = traj.dt
    lo, hi = idx - 1, idx + 1

    def psi(k):
        thb = _face_avg(traj.theta[k])
        return _wstar_faces(traj, k) + 0.5 * f["rho"] * f["c"] * thb**2 / f["theta0"] + traj.memory[k]

    lhs = (psi(hi) - psi(lo)) / (2 * dt)

    e_lo, e_hi = _strains(traj, lo), _strains(traj, hi)
    mid = GeneralizedStrain(*((getattr(e_lo, n) + getattr(e_hi, n)) / 2 for n in ("F", "pi", "psi")))
    rate = GeneralizedStrain(*((getattr(e_hi, n) - getattr(e_lo, n)) / (2 * dt) for n in ("F", "pi", "psi")))
    th_lo, th_hi = _face_avg(traj.theta[lo]), _face_avg(traj.theta[hi])
    th = 0.5 * (th_lo + th_hi)
    th_dot = (th_hi - th_lo) / (2 * dt)

    S = f["C"] * mid.F + f["D"] * mid.pi + f["B"] * mid.psi + f["Mc"] * th
    h = f["D"] * mid.F + f["A"] * mid.pi + f["b"] * mid.psi + f["a"] * th
    g = -f["B"] * mid.F - f["b"] * mid.pi - f["xi"] * mid.psi - f["m"] * th
    rho_tau = (-f["theta0"] * (f["Mc"] * rate.F + f["a"] * rate.pi + f["m"] * rate.psi)
               + f["rho"] * f["c"] * th_dot)
    terms = [rho_tau * th / f["theta0"], S * rate.F, h * rate.pi, -g * rate.psi,
             -traj.q[idx] * traj.g[idx] / f["theta0"]]
    rhs = sum(terms)
    scale = max(float(max(np.abs(tm).max() for tm in terms)), 0.0)
    if scale == 0.0:
        return ResidualSeries(traj.t[idx], np.zeros(idx.size), 0.0)
    res = np.abs(lhs - rhs) / np.maximum(scale, np.abs(rhs))
    return ResidualSeries(traj.t[idx], res.max(axis=1), scale)


def flux_bound_margin(traj: Trajectory, n: int | None = None) -> np.ndarray:
    """K0 theta0 c (2 rho Psi_M - 2 W* - rho c theta^2/theta0) - q^2 per face (all steps if n is None)."""
    f = traj.coef["face"]
    k = slice(None) if n is None else n
    K0 = traj.constants.K0
    return K0 * f["theta0"] * f["c"] * 2.0 * traj.memory[k] - traj.q[k] ** 2


def flux_bound_check(traj: Trajectory) -> tuple[float, float]:
    """(min margin, scale) over all faces and steps."""
    m = flux_bound_margin(traj)
    scale = float(max(np.abs(traj.q).max() ** 2, 2 * traj.constants.K0 * np.abs(traj.memory).max()))
    return float(m.min(initial=0.0)), scale


def flux_path_residual(traj: Trajectory, every: int = 1) -> tuple[float, float]:
    """(max |q_fast - q_convolution|, max |q|) over the trajectory."""
    from .constitutive import heat_flux_time

    theta0 = traj.coef["face"]["theta0"]
    worst = 0.0
    for n in range(0, traj.n_steps + 1, every):
        slow = heat_flux_time(traj.scenario.kernel, traj.history, traj.t[n], theta0)
        worst = max(worst, float(np.abs(slow - traj.q[n]).max()))
    return worst, float(np.abs(traj.q).max())


# -- surface measures -----------------------------------------------------


@dataclass(frozen=True)
class SurfaceMeasureSeries:
    stations: tuple[Station, ...]
    t: np.ndarray
    sigma: tuple[float, ...]
    I: np.ndarray       # (n_sigma, n_stations, n_t)
    P: np.ndarray       # (n_stations, n_t)
    Q: np.ndarray
    power: np.ndarray   # (n_stations, n_t)

    @property
    def r(self) -> np.ndarray:
        return np.array([s.r for s in self.stations])


def station_power(traj: Trajectory, st: Station) -> np.ndarray:
    """S v + h w - q theta / theta0 across the cross-section, normal +1."""
    if st.kind == "node":
        c = traj.coef["node"]
        return traj.s_bc * traj.v[:, 0] - traj.q_bc * traj.theta[:, 0] / c["theta0"][0]
    j = st.index
    f = {k: v[j] for k, v in traj.coef["face"].items()}
    dx = traj.grid.dx
    E = (traj.u[:, j + 1] - traj.u[:, j]) / dx
    P = (traj.phi[:, j + 1] - traj.phi[:, j]) / dx
    pb = 0.5 * (traj.phi[:, j + 1] + traj.phi[:, j])
    tb = 0.5 * (traj.theta[:, j + 1] + traj.theta[:, j])
    vb = 0.5 * (traj.v[:, j + 1] + traj.v[:, j])
    wb = 0.5 * (traj.w[:, j + 1] + traj.w[:, j])
    S = f["C"] * E + f["D"] * P + f["B"] * pb + f["Mc"] * tb
    h = f["D"] * E + f["A"] * P + f["b"] * pb + f["a"] * tb
    return S * vb + h * wb - traj.q[:, j] * tb / f["theta0"]


def surface_measures(traj: Trajectory, sigmas=None, radii=None) -> SurfaceMeasureSeries:
    from .simulator import DataSupport

    sigmas = tuple(traj.scenario.sigma if sigmas is None else sigmas)
    if any(s <= 0 for s in sigmas):
        raise MeasureError("sigma must be positive")
    sup = traj.support if radii is None else DataSupport(traj.support.x0, traj.support.L, tuple(radii))
    stations = tuple(sup.stations(traj.grid))
    t = traj.t
    power = np.array([station_power(traj, s) for s in stations]).reshape(len(stations), t.size)

    def integ(y):
        if t.size < 2:
            return np.zeros_like(y)
        return cumulative_trapezoid(y, t, axis=-1, initial=0.0)

    P = -integ(power)
    Q = integ(P)
    I = np.array([-integ(np.exp(-s * t) * power) for s in sigmas]).reshape(len(sigmas), len(stations), t.size)
    return SurfaceMeasureSeries(stations, t, sigmas, I, P, Q, power)


def region_energy(traj: Trajectory, st: Station, density: np.ndarray | None = None) -> np.ndarray:
    """Energy in B_r = (x0 + r, L) at every step."""
    dens = energy_density_series(traj) if density is None else density
    vol = traj.coef["vol"]
    start = 0 if st.kind == "node" else st.index + 1
    return dens[:, start:] @ vol[start:]


@dataclass(frozen=True)
class BalanceResiduals:
    sigma: float
    r: np.ndarray
    t: np.ndarray
    ball_residual: np.ndarray   # (n_stations, n_t), normalised by I(0, T)
    shell_residual: np.ndarray  # (n_stations - 1, n_t), adjacent station pairs
    scale: float

    @property
    def ball_max(self) -> float:
        return float(np.abs(self.ball_residual).max(initial=0.0))

    @property
    def shell_max(self) -> float:
        return float(np.abs(self.shell_residual).max(initial=0.0))


def energy_balance_check(traj: Trajectory, sigma: float, measures: SurfaceMeasureSeries | None = None,
                         time_indices=None) -> BalanceResiduals:
    ms = measures or surface_measures(traj, (sigma,))
    k = ms.sigma.index(sigma)
    t = traj.t
    dens = energy_density_series(traj)
    w = np.exp(-sigma * t)
    rhs = []
    for st in ms.stations:
        e = region_energy(traj, st, dens)
        acc = cumulative_trapezoid(w * e, t, initial=0.0) if t.size > 1 else np.zeros_like(e)
        rhs.append(w * e + sigma * acc)
    rhs = np.array(rhs)
    I = ms.I[k]
    scale = float(abs(I[0, -1]))
    tidx = np.arange(t.size) if time_indices is None else np.asarray(time_indices)
    if scale == 0.0:
        z = np.zeros((len(ms.stations), tidx.size))
        return BalanceResiduals(sigma, ms.r, t[tidx], z, z[:-1], 0.0)
    ball = (I - rhs)[:, tidx] / scale
    # difference form over B(r_k, r_{k+1}): I(r_k) - I(r_{k+1}) against the same region integrals
    shell = ((I[:-1] - I[1:]) - (rhs[:-1] - rhs[1:]))[:, tidx] / scale
    return BalanceResiduals(sigma, ms.r, t[tidx], ball, shell, scale)


# -- decay verification -----------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    margin: float          # >= 0 means satisfied
    value: float
    location: dict
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "value": self.value, "location": self.location}


@dataclass(frozen=True)
class DecayReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _bound_check(name, value, bound, allowance, scale, where, mask=None) -> CheckResult:
    """value <= bound + allowance wherever mask holds; margin and value are normalised by scale."""
    excess = np.asarray(value, dtype=float) - np.asarray(bound, dtype=float)
    allowance = np.broadcast_to(np.asarray(allowance, dtype=float), excess.shape)
    if mask is not None:
        mask = np.broadcast_to(mask, excess.shape)
        excess = np.where(mask, excess, -np.inf)
    if excess.size == 0 or not np.isfinite(excess.max(initial=-np.inf)):
        return CheckResult(name, 0.0, 0.0, {}, True)
    norm = scale if scale > 0 else 1.0
    i = int(np.argmax(excess))
    slack = np.where(np.isfinite(excess), allowance - excess, np.inf)
    loc = {k: float(np.broadcast_to(v, excess.shape).flat[i]) for k, v in where.items()}
    ok = bool(slack.min() >= 0)
    return CheckResult(name, float(slack.min()) / norm, float(excess.flat[i]) / norm, loc, ok)


def cone_field_ratio(traj: Trajectory) -> tuple[float, float, float]:
    """(sup of |v|+|w|+|theta| outside the cone / peak, time, x) of the worst point."""
    F = np.abs(traj.v) + np.abs(traj.w) + np.abs(traj.theta)
    peak = float(F.max(initial=0.0))
    r = traj.support.distance(traj.grid.x)
    outside = r[None, :] >= traj.constants.zeta * traj.t[:, None]
    Fo = np.where(outside, F, 0.0)
    if peak == 0.0:
        return 0.0, 0.0, 0.0
    i, j = np.unravel_index(int(Fo.argmax()), F.shape)
    return float(Fo[i, j] / peak), float(traj.t[i]), float(traj.grid.x[j])


def verify_decay(traj: Trajectory, sigmas=None, tol: float = TOL_DECAY, floor: float = FLOOR,
                 measures: SurfaceMeasureSeries | None = None) -> DecayReport:
    ms = measures or surface_measures(traj, sigmas)
    zeta = traj.constants.zeta
    t = ms.t
    r = ms.r
    R, Tt = np.meshgrid(r, t, indexing="ij")
    inside = R <= zeta * Tt
    checks = []

    for k, s in enumerate(ms.sigma):
        I = ms.I[k]
        I0T = abs(I[0, -1])
        fl = floor * I0T
        where = {"r": R, "t": Tt, "sigma": np.full_like(R, s)}
        where_next = {key: v[1:] for key, v in where.items()}
        # (a) nonincreasing in r
        checks.append(_bound_check(f"I nonincreasing in r (sigma={s:g})", I[1:], I[:-1],
                                   tol * np.abs(I[:-1]) + fl, I0T, where_next))
        # (b) exponential decay inside the cone
        bound = np.exp(-s * R / zeta) * I[0][None, :]
        checks.append(_bound_check(f"exponential decay (sigma={s:g})", I, bound, tol * np.abs(bound) + fl,
                                   I0T, where, inside))
        # (c) vanishing outside the cone
        checks.append(_bound_check(f"I outside cone (sigma={s:g})", I, 0.0, fl, I0T, where, ~inside | (R == zeta * Tt)))
        # (f) positivity
        checks.append(_bound_check(f"I nonnegative (sigma={s:g})", -I, 0.0, fl, I0T, where))

    Q = ms.Q
    Q0T = abs(Q[0, -1])
    flq = floor * Q0T
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(Tt > 0, 1.0 - R / (zeta * Tt), 0.0)
    qb = lin * Q[0][None, :]
    checks.append(_bound_check("linear decay of Q", Q, qb, tol * np.abs(qb) + flq, Q0T, {"r": R, "t": Tt},
                               inside & (Tt > 0)))
    checks.append(_bound_check("Q nondecreasing in t", -np.diff(Q, axis=1), 0.0, flq, Q0T,
                               {"r": R[:, 1:], "t": Tt[:, 1:]}))

    ratio, tc, xc = cone_field_ratio(traj)
    checks.append(CheckResult("field vanishes outside cone", floor - ratio, ratio, {"t": tc, "x": xc}, ratio <= floor))

    if traj.n_steps >= 2:
        dr = dissipation_residual(traj, np.arange(1, traj.n_steps))
        i = int(np.argmax(dr.residual))
        checks.append(CheckResult("dissipation identity", tol - dr.max, dr.max, {"t": float(dr.t[i])},
                                  dr.max <= tol))
    m, scale = flux_bound_check(traj)
    lim = -1e-9 * scale
    checks.append(CheckResult("flux bound", m - lim, m, {}, m >= lim))

    for s in ms.sigma:
        br = energy_balance_check(traj, s, ms, traj.output_indices())
        checks.append(CheckResult(f"energy identity (sigma={s:g})", tol - br.ball_max, br.ball_max, {}, br.ball_max <= tol))

    fres, qmax = traj.max_flux_residual, float(np.abs(traj.q).max(initial=0.0))
    allowed = max(1e-6, 1e-3 * qmax)
    checks.append(CheckResult("flux path agreement", allowed - fres, fres, {}, fres <= allowed))

    drift, t_end = conservation_drift(traj)
    checks.append(CheckResult("energy conservation", 1e-3 - drift, drift, {"t_from": t_end}, drift <= 1e-3))
    return DecayReport(tuple(checks))


# -- front tracking -----------------------------------------------------------


def leading_edge(x: np.ndarray, field_vals: np.ndarray, rel: float = 1e-4) -> np.ndarray:
    """Largest x where |field| exceeds rel * (max |field| at that time), per time row."""
    a = np.abs(field_vals)
    thr = rel * a.max(axis=1, keepdims=True)
    hit = (a > thr) & (thr > 0)
    last = np.where(hit.any(axis=1), a.shape[1] - 1 - np.argmax(hit[:, ::-1], axis=1), 0)
    return x[last]


def front_speed(traj: Trajectory, name: str = "theta", t_window=(1.5, None), rel: float = 1e-4) -> float:
    """Least-squares slope of the leading edge position over a time window."""
    vals = getattr(traj, name)
    pos = leading_edge(traj.grid.x, vals, rel)
    lo = t_window[0]
    hi = t_window[1] if t_window[1] is not None else traj.t[-1]
    sel = (traj.t >= lo) & (traj.t <= hi)
    return float(np.polyfit(traj.t[sel], pos[sel], 1)[0])


# -- writers ----------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_measures_csv(path: str | Path, traj: Trajectory, ms: SurfaceMeasureSeries) -> None:
    idx = traj.output_indices()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "r", "t", "I", "P", "Q"])
        for k, s in enumerate(ms.sigma):
            for j, st in enumerate(ms.stations):
                for n in idx:
                    w.writerow([_fmt(s), _fmt(st.r), _fmt(ms.t[n]), _fmt(ms.I[k, j, n]),
                                _fmt(ms.P[j, n]), _fmt(ms.Q[j, n])])


def write_energy_csv(path: str | Path, traj: Trajectory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "t", "kinetic", "wstar", "thermal", "memory", "psiM"])
        for n in traj.output_indices():
            rec = energy_densities(traj, traj.t[n])
            for i in range(rec.x.size):
                w.writerow([_fmt(rec.x[i]), _fmt(rec.t), _fmt(rec.kinetic[i]), _fmt(rec.wstar[i]),
                            _fmt(rec.thermal[i]), _fmt(rec.memory[i]), _fmt(rec.psiM[i])])


def write_decay_report(path: str | Path, report: DecayReport) -> None:
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [clean(v) for v in o]
        return o

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(report.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")


def peak_positions(x: np.ndarray, field_vals: np.ndarray) -> np.ndarray:
    """Position of the maximum of each row, refined by a parabola through the top three samples."""
    i = np.clip(np.argmax(field_vals, axis=1), 1, x.size - 2)
    rows = np.arange(field_vals.shape[0])
    a, b, c = field_vals[rows, i - 1], field_vals[rows, i], field_vals[rows, i + 1]
    den = a - 2 * b + c
    shift = np.where(den != 0, 0.5 * (a - c) / np.where(den != 0, den, 1.0), 0.0)
    return x[i] + shift * (x[1] - x[0])


def peak_speed(traj: Trajectory, name: str = "u", t_window=(1.5, None)) -> float:
    pos = peak_positions(traj.grid.x, getattr(traj, name))
    hi = t_window[1] if t_window[1] is not None else traj.t[-1]
    sel = (traj.t >= t_window[0]) & (traj.t <= hi)
    return float(np.polyfit(traj.t[sel], pos[sel], 1)[0])
