"""Explicit 1D integrator for the coupled mechanics/voids/heat system.

Layout: nodes x_i = i*dx (i = 0..N) carry u, v, phi, w = phi', theta;
faces x_{i+1/2} carry the strains, the stresses, the temperature gradient
and the heat flux.  Differences between neighbouring nodes live on faces and
face averages are mapped back to nodes, which makes the semi-discrete energy
balance telescope exactly (summation by parts).  Boundary nodes own half
cells.

One step of length dt:
  * velocity Verlet for (u, v) and (phi, w);
  * Heun predictor/corrector for theta, with the coupling heat input taken
    from the exact strain increments of the mechanical update;
  * exponential-integrator update of the Prony partial fluxes, exact for a
    gradient that is linear in time across the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, LoadSpec, Scenario, scenario_from_config
from .constitutive import heat_flux_time
from .history import GradientHistory, RecursiveTransforms
from .kernel import FrequencyGrid, PronyKernel, default_grid
from .material import DerivedConstants, derive_constants

STATION_FRACTIONS = tuple(k / 10 for k in range(10)) + (1.05, 1.2)
_BLOWUP = 1e150


class InstabilityError(RuntimeError):
    def __init__(self, field_name: str, t: float):
        super().__init__(f"numerical instability in field {field_name!r} at t={t:.6g}")
        self.field = field_name
        self.t = t


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if self.N < 16:
            raise ConfigError(f"grid N must be at least 16, got {self.N}")
        if not self.L > 0:
            raise ConfigError("grid L must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)

    @property
    def x_faces(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.dx


@dataclass(frozen=True)
class Station:
    """Measurement cross-section: the nominal radius and where it landed on the grid."""

    r_nominal: float
    r: float
    x: float
    kind: str     # "node" (left boundary node 0) or "face"
    index: int


@dataclass(frozen=True)
class DataSupport:
    x0: float
    L: float
    radii: tuple[float, ...]

    def distance(self, x):
        return np.maximum(0.0, np.asarray(x, dtype=float) - self.x0)

    def stations(self, grid: Grid) -> list[Station]:
        out = []
        xf = grid.x_faces
        for r in self.radii:
            x = self.x0 + r
            if not x < 0.8 * self.L:
                raise ConfigError(f"station r={r:.6g} lies outside (x0, 0.8 L)")
            if x == 0.0:
                out.append(Station(r, 0.0, 0.0, "node", 0))
                continue
            j = int(np.searchsorted(xf, x - 1e-12 * grid.dx))
            out.append(Station(r, float(xf[j] - self.x0), float(xf[j]), "face", j))
        return out


def bump(y, profile: str = "smooth"):
    """Compactly supported bump on (-1, 1) with peak 1 at y = 0."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1.0
    s = np.where(inside, 1.0 - y * y, 1.0)
    if profile == "smooth":
        val = np.exp(1.0 - 1.0 / s)
    elif profile == "poly":
        val = s**3
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return np.where(inside, val, 0.0)


def space_profile(load: LoadSpec, x):
    if load.x0 <= 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return bump(2.0 * np.asarray(x) / load.x0 - 1.0, load.profile)


def time_profile(load: LoadSpec, t):
    """Pulse of duration t1 starting at the onset time."""
    if load.t1 <= 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    return bump(2.0 * (np.asarray(t) - load.onset) / load.t1 - 1.0, load.profile)


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    qp: np.ndarray      # (n_terms, N) partial fluxes on faces
    g: np.ndarray       # temperature gradient on faces

    @property
    def q(self) -> np.ndarray:
        return self.qp.sum(axis=0)


def stable_dt(constants: DerivedConstants, dx: float, cfl: float, T: float | None = None) -> float:
    """cfl*dx/zeta, shrunk so that T is an integer number of steps."""
    if not 0 < cfl <= 0.9:
        raise ConfigError(f"cfl must lie in (0, 0.9], got {cfl}")
    if not constants.zeta > 0:
        raise ValueError("zeta must be positive")
    dt = cfl * dx / constants.zeta
    if T:
        dt = T / math.ceil(T / dt - 1e-12)
    return dt


def _avg(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a[..., 1:] + a[..., :-1])


@dataclass
class Trajectory:
    """Dense record of a run; arrays are read-only once the run finishes."""

    scenario: Scenario
    grid: Grid
    support: DataSupport
    constants: DerivedConstants
    freq: FrequencyGrid
    dt: float
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    g: np.ndarray
    memory: np.ndarray
    q_bc: np.ndarray
    s_bc: np.ndarray
    history: GradientHistory
    flux_checks: list = field(default_factory=list)
    coef: dict = field(default_factory=dict, repr=False)

    def freeze(self) -> "Trajectory":
        for name in ("t", "u", "v", "phi", "w", "theta", "q", "g", "memory", "q_bc", "s_bc"):
            getattr(self, name).setflags(write=False)
        return self

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    def output_indices(self) -> np.ndarray:
        n_out = max(self.scenario.n_snapshots, 1)
        if self.n_steps == 0:
            return np.array([0])
        return np.unique(np.round(np.linspace(0, self.n_steps, n_out)).astype(int))

    @property
    def max_flux_residual(self) -> float:
        return max((r for _, r in self.flux_checks), default=0.0)


class Simulator:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.grid = Grid(scenario.L, scenario.N)
        self.constants = derive_constants(scenario.material, scenario.kernel)
        if self.constants.zeta * scenario.T > 0.8 * scenario.L:
            raise ConfigError(
                f"zeta*T = {self.constants.zeta * scenario.T:.4g} exceeds 0.8 L = {0.8 * scenario.L:.4g}"
            )
        self.dt = stable_dt(self.constants, self.grid.dx, scenario.cfl, scenario.T)
        self.n_steps = int(round(scenario.T / self.dt)) if scenario.T > 0 else 0
        load = scenario.load
        x0 = load.x0 if load.amplitude != 0 or any(
            (scenario.body.f, scenario.body.ell, scenario.body.r)) else 0.0
        zT = self.constants.zeta * scenario.T
        self.support = DataSupport(x0, scenario.L, tuple(f * zT for f in STATION_FRACTIONS))
        self._setup_coefficients()
        self._setup_flux()

    # -- setup -----------------------------------------------------------

    def _setup_coefficients(self):
        n = self.grid.N + 1
        c = self.sc.material.on_nodes(n)
        f = {k: _avg(v) for k, v in c.items()}
        dx = self.grid.dx
        self.node = c
        self.face = f
        vol = np.full(n, dx)
        vol[0] = vol[-1] = 0.5 * dx
        self.vol = vol
        self.traction = self.sc.load.type == "boundary_traction_pulse"
        # Dirichlet masks: u fixed at both ends unless traction is applied on the left
        self.u_free = np.ones(n, bool)
        self.u_free[-1] = False
        if not self.traction:
            self.u_free[0] = False
        self.phi_free = np.ones(n, bool)
        self.phi_free[[0, -1]] = False
        self.theta_free = np.ones(n, bool)
        self.theta_free[-1] = False
        x = self.grid.x
        self.bump_x = space_profile(self.sc.load, x)

    def _setup_flux(self):
        k = self.sc.kernel
        dt = self.dt
        self.prony = isinstance(k, PronyKernel)
        if self.prony:
            kk = np.asarray(k.k)[:, None]
            tau = np.asarray(k.tau)[:, None]
            h = dt / tau
            e = np.exp(-h)
            frac = -np.expm1(-h) / h
            scale = self.face["theta0"][None, :] * kk * tau
            self._decay = e
            self._c0 = scale * (frac - e)
            self._c1 = scale * (1.0 - frac)
            self.n_terms = kk.shape[0]
        else:
            s = np.arange(self.n_steps + 2) * dt
            self._kvals = k.value(s)
            self.n_terms = 1

    # -- loads -----------------------------------------------------------

    def q_bc(self, t: float) -> float:
        ld = self.sc.load
        if ld.type != "boundary_heat_pulse":
            return 0.0
        return float(ld.amplitude * time_profile(ld, t))

    def s_bc(self, t: float) -> float:
        ld = self.sc.load
        if ld.type != "boundary_traction_pulse":
            return 0.0
        return float(ld.amplitude * time_profile(ld, t))

    def _body(self, amp: float, t: float):
        if amp == 0:
            return None
        return amp * self.bump_x * float(time_profile(self.sc.load, t))

    # -- spatial operators ----------------------------------------------

    def _stresses(self, u, phi, theta):
        dx = self.grid.dx
        f = self.face
        E = np.diff(u) / dx
        P = np.diff(phi) / dx
        pb = _avg(phi)
        tb = _avg(theta)
        S = f["C"] * E + f["D"] * P + f["B"] * pb + f["Mc"] * tb
        h = f["D"] * E + f["A"] * P + f["b"] * pb + f["a"] * tb
        gf = -f["B"] * E - f["b"] * P - f["xi"] * pb - f["m"] * tb
        return S, h, gf

    def _accel(self, u, phi, theta, t):
        dx = self.grid.dx
        c = self.node
        S, h, gf = self._stresses(u, phi, theta)
        Fv = np.zeros_like(u)
        Fw = np.zeros_like(u)
        Fv[1:-1] = S[1:] - S[:-1]
        Fw[1:-1] = h[1:] - h[:-1] + 0.5 * dx * (gf[1:] + gf[:-1])
        if self.traction:
            Fv[0] = S[0] - self.s_bc(t)
        av = Fv / (c["rho"] * self.vol)
        aw = Fw / (c["rho"] * c["chi"] * self.vol)
        bf = self._body(self.sc.body.f, t)
        if bf is not None:
            av = av + bf
        bl = self._body(self.sc.body.ell, t)
        if bl is not None:
            aw = aw + bl
        return np.where(self.u_free, av, 0.0), np.where(self.phi_free, aw, 0.0)

    def _to_nodes(self, Yf):
        """Node value of a face density, consistent with the half-cell volumes."""
        out = np.empty(Yf.shape[:-1] + (Yf.shape[-1] + 1,))
        out[..., 1:-1] = 0.5 * (Yf[..., 1:] + Yf[..., :-1])
        out[..., 0] = Yf[..., 0]
        out[..., -1] = Yf[..., -1]
        return out

    def _div(self, q, qbc):
        d = np.zeros(q.shape[-1] + 1)
        d[1:-1] = q[1:] - q[:-1]
        d[0] = q[0] - qbc
        return d / self.vol

    def _grad(self, theta):
        return np.diff(theta) / self.grid.dx

    def _flux_update(self, qp, g0, g1, n_new: int, g_hist=None):
        if self.prony:
            return self._decay * qp - (self._c0 * g0 + self._c1 * g1)
        # direct convolution: trapezoid of K(s) g(t-s) over [0, t_{n_new}]
        K = self._kvals[: n_new + 1]
        past = g_hist[:n_new][::-1]                     # g at lags dt .. n_new*dt
        acc = 0.5 * K[0] * g1
        if n_new >= 1:
            acc = acc + K[1:n_new + 1] @ past - 0.5 * K[n_new] * past[-1]
        return (-self.face["theta0"] * self.dt * acc)[None, :]

    # -- public ----------------------------------------------------------

    def initial_state(self) -> State:
        n = self.grid.N + 1
        ld = self.sc.load
        z = np.zeros(n)
        u = z.copy()
        w = z.copy()
        if ld.type == "initial_displacement_bump":
            u = ld.amplitude * self.bump_x
        elif ld.type == "porosity_kick":
            w = ld.amplitude * self.bump_x
        u = np.where(self.u_free, u, 0.0)
        w = np.where(self.phi_free, w, 0.0)
        return State(0.0, u, z.copy(), z.copy(), w, z.copy(),
                     np.zeros((self.n_terms, self.grid.N)), np.zeros(self.grid.N))

    def step(self, st: State, n_new: int | None = None, g_hist=None) -> State:
        dt = self.dt
        c = self.node
        f = self.face
        t0, t1 = st.t, st.t + dt
        if n_new is None:
            n_new = int(round(t1 / dt))

        av, aw = self._accel(st.u, st.phi, st.theta, t0)
        vh = st.v + 0.5 * dt * av
        wh = st.w + 0.5 * dt * aw
        u1 = st.u + dt * vh
        phi1 = st.phi + dt * wh

        dx = self.grid.dx
        dY = (f["Mc"] * np.diff(u1 - st.u) / dx + f["a"] * np.diff(phi1 - st.phi) / dx
              + f["m"] * _avg(phi1 - st.phi))
        src = c["theta0"] * self._to_nodes(dY)
        br0 = self._body(self.sc.body.r, t0)
        if br0 is not None:
            src = src + 0.5 * dt * c["rho"] * (br0 + self._body(self.sc.body.r, t1))
        rc = c["rho"] * c["c"]

        q0 = st.q
        div0 = self._div(q0, self.q_bc(t0))
        th_p = np.where(self.theta_free, st.theta + (src - dt * div0) / rc, 0.0)
        g_p = self._grad(th_p)
        qp_p = self._flux_update(st.qp, st.g, g_p, n_new, g_hist)
        div1 = self._div(qp_p.sum(axis=0), self.q_bc(t1))
        th1 = np.where(self.theta_free, st.theta + (src - 0.5 * dt * (div0 + div1)) / rc, 0.0)
        g1 = self._grad(th1)
        qp1 = self._flux_update(st.qp, st.g, g1, n_new, g_hist)

        av1, aw1 = self._accel(u1, phi1, th1, t1)
        v1 = vh + 0.5 * dt * av1
        w1 = wh + 0.5 * dt * aw1

        out = State(t1, u1, v1, phi1, w1, th1, qp1, g1)
        for name in ("u", "v", "phi", "w", "theta", "qp"):
            a = getattr(out, name)
            if not np.all(np.isfinite(a)) or np.max(np.abs(a), initial=0.0) > _BLOWUP:
                raise InstabilityError(name, t1)
        return out

    def run(self) -> Trajectory:
        n = self.n_steps
        N = self.grid.N
        shape_n = (n + 1, N + 1)
        shape_f = (n + 1, N)
        rec = {k: np.empty(shape_n) for k in ("u", "v", "phi", "w", "theta")}
        q = np.empty(shape_f)
        g = np.empty(shape_f)
        mem = np.empty(shape_f)
        t = np.arange(n + 1) * self.dt
        hist = GradientHistory(self.dt, N, capacity=n + 1)
        freq = default_grid(self.sc.kernel, max(self.sc.T, self.dt))
        rt = RecursiveTransforms(self.sc.kernel, freq, self.dt, N)
        checks = []
        every = self.sc.flux_check_every

        st = self.initial_state()

        def store(i, s):
            for k in rec:
                rec[k][i] = getattr(s, k)
            q[i] = s.q
            g[i] = s.g
            hist.record(i * self.dt, s.g)

        store(0, st)
        mem[0] = rt.memory()
        for i in range(1, n + 1):
            new = self.step(st, i, g)
            rt.advance(st.g, new.g)
            st = new
            st.t = t[i]
            store(i, st)
            mem[i] = rt.memory()
            if i % every == 0 or i == n:
                slow = heat_flux_time(self.sc.kernel, hist, t[i], self.face["theta0"])
                checks.append((float(t[i]), float(np.max(np.abs(slow - st.q)))))

        traj = Trajectory(
            scenario=self.sc,
            grid=self.grid,
            support=self.support,
            constants=self.constants,
            freq=freq,
            dt=self.dt,
            t=t,
            q=q,
            g=g,
            memory=mem,
            q_bc=np.array([self.q_bc(s) for s in t]),
            s_bc=np.array([self.s_bc(s) for s in t]),
            history=hist,
            flux_checks=checks,
            coef={"node": self.node, "face": self.face, "vol": self.vol},
            **rec,
        )
        return traj.freeze()


def build_scenario(cfg: dict | Scenario | None = None) -> tuple[Grid, State, DataSupport]:
    sc = cfg if isinstance(cfg, Scenario) else scenario_from_config(cfg)
    sim = Simulator(sc)
    return sim.grid, sim.initial_state(), sim.support


def run(cfg: dict | Scenario | None = None) -> Trajectory:
    sc = cfg if isinstance(cfg, Scenario) else scenario_from_config(cfg)
    return Simulator(sc).run()
