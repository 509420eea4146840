import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import heat_flux_convolution
from porothermo.constitutive import (GeneralizedStrain, elastic_response, flux_bound_rhs, form_energy,
                                     heat_flux_direct, heat_flux_freq, heat_flux_time, heating_rate,
                                     stored_energy, strain_of, total_response)
from porothermo.history import GradientHistory, history_transforms
from porothermo.kernel import PronyKernel, default_grid
from porothermo.material import MaterialParams, coupling_matrix, derive_constants

P = MaterialParams()
EXP2 = PronyKernel.single(1.0, 0.5)


def _tuple(s):
    return tuple(float(v) for v in (s.S, s.h, s.g))


def test_elastic_response_examples():
    assert _tuple(elastic_response(P, GeneralizedStrain(1, 0, 0))) == pytest.approx((1, 0.2, -0.2))
    assert _tuple(elastic_response(P, GeneralizedStrain(0, 0, 0))) == (0, 0, 0)
    dec = MaterialParams(C=2, A=3, xi=5, D=0, B=0, b=0)
    assert _tuple(elastic_response(dec, GeneralizedStrain(1, 2, 3))) == pytest.approx((2, 6, -15))


def test_form_energy_examples():
    assert form_energy(P, GeneralizedStrain(1, 0, 0), GeneralizedStrain(0, 0, 1)) == pytest.approx(0.1)
    assert form_energy(P, GeneralizedStrain(1, 0, 0), GeneralizedStrain(1, 0, 0)) == pytest.approx(0.5)
    assert form_energy(P, GeneralizedStrain(0.3, -1, 2), GeneralizedStrain(0, 0, 0)) == 0


def test_total_response_examples():
    assert _tuple(total_response(P, GeneralizedStrain(0, 0, 0), 1.0)) == pytest.approx((0.1, 0.1, -0.1))
    assert _tuple(total_response(P, GeneralizedStrain(1, 0, 0), 1.0)) == pytest.approx((1.1, 0.3, -0.3))
    e = GeneralizedStrain(0.4, -0.2, 0.7)
    assert _tuple(total_response(P, e, 0.0)) == _tuple(elastic_response(P, e))


def test_heating_rate_examples():
    assert heating_rate(P, 1, 0, 0, 0) == pytest.approx(-0.1)
    assert heating_rate(P, 0, 0, 0, 1) == pytest.approx(1.0)
    assert heating_rate(P, 0, 0, 0, 0) == 0


def test_strain_of():
    x = np.linspace(0, 1, 101)
    assert np.allclose(strain_of(3.5 * x, x[1]), 3.5, atol=1e-13, rtol=0)
    assert np.allclose(strain_of(x**2, x[1]), 2 * x, atol=1e-11, rtol=0)
    assert np.all(strain_of(np.zeros(10), 0.1) == 0)
    errs = []
    for n in (50, 100):
        xx = np.linspace(0, 1, n + 1)
        errs.append(np.abs(strain_of(xx**3, xx[1]) - 3 * xx**2)[1:-1].max())
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)
    with pytest.raises(ValueError):
        strain_of(np.zeros(2), 0.1)


def _constant_gradient_history(G, dt=0.005, s_star=40.0):
    m = int(round(s_star / dt))
    h = GradientHistory(dt, 1, initial=np.full((m, 1), G))
    h.record(0.0, G)
    return h


@pytest.mark.parametrize("G", [1.0, -2.5])
def test_constant_gradient_flux_time(G):
    errs = []
    for dt in (0.01, 0.005):
        h = _constant_gradient_history(G, dt=dt)
        q = heat_flux_time(EXP2, h, 0.0, 1.0)[0]
        errs.append(abs(q + 0.5 * G))
        assert q == pytest.approx(-0.5 * G, rel=1e-4)
        assert heat_flux_direct(EXP2, h, 0.0, 1.0)[0] == pytest.approx(-0.5 * G, rel=1e-4)
    # trapezoid on the piecewise-linear history: second order in dt
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_constant_gradient_two_term():
    k = PronyKernel((1.0, 0.5), (0.5, 2.0))
    h = _constant_gradient_history(1.0, dt=0.005, s_star=80.0)
    assert heat_flux_time(k, h, 0.0, 1.0)[0] == pytest.approx(-(0.5 + 1.0), rel=1e-5)


def test_constant_gradient_flux_freq():
    G = 1.0
    h = _constant_gradient_history(G, dt=0.005, s_star=40.0)
    grid = default_grid(EXP2, 40.0)
    q = heat_flux_freq(EXP2, history_transforms(h, 0.0, grid), grid, 1.0)[0]
    assert q == pytest.approx(heat_flux_time(EXP2, h, 0.0, 1.0)[0], rel=1e-3)


def test_zero_history_flux():
    h = GradientHistory(0.1)
    for k in range(5):
        h.record(0.1 * k, 0.0)
    grid = default_grid(EXP2, 1.0)
    assert heat_flux_time(EXP2, h, 0.4, 1.0)[0] == 0
    assert heat_flux_freq(EXP2, history_transforms(h, 0.4, grid), grid, 1.0)[0] == 0


def test_pulse_flux_cross_paths():
    pulse = lambda t: (1 - (2 * t - 1) ** 2) ** 3 if 0 < t < 1 else 0.0  # noqa: E731
    dt = 2e-3
    h = GradientHistory(dt)
    n = int(round(3.0 / dt))
    for k in range(n + 1):
        h.record(k * dt, pulse(k * dt))
    grid = default_grid(EXP2, 3.0)
    rng = np.random.default_rng(11)
    for t in np.round(rng.uniform(0.2, 3.0, 8) / dt) * dt:
        qt = heat_flux_time(EXP2, h, t, 1.0)[0]
        qf = heat_flux_freq(EXP2, history_transforms(h, t, grid), grid, 1.0)[0]
        qo = heat_flux_convolution(1.0, 0.5, pulse, t)
        assert abs(qt - qo) <= max(1e-6, 1e-3 * abs(qo))
        assert abs(qf - qt) <= max(1e-6, 1e-3 * abs(qt))


def test_flux_bound_rhs_is_twice_memory_scaled():
    assert flux_bound_rhs(1.0, 1.0, 1.0, 0.25) == pytest.approx(0.5)


# -- property suites on random samples ------------------------------------------

N_SAMPLES = 10_000


def _random_materials(rng, n):
    """n admissible materials as per-sample arrays (rejection on positive definiteness)."""
    out = []
    while sum(len(o["C"]) for o in out) < n:
        d = {k: rng.uniform(0.5, 2.0, n) for k in ("C", "A", "xi", "rho", "chi", "c", "theta0")}
        d.update({k: rng.uniform(-0.6, 0.6, n) for k in ("D", "B", "b", "Mc", "a", "m")})
        G = coupling_matrix(MaterialParams(**d))
        ok = np.linalg.eigvalsh(G)[:, 0] > 1e-3
        out.append({k: v[ok] for k, v in d.items()})
    return MaterialParams(**{k: np.concatenate([o[k] for o in out])[:n] for k in out[0]})


@pytest.fixture(scope="module")
def samples():
    rng = np.random.default_rng(2024)
    p = _random_materials(rng, N_SAMPLES)
    F, Gs = (GeneralizedStrain(*rng.normal(size=(3, N_SAMPLES))) for _ in range(2))
    theta = rng.normal(size=N_SAMPLES)
    mu_M = np.linalg.eigvalsh(coupling_matrix(p))[:, -1]
    return p, F, Gs, theta, mu_M


def test_bilinear_form_identity(samples):
    p, F, Gs, _, _ = samples
    two_f = 2 * form_energy(p, F, Gs)
    r = elastic_response(p, F)
    rhs = r.S * Gs.F + r.h * Gs.pi - r.g * Gs.psi
    assert np.max(np.abs(two_f - rhs) / (1 + np.abs(rhs))) < 1e-13
    assert np.allclose(form_energy(p, F, Gs), form_energy(p, Gs, F), rtol=0, atol=1e-14)


def test_stored_energy_bound_and_equality(samples):
    p, F, _, _, mu_M = samples
    w = stored_energy(p, F)
    norm2 = F.F**2 + p.chi * F.pi**2 + F.psi**2
    assert np.all(w > 0)
    assert np.all(2 * w <= mu_M * norm2 * (1 + 1e-13))
    G = coupling_matrix(p)
    lam, vec = np.linalg.eigh(G)
    top = vec[:, :, -1]
    e = GeneralizedStrain(top[:, 0], top[:, 1] / np.sqrt(p.chi), top[:, 2])
    assert np.allclose(2 * stored_energy(p, e), lam[:, -1], rtol=1e-12)


def test_response_magnitude_bound(samples):
    p, F, _, _, mu_M = samples
    r = elastic_response(p, F)
    mag2 = r.S**2 + r.h**2 / p.chi + r.g**2
    assert np.all(mag2 <= 2 * mu_M * stored_energy(p, F) * (1 + 1e-12))


def test_total_response_bound_with_eps0(samples):
    p, F, _, theta, mu_M = samples
    # per-sample constants: mu = mu_M, M = theta0 (Mc^2 + a^2/chi + m^2) / (rho c), K0 = theta0 K(0) / c
    bigM = p.theta0 / (p.rho * p.c) * (p.Mc**2 + p.a**2 / p.chi + p.m**2)
    K0 = p.theta0 * 1.0 / p.c
    beta = -1 + (K0 + bigM) / mu_M
    eps0 = 0.5 * (beta + np.sqrt(beta**2 + 4 * bigM / mu_M))
    eps0 = np.maximum(eps0, 1e-300)
    r = total_response(p, F, theta)
    lhs = r.S**2 + r.h**2 / p.chi + r.g**2
    rhs = ((1 + eps0) * 2 * mu_M * stored_energy(p, F)
           + (1 + 1 / eps0) * bigM * p.rho * p.c * theta**2 / p.theta0)
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_total_response_bound_default_constants():
    c = derive_constants(P, EXP2)
    rng = np.random.default_rng(5)
    E = GeneralizedStrain(*rng.normal(size=(3, N_SAMPLES)))
    th = rng.normal(size=N_SAMPLES)
    r = total_response(P, E, th)
    lhs = r.S**2 + r.h**2 + r.g**2
    rhs = (1 + c.eps0) * 2 * c.mu * stored_energy(P, E) + (1 + 1 / c.eps0) * c.bigM * th**2
    assert np.all(lhs <= rhs * (1 + 1e-12))


strain = st.tuples(*(st.floats(-10, 10),) * 3)


@settings(max_examples=300, deadline=None)
@given(strain, strain, st.floats(-10, 10))
def test_properties_default_material(f, g, theta):
    F, Gs = GeneralizedStrain(*f), GeneralizedStrain(*g)
    r = elastic_response(P, F)
    assert 2 * form_energy(P, F, Gs) == pytest.approx(r.S * Gs.F + r.h * Gs.pi - r.g * Gs.psi, abs=1e-11)
    w = stored_energy(P, F)
    assert 2 * w <= 1.4 * (F.F**2 + F.pi**2 + F.psi**2) + 1e-12
    assert r.S**2 + r.h**2 + r.g**2 <= 2 * 1.4 * w * (1 + 1e-12) + 1e-12
