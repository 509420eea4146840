import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import damped_sine_transform
from porothermo.history import (GradientHistory, RecursiveTransforms, SequencingError, abel_tail,
                                history_transforms, integrated_history, memory_energy, record_sample)
from porothermo.kernel import FrequencyGrid, PronyKernel, default_grid


def _grid(omegas) -> FrequencyGrid:
    w = np.sort(np.asarray(omegas, dtype=float))
    return FrequencyGrid(w, np.ones_like(w), float(w[-1]))


def _history(fun, dt, t_end, n_stations=1):
    h = GradientHistory(dt, n_stations)
    n = int(round(t_end / dt))
    for k in range(n + 1):
        h.record(k * dt, fun(k * dt))
    return h


def _unit_then_zero(dt=1e-3):
    # g = 1 on [0, 1), 0 after; the sample at the jump takes the midpoint value
    def g(t):
        if abs(t - 1.0) < 0.5 * dt:
            return 0.5
        return 1.0 if t < 1.0 else 0.0
    return _history(g, dt, 2.0)


def test_record_sample_sequencing():
    h = GradientHistory(0.1)
    record_sample(h, 0.0, 1.0)
    assert len(h) == 1
    record_sample(h, 0.1, 1.0)
    with pytest.raises(SequencingError):
        record_sample(h, 0.1, 2.0)
    with pytest.raises(SequencingError):
        record_sample(h, 0.5, 2.0)


def test_record_sample_amortized():
    h = GradientHistory(0.01)
    t0 = time.perf_counter()
    for k in range(2000):
        h.record(k * 0.01, float(k))
    assert len(h) == 2000
    assert h.values[-1, 0] == 1999.0
    assert time.perf_counter() - t0 < 1.0


def test_integrated_history_examples():
    zero = _history(lambda t: 0.0, 0.01, 1.0)
    val, tot = integrated_history(zero, 1.0, np.linspace(0, 3, 7))
    assert np.all(val == 0) and tot[0] == 0

    h = _unit_then_zero(dt=0.01)
    v, total = integrated_history(h, 2.0, 1.5)
    assert v[0] == pytest.approx(0.5, abs=1e-13)
    assert total[0] == pytest.approx(1.0, abs=1e-13)
    assert integrated_history(h, 2.0, 0.0)[0][0] == 0.0
    with pytest.raises(ValueError):
        integrated_history(h, 2.0, -0.1)


def test_integrated_history_constant_beyond_support():
    h = _history(lambda t: math.sin(3 * t), 0.01, 2.0)
    v, total = integrated_history(h, 2.0, np.array([2.0, 2.5, 10.0, 1e3]))
    assert np.all(v[:, 0] == total[0])


def test_derivative_in_lag_is_past_gradient():
    g = lambda t: math.cos(2 * t) + t  # noqa: E731
    dt = 1e-3
    h = _history(g, dt, 3.0)
    s = np.array([0.5, 1.2, 2.1])
    eps = 1e-3
    up, _ = integrated_history(h, 3.0, s + eps)
    dn, _ = integrated_history(h, 3.0, s - eps)
    fd = (up - dn)[:, 0] / (2 * eps)
    assert np.allclose(fd, [g(3.0 - si) for si in s], atol=1e-5)


def test_zero_history_transforms_vanish():
    ht = history_transforms(_history(lambda t: 0.0, 0.1, 1.0), 1.0, _grid([0.5, 1, 2]))
    assert np.all(ht.sine == 0) and np.all(ht.cosine == 0)


def test_abel_tail_example():
    s, c = abel_tail(1.0, 2.0, [math.pi])
    assert s[0, 0] == pytest.approx(1.0 / math.pi, rel=1e-14)
    assert c[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_sine_transform_matches_damped_quadrature():
    h = _unit_then_zero()
    ht = history_transforms(h, 2.0, _grid([1.0]))
    exact = math.sin(2.0) - math.sin(1.0)
    thbar = lambda s: min(max(s - 1.0, 0.0), 1.0)  # noqa: E731
    oracle = damped_sine_transform(thbar, 1.0, 2.0)
    assert oracle == pytest.approx(exact, abs=1e-5)
    assert ht.sine[0, 0] == pytest.approx(oracle, abs=1e-4)


def _transforms_fd_errors(dt, pairs):
    """Max error of both evolution identities using centred differences at spacing dt."""
    g = lambda t: math.sin(1.7 * t) * math.exp(-0.3 * t) + 0.2 * t  # noqa: E731
    t_max = max(t for _, t in pairs) + dt
    h = _history(g, dt, t_max)
    err_c = err_s = 0.0
    for w, t in pairs:
        t = round(t / dt) * dt
        grid = _grid([w])
        a, m, b = (history_transforms(h, tt, grid) for tt in (t - dt, t, t + dt))
        dc = (b.cosine - a.cosine)[0, 0] / (2 * dt)
        ds = (b.sine - a.sine)[0, 0] / (2 * dt)
        err_c = max(err_c, abs(dc + w * m.sine[0, 0]))
        err_s = max(err_s, abs(ds - g(t) / w - w * m.cosine[0, 0]))
    return err_c, err_s


def test_evolution_identities_second_order():
    rng = np.random.default_rng(3)
    pairs = list(zip(rng.uniform(0.3, 6.0, 16), rng.uniform(0.5, 2.5, 16)))
    coarse = _transforms_fd_errors(0.02, pairs)
    fine = _transforms_fd_errors(0.01, pairs)
    for e1, e2 in zip(coarse, fine):
        assert e2 < 1e-3
        assert math.log2(e1 / e2) > 1.8


def test_lag_identity_second_order():
    g = lambda t: math.sin(2.3 * t) + 0.5  # noqa: E731
    errs = []
    for dt in (0.02, 0.01):
        h = _history(g, dt, 3.0)
        t, s = 2.0, 0.7
        up, _ = integrated_history(h, t + dt, s)
        dn, _ = integrated_history(h, t - dt, s)
        errs.append(abs((up - dn)[0] / (2 * dt) - (g(t) - g(t - s))))
    assert errs[1] < 1e-3 and math.log2(errs[0] / errs[1]) > 1.8


def test_recursive_transforms_match_direct():
    k = PronyKernel.single(1.0, 0.5)
    dt = 0.01
    grid = default_grid(k, 2.0)
    g = lambda t: np.array([math.sin(2 * t), t * math.exp(-t)])  # noqa: E731
    h = GradientHistory(dt, 2)
    rt = RecursiveTransforms(k, grid, dt, 2)
    h.record(0.0, g(0.0))
    for n in range(1, 201):
        rt.advance(g((n - 1) * dt), g(n * dt))
        h.record(n * dt, g(n * dt))
    ht = history_transforms(h, 2.0, grid)
    w = grid.omega[:, None]
    assert np.allclose(rt.H.real / w, ht.sine, atol=1e-11)
    assert np.allclose(-rt.H.imag / w, ht.cosine, atol=1e-11)
    assert np.allclose(rt.memory(), memory_energy(k, ht, grid), rtol=1e-10, atol=1e-14)


def test_memory_energy_nonnegative_and_quadratic():
    k = PronyKernel.single(1.0, 0.5)
    grid = default_grid(k, 1.0)
    h = _history(lambda t: math.cos(5 * t), 0.01, 1.0)
    h2 = _history(lambda t: 3 * math.cos(5 * t), 0.01, 1.0)
    e1 = memory_energy(k, history_transforms(h, 1.0, grid), grid)
    e2 = memory_energy(k, history_transforms(h2, 1.0, grid), grid)
    assert e1[0] > 0
    assert e2[0] == pytest.approx(9 * e1[0], rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=40))
def test_integrated_history_zero_at_zero_lag_and_total_at_end(samples):
    h = GradientHistory(0.1)
    for k, v in enumerate(samples):
        h.record(k * 0.1, v)
    t = (len(samples) - 1) * 0.1
    v0, total = integrated_history(h, t, 0.0)
    assert v0[0] == 0.0
    vend, _ = integrated_history(h, t, t + 1.0)
    assert vend[0] == total[0]
    assert total[0] == pytest.approx(np.trapezoid(samples, dx=0.1), abs=1e-10)
