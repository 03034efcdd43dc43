import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from xicavity.dynamics import (
    BLOCK_OFFSETS,
    SimulationConfig,
    WaveFunction,
    closed_form_amplitudes,
    evolve,
    initial_amplitudes,
    ode_evolve,
    propagate_resonance,
    propagate_resonance_grid,
    total_norm,
    truncation_cutoff,
)
from xicavity.nonlinearity import NonlinearitySpec, coupling_strengths, coupling_table

from conftest import ALPHA

PERIOD = math.pi * math.sqrt(2)


def poisson_tail_cutoff(mean, eps):
    """Smallest N with sum_{n>N} Poisson(n; mean) < eps, by high-precision summation."""
    mpmath.mp.dps = 40
    mean = mpmath.mpf(mean)
    cdf = mpmath.mpf(0)
    n = 0
    while True:
        cdf += mpmath.e ** (-mean) * mean**n / mpmath.factorial(n)
        if 1 - cdf < eps:
            return n
        n += 1


def test_truncation_cutoff_against_tail_summation():
    expected = poisson_tail_cutoff(10, 1e-12)
    assert expected == 39
    assert truncation_cutoff(ALPHA, 1e-12) == expected


def test_truncation_cutoff_loose_tolerance_near_mode():
    assert truncation_cutoff(ALPHA, 0.5) == poisson_tail_cutoff(10, 0.5) == 10


@pytest.mark.parametrize("mean", [0.5, 3.0, 10.0, 25.0])
def test_truncation_cutoff_monotone(mean):
    alpha = math.sqrt(mean)
    cuts = [truncation_cutoff(alpha, eps) for eps in (1e-2, 1e-4, 1e-6, 1e-9, 1e-12, 1e-15)]
    assert cuts == sorted(cuts)
    assert cuts[-2] == poisson_tail_cutoff(mean, 1e-12)


def test_initial_amplitude_value():
    wf = initial_amplitudes(ALPHA, 39)
    expected = math.exp(-5) * 10**5 / math.sqrt(math.factorial(10))
    assert expected == pytest.approx(0.35371, abs=1e-5)
    assert wf.c[0, 10] == pytest.approx(expected, rel=1e-13)
    assert wf.t == 0.0
    assert np.all(wf.c[1:] == 0)
    assert abs(total_norm(wf) - 1) < 1e-12


def test_initial_amplitudes_complex_alpha_and_no_overflow():
    alpha = 12 * np.exp(0.3j)
    wf = initial_amplitudes(alpha, 400)
    assert np.all(np.isfinite(wf.c))
    n = 150
    log_ref = -72 + n * math.log(12) - 0.5 * math.lgamma(n + 1)
    assert wf.c[0, n] == pytest.approx(math.exp(log_ref) * np.exp(0.3j * n), rel=1e-10)
    assert abs(total_norm(wf) - 1) < 1e-12


def test_total_norm_is_quadratic(wf0):
    doubled = WaveFunction(0.0, 2 * wf0.c)
    assert total_norm(doubled) == pytest.approx(4 * total_norm(wf0), rel=1e-15)


def test_block_round_trip(wf0, rng):
    blocks = rng.normal(size=(wf0.n_max + 1, 6)) + 1j * rng.normal(size=(wf0.n_max + 1, 6))
    wf = WaveFunction.from_blocks(0.0, blocks)
    np.testing.assert_array_equal(wf.blocks(), blocks)
    # unreachable low indices stay empty
    for k, off in enumerate(BLOCK_OFFSETS):
        assert np.all(wf.c[k, :off] == 0)


def test_propagate_identity_at_zero(wf0, spec):
    wf = propagate_resonance(wf0, spec, 0.0)
    np.testing.assert_allclose(wf.c, wf0.c, rtol=0, atol=1e-15)


def test_harmonious_period(wf0):
    spec = NonlinearitySpec("harmonious")
    times = np.linspace(0.3, 20, 13)
    a = propagate_resonance_grid(wf0, spec, times)
    b = propagate_resonance_grid(wf0, spec, times + PERIOD)
    assert max(np.max(np.abs(x.c - y.c)) for x, y in zip(a, b)) < 1e-10


def test_resonance_locks_c5_to_twice_c3(wf0, spec):
    for wf in propagate_resonance_grid(wf0, spec, np.linspace(0, 25, 26)):
        np.testing.assert_allclose(wf.c[4], 2 * wf.c[2], atol=1e-14)


def test_populated_index_invariant(wf0, spec):
    wf = propagate_resonance(wf0, spec, 3.7)
    assert wf.c[1, 0] == 0
    assert np.all(wf.c[2, :2] == 0) and np.all(wf.c[3, :3] == 0)
    assert np.all(wf.c[4, :2] == 0) and np.all(wf.c[5, :4] == 0)


def test_propagation_is_unitary(wf0, spec):
    for wf in propagate_resonance_grid(wf0, spec, [1.0, 7.5, 24.0]):
        assert abs(total_norm(wf) - total_norm(wf0)) < 1e-12


def test_ode_short_time_taylor(wf0, spec):
    dt = 1e-6
    wf = ode_evolve(wf0, spec, 0.0, 0.0, [dt], ode_tolerance=1e-12)[0]
    v1 = coupling_table(spec, wf0.n_max)[:, 0]
    n = np.flatnonzero(np.abs(wf0.c[0, : wf0.n_max + 1]) > 1e-6)
    first_order = -1j * v1[n] * wf0.c[0, n] * dt
    # the C2 series has no dt^2 term, so the relative error is O((V dt)^2)
    np.testing.assert_allclose(wf.c[1, n + 1], first_order, rtol=1e-6)


def test_ode_returns_initial_state_for_zero_time(wf0, spec):
    out = ode_evolve(wf0, spec, 0.5, -0.2, [0.0, 0.1])
    np.testing.assert_array_equal(out[0].c, wf0.c)


def full_system_oracle(wf0, spec, d1, d2, times):
    """Integrate the amplitude equations written component by component with scipy."""
    v = coupling_table(spec, wf0.n_max)
    nb = v.shape[0]

    def rhs(t, flat):
        y = flat.reshape(nb, 6)
        c1, c2, c3, c4, c5, c6 = y.T
        v1, v2, v3, v4 = v.T
        e1, e2 = np.exp(1j * d1 * t), np.exp(1j * d2 * t)
        return np.stack([
            -2j * v1 * e1 * c2,
            -1j * v1 / e1 * c1 - 1j * v2 * e2 * c3 - 1j * v2 * e1 * c5,
            -1j * v2 / e2 * c2 - 1j * v3 * e1 * c4,
            -1j * v3 / e1 * c3 - 1j * v3 / e2 * c5 - 1j * v4 * e2 * c6,
            -2j * v2 / e1 * c2 - 2j * v3 * e2 * c4,
            -2j * v4 / e2 * c4,
        ], axis=1).ravel()

    sol = solve_ivp(rhs, (0, times[-1]), wf0.blocks().ravel(), t_eval=times, rtol=1e-11, atol=1e-14, method="DOP853")
    return sol.y.T.reshape(len(times), nb, 6)


@pytest.mark.parametrize("d1,d2", [(0.7, -0.4), (1.5, 1.5)])
def test_detuned_ode_against_scipy(d1, d2):
    alpha = math.sqrt(3)
    wf0 = initial_amplitudes(alpha, truncation_cutoff(alpha, 1e-12))
    spec = NonlinearitySpec("constant")
    times = np.linspace(0, 6, 13)
    ours = ode_evolve(wf0, spec, d1, d2, times, ode_tolerance=1e-11)
    ref = full_system_oracle(wf0, spec, d1, d2, times)
    assert max(np.max(np.abs(w.blocks() - r)) for w, r in zip(ours, ref)) < 1e-7
    assert max(abs(total_norm(w) - total_norm(wf0)) for w in ours) < 1e-8
    c5_minus_2c3 = max(np.max(np.abs(w.c[4] - 2 * w.c[2])) for w in ours)
    if d1 == d2:
        assert c5_minus_2c3 < 1e-8
    else:
        assert c5_minus_2c3 > 1e-3


def test_closed_form_initial_value(spec):
    for n in (0, 4, 20):
        amps = closed_form_amplitudes(n, spec, 0.0, "corrected", c1_0=0.37)
        np.testing.assert_allclose(amps, [0.37, 0, 0, 0, 0, 0], atol=1e-14)


def test_closed_form_harmonious_c1():
    spec = NonlinearitySpec("harmonious")
    t = np.linspace(0, 10, 41)
    r2 = math.sqrt(2)
    expected = (36 + 12 * np.cos(2 * r2 * t) + 48 * np.cos(r2 * t)) / 96
    np.testing.assert_allclose(closed_form_amplitudes(3, spec, t)[0], expected, atol=1e-14)


@pytest.mark.parametrize("n", [0, 6, 30])
def test_corrected_closed_form_equals_eigen_block(spec, n):
    t = np.linspace(0, 25, 40)
    y0 = np.zeros((n + 1, 6), dtype=complex)
    y0[n, 0] = 1.0
    wfs = propagate_resonance_grid(WaveFunction.from_blocks(0.0, y0), spec, t)
    eig = np.array([w.blocks()[n] for w in wfs]).T
    assert np.max(np.abs(closed_form_amplitudes(n, spec, t) - eig)) < 1e-10
    assert np.max(np.abs(closed_form_amplitudes(n, spec, t, "printed") - eig)) > 1e-2


def test_closed_form_rejects_unknown_variant():
    with pytest.raises(ValueError):
        closed_form_amplitudes(0, NonlinearitySpec(), 1.0, "paper")


def test_resonance_spectrum_only(wf0):
    """c1[n](t) contains only the frequencies {0, beta1, beta2} of its block."""
    from xicavity.spectral import spectral_coefficients

    spec = NonlinearitySpec("constant")
    n = 8
    sc = spectral_coefficients(coupling_strengths(spec, n))
    t = np.linspace(0, 60, 600)
    y = np.array([w.c[0, n] for w in propagate_resonance_grid(wf0, spec, t)])
    basis = np.stack([np.ones_like(t), np.cos(sc.beta1 * t), np.cos(sc.beta2 * t)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    assert np.max(np.abs(basis @ coef - y)) < 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(tail_epsilon=1e-3)
    with pytest.raises(ValueError):
        SimulationConfig(t_grid=[0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        SimulationConfig(t_grid=[-1.0, 1.0])
    with pytest.raises(ValueError):
        evolve(SimulationConfig(delta1=0.3), "eigen")


def test_evolve_solvers_agree_on_short_run():
    cfg = SimulationConfig(spec=NonlinearitySpec("harmonious"), t_grid=np.linspace(0, 3, 7))
    a, b = evolve(cfg, "eigen"), evolve(cfg, "ode")
    assert max(np.max(np.abs(x.c - y.c)) for x, y in zip(a, b)) < 1e-8
