"""Strip-problem solutions, the three K routes, and the corrector traces."""

import numpy as np

from trihomog.cell import (UNIVERSAL_MODE_CONSTANT, compute_k_report,
                           corrector_vhat, eval_V, k_boundary, k_energy,
                           k_testfunction, mode_energy_closed_form,
                           mode_energy_quadrature, residual_check, solve_cell)
from trihomog.oscillation import OscillationProfile

from conftest import random_nonneg_profile


def test_cosine_k_value(cosine_profile):
    # b = 1 + cos(2 pi y) has b_{+-1} = 1/2, xi = 2 pi, so
    # K = 2 * 5 * (2 pi)^3 * (1/2)^2 = 20 pi^3
    report = compute_k_report(cosine_profile)
    expect = 20.0 * np.pi ** 3
    assert abs(report.k_energy - expect) < 1e-10 * expect
    assert report.agreement() < 1e-12


def test_triple_agreement_random_profiles():
    rng = np.random.default_rng(42)
    for _ in range(10):
        profile = random_nonneg_profile(rng)
        report = compute_k_report(profile)
        assert report.agreement() < 1e-10
        assert report.k_energy > 0.0


def test_universal_mode_constant():
    # contribution / (xi^3 |b_k|^2) is the same for every mode and profile
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(5):
        profile = random_nonneg_profile(rng)
        solution = solve_cell(profile)
        for k in solution.sorted_keys():
            mode = solution.modes[k]
            if mode.xi == 0.0:
                continue
            bk = solution.amplitudes[k]
            ratios.append(mode_energy_closed_form(mode)
                          / (mode.xi ** 3 * abs(bk) ** 2))
    ratios = np.array(ratios)
    assert np.ptp(ratios) < 1e-9 * np.mean(ratios)
    assert abs(np.mean(ratios) - UNIVERSAL_MODE_CONSTANT) < 1e-10


def test_mode_energy_quadrature_oracle(cosine_profile):
    solution = solve_cell(cosine_profile)
    mode = solution.modes[(1,)]
    closed = mode_energy_closed_form(mode)
    quad = mode_energy_quadrature(mode)
    assert abs(closed - quad) < 1e-10 * (1 + abs(closed))


def test_residuals(cosine_profile):
    solution = solve_cell(cosine_profile)
    rep = residual_check(solution)
    assert rep.ode_max < 1e-10 * rep.scale
    assert rep.bc_value < 1e-12
    assert rep.bc_slope < 1e-12
    assert rep.bc_third < 1e-12


def test_k_gauge_invariance(cosine_profile):
    base = solve_cell(cosine_profile)
    gauged = solve_cell(cosine_profile, zero_mode_gauge=2.5)
    for route in (lambda s: k_energy(s, check_quadrature=False)[0],
                  k_boundary, k_testfunction):
        assert abs(route(base) - route(gauged)) < 1e-10 * (1 + abs(route(base)))


def test_corrector_trace_identities(cosine_profile):
    # on the boundary y_N = 0 the corrector v-hat = V(y) trace(xbar) has
    # vanishing second tangential derivatives and its mixed second derivative
    # reproduces the profile slope times the trace
    solution = solve_cell(cosine_profile)

    def trace(xbar):
        return np.cos(3.0 * xbar) + 0.5   # arbitrary smooth macroscopic trace

    ybar = np.linspace(-0.5, 0.5, 64, endpoint=False)
    xbar = np.linspace(0.0, 1.0, 64, endpoint=False)
    for xb in xbar[::8]:
        point = (xb, np.stack([ybar, np.zeros_like(ybar)], axis=-1))
        tangential = corrector_vhat(solution, trace, point, deriv_y=(2, 0))
        mixed = corrector_vhat(solution, trace, point, deriv_y=(1, 1))
        expect = cosine_profile.eval_b(ybar, (1,)) * trace(xb)
        assert np.max(np.abs(tangential)) < 1e-10
        assert np.max(np.abs(mixed - expect)) < 1e-10


def test_corrector_normal_trace(cosine_profile):
    # dV/dy_N at the boundary reproduces the profile itself (the slope datum)
    solution = solve_cell(cosine_profile)
    ybar = np.linspace(-0.5, 0.5, 64, endpoint=False)
    slope = eval_V(solution, ybar[:, None], 0.0, deriv=(0, 1))
    np.testing.assert_allclose(slope, cosine_profile.eval_b(ybar), atol=1e-12)


def test_V_decays(cosine_profile):
    solution = solve_cell(OscillationProfile(
        1, {(0,): 0.0, (1,): 0.5, (-1,): 0.5}, check_nonnegative=False))
    deep = eval_V(solution, np.array([[0.2]]), -30.0)
    assert np.max(np.abs(deep)) < 1e-20
