"""Limit-problem spectra and Poisson solves checked against an independent
shooting oracle and a collocation BVP solver.

The mode-m reduction is the constant-coefficient ODE -(D^2 - xi^2)^3 w =
(lam - 1) w on (-1, 0), so eigenvalues are roots of a 6x6 characteristic
determinant built from the exponential fundamental system.  That oracle
shares no code with the Hermite discretization.
"""

import json

import numpy as np
import pytest
from scipy.integrate import solve_bvp
from scipy.optimize import brentq

from trihomog.hermite import evaluate_fe, uniform_mesh
from trihomog.limit1d import (LimitBC, LimitError, apply_strange_term,
                              limit_space, mode_form, save_spectrum,
                              solve_limit_poisson, solve_limit_spectrum,
                              solve_mode, trace_dof)

K_COS = 20.0 * np.pi ** 3            # strange constant of 1 + cos(2 pi y)


def _char_roots(lam, xi):
    """Six roots of (r^2 - xi^2)^3 + (lam - 1) = 0, the characteristic
    polynomial of the mode-xi strong form."""
    mu = ((lam - 1.0) ** (1.0 / 3.0)
          * np.exp(1j * np.pi * (2 * np.arange(3) + 1) / 3.0))
    r = np.sqrt(xi ** 2 + mu)
    return np.concatenate([r, -r])


_ROW_VALUE = lambda r: r ** 0
_ROW_SLOPE = lambda r: r
_ROW_CURV = lambda r: r ** 2
_ROW_THIRD = lambda r: r ** 3

# every regime keeps w(-1) = w'(-1) = 0 with the natural w'''(-1) = 0
_BOTTOM_ROWS = [(-1.0, _ROW_VALUE), (-1.0, _ROW_SLOPE), (-1.0, _ROW_THIRD)]


def _top_rows(bc):
    rows = [(0.0, _ROW_VALUE), (0.0, _ROW_SLOPE)]
    if bc.kind == "dirichlet":
        rows.append((0.0, _ROW_CURV))
    else:
        # natural condition w'''(0) - K_s w''(0) = 0 (K_s = 0 intermediate)
        ks = bc.signed_k()
        rows.append((0.0, lambda r: r ** 3 - ks * r ** 2))
    return rows


def _shooting_det(lam, xi, rows):
    r = _char_roots(lam, xi)
    M = np.array([poly(r) * np.exp(r * t) for t, poly in rows])
    M = M / np.max(np.abs(M), axis=0)       # column scaling
    return np.linalg.det(M)


def shooting_eigenvalue(bc, m, lo, hi):
    """Eigenvalue of the mode-m reduced problem in (lo, hi), as a root of
    the phase-normalized characteristic determinant."""
    xi = 2.0 * np.pi * abs(m)
    rows = _BOTTOM_ROWS + _top_rows(bc)
    ref = _shooting_det(0.5 * (lo + hi), xi, rows)
    phase = ref / abs(ref)
    return brentq(lambda lam: (_shooting_det(lam, xi, rows) / phase).real,
                  lo, hi, xtol=1e-9, rtol=8.9e-16)


# ----------------------------------------------------------------- contracts

def test_bc_validation():
    with pytest.raises(LimitError):
        LimitBC("robin")
    with pytest.raises(LimitError):
        LimitBC("intermediate", K=1.0)
    with pytest.raises(LimitError):
        LimitBC("strange", K=-1.0)
    assert LimitBC("strange", K=2.0).signed_k() == 2.0
    assert LimitBC("strange", K=2.0, flip_sign=True).signed_k() == -2.0


def test_trace_dof_and_strange_guard():
    sp_int = limit_space(LimitBC("intermediate"))
    assert trace_dof(sp_int) >= 0
    sp_dir = limit_space(LimitBC("dirichlet"))
    assert trace_dof(sp_dir) == -1
    S, _ = mode_form(0.0, sp_dir)
    with pytest.raises(LimitError):
        apply_strange_term(S, 1.0, sp_dir)


# ------------------------------------------------- eigenvalues vs shooting

@pytest.mark.parametrize("bc,m,bracket", [
    (LimitBC("intermediate"), 0, (19000.0, 21000.0)),
    (LimitBC("intermediate"), 1, (195000.0, 205000.0)),
    (LimitBC("dirichlet"), 0, (35000.0, 37000.0)),
    (LimitBC("strange", K=K_COS, flip_sign=True), 0, (34000.0, 36200.0)),
])
def test_ground_eigenvalue_matches_shooting(bc, m, bracket):
    oracle = shooting_eigenvalue(bc, m, *bracket)
    space = limit_space(bc)
    lam, _ = solve_mode(bc, m, 1, space)
    assert abs(lam[0] - oracle) < 1e-7 * abs(oracle), (lam[0], oracle)


def test_spectrum_ordering_across_regimes():
    # the +K strange term adds a nonnegative rank-one to the intermediate
    # form, and the flat-Dirichlet space is a subspace of both, so
    # lambda_j(int) <= lambda_j(strange, +K) <= lambda_j(dirichlet)
    count = 10
    lam_int = solve_limit_spectrum(LimitBC("intermediate"),
                                   count=count).eigenvalues()
    lam_hat = solve_limit_spectrum(
        LimitBC("strange", K=K_COS, flip_sign=True),
        count=count).eigenvalues()
    lam_dir = solve_limit_spectrum(LimitBC("dirichlet"),
                                   count=count).eigenvalues()
    tol = 1e-9 * np.abs(lam_dir)
    assert np.all(lam_int <= lam_hat + tol)
    assert np.all(lam_hat <= lam_dir + tol)
    assert np.all(lam_int >= 1.0)           # the form dominates the mass


def test_ground_eigenvalue_monotone_in_k():
    grounds = []
    for K in (0.0, 0.5 * K_COS, K_COS, 2.0 * K_COS):
        bc = LimitBC("strange", K=K, flip_sign=True)
        grounds.append(solve_limit_spectrum(bc, count=1,
                                            cutoff=0).eigenvalues()[0])
    lam_int = solve_limit_spectrum(LimitBC("intermediate"), count=1,
                                   cutoff=0).eigenvalues()[0]
    assert abs(grounds[0] - lam_int) < 1e-9 * lam_int   # K = 0 is intermediate
    assert np.all(np.diff(grounds) > 0)


def test_large_k_approaches_dirichlet():
    lam_dir = solve_limit_spectrum(LimitBC("dirichlet"), count=1,
                                   cutoff=0).eigenvalues()[0]
    gaps = []
    for K in (1e2, 1e4, 1e6):
        bc = LimitBC("strange", K=K, flip_sign=True)
        lam = solve_limit_spectrum(bc, count=1, cutoff=0).eigenvalues()[0]
        gaps.append(lam_dir - lam)
    assert all(g > 0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1.0                     # K = 1e6 pinches w''(0) to zero


def test_literal_sign_runs_away():
    # the form-lowering sign throws one branch per mode far below the
    # physical window while the remainder interlaces above the unperturbed
    # intermediate ground state
    bc = LimitBC("strange", K=K_COS, flip_sign=False)
    lam = solve_limit_spectrum(bc, count=3, cutoff=0).eigenvalues()
    lam_int = solve_limit_spectrum(LimitBC("intermediate"), count=1,
                                   cutoff=0).eigenvalues()[0]
    assert lam[0] < -1e10
    assert lam[1] >= lam_int * (1 - 1e-9)


def test_mode_floor_and_merged_symmetry():
    # per-mode the form dominates (xi^6 + 1) times the mass; in the merged
    # spectrum every m != 0 entry appears with its -m partner at the same
    # eigenvalue
    space = limit_space(LimitBC("intermediate"))
    lam2, _ = solve_mode(LimitBC("intermediate"), 2, 1, space)
    assert lam2[0] >= (4.0 * np.pi) ** 6 + 1.0
    spec = solve_limit_spectrum(LimitBC("intermediate"), count=8)
    lam = spec.eigenvalues()
    assert np.all(np.diff(lam) >= 0)
    by_abs = {}
    for val, m, idx in spec.entries:
        by_abs.setdefault((abs(m), idx), []).append((val, m))
    for (am, idx), hits in by_abs.items():
        if am > 0 and len(hits) == 2:
            assert hits[0][0] == hits[1][0]
            assert hits[0][1] == -hits[1][1]


def test_natural_third_derivative_vanishes():
    bc = LimitBC("intermediate")
    space = limit_space(bc)
    _, vec = solve_mode(bc, 0, 1, space)
    t = np.linspace(-1.0, 0.0, 1001)
    w3 = evaluate_fe(space, vec[:, 0], t, (3,))
    assert abs(w3[-1]) < 1e-8 * np.max(np.abs(w3))


def test_eigenvalue_convergence_is_sixth_order():
    bc = LimitBC("intermediate")
    oracle = shooting_eigenvalue(bc, 0, 19000.0, 21000.0)
    errs = []
    for n in (3, 6, 12):
        space = limit_space(bc, mesh=uniform_mesh(n))
        lam, _ = solve_mode(bc, 0, 1, space)
        errs.append(abs(lam[0] - oracle))
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(rates) > 5.5, (errs, rates)


# ------------------------------------------------------------------ Poisson

def test_poisson_matches_collocation_bvp():
    # -w^(6) + w = f with the intermediate conditions, solved independently
    # by a high-order collocation BVP solver
    f0 = lambda t: np.cos(0.5 * np.pi * t)
    sol = solve_limit_poisson(LimitBC("intermediate"), {0: f0})

    def rhs(t, y):
        return np.vstack([y[1], y[2], y[3], y[4], y[5], y[0] - f0(t)])

    def bcs(ya, yb):
        return np.array([ya[0], ya[1], ya[3], yb[0], yb[1], yb[3]])

    t = np.linspace(-1.0, 0.0, 201)
    bvp = solve_bvp(rhs, bcs, t, np.zeros((6, t.size)), tol=1e-10,
                    max_nodes=200000)
    assert bvp.status == 0
    trace = complex(sol.trace_coeffs[0]).real
    assert abs(trace - bvp.sol(0.0)[2]) < 1e-6 * abs(trace)
    tt = np.linspace(-1.0, 0.0, 11)
    diff = np.max(np.abs(np.real(sol.eval_mode(0, tt)) - bvp.sol(tt)[0]))
    assert diff < 1e-9 * (1 + np.max(np.abs(bvp.sol(tt)[0])))


def test_poisson_trace_real_for_symmetric_data():
    f = {1: lambda t: (1.0 + 0.5j) * np.exp(t),
         -1: lambda t: (1.0 - 0.5j) * np.exp(t)}
    sol = solve_limit_poisson(LimitBC("intermediate"), f)
    x = np.linspace(0.0, 1.0, 17)
    vals = sol.trace(x)
    assert not np.iscomplexobj(vals)
    assert np.conj(complex(sol.trace_coeffs[-1])) == pytest.approx(
        complex(sol.trace_coeffs[1]), rel=1e-12)


def test_poisson_dirichlet_trace_is_zero():
    sol = solve_limit_poisson(LimitBC("dirichlet"), {0: lambda t: 1.0})
    assert sol.trace_coeffs[0] == 0.0
    assert np.max(np.abs(sol.trace(np.linspace(0, 1, 9)))) == 0.0


# ------------------------------------------------------------------- output

def test_spectrum_file_roundtrip(tmp_path):
    spec = solve_limit_spectrum(LimitBC("intermediate"), count=4, cutoff=1)
    path = tmp_path / "spectrum.json"
    save_spectrum(spec, path)
    back = json.loads(path.read_text())
    assert back["bc"] == "intermediate"
    assert len(back["eigs"]) == 4
    np.testing.assert_allclose([e["lambda"] for e in back["eigs"]],
                               spec.eigenvalues())
