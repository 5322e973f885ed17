"""Quintic Hermite element exactness, continuity, and assembler
cross-checks."""

import numpy as np
import pytest

from trihomog.hermite import (DiscretizationError, HermiteBasis1D,
                              assemble, assemble_quadratic, assemble_rhs,
                              build_space_1d, build_space_2d, evaluate_fe,
                              gauss_rule, graded_mesh, quadratic_energy,
                              uniform_mesh)


def test_shape_functions_are_dual_to_nodal_functionals():
    basis = HermiteBasis1D()
    for d in range(3):
        at0 = basis.eval(np.array([0.0]), d)[0]
        at1 = basis.eval(np.array([1.0]), d)[0]
        for l in range(6):
            want0 = 1.0 if l == d else 0.0
            want1 = 1.0 if l == 3 + d else 0.0
            assert abs(at0[l] - want0) < 1e-12
            assert abs(at1[l] - want1) < 1e-12


def _interpolate_poly_1d(space, coeffs):
    """Free-dof vector interpolating the polynomial sum coeffs[p] t^p (all
    nodal value/derivative degrees of freedom set from the polynomial)."""
    der = [np.polynomial.polynomial.polyder(coeffs, d) if d else coeffs
           for d in range(3)]
    full = np.zeros(space.n_full)
    for i, t in enumerate(space.vmesh.nodes):
        for d in range(3):
            full[3 * i + d] = np.polynomial.polynomial.polyval(t, der[d])
    return full[space.free_to_full]


def test_quintic_reproduction():
    # the space contains every quintic exactly; interpolation at the nodal
    # degrees of freedom reproduces it to round-off (third derivatives on a
    # strongly graded mesh amplify round-off by h^{-3}, hence the split
    # tolerances)
    rng = np.random.default_rng(3)
    coeffs = rng.normal(size=6)
    t = np.linspace(-1.0, 0.0, 257)
    for mesh, tol3 in [(uniform_mesh(8), 1e-11), (graded_mesh(9, 0.6), 1e-6)]:
        space = build_space_1d(mesh, bc_bottom="free", bc_top="free")
        vec = _interpolate_poly_1d(space, coeffs)
        for d in range(4):
            der = np.polynomial.polynomial.polyder(coeffs, d) if d else coeffs
            vals = evaluate_fe(space, vec, t, (d,))
            expect = np.polynomial.polynomial.polyval(t, der)
            scale = np.max(np.abs(expect)) + 1.0
            tol = 1e-11 if d < 3 else tol3
            assert np.max(np.abs(vals - expect)) < tol * scale, d


def test_c2_continuity_of_random_field():
    # one-sided limits at every interior node agree for value, first and
    # second derivative; the left limit is taken exactly at local s = 1 of
    # the left element (a perturbed physical point would pollute the check
    # with h^{-3}-amplified Taylor terms on the graded tail)
    mesh = graded_mesh(12, ratio=0.7)
    space = build_space_1d(mesh, bc_bottom="free", bc_top="free")
    rng = np.random.default_rng(5)
    vec = rng.normal(size=space.n_free)
    full = space.embed(vec)
    sizes = mesh.sizes()
    for d in range(3):
        shp = space.basis.eval(np.array([1.0]), d)[0]
        right = evaluate_fe(space, vec, mesh.nodes[1:-1], (d,))
        for e in range(mesh.n_elements - 1):
            h = sizes[e]
            dofs = full[space.element_dofs_1d(e)]
            scale = np.array([h ** (l % 3) for l in range(6)])
            left = float((dofs * shp * scale).sum()) / h ** d
            tol = 1e-10 * (abs(right[e]) + 1.0)
            assert abs(left - right[e]) < tol, (d, e)


def test_graded_mesh_floor_and_extent():
    mesh = graded_mesh(64, ratio=0.75)
    sizes = mesh.sizes()
    assert abs(mesh.nodes[0] + 1.0) < 1e-15
    assert abs(mesh.nodes[-1]) < 1e-15
    assert np.all(sizes > 0)
    # the geometric tail stops within one grading step of the size floor
    assert sizes.min() >= 0.75 * sizes.max() / 64 * (1 - 1e-12)
    assert sizes.min() <= sizes.max() / 64
    # grading accumulates at the right end where the boundary layer lives
    assert sizes[-1] == sizes.min()


def test_graded_mesh_rejects_bad_parameters():
    with pytest.raises(DiscretizationError):
        graded_mesh(1)
    with pytest.raises(DiscretizationError):
        graded_mesh(8, ratio=1.5)


def test_bc_elimination_counts():
    mesh = uniform_mesh(8)
    s_free = build_space_1d(mesh, "free", "free")
    s_cl1 = build_space_1d(mesh, "clamped1", "clamped1")
    s_cl2 = build_space_1d(mesh, "clamped2", "clamped2")
    assert s_free.n_free == 3 * 9
    assert s_cl1.n_free == 3 * 9 - 4
    assert s_cl2.n_free == 3 * 9 - 6


def test_assemblers_agree_on_sixth_order_form():
    # generic callback assembler vs the fast weighted assembler on the
    # intermediate-problem form u''' v''' + u v
    mesh = graded_mesh(6, ratio=0.7)
    space = build_space_1d(mesh, "clamped1", "clamped1")
    W = np.zeros((4, 4))
    W[3, 3] = 1.0
    W[0, 0] = 1.0
    fast = assemble_quadratic(space, W)

    def integrand(point, ju, jv):
        return ju[(3,)] * jv[(3,)] + ju[(0,)] * jv[(0,)]

    generic = assemble(space, integrand)
    diff = (fast - generic).toarray()
    scale = np.max(np.abs(fast.toarray()))
    assert np.max(np.abs(diff)) < 1e-12 * scale


def test_quadratic_energy_matches_matrix_form():
    mesh = graded_mesh(8, ratio=0.7)
    space = build_space_1d(mesh, "clamped1", "clamped1")
    W = np.zeros((4, 4))
    W[3, 3] = 1.0
    W[1, 1] = 0.5
    W[0, 0] = 2.0
    A = assemble_quadratic(space, W)
    rng = np.random.default_rng(11)
    x = rng.normal(size=space.n_free)
    direct = quadratic_energy(space, W, x)
    through_matrix = float(x @ (A @ x))
    assert abs(direct - through_matrix) < 1e-9 * (1 + abs(direct))


def test_rhs_integrates_loads_exactly():
    # int f v for a quintic f against an interpolated quintic v equals the
    # exact polynomial integral (Gauss order 8 integrates degree 15)
    mesh = uniform_mesh(4)
    space = build_space_1d(mesh, "free", "free")
    f_coeffs = np.array([1.0, -2.0, 0.5, 0.0, 1.5, -0.25])
    v_coeffs = np.array([0.5, 1.0, -1.0, 2.0, 0.0, 0.3])
    rhs = assemble_rhs(space, lambda t:
                       np.polynomial.polynomial.polyval(t, f_coeffs))
    vec = _interpolate_poly_1d(space, v_coeffs)
    prod = np.polynomial.polynomial.polymul(f_coeffs, v_coeffs)
    anti = np.polynomial.polynomial.polyint(prod)
    exact = (np.polynomial.polynomial.polyval(0.0, anti)
             - np.polynomial.polynomial.polyval(-1.0, anti))
    assert abs(float(rhs @ vec) - exact) < 1e-13 * (1 + abs(exact))


def test_2d_tensor_space_reproduces_biquintics():
    space = build_space_2d(4, uniform_mesh(3), "free", "free")
    # field x-periodic in x: use cos(2 pi x) * quintic(t), interpolated at
    # the 9 nodal derivatives, must be close (not exact: cosine is not a
    # quintic) -- instead check exact reproduction of f(x,t)=quintic(t)
    coeffs = np.array([0.3, -1.0, 0.4, 2.0, -0.7, 0.1])
    der = [np.polynomial.polynomial.polyder(coeffs, d) if d else coeffs
           for d in range(3)]
    nt1 = space.vmesh.n_elements + 1
    full = np.zeros(space.n_full)
    for i in range(space.nx):
        for j, t in enumerate(space.vmesh.nodes):
            for b in range(3):
                full[(i * nt1 + j) * 9 + 0 * 3 + b] = \
                    np.polynomial.polynomial.polyval(t, der[b])
    vec = full[space.free_to_full]
    x = np.linspace(0.0, 1.0, 13)
    t = np.linspace(-1.0, 0.0, 13)
    vals = evaluate_fe(space, vec, (x, t), (0, 0))
    expect = np.polynomial.polynomial.polyval(t, coeffs)
    assert np.max(np.abs(vals - expect)) < 1e-12
    d3 = evaluate_fe(space, vec, (x, t), (0, 3))
    expect3 = np.polynomial.polynomial.polyval(
        t, np.polynomial.polynomial.polyder(coeffs, 3))
    assert np.max(np.abs(d3 - expect3)) < 1e-10


def test_gauss_rule_integrates_high_degree():
    s, w = gauss_rule(8)
    for p in range(16):
        val = float((w * s ** p).sum())
        assert abs(val - 1.0 / (p + 1)) < 1e-14
