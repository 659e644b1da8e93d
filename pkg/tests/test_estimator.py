import numpy as np
import pytest

from obstaclefem import quadrature
from obstaclefem.assembly import FormConfig
from obstaclefem.estimator import (discrete_h_minus1_norm, error_report,
                                   error_U, local_estimates,
                                   multiplier_dual_error)
from obstaclefem.mesh import create_structured, refine_nvb
from obstaclefem.problems import ObstacleTraits, ProblemSpec, example_smooth
from obstaclefem.spaces import (DofMap, FirstOrderSolution, evaluate,
                                nodal_interpolate, project_p0, rt_interpolate)
from obstaclefem.vi_solver import solve_problem

from conftest import locate_point


def make_problem(f, g, grad_g=None, exact=None, domain="unit_square",
                 diameter=np.sqrt(2.0)):
    zero2 = lambda x, y: (np.zeros_like(x), np.zeros_like(x))
    exact = exact or {}
    return ProblemSpec(name="adhoc", domain=domain, diameter=diameter,
                       f=f, g=g, grad_g=grad_g or zero2,
                       traits=ObstacleTraits(True, True), **exact)


def zero_fn(x, y):
    return np.zeros_like(x)


def test_zero_solution_zero_data_gives_zero_estimates():
    g = lambda x, y: -(1 - x) * x * (1 - y) * y - 0.0
    prob = make_problem(zero_fn, g,
                        grad_g=lambda x, y: (-(1 - 2 * x) * (1 - y) * y,
                                             -(1 - x) * x * (1 - 2 * y)))
    dm = DofMap.build(create_structured("unit_square", 2))
    local = local_estimates(FirstOrderSolution.zeros(dm), prob)
    for part in (local.eta2_div, local.eta2_grad, local.rho2_contact,
                 local.rho2_penetration, local.osc2):
        assert np.all(part == 0.0)
    assert local.total_est2 == 0.0


def test_constant_load_has_exactly_zero_oscillation(rng):
    prob = make_problem(lambda x, y: np.ones_like(x), zero_fn)
    mesh = refine_nvb(create_structured("lshape_small", 2), [0, 4, 7])
    dm = DofMap.build(mesh)
    coeffs = rng.normal(size=dm.n_total)
    coeffs[dm.n_u + dm.n_sigma:] = np.abs(coeffs[dm.n_u + dm.n_sigma:])
    local = local_estimates(FirstOrderSolution(dm, coeffs), prob)
    assert np.all(local.osc2 == 0.0)


def test_contact_indicator_matches_direct_quadrature(rng):
    """lam = 2 on an element where u_h > g: indicator equals 2 * int(u_h - g)."""
    g = lambda x, y: np.full_like(x, -2.0)
    prob = make_problem(zero_fn, g)
    mesh = create_structured("unit_square", 1)
    dm = DofMap.build(mesh)
    coeffs = np.zeros(dm.n_total)
    lam_block = dm.n_u + dm.n_sigma
    coeffs[lam_block:] = 2.0
    sol = FirstOrderSolution(dm, coeffs)
    local = local_estimates(sol, prob)
    bary, w = quadrature.triangle_rule(5)
    for t in range(mesh.n_elements):
        u_vals = np.array([evaluate(sol, t, b)[0] for b in bary])
        pts = bary @ mesh.element_coords[t]
        direct = 2.0 * mesh.areas[t] * float(
            ((u_vals - g(pts[:, 0], pts[:, 1])) * w).sum())
        assert local.rho2_contact[t] == pytest.approx(direct, rel=1e-13)
    assert np.all(local.rho2_penetration == 0.0)


def test_penetration_indicator_where_obstacle_above():
    g = lambda x, y: np.full_like(x, 0.5)
    grad_g = lambda x, y: (np.zeros_like(x), np.zeros_like(x))
    prob = make_problem(zero_fn, g, grad_g=grad_g)
    dm = DofMap.build(create_structured("unit_square", 2))
    local = local_estimates(FirstOrderSolution.zeros(dm), prob)
    # u_h = 0 < g everywhere and grad g = 0, grad u_h = 0: no gradient gap
    assert np.all(local.rho2_penetration == 0.0)
    grad_g2 = lambda x, y: (np.ones_like(x), np.zeros_like(x))
    prob2 = make_problem(zero_fn, g, grad_g=grad_g2)
    local2 = local_estimates(FirstOrderSolution.zeros(dm), prob2)
    assert np.allclose(local2.rho2_penetration, dm.mesh.areas, rtol=1e-13)


def test_negative_multiplier_warns_and_clamps():
    prob = make_problem(zero_fn, lambda x, y: np.full_like(x, -1.0))
    dm = DofMap.build(create_structured("unit_square", 1))
    coeffs = np.zeros(dm.n_total)
    coeffs[dm.n_u + dm.n_sigma:] = -1.0
    with pytest.warns(UserWarning, match="negative multiplier"):
        local = local_estimates(FirstOrderSolution(dm, coeffs), prob)
    assert np.all(local.rho2_contact == 0.0)


def test_error_third_component_vanishes_for_projected_constant_load(rng):
    """sigma=(x, y), lam=1, f=-3: the flux residual vanishes discretely."""
    exact = dict(
        exact_u=lambda x, y: np.zeros_like(x),
        exact_grad_u=lambda x, y: (np.zeros_like(x), np.zeros_like(x)),
        exact_lambda=lambda x, y: np.ones_like(x),
    )
    prob = make_problem(lambda x, y: np.full_like(x, -3.0), zero_fn,
                        exact=exact)
    mesh = refine_nvb(create_structured("unit_square", 2), [1, 4])
    dm = DofMap.build(mesh)
    coeffs = np.concatenate([
        np.zeros(dm.n_u),
        rt_interpolate(dm, lambda x, y: (x, y)),
        project_p0(dm, lambda x, y: np.ones_like(x)),
    ])
    err = error_U(FirstOrderSolution(dm, coeffs), prob)
    assert err.err_divlam <= 1e-12


def test_error_exact_triple_against_itself_is_zero():
    prob = example_smooth()
    mesh = create_structured("unit_square", 2)
    dm = DofMap.build(mesh)
    coeffs = np.concatenate([
        nodal_interpolate(dm, prob.exact_u),
        rt_interpolate(dm, prob.exact_grad_u),
        project_p0(dm, prob.exact_lambda),
    ])
    sol = FirstOrderSolution(dm, coeffs)

    def disc_u_grad(x, y):
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        shape = np.broadcast(x, y).shape
        gx = np.empty(shape)
        gy = np.empty(shape)
        for k, (xi, yi) in enumerate(zip(np.ravel(np.broadcast_to(x, shape)),
                                         np.ravel(np.broadcast_to(y, shape)))):
            t, bary = locate_point(mesh, xi, yi)
            _, grad, _, _, _ = evaluate(sol, t, bary)
            gx.ravel()[k], gy.ravel()[k] = grad
        return gx, gy

    def disc_sigma(x, y):
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        shape = np.broadcast(x, y).shape
        sx = np.empty(shape)
        sy = np.empty(shape)
        for k, (xi, yi) in enumerate(zip(np.ravel(np.broadcast_to(x, shape)),
                                         np.ravel(np.broadcast_to(y, shape)))):
            t, bary = locate_point(mesh, xi, yi)
            _, _, sig, _, _ = evaluate(sol, t, bary)
            sx.ravel()[k], sy.ravel()[k] = sig
        return sx, sy

    def neg_div_minus_lam(x, y, cell=None):
        # f consistent with the discrete triple: -(div sigma_h + lam_h)
        x = np.atleast_1d(x)
        out = np.empty(np.broadcast(x, np.atleast_1d(y)).shape)
        for k, (xi, yi) in enumerate(zip(np.ravel(x), np.ravel(np.atleast_1d(y)))):
            t, bary = locate_point(mesh, xi, yi)
            _, _, _, div, lam = evaluate(sol, t, bary)
            out.ravel()[k] = -(div + lam)
        return out

    # use the discrete fields themselves as the reference: all errors vanish
    self_prob = make_problem(neg_div_minus_lam, zero_fn, exact=dict(
        exact_u=prob.exact_u, exact_grad_u=disc_u_grad, exact_lambda=None))
    err = error_U(FirstOrderSolution(dm, coeffs.copy()), self_prob)
    assert err.err_grad <= 1e-12
    # flux reference equals the discrete flux
    sigma_prob = make_problem(neg_div_minus_lam, zero_fn, exact=dict(
        exact_u=prob.exact_u, exact_grad_u=disc_sigma, exact_lambda=None))
    err2 = error_U(FirstOrderSolution(dm, coeffs.copy()), sigma_prob)
    assert err2.err_sigma <= 1e-12
    assert err2.err_divlam <= 1e-12


def test_errors_decrease_under_uniform_refinement():
    prob = example_smooth()
    mesh = create_structured("unit_square", 2)
    vals = []
    for _ in range(4):
        dm = DofMap.build(mesh)
        rep = solve_problem(mesh, dm, FormConfig("A", prob), "Ks")
        vals.append(error_U(rep.solution, prob).err_U)
        mesh = refine_nvb(mesh, range(mesh.n_elements))
    assert vals[0] > 0.0
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_error_requires_exact_solution():
    prob = make_problem(zero_fn, zero_fn)
    dm = DofMap.build(create_structured("unit_square", 1))
    with pytest.raises(ValueError, match="no exact solution"):
        error_U(FirstOrderSolution.zeros(dm), prob)
    assert error_report is not None


def test_dual_norm_zero_and_homogeneity(rng):
    mesh = create_structured("lshape_small", 2)
    dm = DofMap.build(mesh)
    assert discrete_h_minus1_norm(mesh, dm, zero_fn) == 0.0
    mu = lambda x, y: np.sin(2 * x) + np.cos(3 * y)
    mu2 = lambda x, y: 2.0 * mu(x, y)
    n1 = discrete_h_minus1_norm(mesh, dm, mu)
    n2 = discrete_h_minus1_norm(mesh, dm, mu2)
    assert n2 == pytest.approx(2.0 * n1, rel=1e-12)


def test_dual_norm_lift_bounded_by_diameter(rng):
    """The Poisson-lift energy never exceeds diam * |mu| (Friedrichs)."""
    mesh = create_structured("unit_square", 4)
    dm = DofMap.build(mesh)
    diam = np.sqrt(2.0)
    bary, w = quadrature.triangle_rule(5)
    for _ in range(10):
        lam = rng.normal(size=mesh.n_elements)
        mu = lambda x, y, cell: lam[cell]
        total = discrete_h_minus1_norm(mesh, dm, mu)
        h_part2 = float((mesh.diameters**2 * lam**2) @ mesh.areas)
        lift2 = total**2 - h_part2
        mu_l2 = float(np.sqrt((lam**2) @ mesh.areas))
        assert lift2 <= (diam * mu_l2)**2 * (1.0 + 1e-12)


def test_pythagoras_identity_of_efficiency_terms():
    """eta^2 + osc^2 equals the unprojected flux residual plus the
    gradient mismatch when element means use the same quadrature."""
    prob = example_smooth()
    mesh = create_structured("unit_square", 4)
    dm = DofMap.build(mesh)
    rep = solve_problem(mesh, dm, FormConfig("A", prob), "Ks")
    local = local_estimates(rep.solution, prob)
    err = error_U(rep.solution, prob)
    lhs = local.total_eta2 + local.total_osc2
    rhs = err.err_divlam**2 + local.eta2_grad.sum()
    assert abs(lhs - rhs) <= 1e-10 * lhs


@pytest.mark.parametrize("form,set_kind", [("A", "Ks"), ("C", "K1")])
def test_weak_norm_chain_inequality_on_solutions(form, set_kind):
    """For sign-constrained multipliers the weak-norm error obeys the
    gradient/flux/residual chain with Friedrichs constant diam."""
    prob = example_smooth()
    diam = prob.diameter
    mesh = create_structured("unit_square", 2)
    for _ in range(4):
        dm = DofMap.build(mesh)
        rep = solve_problem(mesh, dm, FormConfig(form, prob), set_kind)
        err = error_report(rep.solution, prob)
        lhs = err.err_V**2
        rhs = (err.err_grad**2 + 3.0 * err.err_sigma**2
               + 2.0 * diam**2 * err.err_divlam**2)
        assert lhs <= rhs * (1.0 + 1e-12)
        mesh = refine_nvb(mesh, range(mesh.n_elements))


def test_weak_norm_rigorous_parts_any_form():
    """Formulation-independent parts of the chain: the lift obeys the
    Friedrichs split and the mesh-weighted term is at most diam * |mu|."""
    prob = example_smooth()
    diam = prob.diameter
    mesh = create_structured("unit_square", 4)
    dm = DofMap.build(mesh)
    rep = solve_problem(mesh, dm, FormConfig("B", prob), "K0")
    sol = rep.solution
    err = error_report(sol, prob)
    lam_h = sol.lam
    bary, w = quadrature.triangle_rule(5)
    pts = quadrature.physical_points(mesh.element_coords, bary)
    lam_ex = prob.exact_lambda(pts[..., 0], pts[..., 1])
    defect2 = ((lam_ex - lam_h[:, None])**2 @ w)
    mu_l2_sq = float(defect2 @ mesh.areas)
    h_part2 = float((mesh.diameters**2 * mesh.areas) @ defect2)
    lift2 = err.lam_dual**2 - h_part2
    assert h_part2 <= diam**2 * mu_l2_sq * (1.0 + 1e-12)
    assert lift2 <= (2.0 * err.err_sigma**2
                     + 2.0 * diam**2 * err.err_divlam**2) * (1.0 + 1e-12)


def test_multiplier_dual_error_requires_exact_multiplier():
    prob = make_problem(zero_fn, zero_fn)
    dm = DofMap.build(create_structured("unit_square", 1))
    with pytest.raises(ValueError):
        multiplier_dual_error(FirstOrderSolution.zeros(dm), prob)


def test_threaded_estimate_stage_matches_serial(monkeypatch):
    prob = example_smooth()
    mesh = create_structured("unit_square", 8)
    dm = DofMap.build(mesh)
    rep = solve_problem(mesh, dm, FormConfig("A", prob), "Ks")
    serial = local_estimates(rep.solution, prob)
    monkeypatch.setenv("OBSTACLEFEM_NUM_THREADS", "4")
    threaded = local_estimates(rep.solution, prob)
    assert np.array_equal(serial.est2, threaded.est2)
