import numpy as np
import pytest

from obstaclefem.adaptivity import doerfler_mark, fit_rate, run_adaptive
from obstaclefem.problems import get_problem
from obstaclefem.vi_solver import NonConvergenceError, SolverOptions


def test_mark_hand_traced_prefix():
    marked = doerfler_mark(np.array([4.0, 3.0, 2.0, 1.0]), theta=0.5)
    assert marked.tolist() == [0, 1]             # 4 + 3 >= 5


def test_mark_full_bulk_selects_all_positive():
    est2 = np.array([1.0, 0.0, 2.0, 0.0, 0.5])
    marked = doerfler_mark(est2, theta=1.0)
    assert marked.tolist() == [0, 2, 4]


def test_mark_concentrated_indicator():
    est2 = np.zeros(10)
    est2[7] = 3.0
    assert doerfler_mark(est2, theta=0.25).tolist() == [7]


def test_mark_tie_break_by_id():
    marked = doerfler_mark(np.array([1.0, 1.0, 1.0, 1.0]), theta=0.5)
    assert marked.tolist() == [0, 1]


def test_mark_validation():
    with pytest.raises(ValueError):
        doerfler_mark(np.array([]), 0.5)
    with pytest.raises(ValueError):
        doerfler_mark(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        doerfler_mark(np.array([1.0]), 1.5)


def test_mark_greedy_is_minimal(rng):
    for _ in range(50):
        est2 = rng.uniform(0.0, 1.0, size=rng.integers(1, 40)) ** 2
        theta = float(rng.uniform(0.05, 1.0))
        marked = doerfler_mark(est2, theta)
        total = est2.sum()
        if total == 0.0:
            assert marked.size == 0
            continue
        assert est2[marked].sum() >= theta * total - 1e-15
        if marked.size:
            reduced = est2[marked].sum() - est2[marked].min()
            assert reduced < theta * total


def test_fit_rate_examples():
    n = np.array([100.0, 200.0, 400.0, 800.0])
    assert fit_rate(n, 3.0 * n ** -0.5) == pytest.approx(0.5, rel=1e-12)
    assert fit_rate(n, np.full(4, 2.5)) == 0.0
    assert fit_rate([100.0, 400.0], [1.0, 0.5], tail=2) == pytest.approx(
        0.5, rel=1e-12)
    with pytest.raises(ValueError):
        fit_rate([100.0], [1.0])


def test_uniform_mode_doubles_elements():
    prob = get_problem("smooth")
    recs = run_adaptive(prob, "A", "Ks", mode="uniform", max_levels=4,
                        initial_subdivisions=2)
    assert [r.nE for r in recs] == [8, 16, 32, 64]
    assert all(b.nE == 2 * a.nE for a, b in zip(recs, recs[1:]))


def test_records_consistent_and_strictly_growing():
    prob = get_problem("smooth")
    recs = run_adaptive(prob, "A", "Ks", mode="adaptive", theta=0.25,
                        max_levels=6, initial_subdivisions=2)
    assert all(b.nE > a.nE for a, b in zip(recs, recs[1:]))
    for r in recs:
        total = r.eta**2 + r.estContact**2 + r.oscF**2
        assert r.est**2 == pytest.approx(total, rel=1e-12)
        assert r.errNormU is not None and r.errNormV is not None
        assert r.iters >= 1


def test_max_dofs_budget_caps_levels():
    prob = get_problem("smooth")
    recs = run_adaptive(prob, "A", "Ks", mode="uniform", max_dofs=500,
                        initial_subdivisions=2)
    assert all(r.nDof <= 500 for r in recs)
    assert recs[-1].nDof > 500 // 2


def test_nonconvergence_preserves_records():
    prob = get_problem("smooth")
    with pytest.raises(NonConvergenceError) as info:
        run_adaptive(prob, "A", "Ks", mode="uniform", max_levels=3,
                     initial_subdivisions=2,
                     solver_options=SolverOptions(max_iterations=1))
    assert info.value.records == []


def test_pyramid_records_have_no_error_columns():
    prob = get_problem("pyramid")
    recs = run_adaptive(prob, "A", "Ks", mode="uniform", max_levels=2,
                        initial_subdivisions=1)
    assert all(r.errNormU is None and not r.has_errors for r in recs)


def test_adaptive_mesh_grading_toward_reentrant_corner():
    """Bulk-marked runs refine the corner much deeper than the bulk."""
    prob = get_problem("pyramid")
    corner_mesh = {}

    def keep(level, mesh, *rest):
        corner_mesh["mesh"] = mesh

    run_adaptive(prob, "A", "Ks", mode="adaptive", theta=0.25,
                 max_dofs=6000, initial_subdivisions=2, on_level=keep)
    mesh = corner_mesh["mesh"]
    at_corner = np.isclose(mesh.element_coords, 0.0).all(axis=2).any(axis=1)
    assert at_corner.any()
    corner_h = mesh.diameters[at_corner].max()
    global_h = mesh.diameters.max()
    assert corner_h <= 0.5 * global_h
    assert mesh.generation[at_corner].min() > np.median(mesh.generation)


def test_invalid_mode_rejected():
    prob = get_problem("smooth")
    with pytest.raises(ValueError, match="refinement mode"):
        run_adaptive(prob, "A", "Ks", mode="bisect", max_levels=1)
