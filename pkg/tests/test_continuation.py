import math

import numpy as np
import pytest

from lsnn.benchmarks import A_RADIUS, builtin_problem
from lsnn.continuation import (DEFAULT_PLAN, ContinuationPlan, ContinuationStage, exact_solution_sectors,
                               grow_and_transplant, run_continuation)
from lsnn.fields import VelocityField, sector_angles, unit_vectors
from lsnn.geometry import build_mesh
from lsnn.initializer import solve_output_layer
from lsnn.loss import LossConfig, LossPlan
from lsnn.network import Architecture, forward, param_count_paper
from lsnn.verify import random_params

DOM = builtin_problem("twosector").domain


def _small(seed=0, arch="2-5-5-1"):
    return random_params(np.random.default_rng(seed), Architecture.parse(arch), DOM)


def _plan(pid="sectors:3"):
    problem = builtin_problem(pid)
    mesh = build_mesh(problem.domain, 0.01, problem.beta)
    return LossPlan(mesh, problem, LossConfig.for_problem(problem, 0.01))


def test_identity_growth_keeps_hidden_layers_and_resolves_output():
    small = _small()
    plan = _plan()
    big = grow_and_transplant(small, small.arch, 1, DOM, resolve_with=plan)
    for l in range(small.arch.depth - 1):
        assert np.array_equal(big.W(l), small.W(l)) and np.array_equal(big.b(l), small.b(l))
    assert big == solve_output_layer(small, plan)


def test_old_parameters_keep_their_positions():
    small = _small()
    big = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 1, DOM, resolve_with=_plan())
    assert param_count_paper(small.arch) == 46
    assert np.array_equal(big.W(0)[:5], small.W(0)) and np.array_equal(big.b(0)[:5], small.b(0))
    assert np.array_equal(big.W(1)[:5, :5], small.W(1)) and np.array_equal(big.b(1)[:5], small.b(1))
    # cross terms from new first-layer neurons into old second-layer neurons are zero
    assert np.all(big.W(1)[:5, 5:] == 0.0)
    # new first-layer neuron is a unit-normal line through the domain
    assert np.hypot(*big.W(0)[5]) == pytest.approx(1.0)


def test_embedding_identity_exact():
    small = _small(3)
    big = grow_and_transplant(small, Architecture.parse("2-8-8-1"), 5, DOM)
    pts = np.random.default_rng(9).uniform(0, 1, (1000, 2))
    assert np.array_equal(forward(big, pts), forward(small, pts))
    assert np.all(big.W(2)[0, 5:] == 0.0)


def test_growth_changes_only_through_output_and_new_neurons():
    small = _small(4)
    big = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 5, DOM, resolve_with=_plan())
    pts = np.random.default_rng(1).uniform(0, 1, (500, 2))
    frozen = big.copy()
    L = big.arch.depth
    frozen.W(L - 1)[0, :5] = small.W(L - 1)[0]
    frozen.W(L - 1)[0, 5:] = 0.0
    frozen.b(L - 1)[0] = small.b(L - 1)[0]
    assert np.array_equal(forward(frozen, pts), forward(small, pts))


def test_non_dominating_architecture_rejected():
    with pytest.raises(ValueError, match="dominate"):
        grow_and_transplant(_small(), Architecture.parse("2-4-6-1"), 0, DOM)
    with pytest.raises(ValueError):
        grow_and_transplant(_small(), Architecture.parse("2-6-6-6-1"), 0, DOM)


def test_growth_is_seeded():
    small = _small()
    a = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 3, DOM)
    b = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 3, DOM)
    c = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 4, DOM)
    assert a == b and a != c


def test_exact_solution_sectors_examples():
    u2 = exact_solution_sectors(2, A_RADIUS)
    assert u2(np.array([[0.1, 0.1]]))[0] == -1.0
    for n in (2, 3, 7):
        assert exact_solution_sectors(n)(np.array([[0.99, 0.99]]))[0] == 1.0


def test_chord_midpoint_containment_n4():
    n, a = 4, A_RADIUS
    t = sector_angles(n)
    u = exact_solution_sectors(n, a)
    for i in range(n):
        p0 = a * np.array([math.cos(t[i]), math.sin(t[i])])
        p1 = a * np.array([math.cos(t[i + 1]), math.sin(t[i + 1])])
        mid = 0.5 * (p0 + p1)
        inward = -mid / np.linalg.norm(mid)
        assert u((mid + 1e-6 * inward)[None])[0] == -1.0
        assert u((mid - 1e-6 * inward)[None])[0] == 1.0


def test_two_sector_problem_matches_n2_polygon():
    pts = np.random.default_rng(0).uniform(0, 1, (5000, 2))
    u2 = exact_solution_sectors(2)
    tw = builtin_problem("twosector")
    far = tw.interface_distance(pts) > 1e-9
    assert np.array_equal(u2(pts[far]), tw.exact_u(pts[far]))


def test_bottom_point_on_both_interfaces():
    p = np.array([[A_RADIUS, 0.0]])
    assert builtin_problem("twosector").interface_distance(p)[0] == pytest.approx(0.0, abs=1e-15)
    assert builtin_problem("rotational").interface_distance(p)[0] == pytest.approx(0.0, abs=1e-15)
    assert exact_solution_sectors(5).interface_distance(p)[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_characteristic_consistency(n):
    rho = 0.005
    u = exact_solution_sectors(n)
    pts = np.random.default_rng(n).uniform(0, 1, (10_000, 2))
    unit, _ = unit_vectors(VelocityField.sectors(n), pts)
    back = pts - rho * unit
    ok = (u.interface_distance(pts) > 2 * rho) & (u.interface_distance(back) > 2 * rho)
    ok &= (back[:, 0] >= 0) & (back[:, 1] >= 0)
    fd = (u(pts[ok]) - u(back[ok])) / rho
    assert ok.sum() > 5000
    assert np.all(fd == 0.0)


def test_sector_area_converges_to_quarter_disc():
    m = 2000
    t = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(t, t)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    disc = np.hypot(pts[:, 0], pts[:, 1]) < A_RADIUS
    areas = [np.mean((exact_solution_sectors(n)(pts) < 0) != disc) for n in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(areas, areas[1:]))


def test_default_plan_shape():
    assert [s.problem for s in DEFAULT_PLAN.stages] == ["sectors:2", "sectors:3", "sectors:4", "sectors:5",
                                                       "rotational"]
    assert [s.arch for s in DEFAULT_PLAN.stages] == ["2-5-5-1", "2-6-6-1", "2-6-6-1", "2-8-8-1", "2-25-25-1"]
    assert param_count_paper(Architecture.parse(DEFAULT_PLAN.stages[-1].arch)) == 726


def test_plan_validation():
    with pytest.raises(ValueError):
        ContinuationPlan((ContinuationStage("sectors:2", "2-6-6-1", 1, "fixed:0.01"),
                          ContinuationStage("rotational", "2-5-5-1", 1, "fixed:0.01")))
    with pytest.raises(ValueError):
        ContinuationPlan((ContinuationStage("sectors:2", "2-5-5-1", 1, "fixed:0.01"),))
    with pytest.raises(ValueError):
        ContinuationStage("vline", "2-5-5-1", 1, "fixed:0.01")


def test_plan_parse_and_scale():
    plan = ContinuationPlan.parse(["sectors:2 2-5-5-1 50000 fixed:0.003",
                                   "curve 2-6-6-1 100000 decay:0.01,0.2,50000"])
    assert plan.stages[-1].problem == "rotational"
    small = plan.scaled(0.1)
    assert [s.iterations for s in small.stages] == [5000, 10000]
    assert small.stages[1].schedule == "decay:0.01,0.2,5000"


def test_short_continuation_run(tmp_path):
    plan = ContinuationPlan((ContinuationStage("sectors:2", "2-5-5-1", 30, "fixed:0.003"),
                             ContinuationStage("sectors:3", "2-6-6-1", 30, "fixed:0.003"),
                             ContinuationStage("rotational", "2-6-6-1", 20, "fixed:0.003")))
    results = run_continuation(plan, seed=1, out_dir=tmp_path)
    assert len(results) == 3
    assert [r.report.arch for r in results] == [Architecture.parse(s.arch) for s in plan.stages]
    # stage 2 starts from stage 1's hidden layers
    s1, s2 = results[0].report.params, results[1].report.initial_params
    assert np.array_equal(s2.W(0)[:5], s1.W(0))
    for r in results:
        assert 0 <= r.metrics.rel_l2 and 0 <= r.target_rel_l2
    assert (tmp_path / "stage_1_sectors3" / "history.csv").exists()
    assert len(run_continuation(plan, seed=1, stop_after=1)) == 1
