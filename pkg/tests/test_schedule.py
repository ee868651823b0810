import json

import numpy as np
import pytest

from conftest import GOLDEN_M, GOLDEN_N
from squeeze_forge.curvature import pinch_check, pinch_interval, region_bounds, stage_profile
from squeeze_forge.domain import DomainModel
from squeeze_forge.errors import InvariantViolation, NotFound, SearchExhausted
from squeeze_forge.graphs import Cutoff, GlueStage, GraphStack, glue_radial, sphere_radial
from squeeze_forge.schedule import (Schedule, ScheduleEntry, SweepConfig, build_schedule, convexity_check,
                                    convexity_windows, epsilon_admissible, exhaustion_check,
                                    exhaustion_report, find_m, find_n, flat_point_curvature, membership,
                                    nested_domains_check, select_epsilon)
from squeeze_forge.squeeze import shell_bound


# -- membership -----------------------------------------------------------------------


def test_base_ball_center_is_inside(domain6):
    assert membership(domain6, [0.0, 0.0, 0.0, 10.0]) is True


def test_points_below_the_flat_point_are_outside(domain6):
    assert membership(domain6, [0.0, 0.0, 0.0, -0.1]) is False


def test_graph_points_are_boundary(domain6):
    for r in (1e-6, 1e-3, 0.2, 0.45):
        xp = np.array([r, 0.0, 0.0])
        height = float(domain6.graph_value(np.array([r]))[0])
        assert membership(domain6, np.append(xp, height)) is False
        assert membership(domain6, np.append(xp, height + 1e-9)) is True


def test_origin_is_a_boundary_point_with_upward_normal(domain6):
    assert membership(domain6, np.zeros(4)) is False
    assert membership(domain6, [0.0, 0.0, 0.0, 1e-12]) is True
    p, nu = domain6.boundary_point(np.zeros(3))
    assert np.array_equal(p, np.zeros(4)) and np.array_equal(nu, [0.0, 0.0, 0.0, 1.0])


def test_membership_is_vectorized(domain6):
    pts = np.array([[0.0, 0.0, 0.0, 10.0], [0.0, 0.0, 0.0, -1.0]])
    assert membership(domain6, pts).tolist() == [True, False]


def test_lens_reaches_below_the_base_ball(domain6):
    # between f_j and psi_k0 near the origin: outside B_k0 but inside the domain
    r = 0.01
    lo = float(domain6.graph_value(np.array([r]))[0])
    hi = float(sphere_radial(10, r).value)
    x = np.array([r, 0.0, 0.0, 0.5 * (lo + hi)])
    assert domain6.ball_slack(x)[0] < 0 < domain6.clearance(x)[0]


def test_domain_rejects_bad_configuration(stack6):
    with pytest.raises(InvariantViolation):
        DomainModel(stack6, n=1)
    with pytest.raises(InvariantViolation):
        DomainModel(stack6, chart_radius=1.5)
    assert DomainModel(stack6, chart_radius=0.4).chart_problems()


def test_layer_samples_sit_just_above_the_boundary(domain6):
    layer = domain6.layer(0.5, 0.05, 1e-6)
    pts = layer.sample(np.random.default_rng(0), 1000)
    r = np.linalg.norm(pts[:, :3], axis=1)
    gap = pts[:, 3] - domain6.bottom(r)
    assert np.all((gap >= 0) & (gap <= 1e-6))


# -- epsilon selection ----------------------------------------------------------------


def test_select_epsilon_accepts_a_pinched_radius():
    eps = select_epsilon(10, GOLDEN_M)
    assert eps > 0
    lo, hi = pinch_interval(10, GOLDEN_M)
    cr = region_bounds(stage_profile(10, eps), eps)
    assert lo <= cr.kappa_min <= cr.kappa_max <= hi


def test_select_epsilon_is_a_halving_of_start():
    eps = select_epsilon(12, GOLDEN_M, start=0.3)
    i = round(np.log2(0.3 / eps))
    assert eps == 0.3 * 2.0**-i


def test_select_epsilon_returns_the_largest_admissible_halving():
    eps = select_epsilon(10, GOLDEN_M, start=0.4)
    if eps < 0.4:
        assert not epsilon_admissible(10, GOLDEN_M, 2 * eps)


def test_small_k_exhausts_the_search():
    with pytest.raises(SearchExhausted) as info:
        select_epsilon(3, 1)
    assert info.value.k == 3 and info.value.halvings == 60


def test_halving_budget_is_configurable():
    with pytest.raises(SearchExhausted) as info:
        select_epsilon(3, 1, cfg=SweepConfig(max_halvings=5))
    assert info.value.halvings == 5


def test_select_epsilon_needs_k_above_m():
    with pytest.raises(ValueError):
        select_epsilon(2, 2)


def test_shell_identity_beyond_the_accepted_radius():
    eps = select_epsilon(10, GOLDEN_M)
    r = np.linspace(eps, 1.0, 200)
    glued = glue_radial(10, eps, Cutoff(), r)
    base = sphere_radial(10, r)
    for a, b in zip(glued, base):
        assert np.array_equal(a, b)


# -- margin and start index ------------------------------------------------------------


def test_find_m_golden_values():
    eps = {}
    assert find_m((5, 25), epsilons=eps) == (GOLDEN_M, GOLDEN_N)
    assert sorted(eps) == list(range(GOLDEN_N, 26))


def test_margin_one_fails_everywhere():
    with pytest.raises(SearchExhausted):
        find_n(1, 5, 25)


def test_larger_margin_keeps_working_with_no_smaller_radii():
    for k in range(5, 26):
        assert select_epsilon(k, GOLDEN_M + 1) >= select_epsilon(k, GOLDEN_M)
    assert find_n(GOLDEN_M + 1, 5, 25) <= max(GOLDEN_N, GOLDEN_M + 2)


def test_find_m_reports_not_found_under_tight_cap():
    with pytest.raises(NotFound):
        find_m((5, 25), m_cap=1)


def test_find_m_needs_k_lo_at_least_two():
    with pytest.raises(ValueError):
        find_m((1, 5))


def test_find_n_is_at_most_k_lo():
    assert find_n(GOLDEN_M, 10, 15) <= 10


# -- schedules ---------------------------------------------------------------------------


def test_depth_one_schedule_has_one_entry():
    s = build_schedule(10, 1, GOLDEN_M)
    assert s.depth == 1 and s.entries[0].k == 10


def test_depth_six_schedule_matches_golden_file(schedule6, golden_dir):
    text = (golden_dir / "schedule_k10_d6.json").read_text()
    assert schedule6.to_json() == text
    assert Schedule.from_dict(json.loads(text)) == schedule6


def test_schedule_sequences_strictly_decrease(schedule6):
    for name in ("epsilon", "delta", "t"):
        seq = [getattr(e, name) for e in schedule6.entries]
        assert all(b < a for a, b in zip(seq, seq[1:]))
    assert all(e.delta <= e.epsilon for e in schedule6.entries)


def test_schedule_caps_hold(schedule6):
    for prev, e in zip(schedule6.entries, schedule6.entries[1:]):
        assert e.epsilon <= prev.delta / 2 and e.epsilon <= prev.epsilon / 2
        assert e.epsilon <= schedule6.plateau * prev.epsilon
        assert e.delta == e.epsilon / 2


def test_schedule_depths_come_from_shell_bounds(schedule6):
    for e in schedule6.entries:
        assert e.t == shell_bound(e.k, schedule6.m, e.delta)[0]


def test_every_entry_is_pinched_on_the_full_stack(stack6, schedule6):
    rep = pinch_check(stack6, schedule6.m)
    assert rep.ok and len(rep.details) == schedule6.depth


def test_schedule_build_propagates_exhaustion():
    with pytest.raises(SearchExhausted):
        build_schedule(2, 1, 1)


def test_schedule_invariants_are_enforced(schedule6):
    entries = list(schedule6.entries)
    entries[1], entries[2] = entries[2], entries[1]
    with pytest.raises(InvariantViolation):
        Schedule(10, GOLDEN_M, GOLDEN_N, tuple(entries))
    with pytest.raises(InvariantViolation):
        Schedule(10, 3, 3, schedule6.entries)
    bad_t = tuple(ScheduleEntry(e.k, e.epsilon, e.delta, e.t * 2) for e in schedule6.entries)
    assert Schedule(10, GOLDEN_M, GOLDEN_N, bad_t, validate=False).invariant_problems()


def test_schedule_json_round_trip(schedule6, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(schedule6.to_json())
    assert Schedule.load(path) == schedule6
    doc = json.loads(schedule6.to_json())
    assert {"k0", "m", "N", "depth", "entries"} <= set(doc)
    assert set(doc["entries"][0]) == {"k", "epsilon", "delta", "t"}


def test_schedule_depth_field_must_match(schedule6):
    doc = schedule6.to_dict()
    doc["depth"] = 5
    with pytest.raises(InvariantViolation):
        Schedule.from_dict(doc)


def test_doubling_first_radius_breaks_stack_validation(schedule6):
    tampered = schedule6.with_epsilon(10, 2 * schedule6.entries[0].epsilon)
    assert not tampered.invariant_problems()
    with pytest.raises(InvariantViolation):
        tampered.stack()
    assert tampered.stack(validate=False).nesting_problems()


def test_flat_point_is_the_innermost_sphere(schedule6):
    for depth in (1, 3, 6):
        s = build_schedule(10, depth, GOLDEN_M)
        lo, hi = flat_point_curvature(s.stack())
        assert lo == pytest.approx(1 / (10 + depth), abs=1e-9)
        assert hi == pytest.approx(1 / (10 + depth), abs=1e-9)


# -- convexity, exhaustion, nesting -------------------------------------------------------


def test_pure_ball_is_convex():
    rep = convexity_check(DomainModel(GraphStack(10)), 20_000, 0)
    assert rep.ok and rep.samples == 20_000


def test_certified_domain_is_convex(domain6):
    rep = convexity_check(domain6, 100_000, 42)
    assert rep.ok and rep.min_slack > 0


def test_oversized_radius_is_flagged(schedule6):
    tampered = schedule6.with_epsilon(10, 2 * schedule6.entries[0].epsilon)
    rep = convexity_check(tampered.domain(validate=False), 100_000, 42)
    assert not rep.ok and rep.min_slack < 0
    bad = [d["window"] for d in rep.details if d["violations"]]
    assert bad and all("chart" in w for w in bad)


def test_convexity_windows_cover_every_seam(domain6):
    labels = [w.label for w in convexity_windows(domain6)]
    for k in range(10, 16):
        assert f"seam[k={k}]" in labels and f"origin[k={k}]" in labels
    assert "seam[chart]" in labels and "global" in labels


def test_convexity_is_deterministic(domain6):
    a = convexity_check(domain6, 5000, 7)
    b = convexity_check(domain6, 5000, 7)
    assert a.summary() == b.summary() and a.details == b.details


def test_convexity_needs_pairs(domain6):
    with pytest.raises(ValueError):
        convexity_check(domain6, 0, 0)


def test_exhaustion_holds_on_certified_stack(stack6):
    assert exhaustion_check(stack6, 10_000)


def test_exhaustion_trivial_for_depth_one():
    assert exhaustion_check(GraphStack(10, (GlueStage(10, 0.5),)), 1000)
    assert exhaustion_check(GraphStack(10), 1000)


def test_exhaustion_fails_when_gluing_toward_a_smaller_sphere():
    swapped = GraphStack(10, (GlueStage(10, 0.5, target=9),))
    assert not exhaustion_check(swapped, 1000)
    assert exhaustion_report(swapped, 1000).violations > 0


def test_stage_domains_are_nested(domain6):
    rep = nested_domains_check(domain6, 100_000, 0)
    assert rep.ok and rep.samples >= 90_000
