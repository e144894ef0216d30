"""Crew dispatch tests: scheduling semantics, the exact solver against an
unpruned enumeration oracle, and instance construction from damage."""

import itertools
import math

import numpy as np
import pytest

from gridquake.dispatch import (DispatchInstance, Depot, FailedComponent,
                                cluster_to_depots, exact_dispatch,
                                instance_from_scenario, plan_objective,
                                schedule_plan, subtour_violations,
                                travel_hours)
from gridquake.errors import ConfigError, LimitError
from gridquake.fixtures import builtin_feeder
from gridquake.policy.train import InstanceFamily


def brute_force_value(instance):
    """Unpruned exhaustive optimum: every ordered split of every depot's
    cluster across its crews."""
    assignment = cluster_to_depots(instance)
    cluster = {d.id: [c.id for c in instance.components
                      if assignment[c.id] == d.id]
               for d in instance.depots}
    comp = {c.id: c for c in instance.components}
    speed = instance.travel_speed_kmh
    gamma = instance.gamma

    def crew_time_and_weighted(depot, seq):
        t, wsum = 0.0, 0.0
        x, y = depot.x, depot.y
        for cid in seq:
            c = comp[cid]
            t += travel_hours((x, y), (c.x, c.y), speed) + c.repair_hours
            wsum += c.curtailed_mw * t
            x, y = c.x, c.y
        return t, wsum

    def depot_options(depot):
        jobs = cluster[depot.id]
        n_crews = depot.crew_count
        options = []
        if not jobs:
            return [(0.0, 0.0)]
        for perm in itertools.permutations(jobs):
            for cuts in itertools.combinations_with_replacement(
                    range(len(jobs) + 1), n_crews - 1):
                bounds = (0,) + cuts + (len(jobs),)
                if any(a > b for a, b in zip(bounds, bounds[1:])):
                    continue
                t_max, wsum = 0.0, 0.0
                for k in range(n_crews):
                    seq = perm[bounds[k]:bounds[k + 1]]
                    t, w = crew_time_and_weighted(depot, seq)
                    t_max = max(t_max, t)
                    wsum += w
                options.append((t_max, wsum))
        return options

    per_depot = [depot_options(d) for d in instance.depots]
    best = math.inf
    for combo in itertools.product(*per_depot):
        t = max(c[0] for c in combo)
        w = sum(c[1] for c in combo)
        best = min(best, gamma * t + (1 - gamma) * w)
    return best


def tiny_instance(gamma=0.5):
    comps = (
        FailedComponent(id="cA", x=10.0, y=0.0, repair_hours=1.0,
                        curtailed_mw=2.0),
        FailedComponent(id="cB", x=20.0, y=0.0, repair_hours=2.0,
                        curtailed_mw=1.0),
        FailedComponent(id="cC", x=0.0, y=10.0, repair_hours=1.5,
                        curtailed_mw=0.5),
    )
    depots = (Depot(id="d1", x=0.0, y=0.0, crew_count=2),)
    return DispatchInstance(components=comps, depots=depots,
                            travel_speed_kmh=10.0, gamma=gamma)


def test_travel_hours_pythagorean():
    assert travel_hours((0.0, 0.0), (30.0, 40.0), 25.0) == pytest.approx(2.0)


def test_clustering_nearest_depot_with_lexicographic_ties():
    comps = (
        FailedComponent(id="c1", x=0.0, y=0.0, repair_hours=1, curtailed_mw=1),
        FailedComponent(id="c2", x=10.0, y=0.0, repair_hours=1, curtailed_mw=1),
        FailedComponent(id="c3", x=5.0, y=0.0, repair_hours=1, curtailed_mw=1),
    )
    depots = (Depot(id="dA", x=0.0, y=0.0), Depot(id="dB", x=10.0, y=0.0))
    inst = DispatchInstance(components=comps, depots=depots,
                            travel_speed_kmh=10.0)
    cl = cluster_to_depots(inst)
    assert cl["c1"] == "dA"
    assert cl["c2"] == "dB"
    assert cl["c3"] == "dA"  # equidistant, lexicographically lower id wins


def test_schedule_plan_timing_hand_case():
    inst = tiny_instance()
    plan = schedule_plan(inst, {"d1:1": ["cA", "cB"], "d1:2": ["cC"]})
    # crew 1: travel 1 h, repair 1 h at cA (t=2); travel 1 h, repair 2 h (t=5)
    assert plan.arrival["cA"] == pytest.approx(1.0)
    assert plan.completion["cA"] == pytest.approx(2.0)
    assert plan.arrival["cB"] == pytest.approx(3.0)
    assert plan.completion["cB"] == pytest.approx(5.0)
    assert plan.completion["cC"] == pytest.approx(2.5)
    # makespan excludes the travel back; return legs recorded separately
    assert plan.makespan_hours == pytest.approx(5.0)
    assert plan.return_hours["d1:1"] == pytest.approx(5.0 + 2.0)
    obj = plan_objective(inst, plan)
    want = 0.5 * 5.0 + 0.5 * (2.0 * 2 + 1.0 * 5 + 0.5 * 2.5)
    assert obj.value == pytest.approx(want)


def test_schedule_plan_rejects_bad_routes():
    inst = tiny_instance()
    with pytest.raises(ConfigError):
        schedule_plan(inst, {"d1:9": ["cA", "cB", "cC"]})  # unknown crew
    with pytest.raises(ConfigError):
        schedule_plan(inst, {"d1:1": ["cA", "cA", "cB", "cC"]})  # duplicate
    with pytest.raises(ConfigError):
        schedule_plan(inst, {"d1:1": ["cA", "cB"]})  # cC unserved


def test_schedule_plan_enforces_cluster_membership():
    comps = (
        FailedComponent(id="c1", x=1.0, y=0.0, repair_hours=1, curtailed_mw=1),
        FailedComponent(id="c2", x=9.0, y=0.0, repair_hours=1, curtailed_mw=1),
    )
    depots = (Depot(id="dA", x=0.0, y=0.0), Depot(id="dB", x=10.0, y=0.0))
    inst = DispatchInstance(components=comps, depots=depots,
                            travel_speed_kmh=10.0)
    with pytest.raises(ConfigError):
        schedule_plan(inst, {"dA:1": ["c1", "c2"], "dB:1": []})


def test_no_subtours_in_scheduled_plans():
    inst = tiny_instance()
    plan = schedule_plan(inst, {"d1:1": ["cB", "cA"], "d1:2": ["cC"]})
    assert subtour_violations(plan) == []


def test_exact_matches_enumeration_on_random_instances():
    fam1 = InstanceFamily(n_min=2, n_max=5, depot_count=2, crews_per_depot=1)
    fam2 = InstanceFamily(n_min=2, n_max=5, depot_count=2, crews_per_depot=2)
    rng = np.random.default_rng(88)
    for trial in range(30):
        fam = fam1 if trial % 2 == 0 else fam2
        inst = fam.sample_instance(rng)
        res = exact_dispatch(inst)
        assert res.optimal
        want = brute_force_value(inst)
        assert res.objective.value == pytest.approx(want, abs=1e-9), trial
        # the returned plan must actually realize the claimed objective
        check = plan_objective(inst, schedule_plan(inst, res.plan.routes))
        assert check.value == pytest.approx(res.objective.value, abs=1e-9)


def test_exact_respects_gamma_extremes():
    inst_t = tiny_instance(gamma=1.0)   # pure makespan
    inst_w = tiny_instance(gamma=0.0)   # pure weighted completion
    rt = exact_dispatch(inst_t)
    rw = exact_dispatch(inst_w)
    assert rt.objective.value == pytest.approx(rt.objective.makespan_hours)
    assert rw.objective.value == pytest.approx(rw.objective.weighted_completion)
    assert brute_force_value(inst_t) == pytest.approx(rt.objective.value,
                                                      abs=1e-9)
    assert brute_force_value(inst_w) == pytest.approx(rw.objective.value,
                                                      abs=1e-9)


def test_exact_empty_instance():
    inst = DispatchInstance(components=(), depots=(Depot(id="d1", x=0, y=0),),
                            travel_speed_kmh=10.0)
    res = exact_dispatch(inst)
    assert res.optimal
    assert res.objective.value == pytest.approx(0.0)
    assert res.plan.makespan_hours == pytest.approx(0.0)


def test_exact_size_limits_raise():
    rng = np.random.default_rng(0)
    fam = InstanceFamily(n_min=10, n_max=10, depot_count=1, crews_per_depot=1)
    inst = fam.sample_instance(rng)
    with pytest.raises(LimitError):
        exact_dispatch(inst, max_components_per_depot=9)


def test_exact_timeout_returns_feasible_incumbent():
    rng = np.random.default_rng(1)
    fam = InstanceFamily(n_min=8, n_max=8, depot_count=1, crews_per_depot=2)
    inst = fam.sample_instance(rng)
    res = exact_dispatch(inst, time_limit_s=0.0)
    assert not res.optimal
    # still a valid plan covering everything
    check = plan_objective(inst, schedule_plan(inst, res.plan.routes))
    assert check.value == pytest.approx(res.objective.value, abs=1e-9)


def test_instance_from_scenario_uses_singleton_curtailment():
    net = builtin_feeder()
    failed = ["c_l1", "c_g1"]
    inst = instance_from_scenario(net, failed)
    assert [c.id for c in inst.components] == failed
    by_id = {c.id: c for c in inst.components}
    # c_l1 alone de-energizes the b2 subtree beyond what g1 can pick up;
    # its curtailment must dominate the generator's
    assert by_id["c_l1"].curtailed_mw >= by_id["c_g1"].curtailed_mw
    assert inst.gamma == pytest.approx(0.5)
    assert inst.travel_speed_kmh == pytest.approx(net.travel_speed_kmh)


def test_crew_ids_are_stable():
    inst = tiny_instance()
    assert inst.crew_ids() == ["d1:1", "d1:2"]
    assert inst.depot_of_crew("d1:2").id == "d1"
