"""Shedding LP and energization tests.

The LP oracle is an exhaustive lattice grid search. The random test
networks keep loads, line capacities, generator limits, and the import
limit on a common 0.1 MW lattice with voltage slack so wide it never
binds; the binding structure (nested subtree sums) is totally unimodular,
so the continuous optimum is attained on the lattice and grid search is
exact.
"""

import itertools
import math

import numpy as np
import pytest

from gridquake.errors import ConfigError, InternalError
from gridquake.fixtures import builtin_feeder, random_radial_network
from gridquake.model import load_network
from gridquake.powerflow import (TripleProductLinearization,
                                 de_energized_load, energization_state,
                                 ens_timeline, linearize_triple_product,
                                 shed_at, solve_shedding_lp)


def brute_force_min_shed(net, t=0, step=0.1):
    """Exhaustive minimum shed over the lattice; unity power factor only."""
    p_load, _ = net.loads_at(t)
    root = net.substation_buses()[0]
    # orient the tree away from the root
    children = {b: [] for b in net.buses}
    parent_line = {}
    adj = {b: [] for b in net.buses}
    for ln in net.lines.values():
        adj[ln.from_bus].append((ln.to_bus, ln))
        adj[ln.to_bus].append((ln.from_bus, ln))
    seen = {root}
    frontier = [root]
    while frontier:
        b = frontier.pop()
        for nb, ln in adj[b]:
            if nb in seen:
                continue
            seen.add(nb)
            children[b].append(nb)
            parent_line[nb] = ln
            frontier.append(nb)
    assert seen == set(net.buses), "oracle expects a single connected tree"

    order = list(net.buses)
    idx = {b: i for i, b in enumerate(order)}
    # subtree membership per line: buses at or below the line's far end
    def subtree(b):
        out = [b]
        for c in children[b]:
            out.extend(subtree(c))
        return out

    lines = list(net.lines.values())
    sub = np.zeros((len(order), len(lines)))
    for j, ln in enumerate(lines):
        far = ln.to_bus if parent_line.get(ln.to_bus) is ln else ln.from_bus
        for b in subtree(far):
            sub[idx[b], j] = 1.0

    # path drop matrix: drop at bus b = sum over lines above b of r_l * f_l
    path = np.zeros((len(order), len(lines)))
    for i, b in enumerate(order):
        cur = b
        while cur != root:
            ln = parent_line[cur]
            path[i, lines.index(ln)] = 1.0
            cur = ln.from_bus if parent_line.get(ln.to_bus) is ln else ln.to_bus

    load_buses = [b for b in order if p_load[b] > 0]
    gens = list(net.generators.values())
    served_levels = [np.arange(0, round(p_load[b] / step) + 1) * step
                     for b in load_buses]
    gen_levels = [np.arange(0, round(g.p_max / step) + 1) * step for g in gens]

    grids = np.meshgrid(*(served_levels + gen_levels), indexing="ij")
    cols = [g.reshape(-1) for g in grids]
    n_rows = cols[0].size if cols else 1
    inj = np.zeros((n_rows, len(order)))
    for b, lv in zip(load_buses, cols[:len(load_buses)]):
        inj[:, idx[b]] -= lv  # serving load draws power
    for g, lv in zip(gens, cols[len(load_buses):]):
        inj[:, idx[g.bus]] += lv

    flows = -inj @ sub  # toward the leaves
    caps = np.array([ln.capacity_mva for ln in lines])
    ok = np.all(np.abs(flows) <= caps + 1e-9, axis=1)

    p_import = -inj.sum(axis=1)
    ok &= (p_import >= -1e-9) & (p_import <= net.import_limit_mva() + 1e-9)

    drops = flows @ (path * np.array([ln.resistance for ln in lines])).T
    v_lo = np.array([net.buses[b].v_min for b in order])
    v_hi = np.array([net.buses[b].v_max for b in order])
    ok &= (np.max(v_lo + drops, axis=1) <= np.min(v_hi + drops, axis=1) + 1e-12)

    total_load = sum(p_load[b] for b in load_buses)
    served = np.zeros(n_rows)
    for lv in cols[:len(load_buses)]:
        served += lv
    served = np.where(ok, served, -np.inf)
    return total_load - served.max()


def test_lp_matches_grid_oracle_on_random_networks():
    for seed in range(12):
        net = random_radial_network(seed, n_buses=6, max_load_steps=6)
        flow = shed_at(net, [], 0)
        want = brute_force_min_shed(net)
        assert flow.total_shed_mw == pytest.approx(want, abs=1e-6), seed


def test_lp_sheds_nothing_when_capacity_suffices():
    net = builtin_feeder()
    flow = shed_at(net, [], net.peak_hour())
    assert flow.total_shed_mw == pytest.approx(0.0, abs=1e-8)
    p, _ = net.loads_at(net.peak_hour())
    assert flow.served_mw == pytest.approx(sum(p.values()), abs=1e-8)


def test_line_capacity_forces_shedding():
    doc = {
        "buses": [
            {"id": "b1", "x": 0, "y": 0, "is_substation": True},
            {"id": "b2", "x": 1, "y": 0, "load_profile": "p1"},
        ],
        "lines": [{"id": "l1", "from_bus": "b1", "to_bus": "b2",
                   "resistance": 0.001, "reactance": 0.001,
                   "capacity_mva": 1.0}],
        "generators": [], "depots": [{"id": "d1", "x": 0, "y": 0}],
        "components": [], "profiles": [{"id": "p1", "p_mw": [3.0]}],
    }
    net = load_network(doc)
    flow = shed_at(net, [], 0)
    assert flow.total_shed_mw == pytest.approx(2.0, abs=1e-6)
    assert abs(flow.p_line["l1"]) <= 1.0 + 1e-7


def test_voltage_band_forces_shedding():
    # r = 0.1 per MW across the band of 0.05: at most 0.5 MW can flow
    doc = {
        "buses": [
            {"id": "b1", "x": 0, "y": 0, "is_substation": True,
             "v_min": 0.95, "v_max": 1.0},
            {"id": "b2", "x": 1, "y": 0, "load_profile": "p1",
             "v_min": 0.95, "v_max": 1.0},
        ],
        "lines": [{"id": "l1", "from_bus": "b1", "to_bus": "b2",
                   "resistance": 0.1, "reactance": 0.0,
                   "capacity_mva": 10.0}],
        "generators": [], "depots": [{"id": "d1", "x": 0, "y": 0}],
        "components": [], "profiles": [{"id": "p1", "p_mw": [2.0]}],
    }
    net = load_network(doc)
    flow = shed_at(net, [], 0)
    assert flow.total_shed_mw == pytest.approx(1.5, abs=1e-6)
    assert flow.v["b1"] == pytest.approx(1.0, abs=1e-7)
    assert flow.v["b2"] == pytest.approx(0.95, abs=1e-7)


def test_reactive_shed_follows_active_ratio():
    doc = {
        "buses": [
            {"id": "b1", "x": 0, "y": 0, "is_substation": True},
            {"id": "b2", "x": 1, "y": 0, "load_profile": "p1",
             "power_factor_angle": 0.4},
        ],
        "lines": [{"id": "l1", "from_bus": "b1", "to_bus": "b2",
                   "resistance": 0.001, "reactance": 0.001,
                   "capacity_mva": 1.0}],
        "generators": [], "depots": [{"id": "d1", "x": 0, "y": 0}],
        "components": [], "profiles": [{"id": "p1", "p_mw": [3.0]}],
    }
    net = load_network(doc)
    flow = shed_at(net, [], 0)
    assert flow.q_shed["b2"] == pytest.approx(
        flow.p_shed["b2"] * math.tan(0.4), rel=1e-6)


def test_energization_islands_and_sources():
    net = builtin_feeder()
    # l2 (b2-b3) out: b3..b5 keep g1; they stay energized
    st = energization_state(net, ["c_l2"])
    assert st.energized["b3"] and st.energized["b4"] and st.energized["b5"]
    # l3 (b3-b4) out as well: b3 alone has no source
    st2 = energization_state(net, ["c_l2", "c_l3"])
    assert not st2.energized["b3"]
    assert st2.energized["b4"] and st2.energized["b5"]


def test_failed_substation_without_generators_blacks_out():
    net = builtin_feeder()
    st = energization_state(net, ["c_sub", "c_g1", "c_g2"])
    assert not any(st.energized.values())
    flow = shed_at(net, ["c_sub", "c_g1", "c_g2"], net.peak_hour())
    p, _ = net.loads_at(net.peak_hour())
    assert flow.total_shed_mw == pytest.approx(sum(p.values()), abs=1e-8)


def test_failed_generator_counts_as_lost_source():
    net = builtin_feeder()
    st = energization_state(net, ["c_l4", "c_g1"])  # island b5 loses g1
    assert not st.energized["b5"]


def test_unknown_failed_id_raises():
    net = builtin_feeder()
    with pytest.raises(ConfigError):
        energization_state(net, ["nope"])


def test_de_energized_load_is_monotone_in_failures():
    net = builtin_feeder()
    t = net.peak_hour()
    singles = de_energized_load(net, ["c_l2"], t)
    more = de_energized_load(net, ["c_l2", "c_g1"], t)
    assert more >= singles - 1e-12


def test_all_shed_anchor_feasible_over_random_states():
    rng = np.random.default_rng(123)
    for trial in range(150):
        net = random_radial_network(int(rng.integers(0, 10_000)),
                                    n_buses=int(rng.integers(2, 7)))
        comp_ids = list(net.components)
        k = int(rng.integers(0, len(comp_ids) + 1))
        failed = (list(rng.choice(comp_ids, size=k, replace=False))
                  if k else [])
        flow = shed_at(net, failed, 0)  # raises InternalError on infeasible
        p, _ = net.loads_at(0)
        total = sum(p.values())
        assert -1e-7 <= flow.total_shed_mw <= total + 1e-7
        assert flow.served_mw + flow.total_shed_mw == pytest.approx(
            total, abs=1e-6)


def test_ens_timeline_hand_case():
    # one component out for 1.5 h on a two-bus net: load 2 MW, nothing else
    doc = {
        "buses": [
            {"id": "b1", "x": 0, "y": 0, "is_substation": True},
            {"id": "b2", "x": 1, "y": 0, "load_profile": "p1"},
        ],
        "lines": [{"id": "l1", "from_bus": "b1", "to_bus": "b2",
                   "resistance": 0.001, "reactance": 0.001,
                   "capacity_mva": 5.0}],
        "generators": [], "depots": [{"id": "d1", "x": 0, "y": 0}],
        "components": [{"id": "c1", "kind": "line", "ref": "l1"}],
        "profiles": [{"id": "p1", "p_mw": [2.0]}],
    }
    net = load_network(doc)
    tl = ens_timeline(net, ["c1"], {"c1": 1.5}, horizon=4)
    # out for hours 0 and 1, back at hour 2 (first whole hour >= 1.5)
    assert tl.served_fraction == pytest.approx([0.0, 0.0, 1.0, 1.0])
    assert tl.ens_mwh == pytest.approx(4.0)
    assert tl.reference_load_mw == pytest.approx(2.0)


def test_ens_timeline_terminates_at_full_service():
    net = builtin_feeder()
    failed = ["c_l1", "c_g1"]
    tl = ens_timeline(net, failed, {"c_l1": 2.2, "c_g1": 5.0})
    assert tl.served_fraction[-1] == pytest.approx(1.0, abs=1e-9)
    diffs = np.diff(tl.served_fraction)
    assert np.all(diffs >= -1e-9)


def test_triple_product_linearization_exact_on_all_combos():
    lin = linearize_triple_product()
    for u1, u2, u3 in itertools.product([0, 1], repeat=3):
        z12, z = lin.evaluate(u1, u2, u3)
        assert z12 == u1 * u2
        assert z == u1 * u2 * u3


def test_triple_product_loose_construction_detected():
    lin = linearize_triple_product()
    loose = TripleProductLinearization(
        u1=lin.u1, u2=lin.u2, u3=lin.u3, z12=lin.z12, z=lin.z,
        constraints=lin.constraints[:-1])  # drop the z lower bound
    with pytest.raises(InternalError):
        loose.evaluate(1, 1, 1)
