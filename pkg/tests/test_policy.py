"""Policy network and rollout tests: encoder symmetries, decision masking,
plan validity, checkpoint round trips, and reward bookkeeping."""

import numpy as np
import pytest

import gridquake.policy.autodiff as ad
from gridquake.dispatch import plan_objective, schedule_plan
from gridquake.errors import ConfigError
from gridquake.policy.nn import COMP_FEATURES, PolicyConfig, PolicyModel
from gridquake.policy.rollout import (encode_instance, policy_dispatch,
                                      run_batch, run_episode)
from gridquake.policy.train import InstanceFamily, PpoConfig, ppo_train

TINY = PolicyConfig(width=8, heads=2, enc_layers=1, dec_layers=1,
                    ffn_hidden=12)


def make_instance(seed=0, n=4, crews=1):
    fam = InstanceFamily(n_min=n, n_max=n, depot_count=2,
                         crews_per_depot=crews)
    return fam.sample_instance(np.random.default_rng(seed))


def test_config_validates_head_divisibility():
    with pytest.raises(ConfigError):
        PolicyConfig(width=10, heads=4)


def test_encoder_permutation_equivariance():
    model = PolicyModel.init(TINY, seed=1)
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(5, COMP_FEATURES))
    perm = rng.permutation(5)
    out = model.encode(feats).data
    out_p = model.encode(feats[perm]).data
    np.testing.assert_allclose(out_p, out[perm], atol=1e-12)


def test_encoder_duplicate_tokens_match_singleton():
    # attention over identical tokens returns the same mix as over one
    model = PolicyModel.init(TINY, seed=2)
    f = np.random.default_rng(1).normal(size=(1, COMP_FEATURES))
    single = model.encode(f).data
    triple = model.encode(np.repeat(f, 3, axis=0)).data
    for row in triple:
        np.testing.assert_allclose(row, single[0], atol=1e-12)


def test_decode_respects_mask_exactly():
    model = PolicyModel.init(TINY, seed=3)
    rng = np.random.default_rng(2)
    memory = model.encode(rng.normal(size=(4, COMP_FEATURES)))
    crew = rng.normal(size=(2, 6))
    mask = np.zeros(8, dtype=bool)
    mask[[1, 4, 6]] = True
    logp, value = model.decode_step(memory, crew, mask)
    p = np.exp(logp.data)
    assert np.all(p[~mask] == 0.0)
    assert p[mask].sum() == pytest.approx(1.0)
    assert value.data.shape == ()


def test_greedy_episode_is_deterministic_and_valid():
    model = PolicyModel.init(TINY, seed=4)
    inst = make_instance(seed=5, n=5, crews=2)
    enc = encode_instance(inst)
    a = run_episode(model, enc, greedy=True)
    b = run_episode(model, enc, greedy=True)
    assert a.routes == b.routes
    plan = schedule_plan(inst, a.routes)
    assert plan.makespan_hours == pytest.approx(a.makespan)
    for cid, h in a.completion.items():
        assert plan.completion[cid] == pytest.approx(h)


def test_sampled_episodes_only_pick_feasible_pairs():
    model = PolicyModel.init(TINY, seed=6)
    inst = make_instance(seed=7, n=6, crews=1)
    enc = encode_instance(inst)
    rng = np.random.default_rng(3)
    for _ in range(10):
        rec = run_episode(model, enc, greedy=False, rng=rng)
        plan = schedule_plan(inst, rec.routes)  # validates clusters, coverage
        assert set(plan.completion) == set(enc.comp_ids)


def test_policy_dispatch_best_of_decodes():
    model = PolicyModel.init(TINY, seed=8)
    inst = make_instance(seed=9, n=5, crews=2)
    greedy_only = policy_dispatch(model, inst, samples=0, seed=0)
    sampled = policy_dispatch(model, inst, samples=12, seed=0)
    assert sampled.decodes == 13
    assert sampled.objective.value <= greedy_only.objective.value + 1e-12
    check = plan_objective(inst, schedule_plan(inst, sampled.plan.routes))
    assert check.value == pytest.approx(sampled.objective.value, abs=1e-9)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = PolicyModel.init(TINY, seed=10)
    path = str(tmp_path / "model.npz")
    model.save(path)
    back = PolicyModel.load(path)
    assert back.config == model.config
    for k, t in model.params.items():
        assert np.array_equal(back.params[k].data, t.data)
    inst = make_instance(seed=11, n=4)
    a = policy_dispatch(model, inst, samples=4, seed=1)
    b = policy_dispatch(back, inst, samples=4, seed=1)
    assert a.plan.routes == b.plan.routes


def test_load_rejects_non_checkpoint(tmp_path):
    path = tmp_path / "junk.npz"
    np.savez(path, a=np.ones(3))
    with pytest.raises(ConfigError):
        PolicyModel.load(str(path))
    path2 = tmp_path / "junk.txt"
    path2.write_text("hello")
    with pytest.raises(ConfigError):
        PolicyModel.load(str(path2))


def test_batch_rewards_telescope_to_objective():
    model = PolicyModel.init(TINY, seed=12)
    gamma = 0.5
    fam = InstanceFamily(n_min=4, n_max=4, depot_count=2, crews_per_depot=1,
                         gamma=gamma)
    rng = np.random.default_rng(4)
    instances = [fam.sample_instance(rng) for _ in range(3)]
    encs = [encode_instance(i) for i in instances]
    batch = run_batch(model, encs, np.random.default_rng(5), gamma=gamma)
    assert batch.rewards.shape == (4, 3)
    returns = batch.rewards.sum(axis=0)
    for b, enc in enumerate(encs):
        # recover the routes this batch row took and score them
        routes = {cid: [] for cid in enc.crew_ids}
        m = len(enc.crew_ids)
        n = len(enc.comp_ids)
        for t in range(batch.actions.shape[0]):
            a = int(batch.actions[t, b])
            routes[enc.crew_ids[a // n]].append(enc.comp_ids[a % n])
        obj = plan_objective(enc.instance,
                             schedule_plan(enc.instance, routes))
        assert returns[b] == pytest.approx(-obj.value, abs=1e-9)
        assert batch.makespan[b] == pytest.approx(obj.makespan_hours)


def test_model_gradients_match_fd_through_decode():
    model = PolicyModel.init(PolicyConfig(width=8, heads=1, enc_layers=1,
                                          dec_layers=1, ffn_hidden=8), seed=13)
    rng = np.random.default_rng(6)
    comp = rng.normal(size=(3, COMP_FEATURES))
    crew = rng.normal(size=(2, 6))
    mask = np.ones(6, dtype=bool)
    mask[2] = False

    def loss_value():
        logp, value = model.decode_step(model.encode(comp), crew, mask)
        return ad.take_along_last(
            logp.reshape((1, 6)), np.array([[1]])).sum() + value * 0.7

    out = loss_value()
    out.backward()
    rng_probe = np.random.default_rng(7)
    for name in ("enc.embed.W", "dec.0.cross.Wq", "ptr.Wk", "val.W1"):
        t = model.params[name]
        flat = t.data.reshape(-1)
        idx = int(rng_probe.integers(flat.size))
        eps = 1e-6
        orig = flat[idx]
        flat[idx] = orig + eps
        hi = loss_value().item()
        flat[idx] = orig - eps
        lo = loss_value().item()
        flat[idx] = orig
        want = (hi - lo) / (2 * eps)
        got = t.grad.reshape(-1)[idx]
        assert got == pytest.approx(want, rel=1e-5, abs=1e-9), name


def test_ppo_short_run_trains_and_reports():
    fam = InstanceFamily(n_min=3, n_max=3, depot_count=2, crews_per_depot=1)
    model = PolicyModel.init(TINY, seed=14)
    before = model.clone_params()
    trace = ppo_train(model, fam, PpoConfig(iterations=4, batch_size=6,
                                            seed=0))
    assert trace.iterations_run == 4
    assert len(trace.mean_return) == 4
    assert all(np.isfinite(r) for r in trace.mean_return)
    assert not trace.aborted
    changed = any(not np.array_equal(before[k], t.data)
                  for k, t in model.params.items())
    assert changed


def test_instance_family_sampling_deterministic():
    fam = InstanceFamily(n_min=2, n_max=8)
    a = fam.sample_instance(np.random.default_rng(42))
    b = fam.sample_instance(np.random.default_rng(42))
    assert [c.id for c in a.components] == [c.id for c in b.components]
    assert [(c.x, c.y, c.repair_hours, c.curtailed_mw)
            for c in a.components] == [(c.x, c.y, c.repair_hours,
                                        c.curtailed_mw)
                                       for c in b.components]
    assert 2 <= len(a.components) <= 8
