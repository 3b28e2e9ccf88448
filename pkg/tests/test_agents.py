import numpy as np
import pytest

from nbiotsim.core import GroupConfig, TtiConfig, TrainingDiverged, multi_group_params
from nbiotsim.env import config_from_indices, config_indices
from nbiotsim.agents import (
    AaPolicy,
    CmaEnsemble,
    DqnAgent,
    EpsilonSchedule,
    LinearQAgent,
    ReplayMemory,
    aa_step_indices,
    aa_wrap,
    argmax_random_tie,
    cost_from_indices,
    ddqn_minibatch_step,
    decode_bits,
    midpoint_indices,
    project_feasible,
)
from nbiotsim.fapprox import Mlp, RmsProp


# -------------------------------------------------------------------- replay
def test_replay_fifo_eviction():
    mem = ReplayMemory(capacity=4, state_dim=2)
    for k in range(6):
        mem.push(np.full(2, k), k, float(k), np.full(2, k + 1))
    assert len(mem) == 4
    # the two oldest entries (0 and 1) were overwritten
    assert set(mem.a.tolist()) == {2, 3, 4, 5}


def test_replay_sample_without_replacement():
    mem = ReplayMemory(capacity=100, state_dim=1)
    for k in range(40):
        mem.push([k], k, 0.0, [k])
    rng = np.random.default_rng(0)
    _, a, _, _ = mem.sample(32, rng)
    assert len(set(a.tolist())) == 32


def test_epsilon_schedule_endpoints():
    sched = EpsilonSchedule(1.0, 0.1, anneal_steps=100)
    assert sched.value(0) == 1.0
    assert sched.value(50) == pytest.approx(0.55)
    assert sched.value(100) == 0.1
    assert sched.value(10_000) == 0.1


def test_argmax_random_tie_uniform():
    rng = np.random.default_rng(2)
    vals = np.array([1.0, 3.0, 3.0, 0.0])
    picks = np.array([argmax_random_tie(vals, rng) for _ in range(4000)])
    assert set(picks.tolist()) == {1, 2}
    assert abs((picks == 1).mean() - 0.5) < 0.05


# ----------------------------------------------------------------------- DDQN
def test_gamma_zero_target_is_reward():
    rng = np.random.default_rng(3)
    net = Mlp((2, 8, 3), rng)
    target = net.copy()
    s = rng.random((4, 2))
    a = np.array([0, 1, 2, 0])
    r = np.array([1.0, -1.0, 0.5, 0.0])
    s2 = rng.random((4, 2))
    loss = ddqn_minibatch_step(net, target, (s, a, r, s2), gamma=0.0,
                               optimizer=RmsProp(lr=1e-3))
    # with zero weights in the output layer, q == 0 and loss is mean r^2 / 2
    assert loss == pytest.approx(0.5 * np.mean(r ** 2))


def test_single_transition_reduces_to_single_sample_rule():
    # theta_bar = theta and a one-transition batch: the gradient at the output
    # is exactly (Q(s,a) - (r + gamma max_a' Q(s',a')))
    rng = np.random.default_rng(4)
    net = Mlp((2, 4, 3), rng)
    for w in net.weights:
        w[:] = rng.normal(size=w.shape) * 0.3
    target = net.copy()
    s = rng.random(2)
    s2 = rng.random(2)
    a, r, gamma = 1, 0.25, 0.5
    q_s = net.forward(s)
    q_s2 = net.forward(s2)
    expected_target = r + gamma * q_s2.max()
    expected_td = q_s[a] - expected_target

    # replicate the step on a copy with plain SGD-like bookkeeping: compare
    # against the analytic gradient of 0.5 * td^2 through Q(s,a)
    _, cache = net.forward_cached(s[None, :])
    d_out = np.zeros((1, 3))
    d_out[0, a] = expected_td
    grads_manual = net.backward(cache, d_out)

    net2 = net.copy()
    opt = RmsProp(lr=1e-3)
    loss = ddqn_minibatch_step(net2, target, (s[None, :], np.array([a]),
                                              np.array([r]), s2[None, :]),
                               gamma=gamma, optimizer=opt)
    assert loss == pytest.approx(0.5 * expected_td ** 2)
    # verify the applied step equals one RMSProp step on the manual gradient
    net3 = net.copy()
    RmsProp(lr=1e-3).step(net3.parameters(), grads_manual)
    for p2, p3 in zip(net2.parameters(), net3.parameters()):
        assert np.allclose(p2, p3)


def test_double_vs_plain_max_targets_differ_when_nets_disagree():
    rng = np.random.default_rng(5)
    net = Mlp((1, 4, 2), rng)
    target = Mlp((1, 4, 2), rng)
    for w in net.weights:
        w[:] = rng.normal(size=w.shape)
    for w in target.weights:
        w[:] = rng.normal(size=w.shape)
    s2 = np.array([[0.7]])
    qp = net.forward(s2)[0]
    qt = target.forward(s2)[0]
    # engineer disagreement about the best action
    if np.argmax(qp) == np.argmax(qt):
        target.weights[-1][:] = -target.weights[-1]
        qt = target.forward(s2)[0]
    boot_double = qt[np.argmax(qp)]
    boot_plain = qt.max()
    assert boot_double != pytest.approx(boot_plain)


def test_ddqn_bandit_convergence_to_closed_form():
    # 2-state contextual bandit with known Q*(s,a); gamma=0
    rng = np.random.default_rng(6)
    q_star = np.array([[1.0, 0.2], [0.1, 0.8]])
    agent = DqnAgent(state_dim=2, n_actions=2, hidden=(16, 16), gamma=0.0,
                     lr=5e-3, batch_size=32, sync_every=50, rng=rng)
    states = np.eye(2)
    for step in range(5000):
        s_idx = rng.integers(2)
        a = rng.integers(2)  # pure exploration
        r = q_star[s_idx, a] + 0.01 * rng.normal()
        s2_idx = rng.integers(2)
        agent.learn(states[s_idx], None, a, r, states[s2_idx], None, rng)
    q_hat = np.vstack([agent.q_values(states[0]), agent.q_values(states[1])])
    assert np.abs(q_hat - q_star).max() < 0.05


def test_dqn_no_update_before_warmup():
    rng = np.random.default_rng(7)
    agent = DqnAgent(state_dim=2, n_actions=2, hidden=(4,), batch_size=32, rng=rng)
    before = [p.copy() for p in agent.net.parameters()]
    for k in range(31):
        out = agent.learn(np.zeros(2), None, 0, 1.0, np.zeros(2), None, rng)
        assert out is None
    for p, b in zip(agent.net.parameters(), before):
        assert np.array_equal(p, b)
    assert agent.learn(np.zeros(2), None, 0, 1.0, np.zeros(2), None, rng) is not None


def test_target_sync_only_at_interval():
    rng = np.random.default_rng(8)
    agent = DqnAgent(state_dim=2, n_actions=2, hidden=(4,), batch_size=4,
                     sync_every=10, lr=0.05, rng=rng)
    changes = []
    for k in range(1, 21):
        tgt_before = [p.copy() for p in agent.target.parameters()]
        agent.learn(rng.random(2), None, int(rng.integers(2)), float(rng.random()),
                    rng.random(2), None, rng)
        changed = any(not np.array_equal(a, b) for a, b in
                      zip(agent.target.parameters(), tgt_before))
        changes.append(changed)
    assert [k for k, c in enumerate(changes, start=1) if c] == [10, 20]


def test_divergence_detector_raises():
    rng = np.random.default_rng(9)
    net = Mlp((1, 2, 1), rng)
    target = net.copy()
    batch = (np.array([[np.inf]]), np.array([0]), np.array([1.0]), np.array([[1.0]]))
    with pytest.raises(TrainingDiverged):
        ddqn_minibatch_step(net, target, batch, 0.5, RmsProp(lr=1e-3))


# ------------------------------------------------------------- action algebra
def test_cost_from_indices_matches_config_cost():
    from nbiotsim.core import rach_resource_cost
    p = multi_group_params()
    rng = np.random.default_rng(10)
    for _ in range(50):
        idx = np.array([rng.integers(3), rng.integers(6), rng.integers(4)] * 3)
        cfg = config_from_indices(idx, 3)
        assert cost_from_indices(idx, p) == rach_resource_cost(cfg, p)


def test_project_feasible_reaches_budget_deterministically():
    p = multi_group_params()
    idx = np.array([2, 5, 3] * 3)  # (4, 32, 48) everywhere: cost 73728
    out1 = project_feasible(idx, p)
    out2 = project_feasible(idx, p)
    assert np.array_equal(out1, out2)
    assert cost_from_indices(out1, p) <= p.r_uplink
    assert np.all(out1 <= idx)


def test_project_feasible_noop_when_feasible():
    p = multi_group_params()
    idx = midpoint_indices()
    assert np.array_equal(project_feasible(idx, p), idx)


def test_aa_wrap_clamps_at_boundaries():
    cfg = TtiConfig((GroupConfig(1, 1, 12),) * 3)
    down = aa_wrap(np.zeros(9, dtype=int), cfg)
    assert down == cfg  # descent at the minimum stays put
    up = aa_wrap(np.ones(9, dtype=int), cfg)
    assert up == TtiConfig((GroupConfig(2, 2, 24),) * 3)


def test_aa_wrap_ascent_from_f12():
    cfg = TtiConfig((GroupConfig(1, 4, 12), GroupConfig(1, 4, 12), GroupConfig(1, 4, 12)))
    bits = np.zeros(9, dtype=int)
    bits[2] = 1  # ascend f_prea of group 0 only
    out = aa_wrap(bits, cfg)
    assert out.f_prea(0) == 24
    assert out.n_repe(0) == 2  # descent on the untouched bits
    assert out.f_prea(1) == 12


def test_aa_ascent_descent_roundtrip_away_from_boundaries():
    cfg = TtiConfig((GroupConfig(2, 8, 24),) * 3)
    up = aa_wrap(np.ones(9, dtype=int), cfg)
    back = aa_wrap(np.zeros(9, dtype=int), up)
    assert back == cfg


def test_decode_bits_roundtrip():
    for a in (0, 1, 5, 511):
        bits = decode_bits(a)
        assert bits.shape == (9,)
        assert int(sum(b << k for k, b in enumerate(bits))) == a


def test_midpoint_indices_config():
    cfg = config_from_indices(midpoint_indices(), 3)
    assert cfg.groups[0] == GroupConfig(2, 8, 36)


# ------------------------------------------------------------------ ensembles
def test_cma_ensemble_action_sizes():
    ens = CmaEnsemble(state_dim=6, hidden=(8,), rng=np.random.default_rng(11))
    sizes = [a.n_actions for a in ens.agents]
    assert sizes == [3, 6, 4, 3, 6, 4, 3, 6, 4]


def test_cma_replays_stay_equal_length():
    rng = np.random.default_rng(12)
    ens = CmaEnsemble(state_dim=4, hidden=(8,), batch_size=8, rng=rng)
    s = rng.random(4)
    for t in range(20):
        acts = ens.select_indices(s, 1.0, rng)
        s2 = rng.random(4)
        ens.learn(s, acts, 0.1, s2, rng)
        lengths = {len(a.replay) for a in ens.agents}
        assert len(lengths) == 1
        s = s2


def test_cma_greedy_is_deterministic():
    rng = np.random.default_rng(13)
    ens = CmaEnsemble(state_dim=4, hidden=(8,), rng=rng)
    for agent in ens.agents:
        for w in agent.net.parameters():
            w[:] = rng.normal(size=w.shape) * 0.1
    s = rng.random(4)
    a1 = ens.select_indices(s, 0.0, np.random.default_rng(0))
    a2 = ens.select_indices(s, 0.0, np.random.default_rng(99))
    assert np.array_equal(a1, a2)


def test_checkpoint_roundtrip_for_agents():
    rng = np.random.default_rng(14)
    agent = DqnAgent(state_dim=3, n_actions=4, hidden=(8, 8), rng=rng)
    for w in agent.net.parameters():
        w[:] = rng.normal(size=w.shape)
    arrays = agent.checkpoint_arrays()
    clone = DqnAgent(state_dim=3, n_actions=4, hidden=(8, 8),
                     rng=np.random.default_rng(15))
    clone.restore_arrays(arrays)
    x = rng.random(3)
    assert np.allclose(agent.q_values(x), clone.q_values(x))
    lin = LinearQAgent(state_dim=3, n_actions=2)
    lin.q.w[:] = rng.normal(size=lin.q.w.shape)
    lin2 = LinearQAgent(state_dim=3, n_actions=2)
    lin2.restore_arrays(lin.checkpoint_arrays())
    assert np.allclose(lin.q.w, lin2.q.w)


def test_aa_policy_tracks_executed_configuration():
    p = multi_group_params()

    class AlwaysUp:
        n_actions = 512

        def select_action(self, state, obs, eps, rng):
            return 511  # all-ascend

    from nbiotsim.core import rach_resource_cost

    pol = AaPolicy(AlwaysUp(), p)
    pol.reset(np.random.default_rng(0))
    start = pol.initial_action(None, None)
    assert rach_resource_cost(start, p) <= p.r_uplink
    cfg1 = pol.act(None, None, None)
    assert rach_resource_cost(cfg1, p) <= p.r_uplink

    # same walk on a second policy instance is identical (deterministic
    # clamping and projection)
    pol2 = AaPolicy(AlwaysUp(), p)
    pol2.reset(np.random.default_rng(42))
    pol2.initial_action(None, None)
    assert pol2.act(None, None, None) == cfg1

    # repeated all-ascend reaches a clamp/projection equilibrium
    prev = cfg1
    for _ in range(12):
        prev = pol.act(None, None, None)
    assert pol.act(None, None, None) == prev
    assert rach_resource_cost(prev, p) <= p.r_uplink
