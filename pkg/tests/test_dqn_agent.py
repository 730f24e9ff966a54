import numpy as np
import pytest

from agent.learning import epsilon_at, gradient_step, select_action, td_loss, td_targets
from agent.q_network import AdamOptimizer, QNetwork
from agent.replay_buffer import ReplayBuffer, TransitionBatch
from models.config_models import DQNHyperparams
from utils.errors import ConfigurationError, RuntimeFailure, ShapeError, TrainingError


def _batch(states, actions, rewards, next_states, dones):
    return TransitionBatch(np.asarray(states, dtype=np.float32), np.asarray(actions, dtype=np.int64),
                           np.asarray(rewards, dtype=np.float32), np.asarray(next_states, dtype=np.float32),
                           np.asarray(dones, dtype=bool))


def _zero(net: QNetwork) -> QNetwork:
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])
    return net


# Forward pass

def test_zero_network_outputs_zero():
    net = _zero(QNetwork(5, (8, 8)))
    np.testing.assert_array_equal(net.forward(np.ones(5)), np.zeros(3))


def test_linear_network_is_chosen_map():
    net = QNetwork(3, (), 3, dtype=np.float64)
    weights = np.array([[1.0, 0.0, 2.0], [0.0, -1.0, 0.0], [0.5, 0.5, 0.5]])
    bias = np.array([0.1, 0.2, 0.3])
    net.set_parameters([weights, bias])
    x = np.array([2.0, -3.0, 4.0])
    np.testing.assert_allclose(net.forward(x), x @ weights + bias)


def test_outputs_finite_for_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(100):
        net = QNetwork(24, (32, 32), rng=rng)
        q = net.forward(rng.normal(size=(10, 24)))
        assert q.shape == (10, 3)
        assert np.all(np.isfinite(q))


def test_parameter_count_matches_architecture():
    net = QNetwork(24, (128, 128))
    assert net.parameter_count == 24 * 128 + 128 + 128 * 128 + 128 + 128 * 3 + 3
    assert sum(p.size for p in net.parameters()) == net.parameter_count


def test_wrong_observation_length_rejected():
    with pytest.raises(ShapeError):
        QNetwork(5, (4,)).forward(np.zeros(6))


def test_load_from_copies_bit_exact_and_checks_architecture():
    source = QNetwork(4, (6,), rng=np.random.default_rng(1))
    target = QNetwork(4, (6,), rng=np.random.default_rng(2))
    target.load_from(source)
    for a, b in zip(source.parameters(), target.parameters()):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ShapeError):
        QNetwork(4, (7,)).load_from(source)


# Gradients

def test_backward_matches_central_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(100):
        net = QNetwork(3, (2,), 3, rng=rng, dtype=np.float64)
        x = rng.normal(size=3)
        upstream = rng.normal(size=3)
        _, cache = net.forward_cache(x)
        analytic = net.backward(cache, upstream)
        for param, grad in zip(net.parameters(), analytic):
            numeric = np.zeros_like(param)
            for index in np.ndindex(param.shape):
                original = param[index]
                param[index] = original + h
                plus = net.forward(x) @ upstream
                param[index] = original - h
                minus = net.forward(x) @ upstream
                param[index] = original
                numeric[index] = (plus - minus) / (2 * h)
            scale = max(np.abs(grad).max(), np.abs(numeric).max(), 1e-8)
            assert np.abs(grad - numeric).max() / scale < 1e-4


def test_zero_learning_rate_leaves_parameters_unchanged():
    net = QNetwork(4, (8,), rng=np.random.default_rng(0))
    before = [p.copy() for p in net.parameters()]
    optimizer = AdamOptimizer(net.parameters(), learning_rate=0.0)
    batch = _batch(np.ones((2, 4)), [0, 2], [1.0, -1.0], np.zeros((2, 4)), [True, True])
    gradient_step(net, optimizer, batch, np.array([1.0, -1.0]))
    for a, b in zip(before, net.parameters()):
        np.testing.assert_array_equal(a, b)


def test_single_transition_overfits():
    net = QNetwork(4, (16,), rng=np.random.default_rng(5))
    optimizer = AdamOptimizer(net.parameters(), learning_rate=1e-2)
    batch = _batch([[0.5, -0.2, 0.1, 0.9]], [1], [3.0], [[0.0] * 4], [True])
    targets = np.array([3.0])
    first = td_loss(net, batch, targets)
    for _ in range(100):
        gradient_step(net, optimizer, batch, targets)
    assert td_loss(net, batch, targets) < first / 10.0


def test_non_finite_loss_raises_with_diagnostics():
    net = QNetwork(2, (4,), rng=np.random.default_rng(0))
    optimizer = AdamOptimizer(net.parameters(), learning_rate=1e-3)
    batch = _batch([[1.0, 1.0]], [0], [0.0], [[0.0, 0.0]], [True])
    with pytest.raises(TrainingError) as err:
        gradient_step(net, optimizer, batch, np.array([np.inf]))
    assert "loss" in err.value.diagnostics
    assert err.value.exit_code == 4


def test_adam_first_step_moves_by_learning_rate():
    param = np.array([1.0, -1.0])
    optimizer = AdamOptimizer([param], learning_rate=0.1)
    optimizer.step([param], [np.array([4.0, -0.5])])
    np.testing.assert_allclose(param, [0.9, -0.9], atol=1e-6)


# Targets

def test_terminal_target_is_reward():
    net = QNetwork(2, (4,), rng=np.random.default_rng(0))
    batch = _batch([[0.0, 1.0]], [0], [1.0], [[1.0, 0.0]], [True])
    assert td_targets(batch, net, net, gamma=0.99)[0] == pytest.approx(1.0)


def test_zero_discount_target_is_reward():
    net = QNetwork(2, (4,), rng=np.random.default_rng(0))
    batch = _batch([[0.0, 1.0], [1.0, 0.0]], [0, 1], [0.5, -2.0], [[1.0, 0.0], [0.0, 1.0]], [False, False])
    np.testing.assert_allclose(td_targets(batch, net, net, gamma=0.0), [0.5, -2.0])


def test_target_uses_target_network_maximum():
    online = _zero(QNetwork(2, (), 3, dtype=np.float64))
    target = QNetwork(2, (), 3, dtype=np.float64)
    target.set_parameters([np.zeros((2, 3)), np.array([1.0, 4.0, 2.0])])
    batch = _batch([[0.0, 0.0]], [0], [1.0], [[0.0, 0.0]], [False])
    assert td_targets(batch, online, target, gamma=0.5)[0] == pytest.approx(3.0)
    # double DQN: online argmax (ties to action 0) evaluated by the target network
    assert td_targets(batch, online, target, gamma=0.5, double_dqn=True)[0] == pytest.approx(1.5)


def test_two_state_chain_converges_to_optimal_values():
    # s0 -> s1 -> end, reward 0 then 1 for every action; Q*(s1) = 1, Q*(s0) = gamma
    gamma = 0.9
    net = QNetwork(2, (), 3, rng=np.random.default_rng(0), dtype=np.float64)
    target = net.copy()
    optimizer = AdamOptimizer(net.parameters(), learning_rate=1e-2)
    s0, s1 = [1.0, 0.0], [0.0, 1.0]
    batch = _batch([s0] * 3 + [s1] * 3, [0, 1, 2] * 2, [0.0] * 3 + [1.0] * 3, [s1] * 3 + [s0] * 3,
                   [False] * 3 + [True] * 3)
    steps = 6000
    for step in range(steps):
        optimizer.learning_rate = 1e-2 * max(0.01, 1.0 - step / steps)
        gradient_step(net, optimizer, batch, td_targets(batch, net, target, gamma))
        if step % 100 == 0:
            target.load_from(net)
    np.testing.assert_allclose(net.forward(np.array(s1)), [1.0] * 3, atol=1e-3)
    np.testing.assert_allclose(net.forward(np.array(s0)), [gamma] * 3, atol=1e-3)


# Action selection and schedule

def test_full_exploration_is_uniform():
    net = QNetwork(2, (4,), rng=np.random.default_rng(0))
    rng = np.random.default_rng(1)
    counts = np.bincount([select_action(net, np.zeros(2), 1.0, rng) for _ in range(30_000)], minlength=3)
    sigma = np.sqrt(30_000 * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - 10_000) < 3 * sigma)


def test_greedy_selection_follows_network():
    net = QNetwork(2, (), 3, dtype=np.float64)
    net.set_parameters([np.zeros((2, 3)), np.array([0.0, 0.5, 1.0])])
    rng = np.random.default_rng(0)
    assert {select_action(net, np.array([0.3, -0.7]), 0.0, rng) for _ in range(50)} == {2}


def test_greedy_ties_go_to_lowest_action():
    net = _zero(QNetwork(2, (4,)))
    assert select_action(net, np.zeros(2), 0.0, np.random.default_rng(0)) == 0


def test_epsilon_schedule_endpoints():
    hp = DQNHyperparams(total_steps=9000)
    assert epsilon_at(0, hp) == hp.epsilon_start
    assert epsilon_at(1500, hp) == pytest.approx((hp.epsilon_start + hp.epsilon_end) / 2)
    assert epsilon_at(3000, hp) == hp.epsilon_end
    assert epsilon_at(8000, hp) == hp.epsilon_end


def test_hyperparameter_validation():
    with pytest.raises(ConfigurationError):
        DQNHyperparams(epsilon_start=0.1, epsilon_end=0.2)
    with pytest.raises(ConfigurationError):
        DQNHyperparams(learning_rate=1.5)
    with pytest.raises(ConfigurationError):
        DQNHyperparams(hidden_sizes=())


# Replay

def test_replay_evicts_oldest_after_wraparound():
    buffer = ReplayBuffer(capacity=4, observation_size=2)
    for i in range(6):
        buffer.add(np.full(2, i), i % 3, float(i), np.full(2, i + 1), False)
    assert len(buffer) == 4
    assert sorted(buffer.rewards.tolist()) == [2.0, 3.0, 4.0, 5.0]
    assert buffer.oldest_index() == 2
    assert buffer.rewards[buffer.oldest_index()] == 2.0


def test_replay_samples_without_replacement():
    buffer = ReplayBuffer(capacity=10, observation_size=1)
    for i in range(10):
        buffer.add(np.array([i]), 0, float(i), np.array([i]), False)
    batch = buffer.sample(10, np.random.default_rng(0))
    assert sorted(batch.rewards.tolist()) == [float(i) for i in range(10)]
    with pytest.raises(RuntimeFailure):
        buffer.sample(11, np.random.default_rng(0))


def test_replay_rejects_wrong_observation_length():
    buffer = ReplayBuffer(capacity=2, observation_size=3)
    with pytest.raises(ShapeError):
        buffer.add(np.zeros(2), 0, 0.0, np.zeros(3), False)
