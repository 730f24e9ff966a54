"""DQN update rules: TD targets, gradient steps and epsilon-greedy selection."""
import numpy as np

from agent.q_network import AdamOptimizer, QNetwork
from agent.replay_buffer import TransitionBatch
from models.config_models import DQNHyperparams
from services.runtime_metrics_service import get_metrics_service
from utils.errors import TrainingError


def td_targets(batch: TransitionBatch, online: QNetwork, target: QNetwork, gamma: float,
               double_dqn: bool = False) -> np.ndarray:
    """r for terminal transitions, else r + gamma * Q_target(s', a*).

    a* is argmax of the target network, or of the online network with double_dqn.
    """
    next_q = target.forward(batch.next_states).astype(np.float64)
    if double_dqn:
        best = np.argmax(online.forward(batch.next_states), axis=1)
        next_value = next_q[np.arange(next_q.shape[0]), best]
    else:
        next_value = next_q.max(axis=1)
    not_done = 1.0 - batch.dones.astype(np.float64)
    return batch.rewards.astype(np.float64) + gamma * not_done * next_value


def td_loss(net: QNetwork, batch: TransitionBatch, targets: np.ndarray) -> float:
    q = net.forward(batch.states).astype(np.float64)
    predicted = q[np.arange(q.shape[0]), batch.actions]
    return float(np.mean((predicted - targets) ** 2))


def gradient_step(net: QNetwork, optimizer: AdamOptimizer, batch: TransitionBatch,
                  targets: np.ndarray) -> float:
    """One optimizer step on the mean squared TD error; returns the pre-step loss."""
    q, cache = net.forward_cache(batch.states)
    rows = np.arange(q.shape[0])
    diff = q[rows, batch.actions].astype(np.float64) - targets
    loss = float(np.mean(diff ** 2))
    if not np.isfinite(loss):
        diagnostics = dict(get_metrics_service().snapshot())
        diagnostics.update(loss=loss, max_abs_q=float(np.nanmax(np.abs(q))) if np.any(np.isfinite(q)) else None,
                           optimizer_steps=optimizer.t)
        raise TrainingError("non-finite TD loss", diagnostics)
    grad_output = np.zeros_like(q)
    grad_output[rows, batch.actions] = 2.0 * diff / q.shape[0]
    grads = net.backward(cache, grad_output)
    optimizer.step(net.parameters(), grads)
    return loss


def select_action(net: QNetwork, observation: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; argmax ties go to the lowest action index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(0, net.output_size))
    return int(np.argmax(net.forward(observation)))


def epsilon_at(step: int, hp: DQNHyperparams) -> float:
    """Linear decay from epsilon_start to epsilon_end over the decay fraction of training."""
    decay_steps = hp.epsilon_decay_steps
    if step >= decay_steps:
        return hp.epsilon_end
    fraction = step / decay_steps
    return hp.epsilon_start + fraction * (hp.epsilon_end - hp.epsilon_start)
