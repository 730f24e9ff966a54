"""Uniform experience replay over a fixed-capacity ring."""
import threading
from typing import Dict, NamedTuple

import numpy as np

from utils.errors import RuntimeFailure, ShapeError


class TransitionBatch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return self.actions.shape[0]


class ReplayBuffer:
    """Ring buffer of normalized transitions; the oldest entry is evicted when full."""

    def __init__(self, capacity: int, observation_size: int):
        self.capacity = int(capacity)
        self.observation_size = int(observation_size)
        self.states = np.zeros((self.capacity, self.observation_size), dtype=np.float32)
        self.next_states = np.zeros((self.capacity, self.observation_size), dtype=np.float32)
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.position = 0
        self.size = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def add(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray, done: bool):
        if np.shape(state)[-1] != self.observation_size or np.shape(next_state)[-1] != self.observation_size:
            raise ShapeError(f"transition observation length must be {self.observation_size}")
        with self._lock:
            i = self.position
            self.states[i] = state
            self.next_states[i] = next_state
            self.actions[i] = int(action)
            self.rewards[i] = reward
            self.dones[i] = bool(done)
            self.position = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform batch without replacement."""
        with self._lock:
            if self.size < batch_size:
                raise RuntimeFailure(f"replay buffer holds {self.size} transitions, batch needs {batch_size}")
            index = rng.choice(self.size, size=batch_size, replace=False)
            return TransitionBatch(self.states[index], self.actions[index], self.rewards[index],
                                   self.next_states[index], self.dones[index])

    def oldest_index(self) -> int:
        return self.position if self.size == self.capacity else 0

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Filled slots as float32 arrays, in storage order."""
        n = self.size
        return {
            "replay_states": self.states[:n],
            "replay_next_states": self.next_states[:n],
            "replay_actions": self.actions[:n].astype(np.float32),
            "replay_rewards": self.rewards[:n],
            "replay_dones": self.dones[:n].astype(np.float32),
        }

    def load_state(self, position: int, size: int, arrays: Dict[str, np.ndarray]):
        if size > self.capacity:
            raise ShapeError(f"saved replay size {size} exceeds capacity {self.capacity}")
        with self._lock:
            self.states[:size] = arrays["replay_states"].reshape(size, self.observation_size)
            self.next_states[:size] = arrays["replay_next_states"].reshape(size, self.observation_size)
            self.actions[:size] = arrays["replay_actions"].astype(np.int64)
            self.rewards[:size] = arrays["replay_rewards"]
            self.dones[:size] = arrays["replay_dones"] != 0
            self.position = int(position)
            self.size = int(size)
