"""DQN training loop with periodic evaluation and exact-resume checkpoints."""
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from agent.learning import epsilon_at, gradient_step, select_action, td_targets
from agent.q_network import N_ACTIONS, AdamOptimizer, QNetwork
from agent.replay_buffer import ReplayBuffer
from models.config_models import DQNHyperparams, RewardConfig, ScoreConfig, SimConfig
from models.episode_models import EpisodeState, Observation
from models.geo_models import GeoCoord, WindGrid
from services.forecast_score_service import forecast_score, score_times
from services.logging_service import get_logging_service
from services.runtime_metrics_service import get_metrics_service
from services.simulator_service import (
    ObservationNormalizer,
    Policy,
    StationKeepingEnv,
    place_arena,
    run_episode,
)
from storage.checkpoint_store import load_checkpoint, save_checkpoint
from utils.errors import ConfigurationError, EmptyInputError, TrainingError

CURVE_COLUMNS = ["step", "mean_reward", "twr25", "twr50", "twr75", "epsilon", "loss", "best_mean_reward"]


@dataclass
class GridPair:
    """Truth and forecast grids for one library entry (e.g. one month)."""
    label: str
    truth: WindGrid
    forecast: WindGrid


@dataclass
class TrainingResult:
    curve: pd.DataFrame
    checkpoint: Optional[Path]
    steps: int
    completed: bool


def greedy_policy(net: QNetwork, normalizer: ObservationNormalizer) -> Policy:
    """Epsilon-zero policy over physical observations."""
    def policy(observation: Observation) -> int:
        return int(np.argmax(net.forward(normalizer.normalize(observation))))
    return policy


def _plain(value):
    return json.loads(json.dumps(value))


def _draw_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2 ** 63 - 1))


class DQNTrainer:
    """Trains a Q-network on random arenas drawn from a grid library.

    Randomness comes from independent streams spawned from one seed: episodes
    (arena placement, initial altitude, action noise), the agent (exploration,
    replay sampling), weight initialization and evaluation. Evaluation always
    replays the same episode set, so it never disturbs training.
    """

    def __init__(self, library: Sequence[GridPair], sim_cfg: SimConfig, reward_cfg: RewardConfig,
                 hp: DQNHyperparams, score_cfg: Optional[ScoreConfig] = None, seed: int = 0,
                 checkpoint_path=None, config_hash: str = ""):
        if not library:
            raise EmptyInputError("training needs at least one truth/forecast grid pair")
        self.logger = get_logging_service()
        self.library = list(library)
        self.sim_cfg = sim_cfg
        self.reward_cfg = reward_cfg
        self.hp = hp
        self.score_cfg = score_cfg or ScoreConfig()
        self.seed = int(seed)
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.config_hash = config_hash

        self.envs = [StationKeepingEnv(p.truth, p.forecast, sim_cfg, reward_cfg) for p in self.library]
        self.eval_envs = [StationKeepingEnv(p.truth, p.forecast, sim_cfg, reward_cfg) for p in self.library]
        self.normalizer = ObservationNormalizer.from_configs(sim_cfg, reward_cfg)

        env_seq, agent_seq, init_seq, eval_seq = np.random.SeedSequence(self.seed).spawn(4)
        self.env_rng = np.random.default_rng(env_seq)
        self.agent_rng = np.random.default_rng(agent_seq)
        self.eval_seed = int(eval_seq.generate_state(1, np.uint64)[0] >> np.uint64(1))
        for env in self.envs:
            env.rng = self.env_rng

        self.online = QNetwork(self.normalizer.size, hp.hidden_sizes, N_ACTIONS, rng=np.random.default_rng(init_seq))
        self.target = self.online.copy()
        self.optimizer = AdamOptimizer(self.online.parameters(), hp.learning_rate,
                                       hp.adam_beta1, hp.adam_beta2, hp.adam_eps)
        self.buffer = ReplayBuffer(hp.replay_capacity, self.normalizer.size)

        self.step = 0
        self.episodes = 0
        self.best_mean_reward = -math.inf
        self.last_loss = math.nan
        self.curve: List[Dict] = []
        self._env_index = 0
        self._state: Optional[EpisodeState] = None
        self._observation: Optional[Observation] = None

    # Episode handling

    def _choose_arena(self, rng: np.random.Generator) -> Tuple[int, GeoCoord, float]:
        score_window = self.score_cfg.window_hours * 3600.0
        for _ in range(self.hp.max_arena_redraws + 1):
            index = int(rng.integers(0, len(self.library)))
            pair = self.library[index]
            station, start = place_arena(pair.truth, pair.forecast, self.sim_cfg, rng, duration=score_window)
            if self.hp.min_forecast_score <= 0:
                return index, station, start
            score = forecast_score(pair.forecast, station, score_times(start, self.score_cfg), self.score_cfg).value
            if score >= self.hp.min_forecast_score:
                return index, station, start
        self.logger.warning(f"No arena reached forecast score {self.hp.min_forecast_score} "
                            f"after {self.hp.max_arena_redraws + 1} draws; using the last one")
        return index, station, start

    def _begin_episode(self):
        self._env_index, station, start = self._choose_arena(self.env_rng)
        env = self.envs[self._env_index]
        self._state, self._observation = env.reset(rng=self.env_rng, station=station, start_time=start)
        self.episodes += 1

    # Learning

    def _learn(self):
        batch = self.buffer.sample(self.hp.batch_size, self.agent_rng)
        targets = td_targets(batch, self.online, self.target, self.hp.gamma, self.hp.double_dqn)
        try:
            self.last_loss = gradient_step(self.online, self.optimizer, batch, targets)
        except TrainingError as e:
            e.diagnostics.update(step=self.step, episodes=self.episodes)
            self.logger.error(f"Training diverged at step {self.step}: {e.diagnostics}")
            raise

    def evaluate(self, episodes: Optional[int] = None) -> Dict[str, float]:
        """Greedy-policy mean reward and TWR over the fixed evaluation episode set."""
        episodes = episodes or self.hp.eval_episodes
        rng = np.random.default_rng(self.eval_seed)
        policy = greedy_policy(self.online, self.normalizer)
        rewards, twr = [], []
        for _ in range(episodes):
            index, station, start = self._choose_arena(rng)
            episode_rng = np.random.default_rng(_draw_seed(rng))
            result = run_episode(policy, self.eval_envs[index], rng=episode_rng, station=station, start_time=start)
            rewards.append(result.total_reward)
            twr.append((result.report.twr25, result.report.twr50, result.report.twr75))
        twr = np.array(twr)
        return {
            "mean_reward": float(np.mean(rewards)),
            "twr25": float(np.mean(twr[:, 0])),
            "twr50": float(np.mean(twr[:, 1])),
            "twr75": float(np.mean(twr[:, 2])),
        }

    def _record_evaluation(self):
        summary = self.evaluate()
        self.best_mean_reward = max(self.best_mean_reward, summary["mean_reward"])
        row = {"step": self.step, **summary, "epsilon": epsilon_at(self.step, self.hp),
               "loss": self.last_loss, "best_mean_reward": self.best_mean_reward}
        self.curve.append(row)
        self.logger.info(
            f"step {self.step}/{self.hp.total_steps} eps={row['epsilon']:.3f} loss={self.last_loss:.4g} "
            f"reward={summary['mean_reward']:.1f} twr50={summary['twr50']:.3f} "
            f"[{get_metrics_service().describe()}]")

    def train(self, stop_at: Optional[int] = None) -> TrainingResult:
        """Run until hp.total_steps, or pause at `stop_at` with a checkpoint."""
        hp = self.hp
        until = hp.total_steps if stop_at is None else min(int(stop_at), hp.total_steps)
        while self.step < until:
            if self._state is None or self._state.done:
                self._begin_episode()
            env = self.envs[self._env_index]
            observation = self.normalizer.normalize(self._observation)
            action = select_action(self.online, observation, epsilon_at(self.step, hp), self.agent_rng)
            result = env.step(self._state, action)
            next_observation = self.normalizer.normalize(result.observation)
            self.buffer.add(observation, action, result.reward, next_observation, result.done)
            self._observation = result.observation
            self.step += 1

            if (self.step > hp.warmup_steps and self.step % hp.train_every == 0
                    and len(self.buffer) >= hp.batch_size):
                self._learn()
            if self.step % hp.target_update_interval == 0:
                self.target.load_from(self.online)
            if self.step % hp.eval_interval == 0:
                self._record_evaluation()
            if self.checkpoint_path and self.step % hp.checkpoint_interval == 0 and self.step < until:
                self.save(self.checkpoint_path)

        completed = self.step >= hp.total_steps
        if completed and (not self.curve or self.curve[-1]["step"] != self.step):
            self._record_evaluation()
        if self.checkpoint_path:
            self.save(self.checkpoint_path)
        return TrainingResult(self.learning_curve(), self.checkpoint_path, self.step, completed)

    def learning_curve(self) -> pd.DataFrame:
        return pd.DataFrame(self.curve, columns=CURVE_COLUMNS)

    # Checkpoints

    def _arrays(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = {}
        for i, p in enumerate(self.online.parameters()):
            arrays[f"online_{i}"] = p
        for i, p in enumerate(self.target.parameters()):
            arrays[f"target_{i}"] = p
        for i, p in enumerate(self.optimizer.state_arrays()):
            arrays[f"adam_{i}"] = p
        arrays.update(self.buffer.state_arrays())
        return arrays

    def save(self, path) -> Path:
        episode = None
        if self._state is not None:
            episode = {"env_index": self._env_index, "state": self._state.to_dict()}
        manifest = {
            "seed": self.seed,
            "step": self.step,
            "episodes": self.episodes,
            "best_mean_reward": None if math.isinf(self.best_mean_reward) else self.best_mean_reward,
            "last_loss": None if math.isnan(self.last_loss) else self.last_loss,
            "architecture": {"layer_sizes": self.online.layer_sizes, "activation": "relu"},
            "hyperparameters": _plain(dataclasses.asdict(self.hp)),
            "normalization": self.normalizer.to_dict(),
            "library": [p.label for p in self.library],
            "config_hash": self.config_hash,
            "rng": {"env": _plain(self.env_rng.bit_generator.state),
                    "agent": _plain(self.agent_rng.bit_generator.state)},
            "eval_seed": self.eval_seed,
            "optimizer_steps": self.optimizer.t,
            "replay": {"position": self.buffer.position, "size": self.buffer.size},
            "episode": episode,
            "curve": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                      for row in self.curve],
        }
        save_checkpoint(path, manifest, self._arrays())
        self.logger.info(f"Checkpoint written at step {self.step}: {path}")
        return Path(path)

    @classmethod
    def resume(cls, checkpoint_path, library: Sequence[GridPair], sim_cfg: SimConfig,
               reward_cfg: RewardConfig, hp: DQNHyperparams, score_cfg: Optional[ScoreConfig] = None,
               config_hash: str = "") -> "DQNTrainer":
        """Rebuild a trainer from a checkpoint; the hyperparameters must match."""
        manifest, arrays = load_checkpoint(checkpoint_path)
        if manifest["hyperparameters"] != _plain(dataclasses.asdict(hp)):
            raise ConfigurationError("checkpoint hyperparameters differ from the current config")
        if manifest["library"] != [p.label for p in library]:
            raise ConfigurationError("checkpoint grid library differs from the current config")
        trainer = cls(library, sim_cfg, reward_cfg, hp, score_cfg, manifest["seed"],
                      checkpoint_path, config_hash)
        if trainer.normalizer.to_dict() != manifest["normalization"]:
            raise ConfigurationError("checkpoint observation normalization differs from the current config")
        trainer._restore(manifest, arrays)
        trainer.logger.info(f"Resumed training at step {trainer.step} from {checkpoint_path}")
        return trainer

    def _restore(self, manifest: dict, arrays: Dict[str, np.ndarray]):
        n = len(self.online.parameters())
        self.online.set_parameters([arrays[f"online_{i}"] for i in range(n)])
        self.target.set_parameters([arrays[f"target_{i}"] for i in range(n)])
        self.optimizer.load_state(manifest["optimizer_steps"], [arrays[f"adam_{i}"] for i in range(2 * n)])
        self.buffer.load_state(manifest["replay"]["position"], manifest["replay"]["size"], arrays)
        self.env_rng.bit_generator.state = manifest["rng"]["env"]
        self.agent_rng.bit_generator.state = manifest["rng"]["agent"]
        self.step = int(manifest["step"])
        self.episodes = int(manifest["episodes"])
        best = manifest["best_mean_reward"]
        self.best_mean_reward = -math.inf if best is None else float(best)
        loss = manifest["last_loss"]
        self.last_loss = math.nan if loss is None else float(loss)
        self.curve = [dict(row) for row in manifest["curve"]]
        for row in self.curve:
            if row["loss"] is None:
                row["loss"] = math.nan
        episode = manifest["episode"]
        if episode is not None:
            self._env_index = int(episode["env_index"])
            self._state = EpisodeState.from_dict(episode["state"])
            self._observation = self.envs[self._env_index].observe(self._state)


def load_policy(checkpoint_path) -> Tuple[QNetwork, ObservationNormalizer, dict]:
    """Online network and normalizer from a checkpoint, for evaluation."""
    manifest, arrays = load_checkpoint(checkpoint_path)
    sizes = manifest["architecture"]["layer_sizes"]
    net = QNetwork(sizes[0], sizes[1:-1], sizes[-1])
    n = len(net.parameters())
    net.set_parameters([arrays[f"online_{i}"] for i in range(n)])
    return net, ObservationNormalizer.from_dict(manifest["normalization"]), manifest
