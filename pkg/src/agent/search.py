"""Random hyperparameter search over short training runs."""
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from agent.trainer import DQNTrainer, GridPair
from models.config_models import DQNHyperparams, RewardConfig, ScoreConfig, SearchSpace, SimConfig
from services.logging_service import get_logging_service
from utils.errors import HabStationError

TRIAL_COLUMNS = ["rank", "trial", "seed", "learning_rate", "epsilon_start", "epsilon_end",
                 "total_steps", "score_twr50", "mean_reward", "status", "error"]


@dataclass
class TrialResult:
    trial: int
    seed: int
    learning_rate: float
    epsilon_start: float
    epsilon_end: float
    total_steps: int
    score_twr50: float = math.nan
    mean_reward: float = math.nan
    status: str = "ok"
    error: str = ""
    curve: Optional[pd.DataFrame] = field(default=None, repr=False)


def sample_hyperparameters(space: SearchSpace, base: DQNHyperparams, rng: np.random.Generator) -> DQNHyperparams:
    """Log-uniform learning rate, uniform epsilon endpoints; other fields from `base`."""
    log_low, log_high = (math.log(x) for x in space.learning_rate_range)
    learning_rate = float(math.exp(rng.uniform(log_low, log_high)))
    learning_rate = min(max(learning_rate, space.learning_rate_range[0]), space.learning_rate_range[1])
    epsilon_start = float(rng.uniform(*space.epsilon_start_range))
    epsilon_end = float(rng.uniform(*space.epsilon_end_range))
    trial_steps = space.trial_steps
    return dataclasses.replace(
        base,
        learning_rate=learning_rate,
        epsilon_start=epsilon_start,
        epsilon_end=epsilon_end,
        total_steps=trial_steps,
        eval_interval=min(base.eval_interval, trial_steps),
        checkpoint_interval=trial_steps,
        warmup_steps=min(base.warmup_steps, trial_steps // 2),
    )


def hyperparameter_search(library: Sequence[GridPair], sim_cfg: SimConfig, reward_cfg: RewardConfig,
                          base: DQNHyperparams, space: SearchSpace, seed: int,
                          score_cfg: Optional[ScoreConfig] = None) -> List[TrialResult]:
    """Train `space.budget` short runs and rank them by final evaluation TWR50.

    A failed trial is recorded with its error and ranked last.
    """
    logger = get_logging_service()
    rng = np.random.default_rng(seed)
    trials: List[TrialResult] = []
    for index in range(space.budget):
        hp = sample_hyperparameters(space, base, rng)
        trial_seed = int(rng.integers(0, 2 ** 31 - 1))
        trial = TrialResult(index, trial_seed, hp.learning_rate, hp.epsilon_start, hp.epsilon_end, hp.total_steps)
        logger.info(f"Trial {index + 1}/{space.budget}: lr={hp.learning_rate:.3g} "
                    f"eps={hp.epsilon_start:.3f}->{hp.epsilon_end:.3f}")
        try:
            result = DQNTrainer(library, sim_cfg, reward_cfg, hp, score_cfg, seed=trial_seed).train()
            final = result.curve.iloc[-1]
            trial.score_twr50 = float(final["twr50"])
            trial.mean_reward = float(final["mean_reward"])
            trial.curve = result.curve
        except HabStationError as e:
            trial.status = "failed"
            trial.error = str(e)
            logger.warning(f"Trial {index + 1} failed: {e}")
        trials.append(trial)

    return rank_trials(trials)


def rank_trials(trials: Sequence[TrialResult]) -> List[TrialResult]:
    """Successful trials by descending TWR50 (trial index breaks ties), then failures."""
    ok = sorted((t for t in trials if t.status == "ok"), key=lambda t: (-t.score_twr50, t.trial))
    failed = sorted((t for t in trials if t.status != "ok"), key=lambda t: t.trial)
    return ok + failed


def trials_frame(trials: Sequence[TrialResult]) -> pd.DataFrame:
    rows = []
    for rank, t in enumerate(trials, start=1):
        rows.append({
            "rank": rank, "trial": t.trial, "seed": t.seed, "learning_rate": t.learning_rate,
            "epsilon_start": t.epsilon_start, "epsilon_end": t.epsilon_end, "total_steps": t.total_steps,
            "score_twr50": t.score_twr50, "mean_reward": t.mean_reward, "status": t.status, "error": t.error,
        })
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def write_trials(trials: Sequence[TrialResult], out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "trials.csv"
    trials_frame(trials).to_csv(path, index=False, float_format="%.8g")
    for t in trials:
        if t.curve is not None:
            t.curve.to_csv(out_dir / f"trial_{t.trial:03d}_curve.csv", index=False, float_format="%.6f")
    return path
