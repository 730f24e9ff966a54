"""DQN station-keeping agent: Q-network, replay buffer, trainer and search."""
