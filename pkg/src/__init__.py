"""HAB Station-Keeping Lab - synthetic winds, forecast scoring and DQN station-keeping."""
__version__ = "0.4.0"
