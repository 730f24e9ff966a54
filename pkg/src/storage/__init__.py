"""Storage layer for configuration, wind grids and checkpoints."""
