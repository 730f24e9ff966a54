"""Data models for winds, soundings, episodes and configuration."""
