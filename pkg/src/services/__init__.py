"""Toolkit services: synthesis, scoring, simulation, evaluation and runtime support."""
