"""Experiment orchestration: datasets, training runs, sweeps, demos, timing."""
