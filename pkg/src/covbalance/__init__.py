"""Adaptive loss weighting for single-task multi-loss optimisation."""
