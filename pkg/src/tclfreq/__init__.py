"""Fitness-prioritised frequency-threshold allocation for switching loads."""
__version__ = "0.1.0"
