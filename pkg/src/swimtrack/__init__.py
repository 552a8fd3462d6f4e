"""Simulation and training workbench for a centralized two-head DQN tracking
controller on a six-legged swimming robot."""

__version__ = "0.1.0"
