"""Stochastic dynamic technician routing: simulator, policies and PPO-tuned balance."""

__version__ = "0.1.0"
