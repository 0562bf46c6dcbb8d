"""Nonstationary satisficing bandits: environments, policies, hard instances and bound evaluators."""

__version__ = "0.1.0"
