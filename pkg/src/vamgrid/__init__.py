"""Multi-view gridworld benchmark and view-action matching agent."""

__version__ = "0.1.0"
