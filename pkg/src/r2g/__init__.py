"""Recursive reasoning graph multi-agent actor-critic on a small numpy autodiff core."""

__version__ = "0.1.0"
