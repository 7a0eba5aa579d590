"""Hybrid centralized/distributed flow scheduling for fat-tree fabrics."""

__version__ = "0.1.0"
