"""Group-target tracking toolkit.

Subpackages: ``motion`` (kinematic models), ``grouping`` (partitions and their
weighting), ``association`` (likelihood factors and the iterative association
kernel), ``tracker`` (the particle filter recursion), ``sim`` (scenarios and
measurement synthesis), ``metrics`` (OSPA metrics), ``experiments`` and ``cli``
(Monte Carlo batches and benchmarks).
"""

from . import association, experiments, grouping, metrics, motion, sim, tracker

__all__ = [
    "association",
    "experiments",
    "grouping",
    "metrics",
    "motion",
    "sim",
    "tracker",
]

__version__ = "0.1.0"
