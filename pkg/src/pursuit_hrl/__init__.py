"""Pursuit-evasion swarm confrontation with a two-layer learning stack.

Subpackages: arena simulation (``sim``), network kit (``nets``), target
allocation (``allocation``), path planning (``planner``), ensemble model
(``ensemble``), layer interaction (``interaction``), training pipeline
(``training``), deployment metrics (``evaluation``), and the CLI (``cli``).
"""

__version__ = "0.1.0"
