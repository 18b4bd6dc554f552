"""Program synthesis by execution decomposition.

Two example-driven DSLs (string transformation and integer-list
manipulation), compositional-generalization benchmark generators with
ground-truth decomposition traces, and a subgoal-driven beam search with
pluggable proposal backends.
"""

__version__ = "0.1.0"
