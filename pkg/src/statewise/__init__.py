"""Safe reinforcement learning under state-wise constraints.

Five model-free safeguards around a shared off-policy actor-critic core:
closed-form action projection, a learned recovery policy, scalar and
state-dependent Lagrangian optimization, and an unrolled gradient-projection
layer that corrects actions against a learned cost critic at decision time.
Everything runs in float64 numpy on desk-scale problems, and each
constrained-optimization component ships with an independent brute-force
oracle.
"""

__version__ = "0.1.0"
