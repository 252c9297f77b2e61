"""formlearn: cooperative deterministic-learning formation control.

A deterministic multi-agent simulator for leader-referenced formation
control of uncertain mechanical systems: distributed leader-state
estimation, backstepping control with Gaussian-network adaptation and
cooperative weight coupling, plus a post-run analysis suite checking
tracking, learning, and weight-consensus claims.
"""

__version__ = "0.1.0"
