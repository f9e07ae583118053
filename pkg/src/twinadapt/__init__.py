"""twinadapt: self-adapting multi-fidelity behavior models for a digital twin.

A virtual production cell (conveyor + vacuum gripper) streams telemetry; a
gap monitor shadow-simulates the active model configuration and scores the
reality gap; a Plan-Do-Check-Act agent engine re-parameterizes or
re-orchestrates configurations from a multi-fidelity model pool and
activates the winner of a weighted time/cost/quality comparison.
"""

__version__ = "0.1.0"
