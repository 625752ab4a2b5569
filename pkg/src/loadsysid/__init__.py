"""Closed-loop identification of motor load parameters from small-disturbance data.

The package simulates a small multi-machine power system with an induction
motor load, exposes the feedback structure between the load and the rest of
the grid, and recovers the motor's physical parameters with a prediction
error method built on a steady-state Kalman innovation predictor.
"""

from loadsysid.constants import F_BASE, OMEGA_S

__all__ = ["F_BASE", "OMEGA_S"]
__version__ = "0.1.0"
