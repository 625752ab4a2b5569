"""System-wide electrical constants."""

import math

# Nominal system frequency, Hz.  All per-unit data in the bundled cases is on
# a single 100 MVA system base at this frequency.
F_BASE = 50.0

# Synchronous electrical speed, rad/s.  Couples per-unit slip and rotor-angle
# states to time in seconds.
OMEGA_S = 2.0 * math.pi * F_BASE
