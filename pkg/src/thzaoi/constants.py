"""Physical constants (CODATA 2018 exact values)."""

SPEED_OF_LIGHT = 299792458.0        # m/s
BOLTZMANN = 1.380649e-23            # J/K
