"""Physical constants (SI) and default experimental numbers.

Defaults correspond to Rb-87 in a surface trap with a 1 kHz radial
frequency; the dimensionless regime they produce is nu = beta = gamma = 1/2.
"""

HBAR = 1.054571817e-34      # J s
BOHR_RADIUS = 5.29177210903e-11  # m
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

RB87_MASS = 86.909180531 * ATOMIC_MASS_UNIT
RB87_SCATTERING_LENGTH = 90.0 * BOHR_RADIUS

DEFAULT_GRAVITY = 9.8       # m s^-2
DEFAULT_LENGTH_SCALE = 2.4e-7  # m, trap length unit L
