"""Physical constants (CODATA values via scipy) and frequently used derived numbers."""

from scipy import constants as _c

HBAR = _c.hbar
K_B = _c.k
H_PLANCK = _c.h
E_CHARGE = _c.e
SPEED_OF_LIGHT = _c.c

#: Superconducting flux quantum h/2e (Wb).
FLUX_QUANTUM = H_PLANCK / (2 * E_CHARGE)

TWO_PI = 2 * _c.pi
