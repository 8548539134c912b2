"""Physical constants for 133Cs (SI units, angular frequencies in rad/s)."""
from __future__ import annotations

import math

from scipy import constants as _c

HBAR = _c.hbar
KB = _c.k
H_PLANCK = _c.h
MU_B = _c.physical_constants["Bohr magneton"][0]
AMU = _c.atomic_mass

CS_MASS = 132.905451933 * AMU
CS_NUCLEAR_SPIN = 3.5

# ground-state hyperfine splitting (defines the SI second)
OMEGA_HF = 2.0 * math.pi * 9.192631770e9

# 6s1/2 -> 6p3/2 cycling line used for readout
D2_WAVELENGTH = 852.347e-9
GAMMA_6P = 2.0 * math.pi * 5.2e6
I_SAT_D2 = 11.0  # W/m^2

# 6p3/2 excited hyperfine offsets from f'=5 (angular)
D2_EXCITED_OFFSETS = {
    4: -2.0 * math.pi * 251.0e6,
    3: -2.0 * math.pi * 452.2e6,
    2: -2.0 * math.pi * 603.4e6,
}
# relative strengths of f=3 -> f' lines
D2_F3_STRENGTHS = {2: 20.0 / 56.0, 3: 21.0 / 56.0, 4: 15.0 / 56.0}

# 7p1/2 (459 nm shift-out) and 5d5/2 (685 nm) lifetimes
TAU_7P = 165e-9
TAU_5D = 1280e-9
GAMMA_5D_QUADRUPOLE = 2.0 * math.pi * 124e3

# the two qubit labels; |0> = (3,0), |1> = (4,0)
QUBIT_ZERO = (3, 0)
QUBIT_ONE = (4, 0)
