"""Material and unit constants for the Yb:YVO4 spin system.

Unit system used throughout the package:
  * time in microseconds,
  * angular frequencies in rad/us,
  * lengths in nm.

A frequency quoted in the literature as "f MHz" is an ordinary frequency;
it enters every formula here as 2*pi*f rad/us.  Helper accessors on the
command-line/config layer do that conversion so that internal code never
mixes the two.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class MaterialConstants:
    """Constants of the YVO4 host and the Yb-171 ground/aux doublets.

    j_prefactor_nm3 is the dipolar coupling scale mu0 * (g_parallel muB)^2 /
    (4 pi hbar) expressed as an angular frequency times nm^3, quoted as
    2*pi x 480 MHz nm^3.
    """

    a_nm: float = 0.7119          # tetragonal lattice constant a
    c_nm: float = 0.6290          # tetragonal lattice constant c (c axis = z)
    sites_per_cell: int = 4       # yttrium sites per conventional cell
    g_parallel: float = 6.08      # ground doublet g factor along c
    g_perp: float = 0.85          # auxiliary doublet transverse g factor
    j_prefactor_nm3: float = TWO_PI * 480.0   # rad/us * nm^3
    mu_b_rad_us_per_mt: float = TWO_PI * 13.9962449361  # Bohr magneton, rad/us per mT
    qubit_splitting: float = TWO_PI * 675.0   # rad/us, working transition

    def __post_init__(self) -> None:
        if self.a_nm <= 0 or self.c_nm <= 0:
            raise ValueError("lattice constants must be positive")
        if self.sites_per_cell < 1:
            raise ValueError("sites_per_cell must be >= 1")
        if self.g_parallel <= 0 or self.g_perp <= 0:
            raise ValueError("g factors must be positive")

    @property
    def site_density_nm3(self) -> float:
        """Yttrium site density, sites per nm^3."""
        return self.sites_per_cell / (self.a_nm ** 2 * self.c_nm)


CONSTANTS = MaterialConstants()

# Fractional coordinates of the four yttrium sites in the conventional cell.
# z is the c axis.  These generate the usual zircon-structure Y sublattice.
YVO4_BASIS = np.array(
    [
        [0.0, 0.75, 0.125],
        [0.5, 0.75, 0.375],
        [0.0, 0.25, 0.625],
        [0.5, 0.25, 0.875],
    ]
)

# Default Lorentzian detuning linewidth (FWHM), calibrated against Ramsey
# contrast of the real samples: 2*pi x 0.65 MHz.
DEFAULT_DISORDER_FWHM = TWO_PI * 0.65
