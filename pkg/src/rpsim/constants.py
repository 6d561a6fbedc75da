"""Physical constants and unit conventions.

Internal unit system: time in ns, magnetic fields in mT, angular
frequencies in rad/ns, hbar = 1.  A field or an isotropic hyperfine
constant given in mT is converted to an angular frequency by
multiplying with ``GAMMA_E`` (rad ns^-1 mT^-1).

Reaction rate constants are quoted in s^-1 at API boundaries and
converted with ``PER_SECOND_TO_PER_NS``.

CODATA-2018 values; recorded in output metadata for reproducibility.
"""

G_E = 2.0023
"""Electron g-factor (magnitude used for the gyromagnetic conversion)."""

MU_B = 9.2740100783e-24
"""Bohr magneton, J/T (CODATA-2018)."""

HBAR = 1.054571817e-34
"""Reduced Planck constant, J*s (CODATA-2018)."""

K_B = 1.380649e-23
"""Boltzmann constant, J/K (exact, SI-2019)."""

GAMMA_E = G_E * MU_B / HBAR * 1e-12
"""Electron gyromagnetic conversion, rad ns^-1 mT^-1 (= 0.17608...)."""

GAMMA_E_SI = G_E * MU_B / HBAR
"""Same conversion in SI units, rad s^-1 T^-1."""

PER_SECOND_TO_PER_NS = 1e-9
"""Rate-constant conversion s^-1 -> ns^-1."""

MT_PER_TESLA = 1e3

CONSTANT_METADATA = {
    "g_e": G_E,
    "mu_B_J_per_T": MU_B,
    "hbar_J_s": HBAR,
    "k_B_J_per_K": K_B,
    "gamma_e_rad_per_ns_mT": GAMMA_E,
}
