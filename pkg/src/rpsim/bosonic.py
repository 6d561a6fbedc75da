"""Closed-form reference model: each electron coupled to its own bosonic bath.

Spin exchange with a thermal bath at temperature T gives the single-spin map

    |up><up|   -> alpha_t |up><up| + (1 - alpha_t) |down><down|
    |down><down| -> (1 - beta_t) |up><up| + beta_t |down><down|
    |up><down| -> exp(-2i m_b t) eta_t |up><down|

with alpha_t = (1-s) e^{-2 gamma t} + s, beta_t = s e^{-2 gamma t} + (1-s),
eta_t = e^{-gamma t}.  The rate gamma = 2 m_b kappa0 (2N+1) and the
equilibrium parameter s = N/(2N+1) follow from the boson occupation
N = 1/(exp(eps_s/eps_T) - 1) at splitting eps_s = 2 hbar m_b and thermal
energy eps_T = k_B T, with m_b the electron Zeeman frequency magnitude.

Starting from the singlet, the pair state keeps the X form

    [[a, 0, 0, 0], [0, b, c, 0], [0, c, b, 0], [0, 0, 0, d]]

whose concurrence is max{0, 2(|c| - sqrt(a d))}, and the exponential-model
yield has the closed form used as the analytic oracle of the numerical
pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelFlags,
    ElectronChannel,
    IsoParams,
    TwoElectronState,
    transfer_from_process,
)
from .constants import GAMMA_E, GAMMA_E_SI, HBAR, K_B, PER_SECOND_TO_PER_NS

SIGN_CHANGE_RATIO = math.log(2.0 + math.sqrt(3.0))


@dataclass(frozen=True)
class BathParams:
    """Thermal-bath working point.

    Attributes:
        temperature_K: bath temperature, K.
        kappa0: dimensionless resonant coupling scale.
        field_mT: magnetic field magnitude, mT.
    """

    temperature_K: float
    kappa0: float
    field_mT: float

    def __post_init__(self):
        if not self.temperature_K > 0:
            raise ValueError("temperature must be positive")
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        if self.field_mT < 0:
            raise ValueError("field magnitude must be >= 0")

    @property
    def m_b(self) -> float:
        """Electron Zeeman frequency magnitude, rad/ns."""
        return GAMMA_E * self.field_mT

    @property
    def energy_ratio(self) -> float:
        """eps_s / eps_T, computed in SI units."""
        m_b_si = GAMMA_E_SI * self.field_mT * 1e-3
        return 2.0 * HBAR * m_b_si / (K_B * self.temperature_K)

    @property
    def occupation(self) -> float:
        """Bose occupation N of the resonant mode."""
        return 1.0 / math.expm1(self.energy_ratio)

    @property
    def s(self) -> float:
        """Equilibrium up-population, in (0, 1/2)."""
        n = self.occupation
        return n / (2.0 * n + 1.0)

    @property
    def gamma(self) -> float:
        """Exchange rate, ns^-1."""
        return 2.0 * self.m_b * self.kappa0 * (2.0 * self.occupation + 1.0)


def relaxation_factors(p: BathParams, t: float) -> tuple:
    """(alpha_t, beta_t, eta_t) of the single-spin map at time t (ns)."""
    decay = math.exp(-2.0 * p.gamma * t)
    alpha = (1.0 - p.s) * decay + p.s
    beta = p.s * decay + (1.0 - p.s)
    eta = math.exp(-p.gamma * t)
    return alpha, beta, eta


def bosonic_process_tensor(p: BathParams, t: float) -> np.ndarray:
    """Process tensor Lam[p,q,a,c] of the bath map at time t."""
    alpha, beta, eta = relaxation_factors(p, t)
    phase = np.exp(-2j * p.m_b * t)
    lam = np.zeros((2, 2, 2, 2), dtype=complex)
    lam[0, 0, 0, 0] = alpha
    lam[0, 0, 1, 1] = 1.0 - alpha
    lam[1, 1, 0, 0] = 1.0 - beta
    lam[1, 1, 1, 1] = beta
    lam[0, 1, 0, 1] = eta * phase
    lam[1, 0, 1, 0] = eta * np.conj(phase)
    return lam


def bosonic_map(p: BathParams, t: float) -> ElectronChannel:
    """The bath channel at time t as an `ElectronChannel`."""
    if t < 0:
        raise ValueError("bosonic map requires t >= 0")
    lam = bosonic_process_tensor(p, t)
    iso = IsoParams(a=float(lam[0, 0, 0, 0].real), kappa=complex(lam[0, 1, 0, 1]))
    flags = ChannelFlags(isotropic=True, static_z_field=True, pulsed=False,
                         bath="analytic")
    return ElectronChannel(transfer=transfer_from_process(lam), time=float(t),
                           process=lam, iso_params=iso, flags=flags)


def pair_state(p: BathParams, t: float) -> TwoElectronState:
    """Two-electron X state at time t, starting from the singlet."""
    alpha, beta, eta = relaxation_factors(p, t)
    a = alpha * (1.0 - beta)
    b = (alpha * beta + (1.0 - alpha) * (1.0 - beta)) / 2.0
    d = (1.0 - alpha) * beta
    c = -eta * eta / 2.0
    rho = np.array([
        [a, 0, 0, 0],
        [0, b, c, 0],
        [0, c, b, 0],
        [0, 0, 0, d],
    ], dtype=complex)
    return TwoElectronState(rho)


def bosonic_fidelity(p: BathParams, t) -> np.ndarray:
    """Singlet fidelity f_s(t) = (alpha beta + (1-alpha)(1-beta) + eta^2)/2."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-2.0 * p.gamma * t)
    alpha = (1.0 - p.s) * decay + p.s
    beta = p.s * decay + (1.0 - p.s)
    eta2 = np.exp(-2.0 * p.gamma * t)
    return 0.5 * (alpha * beta + (1.0 - alpha) * (1.0 - beta) + eta2)


def bosonic_yield(p: BathParams, k_per_s: float) -> float:
    """Closed-form singlet yield for the exponential re-encounter model.

    Phi = k/(k + 2 gamma) + 8 gamma^2 s(1-s) / ((k + 4 gamma)(k + 2 gamma)).
    """
    if not k_per_s > 0:
        raise ValueError("rate constant must be positive")
    k = k_per_s * PER_SECOND_TO_PER_NS
    g = p.gamma
    return k / (k + 2 * g) + 8 * g * g * p.s * (1 - p.s) / ((k + 4 * g) * (k + 2 * g))


def bosonic_entanglement(p: BathParams, t: float) -> float:
    """Concurrence E(t) = max{0, 2(|c| - sqrt(a d))} of the X state."""
    if t < 0:
        raise ValueError("bosonic entanglement requires t >= 0")
    alpha, beta, eta = relaxation_factors(p, t)
    a = alpha * (1.0 - beta)
    d = (1.0 - alpha) * beta
    c = -eta * eta / 2.0
    return max(0.0, 2.0 * (abs(c) - math.sqrt(max(a * d, 0.0))))


def bosonic_lifetime(p: BathParams, t_hint: float = 1.0) -> float:
    """Root of 2(|c| - sqrt(a d)) = 0, i.e. the entanglement lifetime (ns)."""
    lo, hi = 0.0, t_hint
    while bosonic_entanglement(p, hi) > 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e9:
            raise RuntimeError("entanglement does not decay")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bosonic_entanglement(p, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def sensitivity_sign_change(temperature_K: float) -> float:
    """Field (tesla) where d|Lambda|/dB changes sign: eps_s/eps_T = ln(2+sqrt(3))."""
    if not temperature_K > 0:
        raise ValueError("temperature must be positive")
    return SIGN_CHANGE_RATIO * K_B * temperature_K / (2.0 * HBAR * GAMMA_E_SI)
