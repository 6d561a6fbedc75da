"""Pulse-sequence constructors and the first-order average-Hamiltonian diagnostic.

Pulses are ideal instantaneous rotations exp(-i angle n.sigma/2) acting on
electron spins only (no duration, no nuclear action).  Named protocols:

    N      no control
    Z      periodic pi pulses about z (both electrons)
    X      periodic pi pulses about x (both electrons)
    RB     field alternation only (handled by `FieldSchedule`)
    RB-X   field alternation plus pi-X pulses at the flip times
    CS-P   one pi/2-X pulse at t = 0+ (initial-state probe)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_E
from .spincore import (
    FieldSchedule,
    HamiltonianHandle,
    RadicalSpec,
    pulse_unitary_2x2,
    spin_matrix,
    PAULI,
)

TARGET_BOTH = "both-electrons"
TARGET_E1 = "electron-1"
TARGET_E2 = "electron-2"


@dataclass(frozen=True)
class PulseSequence:
    """Timed ideal rotations applied to electron spins.

    Periodic pulses fire at ``start_offset + m*period`` for m = 0, 1, ...;
    the default ``start_offset=None`` means the first pulse is at one full
    period.  A single-shot sequence fires once at t = 0+.

    Attributes:
        period: pulse spacing tau_c in ns (ignored for single-shot).
        axis: rotation axis, any nonzero 3-vector.
        angle: rotation angle in radians, in (0, 2*pi).
        start_offset: time of the first pulse (ns).
        target: which electrons are rotated.
        single_shot: one pulse at t = 0+ only.
    """

    period: float | None
    axis: tuple
    angle: float
    start_offset: float | None = None
    target: str = TARGET_BOTH
    single_shot: bool = False

    def __post_init__(self):
        if not self.single_shot:
            if self.period is None or not self.period > 0:
                raise ValueError("periodic sequence needs period > 0")
        if not 0 < self.angle < 2 * math.pi:
            raise ValueError("pulse angle must be in (0, 2*pi)")
        if self.target not in (TARGET_BOTH, TARGET_E1, TARGET_E2):
            raise ValueError(f"unknown target {self.target!r}")

    def applies_to(self, electron_index: int) -> bool:
        if self.target == TARGET_BOTH:
            return True
        return self.target == (TARGET_E1 if electron_index == 1 else TARGET_E2)

    def times_until(self, t_final: float) -> np.ndarray:
        """Pulse times in (0, t_final)."""
        if self.single_shot:
            return np.array([0.0])
        first = self.start_offset if self.start_offset is not None else self.period
        if first > t_final - 1e-12:
            return np.empty(0)
        n = int(math.floor((t_final - 1e-12 - first) / self.period)) + 1
        return first + self.period * np.arange(n)

    def unitary(self) -> np.ndarray:
        return pulse_unitary_2x2(self.axis, self.angle)


def protocol_Z(tau_c: float) -> PulseSequence:
    """Pi rotations about z on both electrons at times m*tau_c."""
    if not tau_c > 0:
        raise ValueError("tau_c must be positive")
    return PulseSequence(period=tau_c, axis=(0.0, 0.0, 1.0), angle=math.pi)


def protocol_X(tau_c: float) -> PulseSequence:
    """Pi rotations about x on both electrons at times m*tau_c."""
    if not tau_c > 0:
        raise ValueError("tau_c must be positive")
    return PulseSequence(period=tau_c, axis=(1.0, 0.0, 0.0), angle=math.pi)


def protocol_pulses_along(axis, tau_c: float, angle: float = math.pi) -> PulseSequence:
    """Periodic pulses about an arbitrary axis (both electrons)."""
    return PulseSequence(period=tau_c, axis=tuple(axis), angle=angle)


def single_shot_half_pi_x() -> PulseSequence:
    """One pi/2-X pulse at t = 0+ on both electrons (CS-P probe)."""
    return PulseSequence(period=None, axis=(1.0, 0.0, 0.0), angle=math.pi / 2,
                         single_shot=True)


def protocol_RB(tau_a: float, with_X: bool, pulse_axis=(1.0, 0.0, 0.0)):
    """Field alternation every tau_a, optionally with pi pulses at the flips.

    Returns:
        (schedule_modifier, pulses) where ``schedule_modifier`` stamps
        ``alternation_period=tau_a`` onto a `FieldSchedule` and ``pulses``
        is a tuple holding the pi pulse train (perpendicular axis by
        convention) or empty.  A pulse coinciding with a flip is applied
        after the flip.
    """
    if not tau_a > 0:
        raise ValueError("tau_a must be positive")

    def modifier(schedule: FieldSchedule) -> FieldSchedule:
        return FieldSchedule(schedule.magnitude_mT, schedule.theta, schedule.phi,
                             alternation_period=tau_a)

    pulses = ()
    if with_X:
        pulses = (PulseSequence(period=tau_a, axis=tuple(pulse_axis), angle=math.pi),)
    return modifier, pulses


def protocol_XY(tau_spacing: float, start_offset: float | None = None):
    """Alternating pi-X / pi-Y pulses (XY decoupling of all hyperfine terms).

    X pulses fire at odd multiples of the spacing, Y pulses at even
    multiples, so one full XY-4 cycle spans 4*tau_spacing.
    """
    if not tau_spacing > 0:
        raise ValueError("tau_spacing must be positive")
    off = start_offset if start_offset is not None else tau_spacing
    x_train = PulseSequence(period=2 * tau_spacing, axis=(1.0, 0.0, 0.0),
                            angle=math.pi, start_offset=off)
    y_train = PulseSequence(period=2 * tau_spacing, axis=(0.0, 1.0, 0.0),
                            angle=math.pi, start_offset=off + tau_spacing)
    return (x_train, y_train)


def average_hamiltonian_Z(radical: RadicalSpec, field_mT) -> HamiltonianHandle:
    """First-order average Hamiltonian of the Z protocol.

    Keeps only the Zeeman-z term and the zz hyperfine couplings; valid for
    isotropic radicals with the field along z.

    Raises:
        ValueError: anisotropic radical or field not along z.
    """
    field = np.asarray(field_mT, dtype=float)
    if field.shape != (3,):
        raise ValueError("field must be a 3-vector in mT")
    if abs(field[0]) > 1e-12 or abs(field[1]) > 1e-12:
        raise ValueError("average Hamiltonian requires the field along z")
    if not radical.isotropic:
        raise ValueError(f"radical {radical.name!r} has anisotropic couplings")

    electron = -(GAMMA_E / 2.0) * field[2] * PAULI["z"]
    bound = 0.5 * GAMMA_E * abs(field[2])
    nuclear_terms = []
    for j, nuc in enumerate(radical.nuclei):
        lam_w = GAMMA_E * nuc.isotropic_value
        iz = spin_matrix(nuc.multiplicity, "z")
        nuclear_terms.append((j + 1, iz, 0.5 * lam_w * PAULI["z"]))
        bound += 0.5 * nuc.spin * abs(lam_w)
    return HamiltonianHandle(radical, field, electron, nuclear_terms, bound)
