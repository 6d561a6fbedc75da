"""Dense joint-space evolution of the full pair (both electrons + both baths).

Brute-force counterpart of the channel pipeline, used as an oracle on
small systems and for per-interval sensitivities that need the fully
correlated electron-nuclear state.  The joint index ordering is

    electron_1 (x) bath_1 (x) electron_2 (x) bath_2

Dense matrices only; intended for joint dimensions up to a few thousand.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .channel import SINGLET_PROJECTOR
from .spincore import FieldSchedule, RadicalSpec, build_hamiltonian, field_vector


def joint_hamiltonian(r1: RadicalSpec, r2: RadicalSpec, field_mT) -> np.ndarray:
    """H = H_1 (x) I + I (x) H_2 on the joint space (dense)."""
    h1 = build_hamiltonian(r1, field_mT).dense_unchecked()
    h2 = build_hamiltonian(r2, field_mT).dense_unchecked()
    return (np.kron(h1, np.eye(r2.dimension)) +
            np.kron(np.eye(r1.dimension), h2))


def joint_initial_state(r1: RadicalSpec, r2: RadicalSpec,
                        rho_pair: np.ndarray) -> np.ndarray:
    """rho_pair on the electrons (x) maximally mixed baths, joint ordering."""
    d1, d2 = r1.bath_dimension, r2.bath_dimension
    # r4[e1, e2, e1', e2'] from the 4x4 pair state
    r4 = np.asarray(rho_pair, dtype=complex).reshape(2, 2, 2, 2)
    out = np.einsum("acbd,mn,uv->amcubndv", r4,
                    np.eye(d1) / d1, np.eye(d2) / d2)
    dim = 4 * d1 * d2
    return out.reshape(dim, dim)


def pair_operator_joint(op_pair: np.ndarray, r1: RadicalSpec,
                        r2: RadicalSpec) -> np.ndarray:
    """Lift a 4x4 electron-pair operator to the joint space (identity baths)."""
    d1, d2 = r1.bath_dimension, r2.bath_dimension
    p4 = np.asarray(op_pair, dtype=complex).reshape(2, 2, 2, 2)
    out = np.einsum("acbd,mn,uv->amcubndv", p4, np.eye(d1), np.eye(d2))
    dim = 4 * d1 * d2
    return out.reshape(dim, dim)


def trace_out_baths(rho_joint: np.ndarray, r1: RadicalSpec,
                    r2: RadicalSpec) -> np.ndarray:
    """Reduce the joint density matrix to the 4x4 electron-pair state."""
    d1, d2 = r1.bath_dimension, r2.bath_dimension
    r8 = rho_joint.reshape(2, d1, 2, d2, 2, d1, 2, d2)
    red = np.einsum("amcubmdu->acbd", r8)
    return red.reshape(4, 4)


def singlet_fidelity_joint(rho_joint: np.ndarray, r1: RadicalSpec,
                           r2: RadicalSpec) -> float:
    red = trace_out_baths(rho_joint, r1, r2)
    return float(np.real(np.trace(SINGLET_PROJECTOR @ red)))


def evolve_joint(rho_joint: np.ndarray, r1: RadicalSpec, r2: RadicalSpec,
                 schedule: FieldSchedule, pulses, t: float) -> np.ndarray:
    """Dense piecewise evolution of the joint state through a protocol.

    Flips and pulses follow the same conventions as the channel engine:
    a pulse coinciding with a field flip is applied after the flip.
    """
    events = []
    for ft in schedule.flip_times(t):
        events.append((float(ft), 0, None))
    for seq in pulses:
        for pt in seq.times_until(t):
            events.append((float(pt), 1, seq))
    events.sort(key=lambda e: (e[0], e[1]))

    cache: dict = {}

    def propagator(sign, dt):
        key = (sign, round(dt, 15))
        if key not in cache:
            h = joint_hamiltonian(r1, r2, sign * field_vector(
                schedule.magnitude_mT, schedule.theta, schedule.phi))
            cache[key] = expm(-1j * h * dt)
        return cache[key]

    rho = rho_joint
    t_cur, sign = 0.0, 1
    for ev_t, kind, payload in events:
        if ev_t > t + 1e-12:
            break
        if ev_t > t_cur + 1e-12:
            u = propagator(sign, ev_t - t_cur)
            rho = u @ rho @ u.conj().T
            t_cur = ev_t
        if kind == 0:
            sign = -sign
        else:
            up = pair_operator_joint(_pair_unitary(payload), r1, r2)
            rho = up @ rho @ up.conj().T
    if t > t_cur + 1e-12:
        u = propagator(sign, t - t_cur)
        rho = u @ rho @ u.conj().T
    return rho


def _pair_unitary(seq) -> np.ndarray:
    u2 = seq.unitary()
    eye = np.eye(2, dtype=complex)
    u_left = u2 if seq.applies_to(1) else eye
    u_right = u2 if seq.applies_to(2) else eye
    return np.kron(u_left, u_right)
