"""Spin operators, radical Hamiltonians and matrix-free time propagation.

A radical is one unpaired electron coupled to a set of nuclear spins by
hyperfine tensors.  Its Hamiltonian (rad/ns, hbar = 1) is

    H = -gamma_e B . S  +  sum_j  S . A_j . I_j

with ``gamma_e`` the positive conversion constant ``GAMMA_E`` and the
hyperfine tensors ``A_j`` given in mT (converted with the same constant).
State vectors live in the Kronecker-ordered space
electron (x) nucleus_1 (x) ... (x) nucleus_n, electron factor first.

The Hamiltonian is never materialised above dimension 64: `HamiltonianHandle`
applies it through Kronecker-structured sweeps (one batched matmul per local
operator), and `chebyshev_propagate` evaluates exp(-iHt) psi from a Chebyshev
series scaled by a cheap 1-norm spectral bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import jv

from .constants import GAMMA_E

DEFAULT_DIMENSION_CAP = 4096
DEFAULT_TOL = 1e-10

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def spin_matrix(multiplicity: int, component: str) -> np.ndarray:
    """Spin operator matrix for a spin of the given multiplicity.

    Args:
        multiplicity: 2s+1 (2 for spin-1/2, 3 for spin-1, ...).
        component: one of "x", "y", "z".

    Returns:
        Dense complex (multiplicity x multiplicity) matrix with hbar = 1,
        so spin-1/2 components have eigenvalues +-1/2.
    """
    if multiplicity < 2:
        raise ValueError(f"multiplicity must be >= 2, got {multiplicity}")
    s = (multiplicity - 1) / 2.0
    m = np.arange(s, -s - 1, -1)
    if component == "z":
        return np.diag(m).astype(complex)
    sp = np.zeros((multiplicity, multiplicity), dtype=complex)
    for i in range(multiplicity - 1):
        mm = m[i + 1]
        sp[i, i + 1] = math.sqrt(s * (s + 1) - mm * (mm + 1))
    sm = sp.conj().T
    if component == "x":
        return (sp + sm) / 2
    if component == "y":
        return (sp - sm) / 2j
    raise ValueError(f"component must be x, y or z, got {component!r}")


@dataclass(frozen=True)
class SpinOperator:
    """One Cartesian spin component for a given multiplicity."""

    multiplicity: int
    component: str

    @property
    def matrix(self) -> np.ndarray:
        return spin_matrix(self.multiplicity, self.component)

    @property
    def spin(self) -> float:
        return (self.multiplicity - 1) / 2.0


def _as_tensor(hyperfine) -> np.ndarray:
    t = np.asarray(hyperfine, dtype=float)
    if t.shape == ():
        t = float(t) * np.eye(3)
    if t.shape != (3, 3):
        raise ValueError(f"hyperfine tensor must be scalar or 3x3, got shape {t.shape}")
    return t


@dataclass(frozen=True, eq=False)
class Nucleus:
    """A nuclear spin with its hyperfine tensor (mT, row-major)."""

    multiplicity: int
    tensor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tensor", _as_tensor(self.tensor))
        if not np.all(np.isfinite(self.tensor)):
            raise ValueError("hyperfine tensor has non-finite entries")
        if self.multiplicity < 2:
            raise ValueError("nuclear multiplicity must be >= 2")

    @property
    def spin(self) -> float:
        return (self.multiplicity - 1) / 2.0

    @property
    def isotropic_value(self) -> float | None:
        """The scalar lambda if the tensor is lambda * Identity, else None."""
        lam = self.tensor[0, 0]
        if np.max(np.abs(self.tensor - lam * np.eye(3))) <= 1e-12 * max(1.0, abs(lam)):
            return float(lam)
        return None

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.tensor))


@dataclass(frozen=True, eq=False)
class RadicalSpec:
    """One electron plus its surrounding nuclear spins.

    Attributes:
        name: label used in metadata.
        nuclei: tuple of `Nucleus`.
        dimension_cap: largest allowed Hilbert-space dimension.
    """

    name: str
    nuclei: tuple = ()
    dimension_cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        nuclei = tuple(
            n if isinstance(n, Nucleus) else Nucleus(*n) for n in self.nuclei
        )
        object.__setattr__(self, "nuclei", nuclei)
        if self.dimension > self.dimension_cap:
            raise ValueError(
                f"radical {self.name!r} needs dimension {self.dimension}, "
                f"cap is {self.dimension_cap}"
            )

    @property
    def dims(self) -> tuple:
        """Local dimensions, electron first."""
        return (2,) + tuple(n.multiplicity for n in self.nuclei)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    @property
    def bath_dimension(self) -> int:
        return self.dimension // 2

    @property
    def isotropic(self) -> bool:
        """True iff every hyperfine tensor is a scalar multiple of identity."""
        return all(n.isotropic_value is not None for n in self.nuclei)

    def isotropic_couplings(self) -> list:
        vals = [n.isotropic_value for n in self.nuclei]
        if any(v is None for v in vals):
            raise ValueError(f"radical {self.name!r} has anisotropic tensors")
        return vals


def field_vector(magnitude_mT: float, theta: float = 0.0, phi: float = 0.0) -> np.ndarray:
    """Cartesian field vector B*(sin t cos p, sin t sin p, cos t) in mT."""
    return magnitude_mT * np.array(
        [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    )


@dataclass(frozen=True)
class FieldSchedule:
    """Piecewise-constant magnetic field: fixed direction, optional sign flips.

    The sign of the full field vector is +1 on [2m*tau_a, (2m+1)*tau_a) and
    -1 otherwise when ``alternation_period`` (tau_a, ns) is set.
    """

    magnitude_mT: float
    theta: float = 0.0
    phi: float = 0.0
    alternation_period: float | None = None

    def __post_init__(self):
        if self.alternation_period is not None and not self.alternation_period > 0:
            raise ValueError("alternation_period must be positive")
        if not np.isfinite(self.magnitude_mT):
            raise ValueError("field magnitude must be finite")

    @property
    def direction(self) -> np.ndarray:
        return field_vector(1.0, self.theta, self.phi)

    def sign_at(self, t: float) -> int:
        if self.alternation_period is None:
            return 1
        return 1 if int(math.floor(t / self.alternation_period)) % 2 == 0 else -1

    def vector_at(self, t: float) -> np.ndarray:
        return self.sign_at(t) * field_vector(self.magnitude_mT, self.theta, self.phi)

    def flip_times(self, t_final: float) -> np.ndarray:
        if self.alternation_period is None:
            return np.empty(0)
        n = int(math.floor((t_final - 1e-12) / self.alternation_period))
        return self.alternation_period * np.arange(1, n + 1)


class HamiltonianHandle:
    """Matrix-free applicator for one radical's Hamiltonian.

    Holds a list of Kronecker-factorised terms and applies them with
    batched matmuls; accepts state vectors of shape (D,) or column
    batches of shape (D, m).
    """

    def __init__(self, radical: RadicalSpec, field_mT: np.ndarray,
                 electron_term: np.ndarray, nuclear_terms: Sequence,
                 spectral_radius_bound: float):
        self.radical = radical
        self.field_mT = np.asarray(field_mT, dtype=float)
        self.dims = radical.dims
        self.dimension = radical.dimension
        self._electron = electron_term          # 2x2, includes -gamma_e B.S
        self._nuclear = list(nuclear_terms)     # (site, I_b matrix, K_b 2x2 electron factor)
        self.spectral_radius_bound = float(spectral_radius_bound)
        pre = 1
        self._layout = []
        for j, dj in enumerate(self.dims):
            post = self.dimension // (pre * dj)
            self._layout.append((pre, dj, post))
            pre *= dj

    def _apply_site(self, op: np.ndarray, site: int, psi: np.ndarray) -> np.ndarray:
        pre, dj, post = self._layout[site]
        ncol = 1 if psi.ndim == 1 else psi.shape[1]
        x = psi.reshape(pre, dj, post * ncol)
        out = np.matmul(op, x)
        return out.reshape(psi.shape)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return H @ psi for a (D,) vector or (D, m) column batch."""
        psi = np.asarray(psi)
        if psi.shape[0] != self.dimension:
            raise ValueError(
                f"state dimension {psi.shape[0]} != Hamiltonian dimension {self.dimension}"
            )
        out = self._apply_site(self._electron, 0, psi)
        for site, i_op, k_op in self._nuclear:
            chi = self._apply_site(i_op, site, psi)
            out += self._apply_site(k_op, 0, chi)
        return out

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        return self.apply(psi)

    def dense(self) -> np.ndarray:
        """Materialise the full matrix; refused above dimension 64 unless forced."""
        return self.dense_unchecked() if self.dimension <= 64 else self._refuse_dense()

    def _refuse_dense(self):
        raise ValueError(
            f"refusing to materialise a {self.dimension}-dim Hamiltonian "
            "(matrix-free above 64); use dense_unchecked() if you must"
        )

    def dense_unchecked(self) -> np.ndarray:
        return self.apply(np.eye(self.dimension, dtype=complex))


def _spin_component_bound(multiplicity: int) -> float:
    return (multiplicity - 1) / 2.0


def build_hamiltonian(radical: RadicalSpec, field_mT) -> HamiltonianHandle:
    """Assemble the matrix-free Hamiltonian handle of one radical.

    Args:
        radical: the spin system.
        field_mT: Cartesian field vector (3,) in mT.

    Returns:
        `HamiltonianHandle` applying H in rad/ns, with a 1-norm-based
        ``spectral_radius_bound`` that always over-estimates the true
        spectral radius.
    """
    field = np.asarray(field_mT, dtype=float)
    if field.shape != (3,):
        raise ValueError("field must be a 3-vector in mT")
    if not np.all(np.isfinite(field)):
        raise ValueError("field has non-finite entries")

    sigma = [PAULI["x"], PAULI["y"], PAULI["z"]]
    # electron Zeeman: -gamma_e B.S with S = sigma/2
    electron = -(GAMMA_E / 2.0) * (field[0] * sigma[0] + field[1] * sigma[1] + field[2] * sigma[2])

    nuclear_terms = []
    bound = 0.5 * GAMMA_E * float(np.sum(np.abs(field)))
    for j, nuc in enumerate(radical.nuclei):
        lam_w = GAMMA_E * nuc.tensor  # rad/ns
        ops = {b: spin_matrix(nuc.multiplicity, b) for b in ("x", "y", "z")}
        for bi, b in enumerate(("x", "y", "z")):
            col = lam_w[:, bi]
            if not np.any(np.abs(col) > 0):
                continue
            # K_b = sum_a lambda[a,b] S_a acting on the electron factor
            k_op = 0.5 * (col[0] * sigma[0] + col[1] * sigma[1] + col[2] * sigma[2])
            nuclear_terms.append((j + 1, ops[b], k_op))
        bound += 0.5 * _spin_component_bound(nuc.multiplicity) * float(np.sum(np.abs(lam_w)))

    return HamiltonianHandle(radical, field, electron, nuclear_terms, bound)


def _chebyshev_max_order(tau: float) -> int:
    a = abs(tau)
    return int(a + 40.0 * (a ** (1.0 / 3.0) + 1.0)) + 64


def chebyshev_propagate(h: HamiltonianHandle, psi: np.ndarray, t: float,
                        tol: float = DEFAULT_TOL, *, check_norm: bool = True) -> np.ndarray:
    """Evaluate exp(-iHt) psi by Chebyshev expansion.

    The Hamiltonian is rescaled by the handle's spectral-radius bound R, and

        exp(-i t H) = sum_k (2 - delta_k0) (-i)^k J_k(R t) T_k(H / R)

    is summed until |2 J_k(R t)| < tol/10 for three consecutive orders.

    Args:
        h: Hamiltonian handle.
        psi: normalised state vector (or (D, m) batch when check_norm=False).
        t: propagation time in ns; negative t reverses the evolution.
        tol: 2-norm truncation target, in (0, 1e-3].

    Returns:
        The propagated state; norm preserved within 10*tol.
    """
    psi = np.asarray(psi, dtype=complex)
    if not 0 < tol <= 1e-3:
        raise ValueError(f"tol must be in (0, 1e-3], got {tol}")
    if check_norm and psi.ndim == 1:
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"input state not normalised: ||psi|| = {nrm}")
    if t == 0.0:
        return psi.copy()

    r = h.spectral_radius_bound
    if r == 0.0:
        return psi.copy()  # H = 0
    tau = r * t

    # T_k recurrence on X = H/R
    t_prev = psi
    t_cur = h.apply(psi) / r
    coeff = jv(0, tau)
    out = coeff * t_prev
    out = out + (2.0 * (-1j) * jv(1, tau)) * t_cur

    k = 1
    below = 0
    kmax = _chebyshev_max_order(tau)
    batch = np.empty(0)
    bi = 0
    while True:
        k += 1
        if bi >= batch.size:
            batch = jv(np.arange(k, k + 64), tau)
            bi = 0
        c0 = batch[bi]
        bi += 1
        t_next = 2.0 * (h.apply(t_cur) / r) - t_prev
        out = out + (2.0 * (-1j) ** k * c0) * t_next
        t_prev, t_cur = t_cur, t_next
        if abs(2.0 * c0) < tol / 10.0:
            below += 1
            if below >= 3:
                break
        else:
            below = 0
        if k >= kmax:
            break
    return out


def pulse_unitary_2x2(axis, angle: float) -> np.ndarray:
    """Ideal instantaneous rotation exp(-i angle n.sigma / 2) on one electron."""
    n = np.asarray(axis, dtype=float)
    nrm = np.linalg.norm(n)
    if nrm == 0:
        raise ValueError("pulse axis must be nonzero")
    n = n / nrm
    sig = n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"]
    return math.cos(angle / 2) * np.eye(2, dtype=complex) - 1j * math.sin(angle / 2) * sig


def apply_electron_unitary(u2: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply a 2x2 unitary to the electron factor of a radical state (batch ok)."""
    psi = np.asarray(psi, dtype=complex)
    d = psi.shape[0] // 2
    ncol = 1 if psi.ndim == 1 else psi.shape[1]
    x = psi.reshape(2, d * ncol)
    return (u2 @ x).reshape(psi.shape)


def _segment_events(schedule: FieldSchedule, pulses, t_final: float, electron_index: int):
    """Ordered (time, kind, payload) events; flips sort before pulses at equal time."""
    events = []
    for ft in schedule.flip_times(t_final):
        events.append((float(ft), 0, None))
    for seq in pulses:
        if not seq.applies_to(electron_index):
            continue
        for pt in seq.times_until(t_final):
            events.append((float(pt), 1, seq.unitary()))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


def evolve_piecewise(h_builder: Callable, schedule: FieldSchedule, pulses,
                     psi: np.ndarray, t: float, tol: float = DEFAULT_TOL,
                     electron_index: int = 1) -> np.ndarray:
    """Propagate through a pulse/field schedule by Chebyshev segments.

    Args:
        h_builder: callable mapping a field 3-vector (mT) to a
            `HamiltonianHandle` (e.g. ``lambda f: build_hamiltonian(r, f)``).
        schedule: field magnitude/direction and optional alternation.
        pulses: iterable of `PulseSequence`; pulses whose target does not
            include ``electron_index`` are ignored.
        psi: initial state of this radical's space.
        t: final time, >= 0.
        tol: per-segment Chebyshev tolerance.
        electron_index: which electron (1 or 2) this radical carries.

    A pulse coinciding with a field flip is applied after the flip.
    """
    if t < 0:
        raise ValueError("piecewise evolution requires t >= 0")
    psi = np.asarray(psi, dtype=complex)
    events = _segment_events(schedule, pulses, t, electron_index)

    handles = {}

    def handle_for(sign):
        if sign not in handles:
            handles[sign] = h_builder(sign * field_vector(
                schedule.magnitude_mT, schedule.theta, schedule.phi))
        return handles[sign]

    t_cur = 0.0
    sign = 1
    for ev_t, kind, payload in events:
        if ev_t > t + 1e-12:
            break
        if ev_t > t_cur + 1e-12:
            psi = chebyshev_propagate(handle_for(sign), psi, ev_t - t_cur, tol,
                                      check_norm=False)
            t_cur = ev_t
        if kind == 0:
            sign = -sign
        else:
            psi = apply_electron_unitary(payload, psi)
    if t > t_cur + 1e-12:
        psi = chebyshev_propagate(handle_for(sign), psi, t - t_cur, tol,
                                  check_norm=False)
    return psi
