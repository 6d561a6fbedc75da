"""Single-electron quantum channels and their composition on the electron pair.

Tracing the maximally mixed nuclear bath out of one radical's unitary
evolution leaves a completely positive trace-preserving map Xi_t on the
electron.  It is represented two ways:

* ``process``: the tensor Lam[p,q,a,c] = <a| Xi(|p><q|) |c>;
* ``transfer``: the real 4x4 matrix M[i,j] = Tr[sigma_i Xi(sigma_j)] / 2
  on Pauli coordinates (1, sx, sy, sz).

Because the pair Hamiltonian has no inter-radical terms, the two-electron
state evolves as (Xi_1 (x) Xi_2)[rho(0)]; `compose_on_pair` performs that
contraction in Pauli coordinates.

For an isotropic radical in a static z field with no pulses the channel
takes the form

    |up><up|   ->  a_t |up><up| + (1-a_t) |down><down|
    |up><down| ->  kappa_t |up><down|

(and Hermitian images of these); all other basis transitions vanish.
`verify_zero_blocks` checks those forbidden entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import DEFAULT_OPTIONS, EngineOptions, RadicalChannelSource
from .spincore import FieldSchedule, RadicalSpec

_PAULI4 = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

BASIS_LABELS = ("uu", "ud", "du", "dd")

SINGLET_KET = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)
TRIPLET0_KET = np.array([0.0, 1.0, 1.0, 0.0], dtype=complex) / math.sqrt(2.0)
TRIPLET_PLUS_KET = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
TRIPLET_MINUS_KET = np.array([0.0, 0.0, 0.0, 1.0], dtype=complex)
SINGLET_PROJECTOR = np.outer(SINGLET_KET, SINGLET_KET.conj())


@dataclass(frozen=True, eq=False)
class TwoElectronState:
    """4x4 density matrix of the electron pair in the basis (uu, ud, du, dd)."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"two-electron state must be 4x4, got {rho.shape}")
        object.__setattr__(self, "rho", rho)

    def validate(self, herm_tol=1e-12, trace_tol=1e-12, eig_tol=1e-10):
        if np.max(np.abs(self.rho - self.rho.conj().T)) > herm_tol:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > trace_tol:
            raise ValueError(f"state trace is {np.trace(self.rho)}, expected 1")
        ev = np.linalg.eigvalsh(self.rho)
        if ev.min() < -eig_tol:
            raise ValueError(f"state has negative eigenvalue {ev.min()}")
        return self

    @staticmethod
    def singlet() -> "TwoElectronState":
        return TwoElectronState(SINGLET_PROJECTOR.copy())

    @staticmethod
    def triplet_zero() -> "TwoElectronState":
        return TwoElectronState(np.outer(TRIPLET0_KET, TRIPLET0_KET.conj()))

    @staticmethod
    def classical_mixture() -> "TwoElectronState":
        """rho_c = (|ud><ud| + |du><du|) / 2."""
        return TwoElectronState(np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex))

    @staticmethod
    def from_qubits(psi_a, psi_b) -> "TwoElectronState":
        a = np.asarray(psi_a, dtype=complex)
        b = np.asarray(psi_b, dtype=complex)
        ket = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        return TwoElectronState(np.outer(ket, ket.conj()))


def transfer_from_process(lam: np.ndarray) -> np.ndarray:
    """Pauli transfer matrix from the process tensor (real part returned)."""
    m = 0.5 * np.einsum("ica,jpq,pqac->ij", _PAULI4, _PAULI4, lam)
    return np.ascontiguousarray(m.real)


def process_from_transfer(transfer: np.ndarray) -> np.ndarray:
    """Inverse of `transfer_from_process`."""
    return 0.5 * np.einsum("jqp,ij,iac->pqac", _PAULI4, transfer.astype(complex),
                           _PAULI4)


def choi_matrix(lam: np.ndarray) -> np.ndarray:
    """Choi matrix C[(p,a),(q,c)] = Lam[p,q,a,c]; CP iff C >= 0 (trace 2)."""
    return lam.transpose(0, 2, 1, 3).reshape(4, 4)


def pauli_coordinates(rho: np.ndarray) -> np.ndarray:
    """R[i,j] = Tr[(sigma_i (x) sigma_j) rho] for a two-electron state."""
    r4 = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    return np.einsum("ica,jdb,abcd->ij", _PAULI4, _PAULI4, r4).real


def state_from_pauli(coords: np.ndarray) -> np.ndarray:
    out = np.einsum("ij,iab,jcd->acbd", coords.astype(complex), _PAULI4, _PAULI4)
    return out.reshape(4, 4) / 4.0


@dataclass(frozen=True)
class IsoParams:
    """Population retention a_t and coherence factor kappa_t of an
    isotropic static-z channel."""

    a: float
    kappa: complex


@dataclass(frozen=True)
class ChannelFlags:
    """How a channel was produced; drives applicability of structure checks."""

    isotropic: bool = False
    static_z_field: bool = False
    pulsed: bool = False
    bath: str = "exact"
    n_samples: int | None = None


@dataclass(frozen=True, eq=False)
class ElectronChannel:
    """One radical's electron map at a fixed time.

    Attributes:
        transfer: real 4x4 Pauli transfer matrix.
        time: evolution time in ns.
        process: process tensor Lam[p,q,a,c].
        iso_params: (a_t, kappa_t) when the isotropic zero-block structure
            applies, else None.
        stderr: per-entry standard errors of `process` (complex: real and
            imaginary parts hold the errors of the respective parts), for
            sampled baths only.
        flags: provenance of the tomography run.
    """

    transfer: np.ndarray
    time: float
    process: np.ndarray
    iso_params: IsoParams | None = None
    stderr: np.ndarray | None = None
    flags: ChannelFlags = field(default_factory=ChannelFlags)

    def validate(self, tp_tol=1e-10, cp_tol=1e-9):
        """Check trace preservation and complete positivity."""
        row0 = self.transfer[0]
        if np.max(np.abs(row0 - np.array([1.0, 0, 0, 0]))) > tp_tol:
            raise ValueError(f"channel is not trace preserving: row0 = {row0}")
        ev = np.linalg.eigvalsh(choi_matrix(self.process))
        if ev.min() < -cp_tol:
            raise ValueError(f"channel is not CP: min Choi eigenvalue {ev.min()}")
        return self

    def apply(self, rho2: np.ndarray) -> np.ndarray:
        """Apply the map to a single-electron 2x2 density matrix."""
        return np.einsum("pqac,pq->ac", self.process, np.asarray(rho2, complex))


def _iso_params_from_process(lam: np.ndarray) -> IsoParams:
    return IsoParams(a=float(lam[0, 0, 0, 0].real), kappa=complex(lam[0, 1, 0, 1]))


def _is_static_z(schedule: FieldSchedule) -> bool:
    return (abs(math.sin(schedule.theta) * schedule.magnitude_mT) < 1e-12
            and schedule.alternation_period is None)


def tomograph_channel(radical: RadicalSpec, schedule: FieldSchedule, pulses=(),
                      t: float = 0.0, bath="auto", electron_index: int = 1,
                      options: EngineOptions = DEFAULT_OPTIONS) -> ElectronChannel:
    """Extract the electron channel of one radical at time t.

    Args:
        radical: spin system whose bath is traced out.
        schedule: magnetic-field schedule.
        pulses: pulse sequences (filtered by their target electron).
        t: evolution time, ns, >= 0.
        bath: "auto", "exact", or ("sampled", seed, n_samples).
        electron_index: which pair electron this radical carries (1 or 2).

    Returns:
        `ElectronChannel`; sampled baths carry per-entry standard errors.
    """
    if t < 0:
        raise ValueError("channel tomography requires t >= 0")
    source = RadicalChannelSource(radical, schedule, pulses,
                                  electron_index=electron_index,
                                  bath=bath, options=options)
    if source.sampled:
        mean, stderr = source.process_tensors_with_stderr(np.array([t]))
        lam, err = mean[0], stderr[0]
    else:
        lam, err = source.process_tensor_at(t), None

    has_pulses = any(p.applies_to(electron_index) for p in pulses)
    flags = ChannelFlags(
        isotropic=radical.isotropic,
        static_z_field=_is_static_z(schedule),
        pulsed=has_pulses,
        bath="sampled" if source.sampled else "exact",
        n_samples=source.bath[2] if source.sampled else None,
    )
    iso = None
    if flags.isotropic and flags.static_z_field and not flags.pulsed:
        iso = _iso_params_from_process(lam)
    return ElectronChannel(transfer=transfer_from_process(lam), time=float(t),
                           process=lam, iso_params=iso, stderr=err, flags=flags)


# Forbidden transitions of the isotropic static-z channel, as (p, q, a, c)
# indices of the process tensor: populations never map to coherences,
# coherences never map to populations, and sigma+ never maps to sigma-.
_FORBIDDEN = (
    ("mu_0+", (0, 0, 1, 0)), ("mu_0-", (0, 0, 0, 1)),
    ("mu_1+", (1, 1, 1, 0)), ("mu_1-", (1, 1, 0, 1)),
    ("mu_+0", (0, 1, 0, 0)), ("mu_+1", (0, 1, 1, 1)),
    ("mu_-0", (1, 0, 0, 0)), ("mu_-1", (1, 0, 1, 1)),
    ("mu_++", (0, 1, 1, 0)), ("mu_--", (1, 0, 0, 1)),
)


@dataclass(frozen=True)
class ZeroBlockReport:
    applicable: bool
    passed: bool
    max_forbidden: float
    worst_entry: str
    entries: dict
    threshold: float
    reason: str = ""


def verify_zero_blocks(ch: ElectronChannel, exact_tol: float = 1e-9,
                       sigma_factor: float = 4.0) -> ZeroBlockReport:
    """Check the forbidden-entry pattern of an isotropic static-z channel.

    Exact-bath channels pass when every forbidden entry is below
    ``exact_tol``; sampled channels when each is below ``sigma_factor``
    standard errors.  Channels produced with pulses, alternation or
    anisotropic couplings are reported not-applicable.
    """
    f = ch.flags
    if not (f.isotropic and f.static_z_field and not f.pulsed):
        why = []
        if not f.isotropic:
            why.append("anisotropic couplings")
        if not f.static_z_field:
            why.append("field not static along z")
        if f.pulsed:
            why.append("pulses applied")
        return ZeroBlockReport(False, False, math.nan, "", {}, exact_tol,
                               reason=", ".join(why))

    entries = {}
    passed = True
    worst = ("", -1.0)
    for name, idx in _FORBIDDEN:
        val = abs(ch.process[idx])
        if ch.stderr is not None:
            se = ch.stderr[idx]
            limit = sigma_factor * math.hypot(se.real, se.imag)
        else:
            limit = exact_tol
        entries[name] = (val, limit)
        if val > limit:
            passed = False
        if val > worst[1]:
            worst = (name, val)
    return ZeroBlockReport(True, passed, worst[1], worst[0], entries,
                           exact_tol)


def compose_on_pair(ch1: ElectronChannel, ch2: ElectronChannel,
                    initial: TwoElectronState) -> TwoElectronState:
    """Apply (Xi_1 (x) Xi_2) to a two-electron state via Pauli coordinates.

    Raises:
        ValueError: when the two channels are not at the same time.
    """
    if abs(ch1.time - ch2.time) > 1e-9:
        raise ValueError(f"channel times differ: {ch1.time} vs {ch2.time}")
    coords = pauli_coordinates(initial.rho)
    out = ch1.transfer @ coords @ ch2.transfer.T
    return TwoElectronState(state_from_pauli(out))


def compose_process_tensors(lam1: np.ndarray, lam2: np.ndarray,
                            rho: np.ndarray) -> np.ndarray:
    """(Xi_1 (x) Xi_2)[rho] directly from process tensors (4x4 in, 4x4 out)."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    out = np.einsum("prqs,pqac,rsbd->abcd", r, lam1, lam2)
    return out.reshape(4, 4)
