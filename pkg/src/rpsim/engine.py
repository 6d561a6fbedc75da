"""Internal engine serving per-radical electron process tensors over time.

The reduced electron dynamics of one radical with a maximally mixed
nuclear bath is, for each time t, the linear map

    Lam[p, q, a, c](t) = <a| Xi_t(|p><q|) |c>
                       = (1/d) sum_{m,n} U[(a,m),(p,n)] conj(U[(c,m),(q,n)])

with U the joint unitary and d the bath dimension.  Three evaluation
strategies, chosen per block by dimension:

* spectral: diagonalise the (block) Hamiltonian once per field sign and
  evaluate Lam(t) from eigenphase differences; supports pulses and field
  flips segment by segment, and random-access times for static fields.
* stepping: matrix-free batched Chebyshev propagation of basis columns,
  for blocks too large to diagonalise.
* sampled: stepping of a uniformly drawn subset of bath basis states,
  with per-entry standard errors.

For isotropic radicals, groups of equivalent nuclei (same multiplicity
and coupling) are first decomposed into total-spin sectors: a group of g
spins contributes one effective nucleus of spin J per sector, weighted by
the sector multiplicity.  This is an exact unitary equivalence and cuts
e.g. a 2048-dim radical into blocks of dimension <= 150.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spincore import (
    FieldSchedule,
    Nucleus,
    RadicalSpec,
    build_hamiltonian,
    chebyshev_propagate,
    field_vector,
    _segment_events,
)

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class EngineOptions:
    """Knobs for the channel engine.

    Attributes:
        tol: Chebyshev truncation tolerance for stepping blocks.
        spectral_threshold: blocks at or below this dimension are
            diagonalised; larger blocks fall back to matrix-free stepping.
        exact_bath_cap: largest bath dimension accepted for an exact sum.
        auto_sampled_n: sample count used when the auto strategy degrades
            to a sampled bath.
    """

    tol: float = 1e-10
    spectral_threshold: int = 512
    exact_bath_cap: int = 4096
    auto_sampled_n: int = 256


DEFAULT_OPTIONS = EngineOptions()


def total_spin_multiplicities(count: int, spin: float) -> dict:
    """Multiplicity of each total-spin value when coupling `count` equal spins.

    Returns a dict J -> number of irreducible spin-J sectors.
    """
    cur = {Fraction(0): 1}
    s = Fraction(spin).limit_denominator(2)
    for _ in range(count):
        nxt: dict = {}
        for j, m in cur.items():
            jp = abs(j - s)
            while jp <= j + s:
                nxt[jp] = nxt.get(jp, 0) + m
                jp += 1
        cur = nxt
    return {float(j): m for j, m in cur.items()}


def isotropic_blocks(radical: RadicalSpec):
    """Decompose an isotropic radical into total-spin blocks.

    Groups nuclei with equal (multiplicity, coupling); each group of g
    spins is replaced, per block, by a single effective nucleus of spin J.

    Returns:
        list of (weight, RadicalSpec) with weights summing to 1; identical
        blocks are merged.  Raises ValueError for anisotropic radicals.
    """
    couplings = radical.isotropic_couplings()
    groups: dict = {}
    for nuc, lam in zip(radical.nuclei, couplings):
        key = (nuc.multiplicity, round(lam, 12))
        groups[key] = groups.get(key, 0) + 1

    per_group = []
    for (mult, lam), g in groups.items():
        spin = (mult - 1) / 2.0
        mj = total_spin_multiplicities(g, spin)
        per_group.append([(j, m, lam) for j, m in sorted(mj.items()) if m > 0])

    d_total = radical.bath_dimension
    merged: dict = {}
    for combo in itertools.product(*per_group):
        mult_prod = 1
        nuclei = []
        d_block = 1
        for j, m, lam in combo:
            mult_prod *= m
            mj = int(round(2 * j + 1))
            if mj >= 2:  # J = 0 sectors drop out of the block entirely
                nuclei.append((mj, lam))
                d_block *= mj
        weight = mult_prod * d_block / d_total
        key = tuple(nuclei)
        merged[key] = merged.get(key, 0.0) + weight

    blocks = []
    for key, weight in sorted(merged.items()):
        spec = RadicalSpec(
            name=f"{radical.name}/block",
            nuclei=tuple(Nucleus(m, lam) for m, lam in key),
            dimension_cap=radical.dimension_cap,
        )
        blocks.append((weight, spec))
    return blocks


def process_tensor_from_unitary(u: np.ndarray) -> np.ndarray:
    """Lam[p,q,a,c] = (1/d) sum_mn U[(am),(pn)] conj(U[(cm),(qn)])."""
    dim = u.shape[0]
    d = dim // 2
    u4 = u.reshape(2, d, 2, d)
    return np.einsum("ampn,cmqn->pqac", u4, u4.conj()) / d


def _apply_electron_left(u2: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(u2 (x) I_bath) @ W for a (D, m) matrix W."""
    dim = w.shape[0]
    d = dim // 2
    x = w.reshape(2, d * w.shape[1])
    return (u2 @ x).reshape(w.shape)


class _SpectralBlock:
    """Exact Lam(t) for one block via eigendecomposition, with segments."""

    def __init__(self, spec: RadicalSpec, schedule: FieldSchedule, pulses,
                 electron_index: int, options: EngineOptions):
        self.spec = spec
        self.schedule = schedule
        self.pulses = tuple(pulses)
        self.electron_index = electron_index
        self.options = options
        self.dim = spec.dimension
        self.d = spec.bath_dimension
        self._eig_cache: dict = {}
        self._chunk = max(8, 4_000_000 // max(1, self.dim * self.dim))

    def _eig(self, sign: int):
        if sign not in self._eig_cache:
            handle = build_hamiltonian(
                self.spec,
                sign * field_vector(self.schedule.magnitude_mT,
                                    self.schedule.theta, self.schedule.phi))
            h = handle.dense_unchecked()
            energies, vectors = np.linalg.eigh(h)
            vr = vectors.reshape(2, self.d, self.dim)
            # T[a,c,alpha,beta] = sum_m V[a,m,alpha] conj(V[c,m,beta])
            t_tens = np.einsum("amx,cmy->acxy", vr, vr.conj())
            self._eig_cache[sign] = (energies, vectors, t_tens)
        return self._eig_cache[sign]

    def process_tensors(self, times: np.ndarray) -> np.ndarray:
        """Lam at each requested (ascending) time, pulses/flips included."""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, 2, 2, 2, 2), dtype=complex)
        events = _segment_events(self.schedule, self.pulses, float(times[-1]) + 1.0,
                                 self.electron_index)
        events.append((math.inf, -1, None))

        w = np.eye(self.dim, dtype=complex)
        w_is_identity = True
        t_seg = 0.0
        sign = 1
        i = 0
        for ev_t, kind, payload in events:
            idx = []
            while i < times.size and times[i] < ev_t - _TIME_EPS:
                idx.append(i)
                i += 1
            if idx:
                self._serve(out, times, idx, sign, w, w_is_identity, t_seg)
            if not math.isfinite(ev_t):
                break
            energies, vectors, _ = self._eig(sign)
            if ev_t > t_seg + _TIME_EPS:
                phase = np.exp(-1j * energies * (ev_t - t_seg))
                if w_is_identity:
                    w = vectors @ (phase[:, None] * vectors.conj().T)
                else:
                    w = vectors @ (phase[:, None] * (vectors.conj().T @ w))
                w_is_identity = False
                t_seg = ev_t
            if kind == 0:
                sign = -sign
            else:
                w = _apply_electron_left(payload, w)
                w_is_identity = False
        return out

    def _serve(self, out, times, idx, sign, w, w_is_identity, t_seg):
        energies, vectors, t_tens = self._eig(sign)
        if w_is_identity:
            s_tens = t_tens.conj()
        else:
            a = vectors.conj().T @ w
            ar = a.reshape(self.dim, 2, self.d)
            # S[p,q,alpha,beta] = sum_n A[alpha,(p,n)] conj(A[beta,(q,n)])
            s_tens = np.einsum("xpn,yqn->pqxy", ar, ar.conj())
        coeff = np.einsum("acxy,pqxy->pqacxy", t_tens, s_tens)
        coeff = coeff.reshape(16, self.dim * self.dim) / self.d
        delta = (energies[:, None] - energies[None, :]).ravel()
        for start in range(0, len(idx), self._chunk):
            sel = idx[start:start + self._chunk]
            s_rel = times[sel] - t_seg
            phases = np.exp(np.outer(delta, -1j * s_rel))
            lam = coeff @ phases  # (16, n)
            out[sel] = lam.T.reshape(len(sel), 2, 2, 2, 2)

    def segment_spectra(self, t_final: float):
        """Yield (t0, tau, delta_flat, coeff16) per segment up to t_final.

        ``coeff16 @ exp(-1j*delta*s)`` gives Lam(t0+s) flattened; used for
        closed-form re-encounter integrals.
        """
        events = _segment_events(self.schedule, self.pulses, t_final,
                                 self.electron_index)
        events.append((t_final, -1, None))
        w = np.eye(self.dim, dtype=complex)
        w_is_identity = True
        t_seg = 0.0
        sign = 1
        for ev_t, kind, payload in events:
            ev_t = min(ev_t, t_final)
            if ev_t > t_seg + _TIME_EPS:
                energies, vectors, t_tens = self._eig(sign)
                if w_is_identity:
                    s_tens = t_tens.conj()
                else:
                    a = vectors.conj().T @ w
                    ar = a.reshape(self.dim, 2, self.d)
                    s_tens = np.einsum("xpn,yqn->pqxy", ar, ar.conj())
                coeff = np.einsum("acxy,pqxy->pqacxy", t_tens, s_tens)
                coeff = coeff.reshape(16, self.dim * self.dim) / self.d
                delta = (energies[:, None] - energies[None, :]).ravel()
                tau = ev_t - t_seg
                yield t_seg, tau, delta, coeff
                phase = np.exp(-1j * energies * tau)
                if w_is_identity:
                    w = vectors @ (phase[:, None] * vectors.conj().T)
                else:
                    w = vectors @ (phase[:, None] * (vectors.conj().T @ w))
                w_is_identity = False
                t_seg = ev_t
            if kind == 0:
                sign = -sign
            elif kind == 1:
                w = _apply_electron_left(payload, w)
                w_is_identity = False


class _SteppingBlock:
    """Matrix-free Lam(t) by batched Chebyshev stepping of basis columns."""

    def __init__(self, spec: RadicalSpec, schedule: FieldSchedule, pulses,
                 electron_index: int, options: EngineOptions,
                 columns: np.ndarray | None = None):
        self.spec = spec
        self.schedule = schedule
        self.pulses = tuple(pulses)
        self.electron_index = electron_index
        self.options = options
        self.dim = spec.dimension
        self.d = spec.bath_dimension
        self.columns = columns  # bath column indices for sampled mode

    def _handle(self, cache, sign):
        if sign not in cache:
            cache[sign] = build_hamiltonian(
                self.spec,
                sign * field_vector(self.schedule.magnitude_mT,
                                    self.schedule.theta, self.schedule.phi))
        return cache[sign]

    def _initial_columns(self) -> np.ndarray:
        if self.columns is None:
            return np.eye(self.dim, dtype=complex)
        cols = np.zeros((self.dim, 2 * len(self.columns)), dtype=complex)
        for j, n in enumerate(self.columns):
            cols[n, 2 * j] = 1.0          # |up, n>
            cols[self.d + n, 2 * j + 1] = 1.0  # |down, n>
        return cols

    def _lam_of(self, psi: np.ndarray):
        if self.columns is None:
            return process_tensor_from_unitary(psi)
        # per-sample tensors: R_p = 2 x d slice of each propagated pair
        n_s = len(self.columns)
        lam = np.empty((n_s, 2, 2, 2, 2), dtype=complex)
        r = psi.reshape(2, self.d, 2 * n_s)
        for j in range(n_s):
            r_up = r[:, :, 2 * j]
            r_dn = r[:, :, 2 * j + 1]
            stack = np.stack([r_up, r_dn])  # [p, a, m]
            lam[j] = np.einsum("pam,qcm->pqac", stack, stack.conj())
        return lam

    def process_tensors(self, times: np.ndarray):
        """Lam at each ascending time.

        Returns (n, 2,2,2,2) in exact mode, (n, n_samples, 2,2,2,2) in
        sampled mode (unnormalised by sample count).
        """
        times = np.asarray(times, dtype=float)
        shape = ((times.size, 2, 2, 2, 2) if self.columns is None
                 else (times.size, len(self.columns), 2, 2, 2, 2))
        out = np.empty(shape, dtype=complex)
        events = _segment_events(self.schedule, self.pulses, float(times[-1]) + 1.0,
                                 self.electron_index)
        events.append((math.inf, -1, None))
        cache: dict = {}
        psi = self._initial_columns()
        t_cur = 0.0
        sign = 1
        i = 0
        tol = self.options.tol
        for ev_t, kind, payload in events:
            while i < times.size and times[i] < ev_t - _TIME_EPS:
                dt = times[i] - t_cur
                if dt > _TIME_EPS:
                    psi = chebyshev_propagate(self._handle(cache, sign), psi, dt,
                                              tol, check_norm=False)
                    t_cur = times[i]
                out[i] = self._lam_of(psi)
                i += 1
            if not math.isfinite(ev_t):
                break
            if ev_t > t_cur + _TIME_EPS:
                psi = chebyshev_propagate(self._handle(cache, sign), psi,
                                          ev_t - t_cur, tol, check_norm=False)
                t_cur = ev_t
            if kind == 0:
                sign = -sign
            else:
                psi = _apply_electron_left(payload, psi)
        return out


class RadicalChannelSource:
    """Process tensors Lam(t) of one radical under a protocol.

    Exact mode sums the full bath; isotropic radicals are decomposed into
    weighted total-spin blocks first.  Sampled mode averages uniformly
    drawn bath basis states and records standard errors.
    """

    def __init__(self, radical: RadicalSpec, schedule: FieldSchedule, pulses=(),
                 electron_index: int = 1, bath="auto",
                 options: EngineOptions = DEFAULT_OPTIONS):
        self.radical = radical
        self.schedule = schedule
        self.pulses = tuple(pulses)
        self.electron_index = electron_index
        self.options = options
        self.bath = self._resolve_bath(bath)
        self._blocks = None
        if self.sampled:
            rng = np.random.default_rng(self.bath[1])
            cols = rng.integers(0, radical.bath_dimension, size=self.bath[2])
            self._sampled_block = _SteppingBlock(
                radical, schedule, self.pulses, electron_index, options,
                columns=np.asarray(cols))
        else:
            self._blocks = self._build_blocks()

    def _resolve_bath(self, bath):
        d = self.radical.bath_dimension
        if bath == "auto":
            if d <= 1024 or self.radical.isotropic:
                return ("exact",)
            return ("sampled", 0, self.options.auto_sampled_n)
        if bath == "exact" or bath == ("exact",):
            if d > self.options.exact_bath_cap:
                raise ValueError(
                    f"exact bath sum over {d} states exceeds the cap "
                    f"{self.options.exact_bath_cap}; use a sampled bath")
            return ("exact",)
        if isinstance(bath, tuple) and bath and bath[0] == "sampled":
            _, seed, n = bath
            if n < 1:
                raise ValueError("sampled bath needs n_samples >= 1")
            return bath
        raise ValueError(f"unknown bath strategy {bath!r}")

    @property
    def sampled(self) -> bool:
        return self.bath[0] == "sampled"

    def _build_blocks(self):
        opts = self.options
        if self.radical.isotropic and self.radical.nuclei:
            decomposed = isotropic_blocks(self.radical)
        else:
            decomposed = [(1.0, self.radical)]
        blocks = []
        for weight, spec in decomposed:
            cls = (_SpectralBlock if spec.dimension <= opts.spectral_threshold
                   else _SteppingBlock)
            blocks.append((weight, cls(spec, self.schedule, self.pulses,
                                       self.electron_index, opts)))
        return blocks

    @property
    def supports_random_access(self) -> bool:
        return (not self.sampled
                and all(isinstance(b, _SpectralBlock) for _, b in self._blocks))

    @property
    def supports_segment_spectra(self) -> bool:
        return self.supports_random_access

    def process_tensors(self, times) -> np.ndarray:
        """Weighted Lam(t) at ascending times, shape (n, 2, 2, 2, 2)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be ascending")
        if self.sampled:
            per_sample = self._sampled_block.process_tensors(times)
            return per_sample.mean(axis=1)
        out = np.zeros((times.size, 2, 2, 2, 2), dtype=complex)
        for weight, block in self._blocks:
            out += weight * block.process_tensors(times)
        return out

    def process_tensors_with_stderr(self, times):
        """Sampled mode only: (mean, stderr) with per-entry standard errors.

        The stderr array is complex: real/imag parts are the standard
        errors of the corresponding parts of the mean.
        """
        if not self.sampled:
            raise ValueError("standard errors exist only for sampled baths")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        per_sample = self._sampled_block.process_tensors(times)
        n = per_sample.shape[1]
        mean = per_sample.mean(axis=1)
        if n > 1:
            se_re = per_sample.real.std(axis=1, ddof=1) / math.sqrt(n)
            se_im = per_sample.imag.std(axis=1, ddof=1) / math.sqrt(n)
        else:
            se_re = np.full(mean.shape, np.inf)
            se_im = np.full(mean.shape, np.inf)
        return mean, se_re + 1j * se_im

    def process_tensor_at(self, t: float) -> np.ndarray:
        return self.process_tensors(np.array([t]))[0]

    def segment_spectra(self, t_final: float):
        """Weighted per-segment spectral terms for closed-form integrals."""
        if not self.supports_segment_spectra:
            raise ValueError("segment spectra need the spectral strategy")
        for weight, block in self._blocks:
            for t0, tau, delta, coeff in block.segment_spectra(t_final):
                yield t0, tau, delta, weight * coeff
