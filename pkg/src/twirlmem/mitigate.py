"""Twirled readout-error mitigation, the tensor-product inversion baseline and
the finite-set error bounds.

Twirling member ``P_q`` is applied physically before measurement and undone
virtually by flipping the outcome bits where ``P_q`` carries X or Y. With a
measurement-transformation circuit ``U`` in front of the readout, the physical
operator is ``U^dag P_q U`` applied ahead of ``U``; the ideal part of the circuit
then delivers exactly ``P_q`` right before the readout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._walsh import fwht, parity_signs, popcount
from .circuit import Circuit
from .mtcompile import MtPlan, compile_mt
from .noise import ReducedPTM, SingleQubitReadout, TransferMatrix, apply_local
from .pauli import PauliString, ZMask, conjugate_by_circuit
from .sim import (
    MAX_DENSITY_QUBITS,
    NOISELESS,
    DensityMatrix,
    GateNoiseParams,
    OutcomeDistribution,
    PureState,
    basis_index,
    evolve_density,
    heisenberg_operator,
    zero_state,
)
from .twirl import TwirlSet, hoeffding_kappa

INFINITE = "infinite"


class MitigationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EstimatorConfig:
    twirl: TwirlSet
    circuit: Circuit | None = None
    gnoise: GateNoiseParams | None = None
    shots: int | str = INFINITE
    seed: int | None = None

    def __post_init__(self):
        if self.shots != INFINITE:
            if not isinstance(self.shots, (int, np.integer)) or self.shots < 1:
                raise MitigationError(f"shots must be a positive integer or {INFINITE!r}")
            if self.shots < self.twirl.size:
                raise MitigationError(
                    f"{self.shots} shots cannot cover {self.twirl.size} twirling members"
                )
        if self.circuit is not None and self.circuit.n != self.twirl.n:
            raise MitigationError("circuit and twirling set sizes differ")

    @property
    def infinite(self) -> bool:
        return self.shots == INFINITE


def _depolarized_walsh_factor(n: int, p1: float) -> np.ndarray:
    """Per-mask damping ``(1 - 4 p1 / 3)^{|m|}`` of local depolarizing on diagonals."""
    return (1.0 - 4.0 * p1 / 3.0) ** popcount(np.arange(2**n))


class TwirledReadout:
    """Noisy measurement pipeline for one effective Z observable.

    Holds the transfer matrix, the optional circuit and gate noise, and caches
    the Heisenberg-picture readout operator so repeated estimates (many states,
    many twirling sets) share the expensive part.
    """

    def __init__(self, lam: TransferMatrix, z_eff: ZMask, circuit: Circuit | None = None, gnoise: GateNoiseParams | None = None):
        if z_eff.n != lam.n:
            raise MitigationError("observable and transfer matrix sizes differ")
        if circuit is not None and circuit.n != lam.n:
            raise MitigationError("circuit and transfer matrix sizes differ")
        self.lam = lam
        self.z_eff = z_eff
        self.circuit = circuit if circuit is not None and len(circuit) else None
        self.gnoise = gnoise or NOISELESS
        self.n = lam.n
        self._r = z_eff.index
        self._signs = parity_signs(self._r, self.n)
        # u[k] = sum_o (-1)^{r.o} lam[o, k]: expected parity for ideal outcome k
        self._u = lam.matrix.T @ self._signs
        self._m = None
        self._ops = {}

    # -- physical operators ---------------------------------------------------

    def physical_operator(self, p: PauliString) -> PauliString:
        if self.circuit is None:
            return p
        return conjugate_by_circuit(p, self.circuit.inverse())

    def _actions(self, twirl: TwirlSet):
        key = id(twirl)
        hit = self._ops.get(key)
        if hit is not None and hit[0] is twirl:
            return hit[1], hit[2]
        dim = 2**self.n
        k = np.arange(dim)
        srcs, phases = [], []
        for p in twirl.members:
            a = self.physical_operator(p)
            src = k ^ a.x_mask
            n_y = sum(1 for d in a.digits if d == 2)
            phase = a.sign * (1j**n_y) * (1.0 - 2.0 * (popcount(src & a.z_mask) & 1))
            srcs.append(src)
            phases.append(phase)
        out = (np.array(srcs), np.array(phases))
        self._ops = {key: (twirl, *out)}
        return out

    def _virtual_signs(self, twirl: TwirlSet) -> np.ndarray:
        return 1.0 - 2.0 * (popcount(twirl.x_masks & self._r) & 1)

    # -- infinite shots ---------------------------------------------------------

    def _operator(self) -> np.ndarray:
        if self._m is None:
            if self.n > MAX_DENSITY_QUBITS:
                raise MitigationError(
                    f"gate-noise simulation is limited to {MAX_DENSITY_QUBITS} qubits"
                )
            self._m = heisenberg_operator(self._u, self.circuit, self.gnoise, pauli_layer=True)
        return self._m

    def member_values(self, state, twirl: TwirlSet) -> np.ndarray:
        """Exact per-member twirled expectation values."""
        if twirl.n != self.n or state.n != self.n:
            raise MitigationError("state, twirling set and noise sizes differ")
        virtual = self._virtual_signs(twirl)
        if self.circuit is None:
            # sum_k u[k] p[k ^ x] for every x at once, via Walsh convolution
            u_hat = fwht(self._u)
            if self.gnoise.p1:
                u_hat = u_hat * _depolarized_walsh_factor(self.n, self.gnoise.p1)
            corr = fwht(u_hat * fwht(state.probabilities())) / 2**self.n
            return virtual * corr[twirl.x_masks]
        m = self._operator()
        src, phase = self._actions(twirl)
        if isinstance(state, PureState):
            phi = phase * state.amplitudes[src]
            vals = np.einsum("qi,ij,qj->q", phi.conj(), m, phi).real
        else:
            rho = state.matrix
            vals = np.empty(twirl.size)
            for q in range(twirl.size):
                r2 = phase[q][:, None] * rho[src[q]][:, src[q]] * phase[q].conj()[None, :]
                vals[q] = np.real(np.sum(r2 * m.T))
        return virtual * vals

    # -- finite shots -----------------------------------------------------------

    def member_distribution(self, state, p: PauliString) -> np.ndarray:
        """Noisy outcome distribution with ``p`` twirled in (before the virtual flip)."""
        a = self.physical_operator(p)
        if self.circuit is None:
            k = np.arange(2**self.n)
            probs = state.probabilities()[k ^ a.x_mask]
            if self.gnoise.p1:
                probs = fwht(fwht(probs) * _depolarized_walsh_factor(self.n, self.gnoise.p1)) / 2**self.n
        else:
            if self.n > MAX_DENSITY_QUBITS:
                raise MitigationError(f"density simulation is limited to {MAX_DENSITY_QUBITS} qubits")
            rho = state.matrix if isinstance(state, DensityMatrix) else state.density().matrix
            probs = np.real(np.diagonal(evolve_density(rho, self.circuit, self.gnoise, pauli=a)))
        probs = np.clip(self.lam.matrix @ probs, 0.0, None)
        return probs / probs.sum()

    def sampled_values(self, state, twirl: TwirlSet, shots: int, seed=None) -> np.ndarray:
        """Per-member empirical expectations from multinomial outcome counts.

        Shots are split evenly with the remainder going to the first members;
        member ``q`` samples from its own child of ``SeedSequence(seed)``.
        """
        if shots < twirl.size:
            raise MitigationError(f"{shots} shots cannot cover {twirl.size} twirling members")
        base, extra = divmod(shots, twirl.size)
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(twirl.size)]
        out = np.empty(twirl.size)
        for q, (p, rng) in enumerate(zip(twirl.members, rngs)):
            n_q = base + (1 if q < extra else 0)
            counts = rng.multinomial(n_q, self.member_distribution(state, p))
            flipped = self._signs[np.arange(counts.size) ^ p.x_mask]
            out[q] = flipped @ counts / n_q
        return out

    def value(self, state, twirl: TwirlSet, shots=INFINITE, seed=None) -> float:
        if shots == INFINITE:
            return float(np.mean(self.member_values(state, twirl)))
        return float(np.mean(self.sampled_values(state, twirl, int(shots), seed)))

    def mitigate(self, state, twirl: TwirlSet, shots=INFINITE, seed=None) -> float:
        v0 = self.value(zero_state(self.n), twirl, shots, seed)
        if abs(v0) <= 1e-12:
            raise MitigationError(f"calibration value {v0:.3g} vanishes")
        return self.value(state, twirl, shots, seed) / v0


def _resolve(target, cfg: EstimatorConfig) -> tuple[ZMask, Circuit | None]:
    if isinstance(target, MtPlan):
        circuit, z_eff = compile_mt(target)
        if cfg.circuit is not None and cfg.circuit.gates != circuit.gates:
            raise MitigationError("config circuit differs from the compiled plan")
        return z_eff, circuit
    if isinstance(target, str):
        target = ZMask.from_label(target)
    return target, cfg.circuit


def readout_for(target, lam: TransferMatrix, cfg: EstimatorConfig) -> TwirledReadout:
    z_eff, circuit = _resolve(target, cfg)
    return TwirledReadout(lam, z_eff, circuit, cfg.gnoise)


def noisy_expectation_v(state, z_eff: ZMask, lam: TransferMatrix, cfg: EstimatorConfig) -> float:
    """Twirled noisy expectation ``v`` of the (effective) observable."""
    return readout_for(z_eff, lam, cfg).value(state, cfg.twirl, cfg.shots, cfg.seed)


def mitigated_estimate(state, target, lam: TransferMatrix, cfg: EstimatorConfig) -> float:
    """``v(rho) / v(|0...0>)`` through the same twirl set, circuit and noise.

    ``target`` is a Z mask (already effective when ``cfg.circuit`` is set) or
    an :class:`MtPlan`, which is compiled here.
    """
    return readout_for(target, lam, cfg).mitigate(state, cfg.twirl, cfg.shots, cfg.seed)


# -- tensor-product inversion baseline -----------------------------------------


def _as_probs(data, n: int | None = None) -> np.ndarray:
    if isinstance(data, OutcomeDistribution):
        return data.probs
    if isinstance(data, dict):
        if not data:
            raise MitigationError("empty counts")
        size = n if n is not None else len(next(iter(data)))
        p = np.zeros(2**size)
        for key, c in data.items():
            p[basis_index(key)] += c
        return p / p.sum()
    return np.asarray(data, dtype=float)


def tpn_baseline(data, readouts: Sequence[SingleQubitReadout], r: ZMask | None = None):
    """Invert per-qubit assignment matrices; returns ``(corrected, <Z_r>)``.

    Negative quasi-probabilities are kept as they are. ``<Z_r>`` is ``None``
    when no observable is given.
    """
    n = len(readouts)
    p = _as_probs(data, n)
    if p.size != 2**n:
        raise MitigationError("distribution and readout sizes differ")
    for q, ro in enumerate(readouts, 1):
        if abs(ro.a + ro.b - 1.0) < 1e-15:
            raise MitigationError(f"assignment matrix of qubit {q} is singular (a + b = 1)")
        p = apply_local(p, np.linalg.inv(ro.matrix()), [q], n)
    if r is None:
        return p, None
    return p, float(parity_signs(r.index, n) @ p)


# -- bounds ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundInputs:
    R: ReducedPTM
    r: ZMask
    size: int
    delta: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise MitigationError(f"delta={self.delta} outside (0, 1)")
        if self.size < 1:
            raise MitigationError("set size must be positive")
        if self.R.n != self.r.n:
            raise MitigationError("PTM and observable sizes differ")


@dataclass(frozen=True)
class BoundReport:
    kappa: float
    off_diag_sum: float
    diag: float
    dominance: bool
    bound: float

    def to_text(self) -> str:
        return "\n".join(
            [
                f"kappa: {self.kappa!r}",
                f"off_diag_sum: {self.off_diag_sum!r}",
                f"diag: {self.diag!r}",
                f"dominance: {str(self.dominance).lower()}",
                f"bound: {self.bound!r}",
            ]
        ) + "\n"


def _report(kappa: float, diag: float, off: float) -> BoundReport:
    margin = abs(diag) - kappa * off
    ok = margin > 0
    if off == 0.0:
        bound = 0.0
    else:
        bound = 2.0 * kappa * off / margin if ok else math.inf
    return BoundReport(kappa, off, diag, ok, bound)


def bound_theorem1(b: BoundInputs) -> BoundReport:
    """Random-twirl bound ``2 kappa S / (|R_rr| - kappa S)``, ``S`` the off-diagonal row mass."""
    ri = b.r.index
    row = np.abs(b.R.matrix[ri])
    diag = float(b.R.matrix[ri, ri])
    off = float(row.sum() - row[ri])
    return _report(hoeffding_kappa(b.size, b.r.n, b.delta), diag, off)


def bound_theorem3(b: BoundInputs) -> BoundReport:
    """Balanced-twirl bound: columns supported inside ``supp(Z_r)`` drop out and
    ``kappa`` counts only the ``n - tau`` free qubits."""
    ri = b.r.index
    n = b.r.n
    cols = np.arange(2**n)
    outside = (cols & ~ri) != 0
    off = float(np.abs(b.R.matrix[ri])[outside].sum())
    m = n - int(popcount(ri))
    return _report(hoeffding_kappa(b.size, m, b.delta), float(b.R.matrix[ri, ri]), off)
