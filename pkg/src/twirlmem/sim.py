"""Small-register state-vector / density-matrix simulation of noisy CX circuits.

Basis index ``k`` holds qubit 1 in its least-significant bit. Each CX gate is
followed by a coherent ``exp(-i beta/2 XX)`` on its pair and then two-qubit
depolarizing noise of rate ``p2``. A physical Pauli layer, when present, counts
as one single-qubit gate per qubit and picks up depolarizing noise of rate
``p1`` on every qubit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._walsh import popcount
from .circuit import Circuit, CxGate
from .noise import TransferMatrix
from .pauli import PauliString

MAX_STATE_QUBITS = 14
MAX_DENSITY_QUBITS = 10
MAX_CHANNEL_QUBITS = 5


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class GateNoiseParams:
    p1: float = 5e-4
    p2: float = 5e-3
    beta: float = 0.01

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationError(f"{name}={v} outside [0, 1]")
        if not math.isfinite(self.beta):
            raise SimulationError("beta must be finite")

    @property
    def is_zero(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.beta == 0


NOISELESS = GateNoiseParams(0.0, 0.0, 0.0)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size & (a.size - 1):
            raise SimulationError("amplitude vector length must be a power of two")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > 1e-10:
            raise SimulationError(f"state norm {norm} is not 1")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density(self) -> DensityMatrix:
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def n(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diagonal(self.matrix)), 0.0, None)


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if (p < -1e-12).any() or abs(p.sum() - 1.0) > 1e-10:
            raise SimulationError("outcome probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size.bit_length() - 1


# -- states -------------------------------------------------------------------


def haar_state(n: int, seed=None) -> PureState:
    if not 1 <= n <= MAX_STATE_QUBITS:
        raise SimulationError(f"n={n} outside [1, {MAX_STATE_QUBITS}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(v / np.linalg.norm(v))


def basis_index(bits) -> int:
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    return sum(int(b) << i for i, b in enumerate(bits))


def basis_state(bits) -> PureState:
    """Computational basis state; ``bits[0]`` (leftmost character) is qubit 1."""
    n = len(bits)
    a = np.zeros(2**n, dtype=complex)
    a[basis_index(bits)] = 1.0
    return PureState(a)


def zero_state(n: int) -> PureState:
    return basis_state([0] * n)


def bitstring(k: int, n: int) -> str:
    return "".join(str((k >> i) & 1) for i in range(n))


def z_expectation(state, r: int) -> float:
    p = state.probabilities()
    k = np.arange(p.size)
    return float((1.0 - 2.0 * (popcount(k & r) & 1)) @ p)


# -- primitive actions on the first axis --------------------------------------


def _pauli_action(x: int, z: int, n_y: int, dim: int):
    """Index map and phases with ``(P a)[m] = phase[m] * a[src[m]]``."""
    m = np.arange(dim)
    src = m ^ x
    phase = (1j**n_y) * (1.0 - 2.0 * (popcount(src & z) & 1))
    return src, phase


def _pauli_parts(p: PauliString):
    n_y = sum(1 for d in p.digits if d == 2)
    return p.x_mask, p.z_mask, n_y


def _left(a, src, phase):
    return phase[:, None] * a[src] if a.ndim == 2 else phase * a[src]


def _conj_sandwich(rho, src, phase):
    """``P rho P^dag`` given the index map and phases of ``P``."""
    out = phase[:, None] * rho[src]
    return out[:, src] * phase.conj()[None, :]


def _cx_perm(g: CxGate, dim: int) -> np.ndarray:
    k = np.arange(dim)
    return k ^ (((k >> (g.control - 1)) & 1) << (g.target - 1))


def _xx_mask(g: CxGate) -> int:
    return (1 << (g.control - 1)) | (1 << (g.target - 1))


def apply_pauli(state, p: PauliString):
    """Exact action of ``p`` (with phases) on a pure state or density matrix."""
    if p.n != state.n:
        raise SimulationError("Pauli and state sizes differ")
    src, phase = _pauli_action(*_pauli_parts(p), 2**p.n)
    phase = p.sign * phase
    if isinstance(state, PureState):
        return PureState(phase * state.amplitudes[src])
    return DensityMatrix(_conj_sandwich(state.matrix, src, phase))


def _twirl_qubit(rho: np.ndarray, q: int, n: int) -> np.ndarray:
    """``(rho + X rho X + Y rho Y + Z rho Z) / 4`` on qubit ``q``."""
    t = rho.reshape((2,) * (2 * n))
    ra, ca = n - q, 2 * n - q
    t = np.moveaxis(t, (ra, ca), (-2, -1))
    tr = (t[..., 0, 0] + t[..., 1, 1]) / 2.0
    out = np.zeros_like(t)
    out[..., 0, 0] = tr
    out[..., 1, 1] = tr
    return np.moveaxis(out, (-2, -1), (ra, ca)).reshape(rho.shape)


def depolarize(rho: np.ndarray, qubits, p: float, n: int) -> np.ndarray:
    """Depolarizing channel of rate ``p`` on ``qubits`` (uniform non-identity Paulis)."""
    if p == 0:
        return rho
    k = len(qubits)
    full = 4**k
    twirled = rho
    for q in qubits:
        twirled = _twirl_qubit(twirled, q, n)
    c = p * full / (full - 1)
    return (1.0 - c) * rho + c * twirled


def _xx_rotate(a: np.ndarray, g: CxGate, beta: float, sign: float = 1.0) -> np.ndarray:
    """Left-multiply by ``exp(-i sign beta/2 XX)`` on the gate's pair."""
    idx = np.arange(a.shape[0]) ^ _xx_mask(g)
    return math.cos(beta / 2) * a - 1j * sign * math.sin(beta / 2) * a[idx]


def _density_gate(rho, g: CxGate, gnoise: GateNoiseParams, n: int):
    perm = _cx_perm(g, rho.shape[0])
    rho = rho[perm][:, perm]
    if gnoise.beta:
        rho = _xx_rotate(rho, g, gnoise.beta)
        rho = _xx_rotate(rho.conj().T, g, gnoise.beta).conj().T
    return depolarize(rho, g.qubits, gnoise.p2, n)


def evolve_density(rho: np.ndarray, circuit: Circuit, gnoise: GateNoiseParams, pauli: PauliString | None = None) -> np.ndarray:
    n = circuit.n
    if pauli is not None:
        src, phase = _pauli_action(*_pauli_parts(pauli), 2**n)
        rho = _conj_sandwich(rho, src, phase)
        for q in range(1, n + 1):
            rho = depolarize(rho, (q,), gnoise.p1, n)
    for g in circuit.gates:
        rho = _density_gate(rho, g, gnoise, n)
    return rho


def _random_pauli_batch(states, qubits, probs_hit, rng, n):
    """Apply a uniformly random non-identity Pauli on ``qubits`` with prob ``probs_hit``."""
    t = states.shape[0]
    k = len(qubits)
    hit = rng.random(t) < probs_hit
    if not hit.any():
        return states
    choice = rng.integers(1, 4**k, size=t)
    x = np.zeros(t, dtype=np.int64)
    z = np.zeros(t, dtype=np.int64)
    n_y = np.zeros(t, dtype=np.int64)
    for i, q in enumerate(qubits):
        d = (choice >> (2 * i)) & 3
        x |= ((d == 1) | (d == 2)).astype(np.int64) << (q - 1)
        z |= ((d == 2) | (d == 3)).astype(np.int64) << (q - 1)
        n_y += d == 2
    rows = np.nonzero(hit)[0]
    m = np.arange(states.shape[1])
    src = m[None, :] ^ x[rows, None]
    phase = (1j ** n_y[rows])[:, None] * (1.0 - 2.0 * (popcount(src & z[rows, None]) & 1))
    out = states.copy()
    out[rows] = phase * np.take_along_axis(states[rows], src, axis=1)
    return out


def evolve_trajectories(states: np.ndarray, circuit: Circuit, gnoise: GateNoiseParams, rng, pauli: PauliString | None = None) -> np.ndarray:
    """Stochastic unravelling applied to a batch ``(T, 2^n)`` of state vectors."""
    n = circuit.n
    dim = 2**n
    states = np.array(states, dtype=complex)
    if pauli is not None:
        src, phase = _pauli_action(*_pauli_parts(pauli), dim)
        states = phase[None, :] * states[:, src]
        if gnoise.p1:
            for q in range(1, n + 1):
                states = _random_pauli_batch(states, (q,), gnoise.p1, rng, n)
    for g in circuit.gates:
        states = states[:, _cx_perm(g, dim)]
        if gnoise.beta:
            states = _xx_rotate(states.T, g, gnoise.beta).T
        if gnoise.p2:
            states = _random_pauli_batch(states, g.qubits, gnoise.p2, rng, n)
    return states


def evolve_noisy(state, circuit: Circuit, gnoise: GateNoiseParams = NOISELESS, mode: str = "trajectory", seed=None, pauli: PauliString | None = None):
    """Run ``circuit`` with gate noise.

    ``mode="trajectory"`` returns one sampled :class:`PureState`;
    ``mode="density"`` returns the exact :class:`DensityMatrix` (n <= 10).
    """
    if state.n != circuit.n:
        raise SimulationError("state and circuit sizes differ")
    if mode == "density":
        if circuit.n > MAX_DENSITY_QUBITS:
            raise SimulationError(f"density mode is limited to {MAX_DENSITY_QUBITS} qubits")
        rho = state.matrix if isinstance(state, DensityMatrix) else state.density().matrix
        return DensityMatrix(evolve_density(rho, circuit, gnoise, pauli))
    if mode == "trajectory":
        if not isinstance(state, PureState):
            raise SimulationError("trajectory mode needs a pure state")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        out = evolve_trajectories(state.amplitudes[None, :], circuit, gnoise, rng, pauli)[0]
        return PureState(out / np.linalg.norm(out))
    raise SimulationError(f"unknown mode {mode!r}")


def heisenberg_operator(weights: np.ndarray, circuit: Circuit, gnoise: GateNoiseParams, pauli_layer: bool = False) -> np.ndarray:
    """Operator ``M`` with ``<psi|M|psi> = sum_o weights[o] P(o)`` after the noisy circuit.

    ``P(o)`` is the computational-basis distribution of the evolved state.
    With ``pauli_layer`` the leading Pauli-layer noise is folded in too, so
    the caller applies the (noiseless) Pauli to ``psi`` itself.
    """
    n = circuit.n
    m = np.diag(np.asarray(weights, dtype=complex))
    for g in reversed(circuit.gates):
        m = depolarize(m, g.qubits, gnoise.p2, n)
        if gnoise.beta:
            # adjoint of K rho K^dag is K^dag M K
            m = _xx_rotate(m, g, gnoise.beta, sign=-1.0)
            m = _xx_rotate(m.conj().T, g, gnoise.beta, sign=-1.0).conj().T
        perm = _cx_perm(g, 2**n)
        m = m[perm][:, perm]
    if pauli_layer:
        for q in range(1, n + 1):
            m = depolarize(m, (q,), gnoise.p1, n)
    return m


# -- channels (verification only) ---------------------------------------------


def superoperator(channel: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of ``channel`` acting on row-major ``vec(rho)``."""
    dim = 2**n
    out = np.empty((dim * dim, dim * dim), dtype=complex)
    for col in range(dim * dim):
        e = np.zeros(dim * dim, dtype=complex)
        e[col] = 1.0
        out[:, col] = channel(e.reshape(dim, dim)).reshape(-1)
    return out


def unitary_superoperator(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def effective_gate_channel(circuit: Circuit, gnoise: GateNoiseParams) -> np.ndarray:
    """Superoperator ``C`` with ``noisy = C @ ideal`` for the whole circuit."""
    n = circuit.n
    if n > MAX_CHANNEL_QUBITS:
        raise SimulationError(f"channel construction is limited to {MAX_CHANNEL_QUBITS} qubits")
    noisy = superoperator(lambda rho: evolve_density(rho, circuit, gnoise), n)
    ideal_inv = superoperator(lambda rho: evolve_density(rho, circuit.inverse(), NOISELESS), n)
    return noisy @ ideal_inv


# -- measurement --------------------------------------------------------------


def measure_distribution(state, lam: TransferMatrix) -> OutcomeDistribution:
    p = state.probabilities()
    if p.size != lam.matrix.shape[0]:
        raise SimulationError("state and transfer matrix sizes differ")
    return OutcomeDistribution(lam.matrix @ p)


def sample_counts(dist: OutcomeDistribution, shots: int, seed=None) -> dict[str, int]:
    """Multinomial counts keyed by bitstring (qubit 1 leftmost)."""
    if shots <= 0:
        return {}
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = np.clip(dist.probs, 0.0, None)
    counts = rng.multinomial(shots, p / p.sum())
    n = dist.n
    return {bitstring(int(k), n): int(c) for k, c in enumerate(counts) if c}


def counts_to_csv(counts: dict[str, int]) -> str:
    lines = ["outcome,count"] + [f"{k},{v}" for k, v in sorted(counts.items())]
    return "\n".join(lines) + "\n"
