"""Shared dense-matrix oracles and the acceptance summary hook."""
import itertools

import numpy as np
import pytest
from hypothesis import settings

from twirlmem.noise import SingleQubitReadout
from twirlmem.pauli import PauliString, pauli_matrix, cx_matrix

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(criterion: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


# -- oracles ---------------------------------------------------------------


def z_string(bits) -> np.ndarray:
    return pauli_matrix(PauliString(tuple(3 * b for b in bits)))


def all_masks(n):
    return [tuple(b) for b in itertools.product((0, 1), repeat=n)]


def mask_index(bits):
    return sum(b << i for i, b in enumerate(bits))


def classical_channel(lam: np.ndarray):
    """Dephase, then push the populations through ``lam``."""
    def apply(rho):
        return np.diag(lam @ np.real(np.diag(rho)).astype(complex))
    return apply


def brute_force_reduced_ptm(lam: np.ndarray) -> np.ndarray:
    """``R[r, s] = 2^-n Tr(Z_r E(Z_s))`` evaluated with dense matrices."""
    dim = lam.shape[0]
    n = dim.bit_length() - 1
    chan = classical_channel(lam)
    out = np.zeros((dim, dim))
    for r in all_masks(n):
        zr = z_string(r)
        for s in all_masks(n):
            out[mask_index(r), mask_index(s)] = np.real(np.trace(zr @ chan(z_string(s)))) / dim
    return out


def random_readouts(rng, n, lo=0.85):
    return [SingleQubitReadout(float(rng.uniform(lo, 1)), float(rng.uniform(lo, 1))) for _ in range(n)]


def haar_vector(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def kraus_depolarizing(p, qubits, n):
    """Kraus operators of the depolarizing channel on ``qubits``."""
    k = len(qubits)
    ops = []
    for digits in itertools.product(range(4), repeat=k):
        full = [0] * n
        for q, d in zip(qubits, digits):
            full[q - 1] = d
        weight = (1 - p) if not any(digits) else p / (4**k - 1)
        ops.append(np.sqrt(weight) * pauli_matrix(PauliString(tuple(full))))
    return ops


def xx_unitary(g, beta, n):
    digits = [0] * n
    digits[g.control - 1] = digits[g.target - 1] = 1
    xx = pauli_matrix(PauliString(tuple(digits)))
    return np.cos(beta / 2) * np.eye(2**n) - 1j * np.sin(beta / 2) * xx


def superop_kraus(ops):
    return sum(np.kron(k, k.conj()) for k in ops)


def gate_noise_superop(g, gnoise, n):
    """``E_i``: coherent XX rotation followed by two-qubit depolarizing."""
    k = xx_unitary(g, gnoise.beta, n)
    return superop_kraus(kraus_depolarizing(gnoise.p2, g.qubits, n)) @ np.kron(k, k.conj())


def cx_superop(g, n):
    u = cx_matrix(g, n)
    return np.kron(u, u.conj())
