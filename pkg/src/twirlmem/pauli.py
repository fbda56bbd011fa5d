"""Pauli strings, Pauli-Z masks and their algebra.

Digits follow ``0=I, 1=X, 2=Y, 3=Z``. Qubit 1 is the least-significant digit of
every index (base 4 for Pauli strings, base 2 for Z masks) and the leftmost
character of labels such as ``"ZZIIII"``.

Only commutation signs enter the mitigation formulas, so products drop global
phases. Conjugation by CX gates tracks the +/-1 sign exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .circuit import Circuit, CircuitError, CxGate

LABELS = "IXYZ"
_X_BIT = (0, 1, 1, 0)
_Z_BIT = (0, 0, 1, 1)
_FROM_XZ = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}

_MATS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class PauliError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    digits: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        if any(d not in (0, 1, 2, 3) for d in digits):
            raise PauliError(f"Pauli digits must lie in 0..3, got {digits}")
        if self.sign not in (1, -1):
            raise PauliError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "digits", digits)

    @property
    def n(self) -> int:
        return len(self.digits)

    @property
    def index(self) -> int:
        return sum(d * 4**i for i, d in enumerate(self.digits))

    @property
    def x_mask(self) -> int:
        """Integer whose bit ``i-1`` is set where qubit ``i`` carries X or Y."""
        return sum(_X_BIT[d] << i for i, d in enumerate(self.digits))

    @property
    def z_mask(self) -> int:
        return sum(_Z_BIT[d] << i for i, d in enumerate(self.digits))

    @property
    def label(self) -> str:
        return "".join(LABELS[d] for d in self.digits)

    def support(self) -> set[int]:
        return {i + 1 for i, d in enumerate(self.digits) if d}

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        label = label.strip()
        sign = 1
        if label[:1] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        try:
            return cls(tuple(LABELS.index(c) for c in label.upper()), sign)
        except ValueError:
            raise PauliError(f"bad Pauli label {label!r}") from None

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls((0,) * n)

    def __str__(self):
        return ("-" if self.sign < 0 else "") + self.label


@dataclass(frozen=True)
class ZMask:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise PauliError(f"Z-mask bits must be 0/1, got {bits}")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @property
    def label(self) -> str:
        return "".join("Z" if b else "I" for b in self.bits)

    @classmethod
    def from_index(cls, r: int, n: int) -> ZMask:
        if not 0 <= r < 2**n:
            raise PauliError(f"mask index {r} out of range for n={n}")
        return cls(tuple((r >> i) & 1 for i in range(n)))

    @classmethod
    def from_label(cls, label: str) -> ZMask:
        p = PauliString.from_label(label)
        if any(d not in (0, 3) for d in p.digits):
            raise PauliError(f"{label!r} is not a Pauli-Z observable")
        return cls(tuple(1 if d else 0 for d in p.digits))

    @classmethod
    def from_support(cls, qubits, n: int) -> ZMask:
        qs = set(qubits)
        return cls(tuple(1 if i + 1 in qs else 0 for i in range(n)))

    def __str__(self):
        return self.label


def pauli_from_index(p: int, n: int) -> PauliString:
    if not 0 <= p < 4**n:
        raise PauliError(f"Pauli index {p} out of range for n={n}")
    return PauliString(tuple((p >> (2 * i)) & 3 for i in range(n)))


def phi(r: ZMask) -> PauliString:
    """Embed a Z mask into the Pauli group (1 -> Z)."""
    return PauliString(tuple(3 * b for b in r.bits))


def support(r) -> set[int]:
    if isinstance(r, ZMask):
        return {i + 1 for i, b in enumerate(r.bits) if b}
    return r.support()


def weight(r) -> int:
    return len(support(r))


def _check_same(a, b):
    if a.n != b.n:
        raise PauliError(f"qubit count mismatch: {a.n} vs {b.n}")


def eta(q: PauliString, p: PauliString) -> int:
    """Commutation sign: ``q p q^dag = eta(q, p) p``."""
    _check_same(q, p)
    anti = sum(1 for a, b in zip(q.digits, p.digits) if a and b and a != b)
    return -1 if anti & 1 else 1


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Phase-free product; digits combine by XOR of the symplectic bits."""
    _check_same(a, b)
    return PauliString(
        tuple(
            _FROM_XZ[(_X_BIT[x] ^ _X_BIT[y], _Z_BIT[x] ^ _Z_BIT[y])]
            for x, y in zip(a.digits, b.digits)
        )
    )


def conjugate_by_cx(p: PauliString, g: CxGate) -> PauliString:
    """Return ``CX p CX^dag`` with its sign.

    X_c -> X_c X_t, Z_t -> Z_c Z_t; X_t and Z_c are fixed.
    """
    if max(g.qubits) > p.n:
        raise CircuitError(f"{g} acts outside {p.n} qubits")
    c, t = g.control - 1, g.target - 1
    xc, zc = _X_BIT[p.digits[c]], _Z_BIT[p.digits[c]]
    xt, zt = _X_BIT[p.digits[t]], _Z_BIT[p.digits[t]]
    flip = xc & zt & (xt ^ zc ^ 1)
    digits = list(p.digits)
    digits[c] = _FROM_XZ[(xc, zc ^ zt)]
    digits[t] = _FROM_XZ[(xt ^ xc, zt)]
    return PauliString(tuple(digits), -p.sign if flip else p.sign)


def conjugate_by_circuit(p: PauliString, c: Circuit) -> PauliString:
    """Return ``U p U^dag`` for ``U = G_l ... G_1`` (gates in time order)."""
    if c.n != p.n:
        raise CircuitError(f"circuit width {c.n} differs from Pauli width {p.n}")
    return reduce(conjugate_by_cx, c.gates, p)


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix, qubit 1 as the least-significant bit."""
    m = np.ones((1, 1), dtype=complex)
    for d in reversed(p.digits):
        m = np.kron(m, _MATS[d])
    return p.sign * m


def cx_matrix(g: CxGate, n: int) -> np.ndarray:
    dim = 2**n
    k = np.arange(dim)
    image = np.where((k >> (g.control - 1)) & 1, k ^ (1 << (g.target - 1)), k)
    u = np.zeros((dim, dim))
    u[image, k] = 1.0
    return u


def circuit_matrix(c: Circuit) -> np.ndarray:
    u = np.eye(2**c.n)
    for g in c.gates:
        u = cx_matrix(g, c.n) @ u
    return u
