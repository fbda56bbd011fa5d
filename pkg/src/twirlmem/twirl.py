"""Random and subsystem-balanced twirling sets and their scaling factors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._walsh import fwht, popcount
from .noise import ReducedPTM
from .pauli import LABELS, PauliError, PauliString

RANDOM = "random"
BALANCED = "subsystem-balanced"

_XB = np.array([0, 1, 1, 0], dtype=np.int64)
_ZB = np.array([0, 0, 1, 1], dtype=np.int64)


class TwirlSetError(ValueError):
    pass


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class TwirlSet:
    """Twirling Paulis stored as an ``(size, n)`` digit array.

    ``multiplier`` is the ``c`` in ``size = c * 4**len(support)`` for exactly
    balanced sets, otherwise ``None``.
    """

    digits: np.ndarray
    kind: str = RANDOM
    support: frozenset[int] = frozenset()
    multiplier: int | None = None

    def __post_init__(self):
        d = np.asarray(self.digits, dtype=np.uint8)
        if d.ndim != 2 or d.shape[0] < 1:
            raise TwirlSetError("a twirling set needs at least one member")
        if (d > 3).any():
            raise TwirlSetError("digits must lie in 0..3")
        d.setflags(write=False)
        object.__setattr__(self, "digits", d)
        object.__setattr__(self, "support", frozenset(self.support))

    @property
    def n(self) -> int:
        return self.digits.shape[1]

    @property
    def size(self) -> int:
        return self.digits.shape[0]

    def __len__(self):
        return self.size

    @property
    def members(self) -> list[PauliString]:
        return [PauliString(tuple(int(v) for v in row)) for row in self.digits]

    @property
    def x_masks(self) -> np.ndarray:
        w = np.int64(1) << np.arange(self.n, dtype=np.int64)
        return (_XB[self.digits] * w).sum(axis=1)

    @property
    def z_masks(self) -> np.ndarray:
        w = np.int64(1) << np.arange(self.n, dtype=np.int64)
        return (_ZB[self.digits] * w).sum(axis=1)

    def to_text(self) -> str:
        head = f"# kind={self.kind} n={self.n}"
        if self.support:
            head += " support=" + ",".join(str(q) for q in sorted(self.support))
        if self.multiplier:
            head += f" multiplier={self.multiplier}"
        rows = ["".join(LABELS[v] for v in row) for row in self.digits]
        return "\n".join([head] + rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> TwirlSet:
        meta = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            try:
                rows.append([LABELS.index(c) for c in line.upper()])
            except ValueError:
                raise PauliError(f"bad Pauli string {line!r}") from None
        if len({len(r) for r in rows}) > 1:
            raise TwirlSetError("Pauli strings have different lengths")
        sup = frozenset(int(q) for q in meta.get("support", "").split(",") if q)
        mult = int(meta["multiplier"]) if "multiplier" in meta else None
        return cls(np.array(rows), meta.get("kind", RANDOM), sup, mult)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> TwirlSet:
        return cls.from_text(Path(path).read_text())


def full_pauli_group(n: int) -> TwirlSet:
    idx = np.arange(4**n)
    digits = (idx[:, None] >> (2 * np.arange(n))) & 3
    return TwirlSet(digits, BALANCED, frozenset(range(1, n + 1)), 1)


def random_twirl_set(n: int, size: int, seed=None) -> TwirlSet:
    if size < 1:
        raise TwirlSetError("size must be >= 1")
    rng = _rng(seed)
    return TwirlSet(rng.integers(0, 4, size=(size, n)), RANDOM)


def _balanced_distinct_patterns(tau: int, size: int, rng) -> np.ndarray:
    """``size < 4**tau`` distinct patterns with per-qubit balanced columns.

    Rows come in groups of four indexed by a base-4 word ``g``: row ``a`` of
    group ``g`` is ``(a, g_1 + a, ..., g_{tau-1} + a) mod 4``. Each column is a
    bijection of ``a`` inside a group and ``(a, g)`` is recoverable from the
    row, so rows are distinct and column counts differ by at most one. Every
    column is then relabelled by a random permutation of the four Paulis.
    """
    n_groups = -(-size // 4)
    words = rng.choice(4 ** (tau - 1), size=n_groups, replace=False)
    g_digits = (words[:, None] >> (2 * np.arange(tau - 1))) & 3
    a = np.arange(4)
    rows = np.empty((n_groups, 4, tau), dtype=np.int64)
    rows[:, :, 0] = a
    rows[:, :, 1:] = (g_digits[:, None, :] + a[None, :, None]) % 4
    partial = size - 4 * (n_groups - 1)
    keep = rng.permutation(4)[:partial]
    rows = np.concatenate([rows[:-1].reshape(-1, tau), rows[-1][keep]])
    perms = np.stack([rng.permutation(4) for _ in range(tau)], axis=1)
    rows = perms[rows, np.arange(tau)]
    return rows[rng.permutation(size)]


def sbpt_set(support, n: int, size: int, seed=None) -> TwirlSet:
    """Subsystem-balanced twirling set for a Z observable supported on ``support``.

    ``size = c * 4**tau`` enumerates every on-support pattern ``c`` times in
    shuffled order; ``size < 4**tau`` uses distinct, per-qubit balanced
    patterns. Off-support digits are i.i.d. uniform.
    """
    sup = sorted(set(support))
    if any(not 1 <= q <= n for q in sup):
        raise TwirlSetError(f"support {sup} outside 1..{n}")
    if size < 1:
        raise TwirlSetError("size must be >= 1")
    tau = len(sup)
    full = 4**tau
    rng = _rng(seed)
    if size % full == 0:
        c = size // full
        idx = np.tile(np.arange(full), c)[rng.permutation(size)]
        on = (idx[:, None] >> (2 * np.arange(tau))) & 3
        mult = c
    elif size < full:
        on = _balanced_distinct_patterns(tau, size, rng)
        mult = None
    else:
        raise TwirlSetError(
            f"size {size} exceeds 4^{tau}={full} but is not a multiple of it"
        )
    digits = rng.integers(0, 4, size=(size, n))
    if tau:
        digits[:, [q - 1 for q in sup]] = on
    return TwirlSet(digits, BALANCED, frozenset(sup), mult)


def _anticommute_parity(xq, zq, xp, zp):
    return popcount((xq & zp) ^ (zq & xp)) & 1


def scaling_factor(S: TwirlSet, i: PauliString, j: PauliString) -> float:
    """``alpha_ij = mean_q eta(P_q, P_i P_j)``."""
    if i.n != S.n or j.n != S.n:
        raise PauliError("qubit count mismatch")
    xp = i.x_mask ^ j.x_mask
    zp = i.z_mask ^ j.z_mask
    par = _anticommute_parity(S.x_masks, S.z_masks, xp, zp)
    return float(np.mean(1.0 - 2.0 * par))


def z_scaling_vector(S: TwirlSet) -> np.ndarray:
    """``A[m] = mean_q (-1)^{x_q . m}``, so that ``alpha_{phi(r) phi(s)} = A[r ^ s]``."""
    hist = np.bincount(S.x_masks, minlength=2**S.n).astype(float)
    return fwht(hist) / S.size


def z_scaling_matrix(S: TwirlSet) -> np.ndarray:
    a = z_scaling_vector(S)
    idx = np.arange(2**S.n)
    return a[idx[:, None] ^ idx[None, :]]


def symplectic_scaling(S: TwirlSet) -> np.ndarray:
    """``F[z, x] = mean_q eta(P_q, Q)`` for the Pauli ``Q`` with masks ``(x, z)``."""
    dim = 2**S.n
    hist = np.zeros((dim, dim))
    np.add.at(hist, (S.x_masks, S.z_masks), 1.0)
    # sum_{a,b} h[a,b] (-1)^{a.zQ + b.xQ}: row index becomes zQ, column xQ
    return fwht(fwht(hist, axis=0), axis=1) / S.size


def twirled_ptm(R: ReducedPTM, S: TwirlSet) -> ReducedPTM:
    if R.n != S.n:
        raise TwirlSetError("PTM and twirling set sizes differ")
    return ReducedPTM(R.matrix * z_scaling_matrix(S))


def hoeffding_kappa(size: int, n_free: int, delta: float) -> float:
    """``sqrt((2/size) (2 n_free ln 2 + ln(2/delta)))``."""
    return math.sqrt((2.0 / size) * (2 * n_free * math.log(2) + math.log(2.0 / delta)))
