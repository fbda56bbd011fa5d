"""Classical readout-noise models and their reduced Pauli transfer matrices.

Transfer matrices are column-stochastic: ``lam[k, j] = P(observe k | ideal j)``
with bitstring index ``k`` carrying qubit 1 in its least-significant bit.

For a single qubit with assignment fidelities ``a = P(0|0)`` and ``b = P(1|1)``
the reduced PTM is ``[[1, 0], [a - b, a + b - 1]]``: the Z-damping factor
``omega = a + b - 1`` sits on the diagonal and ``zeta = a - b`` is the I->Z
leakage. These placements come from ``Tr(Z_r N(Z_s)) / 2^n`` computed directly.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
import yaml

from ._walsh import fwht, popcount
from .pauli import ZMask

log = logging.getLogger(__name__)

MAX_DENSE_QUBITS = 12
_STOCHASTIC_TOL = 1e-12


class NoiseModelError(ValueError):
    pass


@dataclass(frozen=True)
class SingleQubitReadout:
    a: float  # P(observe 0 | ideal 0)
    b: float  # P(observe 1 | ideal 1)

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise NoiseModelError(f"readout probability {name}={v} outside [0, 1]")

    @property
    def omega(self) -> float:
        return self.a + self.b - 1.0

    @property
    def zeta(self) -> float:
        return self.a - self.b

    @property
    def error_rate(self) -> float:
        return ((1.0 - self.a) + (1.0 - self.b)) / 2.0

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, 1.0 - self.b], [1.0 - self.a, self.b]])

    @classmethod
    def symmetric(cls, eps: float) -> SingleQubitReadout:
        return cls(1.0 - eps, 1.0 - eps)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] & (m.shape[0] - 1):
            raise NoiseModelError(f"transfer matrix must be 2^n x 2^n, got {m.shape}")
        if (m < -_STOCHASTIC_TOL).any():
            raise NoiseModelError("transfer matrix has negative entries")
        drift = np.abs(m.sum(axis=0) - 1.0).max()
        if drift > _STOCHASTIC_TOL:
            raise NoiseModelError(f"columns do not sum to 1 (max drift {drift:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0].bit_length() - 1


@dataclass(frozen=True, eq=False)
class ReducedPTM:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def __getitem__(self, rs):
        r, s = rs
        r = r.index if isinstance(r, ZMask) else r
        s = s.index if isinstance(s, ZMask) else s
        return self.matrix[r, s]


@dataclass(frozen=True)
class CtmpPairSpec:
    """Two-qubit CTMP rates on qubits ``(i, i+1)``.

    ``strengths`` are the rates of 01->10, 10->01, 00->11, 11->00, where the
    left character of each label belongs to qubit ``i``.
    """

    pair: tuple[int, int]
    strengths: tuple[float, float, float, float]

    def __post_init__(self):
        i, j = self.pair
        if j != i + 1 or i < 1:
            raise NoiseModelError(f"CTMP pair {self.pair} is not an adjacent (i, i+1)")
        s = tuple(float(x) for x in self.strengths)
        if len(s) != 4 or not all(math.isfinite(x) for x in s):
            raise NoiseModelError(f"need four finite CTMP strengths, got {self.strengths}")
        object.__setattr__(self, "pair", (int(i), int(j)))
        object.__setattr__(self, "strengths", s)


@dataclass(frozen=True)
class SyntheticNoiseSpec:
    n: int
    ind_mean: float = 0.015
    ind_std: float = 0.01
    corr_mean: float = 0.008
    corr_std: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.ind_std < 0 or self.corr_std < 0:
            raise NoiseModelError("standard deviations must be non-negative")
        for m in (self.ind_mean, self.corr_mean):
            if not 0.0 <= m < 1.0:
                raise NoiseModelError(f"mean {m} outside [0, 1)")
        _check_n(self.n)


def _check_n(n, cap=MAX_DENSE_QUBITS):
    if not 1 <= n <= cap:
        raise NoiseModelError(f"qubit count {n} outside [1, {cap}]")


def _kron_qubits(mats):
    """Kronecker product with the first matrix acting on qubit 1 (the LSB)."""
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(m, out)
    return out


def build_tpn_lambda(readouts: Sequence[SingleQubitReadout]) -> TransferMatrix:
    _check_n(len(readouts))
    return TransferMatrix(_kron_qubits([r.matrix() for r in readouts]))


def apply_local(a: np.ndarray, op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Left-multiply ``a`` (first axis of length 2^n) by ``op`` on ``qubits``.

    ``op`` is ``2^k x 2^k`` in the local basis whose least-significant bit is
    ``qubits[0]``.
    """
    k = len(qubits)
    trailing = a.shape[1:]
    t = a.reshape((2,) * n + trailing)
    axes = [n - q for q in reversed(qubits)]
    t = np.moveaxis(t, axes, range(k))
    front = t.shape[k:]
    t = (op @ t.reshape(2**k, -1)).reshape((2,) * k + front)
    t = np.moveaxis(t, range(k), axes)
    return t.reshape(a.shape)


def ctmp_generator(strengths) -> np.ndarray:
    """4x4 rate matrix for one pair; local index ``x_i + 2 x_{i+1}``."""
    l1, l2, l3, l4 = strengths
    g = np.zeros((4, 4))
    # (source, destination, rate); "01" -> qubit i = 0, qubit i+1 = 1 -> index 2
    for src, dst, lam in ((2, 1, l1), (1, 2, l2), (0, 3, l3), (3, 0, l4)):
        g[dst, src] += lam
        g[src, src] -= lam
    return g


def _apply_ctmp(m: np.ndarray, n: int, pairs: Sequence[CtmpPairSpec]) -> np.ndarray:
    for spec in sorted(pairs, key=lambda p: p.pair):
        if spec.pair[1] > n:
            raise NoiseModelError(f"CTMP pair {spec.pair} outside {n} qubits")
        block = scipy.linalg.expm(ctmp_generator(spec.strengths))
        m = apply_local(m, block, spec.pair, n)
    return m


def _finish(m: np.ndarray) -> TransferMatrix:
    m = np.clip(m, 0.0, None)
    drift = np.abs(m.sum(axis=0) - 1.0).max()
    if drift > _STOCHASTIC_TOL:
        log.warning("transfer matrix column drift %.3g; renormalizing columns", drift)
        m = m / m.sum(axis=0, keepdims=True)
    return TransferMatrix(m)


def build_ctmp_lambda(
    n: int,
    pairs: Sequence[CtmpPairSpec],
    base: TransferMatrix | None = None,
) -> TransferMatrix:
    """``expm`` blocks for each pair, applied in ascending pair order.

    With ``base`` the result is ``Lambda_corr @ base`` (correlated noise acting
    after the independent part).
    """
    _check_n(n)
    m = np.eye(2**n) if base is None else np.array(base.matrix)
    return _finish(_apply_ctmp(m, n, pairs))


def sample_synthetic_lambda(spec: SyntheticNoiseSpec) -> TransferMatrix:
    readouts, pairs = sample_synthetic_parameters(spec)
    base = build_tpn_lambda(readouts)
    return _finish(_apply_ctmp(np.array(base.matrix), spec.n, pairs))


def sample_synthetic_parameters(spec: SyntheticNoiseSpec):
    """Per-qubit readouts and CTMP pair specs drawn from ``spec``.

    Draws are clamped to ``[0, 0.5)``.
    """
    rng = np.random.default_rng(spec.seed)
    hi = np.nextafter(0.5, 0.0)
    eps = np.clip(rng.normal(spec.ind_mean, spec.ind_std, size=spec.n), 0.0, hi)
    lam = np.clip(rng.normal(spec.corr_mean, spec.corr_std, size=(spec.n - 1, 4)), 0.0, hi)
    readouts = [SingleQubitReadout.symmetric(float(e)) for e in eps]
    pairs = [CtmpPairSpec((i + 1, i + 2), tuple(lam[i])) for i in range(spec.n - 1)]
    return readouts, pairs


def lambda_to_ptm(lam: TransferMatrix) -> ReducedPTM:
    """``R[r, s] = 2^-n sum_{k,j} (-1)^{r.k} lam[k, j] (-1)^{s.j}``."""
    m = lam.matrix
    return ReducedPTM(fwht(fwht(m, axis=0), axis=1) / m.shape[0])


def tpn_reduced_ptm(readouts: Sequence[SingleQubitReadout]) -> ReducedPTM:
    return ReducedPTM(
        _kron_qubits([np.array([[1.0, 0.0], [r.zeta, r.omega]]) for r in readouts])
    )


def tpn_ptm_entry(r: ZMask, s: ZMask, readouts: Sequence[SingleQubitReadout]) -> float:
    if not (r.n == s.n == len(readouts)):
        raise NoiseModelError("mask and readout lengths differ")
    out = 1.0
    for rk, sk, ro in zip(r.bits, s.bits, readouts):
        if sk and not rk:
            return 0.0
        if rk:
            out *= ro.omega if sk else ro.zeta
    return out


def in_tpn_subset(r: int, s: int) -> bool:
    return (s & ~r) == 0


def tpn_subset_mask(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return (idx[None, :] & ~idx[:, None]) == 0


def trigger_set(r: ZMask) -> list[ZMask]:
    """All ``s != r`` with ``supp(Z_s)`` inside ``supp(Z_r)``."""
    ri = r.index
    out = []
    s = ri
    while True:
        s = (s - 1) & ri
        out.append(ZMask.from_index(s, r.n))
        if s == 0:
            break
    return [] if ri == 0 else sorted(out, key=lambda m: m.index)


def split_ptm_by_trigger(R: ReducedPTM) -> tuple[ReducedPTM, ReducedPTM]:
    mask = tpn_subset_mask(R.n)
    m = R.matrix
    return ReducedPTM(np.where(mask, m, 0.0)), ReducedPTM(np.where(mask, 0.0, m))


def marginal_readouts(lam: TransferMatrix) -> list[SingleQubitReadout]:
    """Per-qubit ``(a, b)`` from the all-zeros and one-hot ideal columns."""
    m = lam.matrix
    n = lam.n
    k = np.arange(2**n)
    out = []
    for q in range(n):
        bit = (k >> q) & 1
        a = float(m[bit == 0, 0].sum())
        b = float(m[bit == 1, 1 << q].sum())
        out.append(SingleQubitReadout(min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)))
    return out


def mean_error_rate(noise) -> float:
    readouts = marginal_readouts(noise) if isinstance(noise, TransferMatrix) else noise
    return float(np.mean([r.error_rate for r in readouts]))


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseInstance:
    """A realized transfer matrix plus the parameters that produced it."""

    lam: TransferMatrix
    readouts: tuple[SingleQubitReadout, ...] | None = None
    pairs: tuple[CtmpPairSpec, ...] = ()

    @property
    def n(self) -> int:
        return self.lam.n


def _readouts_from(cfg) -> list[SingleQubitReadout]:
    out = []
    for item in cfg:
        if isinstance(item, dict):
            out.append(SingleQubitReadout(float(item["a"]), float(item["b"])))
        else:
            a, b = item
            out.append(SingleQubitReadout(float(a), float(b)))
    return out


def _pairs_from(cfg) -> list[CtmpPairSpec]:
    return [CtmpPairSpec(tuple(p["pair"]), tuple(p["strengths"])) for p in cfg or ()]


def noise_from_config(cfg: dict, seed: int | None = None, n: int | None = None) -> NoiseInstance:
    """Build a noise instance from a parsed config mapping.

    Recognised ``kind`` values: ``tpn``, ``ctmp`` (readouts plus pairs),
    ``synthetic``, ``device`` (the bundled six-qubit set) and ``ideal``.
    """
    kind = cfg.get("kind", "tpn" if "readouts" in cfg else "synthetic")
    if kind == "device":
        return device_noise(n)
    if kind == "ideal":
        size = int(cfg.get("n", n or 1))
        ro = [SingleQubitReadout(1.0, 1.0)] * size
        return NoiseInstance(build_tpn_lambda(ro), tuple(ro))
    if kind in ("tpn", "ctmp"):
        readouts = _readouts_from(cfg["readouts"])
        if n is not None and n != len(readouts):
            readouts = (readouts * (n // len(readouts) + 1))[:n]
        pairs = [p for p in _pairs_from(cfg.get("pairs")) if p.pair[1] <= len(readouts)]
        base = build_tpn_lambda(readouts)
        lam = build_ctmp_lambda(len(readouts), pairs, base) if pairs else base
        return NoiseInstance(lam, tuple(readouts), tuple(pairs))
    if kind == "synthetic":
        syn = cfg.get("synthetic", cfg)
        ind = syn.get("independent", {})
        corr = syn.get("correlated", {})
        spec = SyntheticNoiseSpec(
            n=int(n if n is not None else syn["n"]),
            ind_mean=float(ind.get("mean", 0.015)),
            ind_std=float(ind.get("std", 0.01)),
            corr_mean=float(corr.get("mean", 0.008)),
            corr_std=float(corr.get("std", 0.005)),
            seed=int(seed if seed is not None else syn.get("seed", 0)),
        )
        readouts, pairs = sample_synthetic_parameters(spec)
        return NoiseInstance(sample_synthetic_lambda(spec), tuple(readouts), tuple(pairs))
    raise NoiseModelError(f"unknown noise kind {kind!r}")


def load_noise_config(path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh)


def device_config() -> dict:
    text = resources.files("twirlmem.data").joinpath("device6.yaml").read_text()
    return yaml.safe_load(text)


def device_noise(n: int | None = None) -> NoiseInstance:
    cfg = dict(device_config())
    cfg["kind"] = "ctmp"
    return noise_from_config(cfg, n=n)


def ptm_to_csv(R: ReducedPTM, out=None, absolute: bool = True) -> str:
    """Write ``|R|`` with ZMask-integer header row and column; return the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = R.matrix.shape[0]
    w.writerow(["r\\s"] + list(range(dim)))
    m = np.abs(R.matrix) if absolute else R.matrix
    for r in range(dim):
        w.writerow([r] + [repr(float(v)) for v in m[r]])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def parity_expectation(probs: np.ndarray, r: int) -> float:
    """``sum_k probs[k] (-1)^{r.k}``."""
    k = np.arange(len(probs))
    signs = 1.0 - 2.0 * (popcount(k & r) & 1)
    return float(signs @ probs)
