"""Compile Pauli-Z observables into nearest-neighbour CX measurement circuits.

Two primitives are combined:

* weight reduction collapses a contiguous Z run onto one of its qubits using
  two CX chains (``run_end -> target`` and ``run_start -> target``);
* location shift moves a lone Z one qubit over with two CX gates.

Chains run far-endpoint first in time order. With that ordering a chain
``CX(3,2), CX(2,1)`` maps ``ZZZ`` to ``ZII``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .circuit import Circuit, CircuitError, CxGate
from .pauli import PauliString, ZMask, conjugate_by_circuit, phi

Z_RUN = "Z"
I_RUN = "I"


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    kind: str
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class MtPlan:
    """``source`` mapped onto ``target_effective``.

    ``partition`` lists contiguous blocks ``(lo, hi)`` holding one target each;
    by default every qubit joins the block of its nearest target (ties go to
    the lower target).
    """

    source: ZMask
    target_effective: ZMask
    partition: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.source.n != self.target_effective.n:
            raise CompileError("source and target masks differ in size")
        if self.partition is not None:
            object.__setattr__(
                self, "partition", tuple((int(a), int(b)) for a, b in self.partition)
            )

    @property
    def n(self) -> int:
        return self.source.n

    def blocks(self) -> list[tuple[int, int]]:
        targets = sorted(q for q, b in enumerate(self.target_effective.bits, 1) if b)
        if not targets:
            raise CompileError("target observable is the identity")
        if self.partition is None:
            cuts = [(a + b) // 2 for a, b in zip(targets, targets[1:])]
            los = [1] + [c + 1 for c in cuts]
            his = cuts + [self.n]
            return list(zip(los, his))
        blocks = sorted(self.partition)
        covered = [q for lo, hi in blocks for q in range(lo, hi + 1)]
        if covered != list(range(1, self.n + 1)):
            raise CompileError(f"partition {blocks} does not tile 1..{self.n}")
        return blocks


def segment_decompose(r: ZMask) -> list[Segment]:
    segs: list[Segment] = []
    for q, b in enumerate(r.bits, 1):
        kind = Z_RUN if b else I_RUN
        if segs and segs[-1].kind == kind:
            segs[-1] = Segment(kind, segs[-1].start, q)
        else:
            segs.append(Segment(kind, q, q))
    return segs


def chain_cx(i: int, j: int, n: int) -> Circuit:
    """CX chain from ``i`` toward ``j``: ``CX(i, i+-1), ..., CX(j-+1, j)``."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise CircuitError(f"chain endpoints ({i}, {j}) outside 1..{n}")
    step = 1 if j > i else -1
    return Circuit(n, tuple(CxGate(q, q + step) for q in range(i, j, step)))


def weight_reduce(seg: Segment, t: int, n: int) -> Circuit:
    if seg.kind != Z_RUN:
        raise CompileError("weight reduction needs a Z run")
    if not seg.start <= t <= seg.end:
        raise CompileError(f"target {t} outside run {seg.start}..{seg.end}")
    return chain_cx(seg.start, t, n) + chain_cx(seg.end, t, n)


def location_shift(i: int, direction: int, n: int) -> Circuit:
    """Move ``Z`` on qubit ``i`` to ``i + direction`` (direction is +1 or -1)."""
    if direction not in (1, -1):
        raise CompileError("direction must be +1 or -1")
    j = i + direction
    if not (1 <= i <= n and 1 <= j <= n):
        raise CircuitError(f"no neighbour {j} for qubit {i} on {n} qubits")
    return Circuit(n, (CxGate(j, i), CxGate(i, j)))


def _compile_block(bits: list[int], lo: int, hi: int, t: int, n: int) -> list[CxGate]:
    """Gates moving every Z of ``bits[lo..hi]`` onto ``t``; ``bits`` is updated."""
    gates: list[CxGate] = []

    def runs():
        out, q = [], lo
        while q <= hi:
            if bits[q - 1]:
                s = q
                while q + 1 <= hi and bits[q]:
                    q += 1
                out.append([s, q])
            q += 1
        return out

    def collapse(run, keep):
        gates.extend(weight_reduce(Segment(Z_RUN, run[0], run[1]), keep, n).gates)
        for q in range(run[0], run[1] + 1):
            bits[q - 1] = 1 if q == keep else 0

    def walk(src, dst):
        step = 1 if dst > src else -1
        for q in range(src, dst, step):
            gates.extend(location_shift(q, step, n).gates)
            bits[q - 1], bits[q + step - 1] = 0, 1

    current = runs()
    if not current:
        raise CompileError(f"block {lo}..{hi} holds no Z to move onto qubit {t}")
    anchor = next((run for run in current if run[0] <= t <= run[1]), None)
    if anchor is None:
        dist = lambda run: min(abs(run[0] - t), abs(run[1] - t))
        run = min(current, key=lambda run: (dist(run), run[0]))
        end = run[1] if run[1] < t else run[0]
        collapse(run, end)
        walk(end, t)
        anchor = [t, t]
    rest = [run for run in runs() if run[1] < anchor[0] or run[0] > anchor[1]]
    rest.sort(key=lambda run: (run[0] - anchor[1] if run[0] > anchor[1] else anchor[0] - run[1], run[0]))
    for run in rest:
        if run[0] > anchor[1]:
            collapse(run, run[0])
            walk(run[0], anchor[1] + 1)
            anchor[1] = anchor[1] + 1
        else:
            collapse(run, run[1])
            walk(run[1], anchor[0] - 1)
            anchor[0] = anchor[0] - 1
        # the shifted Z may now touch a further run; absorb it
        while anchor[1] < hi and bits[anchor[1]]:
            anchor[1] += 1
        while anchor[0] > lo and bits[anchor[0] - 2]:
            anchor[0] -= 1
    collapse(anchor, t)
    return gates


def compile_mt(plan: MtPlan) -> tuple[Circuit, ZMask]:
    """Circuit ``U`` with ``U Z_source U^dag = Z_target`` and the effective mask.

    Within each block the nearest runs are processed first: a run is collapsed
    onto its endpoint facing the target run, that Z is shifted until it joins
    the target run, and finally the grown target run is collapsed onto the
    target qubit.
    """
    n = plan.n
    bits = list(plan.source.bits)
    targets = [q for q, b in enumerate(plan.target_effective.bits, 1) if b]
    gates: list[CxGate] = []
    for lo, hi in plan.blocks():
        inside = [t for t in targets if lo <= t <= hi]
        if len(inside) != 1:
            raise CompileError(f"block {lo}..{hi} must hold exactly one target, has {inside}")
        gates.extend(_compile_block(bits, lo, hi, inside[0], n))
    circuit = Circuit(n, tuple(gates))
    eff = conjugate_by_circuit(phi(plan.source), circuit)
    if eff != phi(plan.target_effective):
        raise CompileError(f"compiled circuit yields {eff}, not {plan.target_effective}")
    return circuit, plan.target_effective


def default_targets(source: ZMask, k: int) -> ZMask:
    """First qubit of each of ``k`` groups of Z runs.

    The first ``k - 1`` runs stand alone and the remaining runs form the last
    group, so ``ZIZIZI`` with ``k = 2`` targets qubits 1 and 3.
    """
    runs = [s for s in segment_decompose(source) if s.kind == Z_RUN]
    if not runs:
        raise CompileError("source observable is the identity")
    if not 1 <= k <= len(runs):
        raise CompileError(f"cannot target weight {k} with {len(runs)} Z runs")
    return ZMask.from_support([run.start for run in runs[:k]], source.n)


def plan_for(observable: str | ZMask, weight: int | None = None, targets: Sequence[int] | None = None) -> MtPlan:
    src = observable if isinstance(observable, ZMask) else ZMask.from_label(observable)
    if targets is not None:
        tgt = ZMask.from_support(targets, src.n)
    else:
        tgt = default_targets(src, weight or 1)
    return MtPlan(src, tgt)


ROTATION_FOR = {0: "", 1: "H", 2: "HSdg", 3: ""}


def basis_rotation(p: PauliString) -> tuple[list[str], ZMask]:
    """Per-qubit rotation labels taking ``p`` to a Z-type observable.

    ``"H"`` maps X to Z; ``"HSdg"`` applies S^dag then H and maps Y to Z.
    """
    return [ROTATION_FOR[d] for d in p.digits], ZMask(tuple(1 if d else 0 for d in p.digits))
