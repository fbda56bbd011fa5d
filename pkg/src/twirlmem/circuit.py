"""Nearest-neighbour CX circuits on a line of qubits.

Qubits are 1-based. A :class:`Circuit` stores gates in time order: the first
gate listed is the first to act on the state.

Text format::

    qubits 6
    CX 5 4
    CX 3 4

A layered dump separates ASAP layers with blank lines; the parser accepts both.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class CxGate:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise CircuitError(f"CX control and target coincide ({self.control})")
        if abs(self.control - self.target) != 1:
            raise CircuitError(
                f"CX({self.control},{self.target}) is not nearest-neighbour"
            )
        if min(self.control, self.target) < 1:
            raise CircuitError("qubit indices are 1-based")

    @property
    def qubits(self) -> tuple[int, int]:
        return (self.control, self.target)

    def __str__(self):
        return f"CX {self.control} {self.target}"


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[CxGate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) > self.n:
                raise CircuitError(f"{g} acts outside {self.n} qubits")

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        if other.n != self.n:
            raise CircuitError("cannot concatenate circuits of different width")
        return Circuit(self.n, self.gates + other.gates)

    def inverse(self) -> Circuit:
        # CX is self-inverse
        return Circuit(self.n, self.gates[::-1])

    def layer_indices(self) -> list[int]:
        """ASAP layer (0-based) of each gate."""
        busy = [0] * (self.n + 1)
        out = []
        for g in self.gates:
            layer = max(busy[g.control], busy[g.target])
            out.append(layer)
            busy[g.control] = busy[g.target] = layer + 1
        return out

    def layers(self) -> list[list[CxGate]]:
        idx = self.layer_indices()
        layers: list[list[CxGate]] = [[] for _ in range(max(idx, default=-1) + 1)]
        for g, k in zip(self.gates, idx):
            layers[k].append(g)
        return layers

    @property
    def depth(self) -> int:
        return max((k + 1 for k in self.layer_indices()), default=0)

    def to_text(self, layered: bool = False) -> str:
        lines = [f"qubits {self.n}"]
        if layered:
            for k, layer in enumerate(self.layers()):
                if k:
                    lines.append("")
                lines.extend(str(g) for g in layer)
        else:
            lines.extend(str(g) for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        n = None
        gates = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            head = parts[0].lower()
            if head == "qubits" and len(parts) == 2:
                n = int(parts[1])
            elif head == "cx" and len(parts) == 3:
                gates.append(CxGate(int(parts[1]), int(parts[2])))
            else:
                raise CircuitError(f"unparseable circuit line: {raw!r}")
        if n is None:
            raise CircuitError("missing 'qubits <n>' header")
        return cls(n, gates)


def circuit_of(n: int, pairs: Iterable[tuple[int, int]]) -> Circuit:
    return Circuit(n, tuple(CxGate(c, t) for c, t in pairs))
