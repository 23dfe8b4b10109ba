"""Dense statevector simulation.

Conventions
-----------
* Qubit ``q`` is bit ``q`` of the basis index, so qubit 0 varies fastest.
* A gate's ``targets`` list its qubits from least to most significant: the
  local basis index of the gate is ``sum(bit(targets[i]) << i)``.
* ``kron(a, b)`` places ``b`` on the low qubits. Registers written left to right
  in Dirac notation therefore occupy descending qubit ranges.
* Permutation gates map basis ``|k>`` to ``|perm[k]>`` on their targets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ImpossibleOutcomeError

__all__ = [
    "QuantumState",
    "ScaledState",
    "GateOp",
    "Circuit",
    "CostRecord",
    "apply_gate",
    "shift_minus",
    "decompose_shift_to_mcx",
    "u_select_h",
    "u_h_N",
    "project_measure",
    "postselect",
    "gate_cost",
    "mcx",
    "unitary_gate",
    "permutation_gate",
    "synthesize_mcx",
    "circuit_to_text",
    "circuit_from_text",
    "UNITARITY_TOL",
    "IMPOSSIBLE_PROBABILITY",
]

UNITARITY_TOL = 1e-12
NORM_TOL = 1e-10
IMPOSSIBLE_PROBABILITY = 1e-300


# ---------------------------------------------------------------------------
# states


@dataclass
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"expected {1 << self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "QuantumState":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(np.log2(vec.size)))
        if 1 << n != vec.size:
            raise ValueError(f"vector length {vec.size} is not a power of two")
        if normalize:
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = vec / nrm
        return cls(n, vec)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "QuantumState":
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def product(cls, *states: "QuantumState") -> "QuantumState":
        """Tensor product; the first factor lands on the most significant qubits."""
        amps = np.ones(1, dtype=complex)
        for s in states:
            amps = np.kron(amps, s.amplitudes)
        return cls(sum(s.num_qubits for s in states), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "QuantumState":
        return QuantumState(self.num_qubits, self.amplitudes.copy())


@dataclass
class ScaledState:
    """Unit-norm quantum state plus the classical norm it stands for.

    The encoded (semantic) vector is ``scale * state.amplitudes``.
    """

    state: QuantumState
    scale: float

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if abs(self.state.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {self.state.norm()!r})")

    @classmethod
    def from_vector(cls, vec) -> "ScaledState":
        vec = np.asarray(vec, dtype=complex)
        nrm = float(np.linalg.norm(vec))
        if nrm == 0:
            raise ValueError("cannot encode the zero vector")
        return cls(QuantumState.from_vector(vec / nrm, normalize=False), nrm)

    @property
    def semantic(self) -> np.ndarray:
        return self.scale * self.state.amplitudes


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True, eq=False)
class GateOp:
    """A unitary acting on ``targets``, optionally conditioned on ``controls``.

    ``kind`` is ``"unitary"`` (dense ``matrix``) or ``"permutation"``
    (``perm`` table). ``controls`` holds ``(qubit, value)`` pairs; a gate with
    controls is the controlled variant. ``lowering`` optionally records an
    equivalent MCX network used for cost accounting.
    """

    kind: str
    targets: tuple[int, ...]
    matrix: np.ndarray | None = None
    perm: np.ndarray | None = None
    controls: tuple[tuple[int, int], ...] = ()
    label: str = ""
    lowering: tuple["GateOp", ...] | None = field(default=None, repr=False)

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)

    @property
    def is_controlled(self) -> bool:
        return bool(self.controls)

    def with_controls(self, extra: Sequence[tuple[int, int]]) -> "GateOp":
        lowering = None
        if self.lowering is not None:
            lowering = tuple(g.with_controls(extra) for g in self.lowering)
        return GateOp(
            self.kind, self.targets, self.matrix, self.perm,
            tuple(self.controls) + tuple(extra), self.label, lowering,
        )

    def local_matrix(self) -> np.ndarray:
        """Matrix on the targets only (controls ignored)."""
        if self.kind == "unitary":
            return self.matrix
        dim = len(self.perm)
        m = np.zeros((dim, dim), dtype=complex)
        m[self.perm, np.arange(dim)] = 1.0
        return m

    def inverse(self) -> "GateOp":
        if self.kind == "unitary":
            inv = GateOp("unitary", self.targets, self.matrix.conj().T, None, self.controls,
                         self.label + "^-1" if self.label else "")
            return inv
        perm = np.empty_like(self.perm)
        perm[self.perm] = np.arange(len(self.perm))
        lowering = None
        if self.lowering is not None:
            lowering = tuple(g.inverse() for g in reversed(self.lowering))
        return GateOp("permutation", self.targets, None, perm, self.controls,
                      self.label + "^-1" if self.label else "", lowering)

    def validate(self, num_qubits: int) -> None:
        qs = self.qubits
        if len(set(qs)) != len(qs):
            raise ValueError(f"gate {self.label or self.kind}: targets and controls overlap {qs}")
        if not self.targets:
            raise ValueError("gate has no target qubits")
        for q in qs:
            if not 0 <= q < num_qubits:
                raise IndexError(f"qubit {q} out of range for {num_qubits}-qubit state")
        for q, v in self.controls:
            if v not in (0, 1):
                raise ValueError(f"control value must be 0 or 1, got {v}")
        dim = 1 << len(self.targets)
        if self.kind == "unitary":
            m = self.matrix
            if m is None or m.shape != (dim, dim):
                raise ValueError(f"unitary must be {dim}x{dim}")
            err = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
            if err > UNITARITY_TOL:
                raise ValueError(f"matrix is not unitary (max deviation {err:.3e})")
        elif self.kind == "permutation":
            p = self.perm
            if p is None or len(p) != dim or sorted(p.tolist()) != list(range(dim)):
                raise ValueError("permutation table is not a bijection on the target space")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")


def unitary_gate(matrix, targets: Sequence[int], controls=(), label: str = "") -> GateOp:
    return GateOp("unitary", tuple(targets), np.asarray(matrix, dtype=complex), None,
                  tuple(controls), label)


def permutation_gate(perm, targets: Sequence[int], controls=(), label: str = "",
                     lowering=None) -> GateOp:
    return GateOp("permutation", tuple(targets), None, np.asarray(perm, dtype=np.int64),
                  tuple(controls), label, lowering)


def mcx(target: int, controls: Sequence[tuple[int, int]] = ()) -> GateOp:
    """Pauli-X on ``target`` conditioned on ``controls`` (possibly empty)."""
    return GateOp("permutation", (target,), None, np.array([1, 0]), tuple(controls), "X")


def _apply_inplace(amps: np.ndarray, n: int, g: GateOp) -> np.ndarray:
    t = amps.reshape((2,) * n) if n else amps
    idx: list = [slice(None)] * n
    for q, v in g.controls:
        idx[n - 1 - q] = v
    idx_t = tuple(idx)
    sub = t[idx_t]
    free = [q for q in range(n - 1, -1, -1) if q not in dict(g.controls)]
    axis_of = {q: a for a, q in enumerate(free)}
    src = [axis_of[q] for q in reversed(g.targets)]
    moved = np.moveaxis(sub, src, list(range(len(src))))
    shape = moved.shape
    k = len(g.targets)
    block = moved.reshape(1 << k, -1)
    if g.kind == "unitary":
        new = g.matrix @ block
    else:
        inv = np.empty_like(g.perm)
        inv[g.perm] = np.arange(len(g.perm))
        new = block[inv]
    new = np.moveaxis(new.reshape(shape), list(range(len(src))), src)
    if g.controls:
        t[idx_t] = new
    else:
        t[...] = new
    return amps


def apply_gate(state: QuantumState, g: GateOp, validate: bool = True) -> QuantumState:
    if validate:
        g.validate(state.num_qubits)
    amps = state.amplitudes.copy()
    _apply_inplace(amps, state.num_qubits, g)
    return QuantumState(state.num_qubits, amps)


# ---------------------------------------------------------------------------
# circuits


@dataclass
class CostRecord:
    single_qubit: int = 0
    cnot: int = 0
    mcx: int = 0

    @property
    def elementary(self) -> int:
        return self.single_qubit + self.cnot

    def __add__(self, other: "CostRecord") -> "CostRecord":
        return CostRecord(self.single_qubit + other.single_qubit, self.cnot + other.cnot,
                          self.mcx + other.mcx)


@dataclass
class Circuit:
    num_qubits: int
    gates: list[GateOp] = field(default_factory=list)

    def append(self, g: GateOp) -> "Circuit":
        g.validate(self.num_qubits)
        self.gates.append(g)
        return self

    def extend(self, gates: Iterable[GateOp]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.inverse() for g in reversed(self.gates)])

    def remapped(self, mapping: Sequence[int], num_qubits: int) -> "Circuit":
        """Relabel qubit ``q`` as ``mapping[q]`` inside a ``num_qubits`` register."""
        return Circuit(num_qubits, [_remap(g, mapping) for g in self.gates])

    def controlled(self, controls: Sequence[tuple[int, int]]) -> "Circuit":
        return Circuit(self.num_qubits, [g.with_controls(controls) for g in self.gates])

    def apply(self, state: QuantumState) -> QuantumState:
        if state.num_qubits != self.num_qubits:
            raise ValueError(f"circuit acts on {self.num_qubits} qubits, state has {state.num_qubits}")
        amps = state.amplitudes.copy()
        for g in self.gates:
            _apply_inplace(amps, self.num_qubits, g)
        return QuantumState(self.num_qubits, amps)

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.num_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for k in range(dim):
            amps = np.zeros(dim, dtype=complex)
            amps[k] = 1.0
            for g in self.gates:
                _apply_inplace(amps, self.num_qubits, g)
            out[:, k] = amps
        return out


def _remap(g: GateOp, mapping: Sequence[int]) -> GateOp:
    lowering = None
    if g.lowering is not None:
        lowering = tuple(_remap(h, mapping) for h in g.lowering)
    return GateOp(g.kind, tuple(mapping[q] for q in g.targets), g.matrix, g.perm,
                  tuple((mapping[q], v) for q, v in g.controls), g.label, lowering)


# ---------------------------------------------------------------------------
# shift operator and Hadamard-product multiplexers


def _shift_perm(n: int, amount: int) -> np.ndarray:
    dim = 1 << n
    return (np.arange(dim) - amount) % dim


def _decrement_network(qubits: Sequence[int]) -> list[GateOp]:
    """MCX network for |k> -> |k-1> on ``qubits`` (LSB first).

    Bit j flips exactly when every lower bit is 0, so the highest bit is
    handled first while the lower bits still hold their input values.
    """
    gates = []
    for j in range(len(qubits) - 1, -1, -1):
        gates.append(mcx(qubits[j], [(qubits[i], 0) for i in range(j)]))
    return gates


def shift_minus(n: int, qubits: Sequence[int] | None = None, power: int = 1) -> GateOp:
    """Cyclic decrement ``|k> -> |k - power mod 2^n>`` as a permutation gate."""
    if n < 1:
        raise ValueError(f"shift needs at least one qubit, got n={n}")
    qubits = tuple(range(n)) if qubits is None else tuple(qubits)
    if len(qubits) != n:
        raise ValueError("qubit list length must equal n")
    power %= 1 << n
    lowering = None
    if power and power & (power - 1) == 0:
        # a power-of-two decrement only touches the bits at and above log2(power)
        b = power.bit_length() - 1
        lowering = tuple(_decrement_network(qubits[b:]))
    label = "S-" if power == 1 else f"S-^{power}"
    return permutation_gate(_shift_perm(n, power), qubits, label=label, lowering=lowering)


def decompose_shift_to_mcx(n: int) -> Circuit:
    if n < 1:
        raise ValueError(f"shift needs at least one qubit, got n={n}")
    return Circuit(n, _decrement_network(list(range(n))))


def u_h_N(n: int, N: int) -> Circuit:
    """Hadamard-power multiplexer on N registers of n qubits.

    Register ``N`` (the last, least significant one) is the control; each of
    the first ``N - 1`` registers is shifted down by the control value. The
    multiplexer is realized bit by bit: control bit ``b`` applies the shift by
    ``2**b``.
    """
    if N < 1 or n < 1:
        raise ValueError(f"need n >= 1 and N >= 1, got n={n}, N={N}")
    c = Circuit(n * N)
    for b in range(n):
        for r in range(N - 1):
            # register r (0 = most significant) occupies qubits [(N-1-r)n, (N-r)n)
            lo = (N - 1 - r) * n
            g = shift_minus(n, range(lo, lo + n), power=1 << b)
            c.append(g.with_controls([(b, 1)]))
    return c


def u_select_h(n: int) -> Circuit:
    """Two-register Hadamard-product multiplexer ``sum_k S^k (x) |k><k|``."""
    return u_h_N(n, 2)


# ---------------------------------------------------------------------------
# measurement


def project_measure(state: QuantumState, register: Sequence[int], outcome,
                    keep_register: bool = False):
    """Project ``register`` onto the basis state ``outcome``.

    ``outcome`` is an int (bit i belongs to ``register[i]``) or a bit string
    written most-significant first. Returns ``(post_state, probability)``; the
    post state is renormalized and, unless ``keep_register``, the measured
    qubits are removed.
    """
    n = state.num_qubits
    register = list(register)
    if isinstance(outcome, str):
        if len(outcome) != len(register):
            raise ValueError("outcome bit string length must match register size")
        outcome = int(outcome, 2)
    for q in register:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range")
    if len(set(register)) != len(register):
        raise ValueError("duplicate qubits in register")
    t = state.amplitudes.reshape((2,) * n)
    idx: list = [slice(None)] * n
    for i, q in enumerate(register):
        idx[n - 1 - q] = (outcome >> i) & 1
    sub = t[tuple(idx)]
    prob = float(np.vdot(sub, sub).real)
    if prob < IMPOSSIBLE_PROBABILITY:
        raise ImpossibleOutcomeError(
            f"outcome {outcome} on qubits {register} has probability {prob:.3e}"
        )
    if keep_register:
        amps = np.zeros_like(state.amplitudes).reshape((2,) * n)
        amps[tuple(idx)] = sub / np.sqrt(prob)
        return QuantumState(n, amps.reshape(-1)), prob
    reduced = np.ascontiguousarray(sub).reshape(-1) / np.sqrt(prob)
    return QuantumState(n - len(register), reduced), prob


def postselect(state: QuantumState, register: Sequence[int]):
    """Project ``register`` on all zeros and drop it."""
    return project_measure(state, register, 0)


# ---------------------------------------------------------------------------
# permutation synthesis and gate-cost lowering


def synthesize_mcx(perm: Sequence[int], qubits: Sequence[int] | None = None) -> list[GateOp]:
    """Transformation-based synthesis of a permutation into positive-control MCX gates."""
    f = np.array(perm, dtype=np.int64)
    dim = len(f)
    k = dim.bit_length() - 1
    if 1 << k != dim:
        raise ValueError("permutation length must be a power of two")
    qubits = list(range(k)) if qubits is None else list(qubits)
    found: list[tuple[int, int]] = []  # (control mask, target bit), applied on the output side

    def toggle(mask: int, bit: int):
        hit = (f & mask) == mask
        f[hit] ^= 1 << bit
        found.append((mask, bit))

    for i in range(dim):
        y = int(f[i])
        if y == i:
            continue
        for bit in range(k):
            if (i >> bit) & 1 and not (y >> bit) & 1:
                toggle(y, bit)
                y |= 1 << bit
        for bit in range(k):
            if not (i >> bit) & 1 and (y >> bit) & 1:
                toggle(i, bit)
                y &= ~(1 << bit)
    gates = []
    for mask, bit in reversed(found):
        ctrls = [(qubits[b], 1) for b in range(k) if (mask >> b) & 1]
        gates.append(mcx(qubits[bit], ctrls))
    return gates


# Elementary cost of an X gate with k controls (Toffoli = 6 CNOT + 9 one-qubit gates;
# k >= 3 uses 4(k-2) Toffolis with borrowed idle qubits). Each 0-valued control adds
# two one-qubit X gates.
TOFFOLI_CNOT = 6
TOFFOLI_SINGLE = 9


def _mcx_cost(num_controls: int, num_negative: int) -> CostRecord:
    k = num_controls
    extra = 2 * num_negative
    if k == 0:
        return CostRecord(1 + extra, 0, 0)
    if k == 1:
        return CostRecord(extra, 1, 0)
    tof = 1 if k == 2 else 4 * (k - 2)
    return CostRecord(TOFFOLI_SINGLE * tof + extra, TOFFOLI_CNOT * tof, 1)


def _dense_cost(num_qubits: int, diagonal: bool) -> CostRecord:
    m = num_qubits
    if diagonal:
        # uniformly controlled Rz cascade
        return CostRecord(1 << m, (1 << m) - 2 if m > 1 else 0, 0)
    if m == 1:
        return CostRecord(1, 0, 0)
    cnots = int(np.ceil(23 / 48 * 4**m - 1.5 * 2**m + 4 / 3))
    return CostRecord(4**m, cnots, 0)


def _is_x(g: GateOp) -> bool:
    return g.kind == "permutation" and len(g.targets) == 1 and list(g.perm) == [1, 0]


def _is_identity(g: GateOp) -> bool:
    return g.kind == "permutation" and np.array_equal(g.perm, np.arange(len(g.perm)))


def gate_cost(c: Circuit | Iterable[GateOp]) -> CostRecord:
    """Elementary-gate counts after lowering every gate to one- and two-qubit gates."""
    gates = c.gates if isinstance(c, Circuit) else list(c)
    total = CostRecord()
    for g in gates:
        total = total + _gate_cost(g)
    return total


def _gate_cost(g: GateOp) -> CostRecord:
    if g.kind == "permutation":
        if _is_identity(g):
            return CostRecord()
        if _is_x(g):
            neg = sum(1 for _, v in g.controls if v == 0)
            return _mcx_cost(len(g.controls), neg)
        lowered = g.lowering
        if lowered is None:
            lowered = tuple(h.with_controls(g.controls) for h in synthesize_mcx(g.perm, g.targets))
        return gate_cost(lowered)
    m = g.matrix
    diagonal = bool(np.allclose(m, np.diag(np.diag(m))))
    if not g.controls and len(g.targets) == 1:
        return CostRecord(1, 0, 0)
    neg = sum(1 for _, v in g.controls if v == 0)
    rec = _dense_cost(len(g.targets) + len(g.controls), diagonal)
    return rec + CostRecord(2 * neg, 0, 0)


# ---------------------------------------------------------------------------
# text serialization
#
#   QUBITS <n>
#   PERM <t0,t1,...> <q:v,...|-> <p0,p1,...> [label]
#   UNITARY <t0,t1,...> <q:v,...|-> <re:im;re:im;...> [label]   (row-major)
#
# Lines starting with '#' are comments.


def _fmt_controls(controls) -> str:
    return ",".join(f"{q}:{v}" for q, v in controls) if controls else "-"


def circuit_to_text(c: Circuit) -> str:
    lines = [f"QUBITS {c.num_qubits}"]
    for g in c.gates:
        tg = ",".join(str(q) for q in g.targets)
        ct = _fmt_controls(g.controls)
        if g.kind == "permutation":
            payload = ",".join(str(int(v)) for v in g.perm)
            kind = "PERM"
        else:
            payload = ";".join(f"{float(z.real)!r}:{float(z.imag)!r}" for z in g.matrix.reshape(-1))
            kind = "UNITARY"
        line = f"{kind} {tg} {ct} {payload}"
        if g.label:
            line += f" {g.label}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    circuit = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "QUBITS":
            circuit = Circuit(int(parts[1]))
            continue
        if circuit is None:
            raise ValueError("missing QUBITS header")
        if len(parts) < 4:
            raise ValueError(f"malformed gate line: {raw!r}")
        kind, tg, ct, payload = parts[:4]
        label = parts[4] if len(parts) > 4 else ""
        targets = tuple(int(q) for q in tg.split(","))
        controls = () if ct == "-" else tuple(
            (int(a), int(b)) for a, b in (item.split(":") for item in ct.split(","))
        )
        if kind == "PERM":
            g = permutation_gate([int(v) for v in payload.split(",")], targets, controls, label)
        elif kind == "UNITARY":
            vals = [complex(float(a), float(b)) for a, b in (z.split(":") for z in payload.split(";"))]
            dim = 1 << len(targets)
            g = unitary_gate(np.array(vals).reshape(dim, dim), targets, controls, label)
        else:
            raise ValueError(f"unknown gate kind {kind!r}")
        circuit.append(g)
    if circuit is None:
        raise ValueError("empty circuit text")
    return circuit


def all_basis_bitstrings(n: int):
    return ["".join(bits) for bits in itertools.product("01", repeat=n)]
