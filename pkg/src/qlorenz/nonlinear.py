"""Nonlinear state preparation through Hadamard products.

A monomial vector such as ``(x, y, z, xy, xz, ...)`` is produced from several
copies of the normalized input state. Each LCU term permutes the copies so the
right source amplitudes line up, multiplies them elementwise with a Hadamard
power multiplexer, and the LCU sums the terms.

Register layout of the data block (``R`` registers of ``n`` qubits each):
register ``r`` (0 = most significant) sits on qubits ``[(R-1-r)n, (R-r)n)``.
The last register is the target and carries the result; the others are copy
registers that get post-selected on ``|0...0>``. The LCU register sits above
the data block.

Degree-``d`` terms use the lowest ``d`` registers. The ``R - d`` unused copies
still hold the input and are projected on ``|0>``; a transposition ``0 <-> p``
first moves the largest component ``p`` to index 0, so the projection
contributes the known factor ``c_p / r``. The LCU weights and signs absorb
that factor, which makes every term carry the same overall constant.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import augmented_size
from .errors import UnrealizableSpecError
from .qsim import (
    Circuit,
    GateOp,
    QuantumState,
    ScaledState,
    permutation_gate,
    postselect,
    u_h_N,
    unitary_gate,
)

__all__ = [
    "MonomialSpec",
    "PermutationGateSet",
    "NonlinearPrep",
    "UNLCircuit",
    "lorenz_monomial_specs",
    "synthesize_permutations",
    "lcu_prep",
    "lcu_select",
    "lcu_circuit",
    "build_u_nl",
    "prepare_nonlinear_scaled",
    "nonlinear_map",
    "TABULATED_FIRST_ORDER_G0",
    "TABULATED_FIRST_ORDER_G1",
    "apply_tabulated_first_order_gates",
]

X, Y, Z = 0, 1, 2


@dataclass(frozen=True)
class MonomialSpec:
    target_index: int
    factor_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "factor_indices", tuple(int(i) for i in self.factor_indices))
        if not 1 <= len(self.factor_indices) <= 3:
            raise ValueError(f"degree must be 1..3, got {len(self.factor_indices)}")

    @property
    def degree(self) -> int:
        return len(self.factor_indices)

    def evaluate(self, vec: np.ndarray):
        return np.prod([vec[i] for i in self.factor_indices])


def lorenz_monomial_specs(order: int, variant: str = "exact") -> list[MonomialSpec]:
    """Monomials of the augmented vector, in its slot order."""
    if order == 1:
        facs = [(X,), (Y,), (Z,), (X, Y), (X, Z)]
    elif order == 2:
        facs = [(X,), (Y,), (Z,), (X, Y), (X, Z), (Y, Z),
                (X, Y, Y), (X, X, Y), (X, X, Z), (X, Y, Z)]
        if variant == "exact":
            facs += [(X, X), (Y, Y)]
        elif variant != "reduced":
            raise ValueError(f"unknown coefficient variant {variant!r}")
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return [MonomialSpec(i, f) for i, f in enumerate(facs)]


@dataclass(frozen=True, eq=False)
class PermutationGateSet:
    """Per-register source tables for one LCU term.

    ``tables[k][i]`` is the input index whose amplitude lands on position
    ``i`` of register ``k``; register 0 is the target, 1.. are copies. The
    gate applied on register ``k`` is the inverse of that table.
    """

    degree: int
    specs: tuple[MonomialSpec, ...]
    tables: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.tables[0])

    @property
    def target_indices(self) -> tuple[int, ...]:
        return tuple(s.target_index for s in self.specs)

    def gate_perms(self) -> list[np.ndarray]:
        out = []
        for t in self.tables:
            inv = np.empty_like(t)
            inv[t] = np.arange(len(t))
            out.append(inv)
        return out

    def composite(self) -> np.ndarray:
        """Permutation matrix of the gate tensor product (first copy most significant)."""
        mats = []
        for perm in self.gate_perms()[::-1]:
            m = np.zeros((len(perm), len(perm)))
            m[perm, np.arange(len(perm))] = 1.0
            mats.append(m)
        out = np.ones((1, 1))
        for m in mats:
            out = np.kron(out, m)
        return out

    def evaluate(self, vec: np.ndarray) -> np.ndarray:
        """Elementwise product of the permuted copies."""
        vec = np.asarray(vec)
        out = np.ones(self.dim, dtype=vec.dtype)
        for t in self.tables:
            out = out * vec[t]
        return out


def _orderings(factors: tuple[int, ...]) -> list[tuple[int, ...]]:
    return sorted(set(itertools.permutations(factors)))


def _assign(specs: Sequence[MonomialSpec]) -> list[tuple[int, ...]] | None:
    """Order every monomial's factors so no copy reuses a source (backtracking)."""
    if not specs:
        return []
    d = specs[0].degree
    used = [set() for _ in range(d)]
    chosen: list[tuple[int, ...]] = []

    def rec(i: int) -> bool:
        if i == len(specs):
            return True
        for o in _orderings(specs[i].factor_indices):
            if all(o[k] not in used[k] for k in range(d)):
                for k in range(d):
                    used[k].add(o[k])
                chosen.append(o)
                if rec(i + 1):
                    return True
                chosen.pop()
                for k in range(d):
                    used[k].discard(o[k])
        return False

    return chosen if rec(0) else None


def _complete(specs, orderings, dim: int, support: Sequence[int]) -> list[np.ndarray] | None:
    """Extend partial source maps to bijections that zero every non-target slot."""
    d = specs[0].degree
    support = list(support)
    targets = [s.target_index for s in specs]
    free = [i for i in range(dim) if i not in set(targets)]
    zeros = [i for i in range(dim) if i not in set(support)]
    tables = []
    offset = 0
    for k in range(d):
        table = -np.ones(dim, dtype=np.int64)
        for s, o in zip(specs, orderings):
            table[s.target_index] = o[k]
        used = {o[k] for o in orderings}
        spare = [i for i in support if i not in used]
        if spare and d == 1:
            return None  # a lone copy has no zero partner to cancel leftovers
        if offset + len(spare) > len(free):
            return None
        # leftovers of different copies go to disjoint slots, so each slot meets a zero
        for pos, src in zip(free[offset:offset + len(spare)], spare):
            table[pos] = src
        offset += len(spare)
        rest = iter(zeros)
        for pos in range(dim):
            if table[pos] < 0:
                table[pos] = next(rest)
        tables.append(table)
    return tables


def _realize(specs, dim, support):
    orderings = _assign(specs)
    if orderings is None:
        return None
    tables = _complete(specs, orderings, dim, support)
    if tables is None:
        return None
    return PermutationGateSet(specs[0].degree, tuple(specs), tuple(tables))


def synthesize_permutations(
    specs: Sequence[MonomialSpec],
    n: int,
    split: bool = True,
    support: Sequence[int] = (X, Y, Z),
) -> list[PermutationGateSet]:
    """Group monomials into LCU terms and build their permutation tables.

    Monomials of equal degree share a term when a consistent set of per-copy
    bijections exists. With ``split=False`` a degree class that needs more
    than one term raises ``UnrealizableSpecError``.
    """
    dim = 1 << n
    targets = [s.target_index for s in specs]
    if len(set(targets)) != len(targets):
        raise ValueError("target indices must be unique")
    for s in specs:
        if not 0 <= s.target_index < dim:
            raise ValueError(f"target index {s.target_index} outside a {dim}-slot register")
        if any(f not in set(support) for f in s.factor_indices):
            raise ValueError(f"factor outside the input support in {s}")
    out: list[PermutationGateSet] = []
    for d in sorted({s.degree for s in specs}):
        members = [s for s in specs if s.degree == d]
        whole = _realize(members, dim, support)
        if whole is not None:
            out.append(whole)
            continue
        if not split:
            raise UnrealizableSpecError(
                f"degree-{d} monomials {[s.target_index for s in members]} cannot share one gate set"
            )
        groups: list[list[MonomialSpec]] = []
        for s in members:
            for g in groups:
                if _realize(g + [s], dim, support) is not None:
                    g.append(s)
                    break
            else:
                if _realize([s], dim, support) is None:
                    raise UnrealizableSpecError(f"monomial {s} cannot be realized on its own")
                groups.append([s])
        out.extend(_realize(g, dim, support) for g in groups)
    return out


# ---------------------------------------------------------------------------
# LCU pieces


def _lcu_width(k: int) -> int:
    return int(np.ceil(np.log2(k))) if k > 1 else 0


def _householder_to(col: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is ``col`` (unit vector)."""
    dim = len(col)
    e0 = np.zeros(dim)
    e0[0] = 1.0
    u = e0 - col
    nu = np.linalg.norm(u)
    if nu < 1e-15:
        return np.eye(dim)
    u = u / nu
    return np.eye(dim) - 2.0 * np.outer(u, u)


def lcu_prep(coeffs: Sequence[float], qubits: Sequence[int] | None = None) -> GateOp | None:
    """State preparation ``|0> -> sum_j sqrt(a_j / a) |j>``; ``None`` when K = 1."""
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("need at least one coefficient")
    if np.any(~(a > 0)):
        raise ValueError(f"LCU coefficients must be positive, got {a}")
    m = _lcu_width(a.size)
    if m == 0:
        return None
    col = np.zeros(1 << m)
    col[: a.size] = np.sqrt(a / a.sum())
    qubits = tuple(range(m)) if qubits is None else tuple(qubits)
    return unitary_gate(_householder_to(col), qubits, label="prep")


def lcu_select(terms: Sequence[Circuit]) -> Circuit:
    """Multiplexer applying ``terms[j]`` when the LCU register (above the data) reads ``j``."""
    if not terms:
        raise ValueError("need at least one term")
    width = terms[0].num_qubits
    if any(t.num_qubits != width for t in terms):
        raise ValueError("all LCU terms must act on the same register width")
    m = _lcu_width(len(terms))
    out = Circuit(width + m)
    for j, term in enumerate(terms):
        ctrls = [(width + b, (j >> b) & 1) for b in range(m)]
        for g in term.gates:
            out.append(g.with_controls(ctrls))
    return out


def lcu_circuit(coeffs: Sequence[float], terms: Sequence[Circuit]) -> Circuit:
    """prep, select, prep^dagger; the LCU-zero block equals ``sum a_j U_j / sum a_j``."""
    select = lcu_select(terms)
    width = terms[0].num_qubits
    m = select.num_qubits - width
    prep = lcu_prep(coeffs, range(width, width + m))
    out = Circuit(select.num_qubits)
    if prep is not None:
        out.append(prep)
    out.extend(select.gates)
    if prep is not None:
        out.append(prep.inverse())
    return out


# ---------------------------------------------------------------------------
# the nonlinear preparation operator


def _pivot(vec: np.ndarray, support: Sequence[int]) -> int:
    return int(max(support, key=lambda i: (abs(vec[i]), -i)))


@dataclass(frozen=True, eq=False)
class NonlinearPrep:
    """Term structure of the nonlinear operator for one discretization order."""

    order: int
    variant: str
    groups: tuple[PermutationGateSet, ...]
    support: tuple[int, ...] = (X, Y, Z)

    @property
    def register_qubits(self) -> int:
        return augmented_size(self.order).bit_length() - 1

    @property
    def num_registers(self) -> int:
        return max(g.degree for g in self.groups)

    @property
    def num_terms(self) -> int:
        return len(self.groups)

    @property
    def lcu_qubits(self) -> int:
        return _lcu_width(self.num_terms)

    @property
    def data_qubits(self) -> int:
        return self.num_registers * self.register_qubits

    @property
    def num_qubits(self) -> int:
        return self.data_qubits + self.lcu_qubits

    def register(self, r: int) -> list[int]:
        n, R = self.register_qubits, self.num_registers
        return list(range((R - 1 - r) * n, (R - r) * n))

    @property
    def target(self) -> list[int]:
        return self.register(self.num_registers - 1)

    @property
    def copy_qubits(self) -> list[int]:
        return list(range(self.register_qubits, self.data_qubits))

    @property
    def lcu(self) -> list[int]:
        return list(range(self.data_qubits, self.num_qubits))

    def coefficients(self, vec: np.ndarray, scale: float = 1.0):
        """Pivot, LCU weights, term signs and the common term constant.

        ``vec`` is the semantic input (any vector whose support entries are the
        state); ``scale`` is its norm. Every term then contributes
        ``const * monomials`` with ``const = |c_p|^(R-1) / (A * scale^R)``.
        """
        vec = np.asarray(vec)
        p = _pivot(vec, self.support)
        cp = float(np.real(vec[p]))
        if cp == 0.0:
            raise ValueError("cannot prepare monomials of the zero state")
        R = self.num_registers
        weights = np.array([abs(cp) ** (g.degree - 1) for g in self.groups])
        signs = np.array([np.sign(cp) ** (R - g.degree) for g in self.groups])
        const = abs(cp) ** (R - 1) / (weights.sum() * scale**R)
        return p, weights, signs, const

    def term_circuit(self, t: int, pivot: int = 0, sign: float = 1.0) -> Circuit:
        g = self.groups[t]
        n, R = self.register_qubits, self.num_registers
        c = Circuit(self.data_qubits)
        for r in range(R - g.degree):
            if pivot != 0:
                swap = np.arange(1 << n)
                swap[0], swap[pivot] = pivot, 0
                c.append(permutation_gate(swap, self.register(r), label=f"pivot{pivot}"))
        for k, perm in enumerate(g.gate_perms()):
            if not np.array_equal(perm, np.arange(len(perm))):
                c.append(permutation_gate(perm, self.register(R - 1 - k), label=f"G{t}.{k}"))
        if g.degree > 1:
            c.extend(u_h_N(n, g.degree).gates)
        if sign < 0:
            c.append(unitary_gate(-np.eye(2), [0], label="sign"))
        return c

    def circuit(self, pivot: int, weights, signs) -> Circuit:
        terms = [self.term_circuit(t, pivot, signs[t]) for t in range(self.num_terms)]
        return lcu_circuit(weights, terms)

    def direct(self, vec: np.ndarray, scale: float = 1.0) -> np.ndarray:
        """Post-selected (unnormalized) target amplitudes without simulating ancillas."""
        vec = np.asarray(vec)
        _, _, _, const = self.coefficients(vec, scale)
        out = np.zeros(self.groups[0].dim, dtype=complex)
        for g in self.groups:
            out += g.evaluate(vec)
        return const * out


@dataclass(frozen=True, eq=False)
class UNLCircuit:
    circuit: Circuit
    prep: NonlinearPrep
    pivot: int
    weights: np.ndarray
    signs: np.ndarray
    constant: float


_PREP_CACHE: dict[tuple[int, str], NonlinearPrep] = {}


def nonlinear_prep(order: int, variant: str = "exact") -> NonlinearPrep:
    key = (order, variant)
    if key not in _PREP_CACHE:
        specs = lorenz_monomial_specs(order, variant)
        n = augmented_size(order).bit_length() - 1
        groups = synthesize_permutations(specs, n)
        _PREP_CACHE[key] = NonlinearPrep(order, variant, tuple(groups))
    return _PREP_CACHE[key]


def build_u_nl(order: int, vec=None, scale: float | None = None,
               variant: str = "exact") -> UNLCircuit:
    """LCU circuit over (LCU) x (copies) x (target) for the given input.

    Without ``vec`` the circuit is built for unit weights and no pivot.
    """
    prep = nonlinear_prep(order, variant)
    if vec is None:
        w = np.ones(prep.num_terms)
        s = np.ones(prep.num_terms)
        return UNLCircuit(prep.circuit(0, w, s), prep, 0, w, s, float("nan"))
    vec = np.asarray(vec)
    scale = float(np.linalg.norm(vec)) if scale is None else float(scale)
    p, w, s, const = prep.coefficients(vec, scale)
    return UNLCircuit(prep.circuit(p, w, s), prep, p, w, s, const)


def _input_vector(s: ScaledState, order: int) -> np.ndarray:
    dim = augmented_size(order)
    if s.state.amplitudes.size != dim:
        raise ValueError(f"expected a {dim}-slot state, got {s.state.amplitudes.size}")
    return s.semantic


def prepare_nonlinear_scaled(s: ScaledState, order: int, variant: str = "exact"):
    """Run the full nonlinear-preparation circuit and recover the output scale.

    Returns ``(ScaledState of the monomial vector, success probability)``.
    """
    vec = _input_vector(s, order)
    u = build_u_nl(order, vec, s.scale, variant)
    prep = u.prep
    psi = s.state
    full = QuantumState.product(
        QuantumState.basis(prep.lcu_qubits, 0) if prep.lcu_qubits else QuantumState.basis(0),
        *[psi] * prep.num_registers,
    )
    out = u.circuit.apply(full)
    out, prob = postselect(out, prep.copy_qubits + prep.lcu)
    scale = np.sqrt(prob) / u.constant
    return ScaledState(out, float(scale)), prob


def nonlinear_map(s: ScaledState, order: int, variant: str = "exact"):
    """Same result as ``prepare_nonlinear_scaled`` from the post-selected map alone."""
    vec = _input_vector(s, order)
    prep = nonlinear_prep(order, variant)
    branch = prep.direct(vec, s.scale)
    prob = float(np.vdot(branch, branch).real)
    _, _, _, const = prep.coefficients(vec, s.scale)
    st = QuantumState.from_vector(branch)
    return ScaledState(st, float(np.sqrt(prob) / const)), prob


# ---------------------------------------------------------------------------
# Tabulated first-order gate pair, kept for comparison. Applied to (x, y, z, 0, ...)
# the pair produces xy in slots 3 and 4 and never forms xz.

TABULATED_FIRST_ORDER_G0 = np.array([
    [0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 1],
])

TABULATED_FIRST_ORDER_G1 = np.array([
    [0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1],
])


def apply_tabulated_first_order_gates(s3) -> np.ndarray:
    """Hadamard product of the tabulated gate pair applied to ``(x, y, z, 0, ...)``."""
    v = np.zeros(8)
    v[:3] = s3
    return (TABULATED_FIRST_ORDER_G1 @ v) * (TABULATED_FIRST_ORDER_G0 @ v)
