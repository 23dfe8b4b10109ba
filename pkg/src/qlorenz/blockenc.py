"""SVD-based block encoding of a non-unitary matrix with one ancilla qubit.

With ``A = Vd @ diag(s) @ W`` and ``a = max(s)``, write ``s / a = cos(theta)``.
Then ``A / a`` is the average of the unitaries ``Vd diag(exp(+i theta)) W`` and
``Vd diag(exp(-i theta)) W``. A Hadamard on the ancilla selects between the
two, which puts ``A / a`` in the ancilla-zero block.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._io import text_out
from .dynamics import LorenzParams, TimeAdvanceMatrix, build_time_advance
from .errors import ImpossibleOutcomeError, NothingToEncodeError
from .qsim import (
    IMPOSSIBLE_PROBABILITY,
    CostRecord,
    GateOp,
    QuantumState,
    ScaledState,
    _dense_cost,
    apply_gate,
    postselect,
    unitary_gate,
)

__all__ = [
    "SVDFactors",
    "BlockEncoding",
    "svd",
    "split_unitaries",
    "assemble_block_encoding",
    "apply_block_encoded",
    "block_encoded_map",
    "sigma_max_curve",
    "write_sigma_max_csv",
    "block_encoding_cost",
]

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class SVDFactors:
    """``source = Vd @ diag(singular_values) @ W``."""

    Vd: np.ndarray
    singular_values: np.ndarray
    W: np.ndarray
    source: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.Vd * self.singular_values) @ self.W


def svd(m: TimeAdvanceMatrix | np.ndarray) -> SVDFactors:
    a = m.entries if isinstance(m, TimeAdvanceMatrix) else np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a)
    return SVDFactors(u, s, vh, a)


def split_unitaries(f: SVDFactors):
    """Diagonal phases ``(exp(+i theta), exp(-i theta))`` and the normalization ``a``."""
    a = float(f.singular_values[0])
    if a == 0.0:
        raise NothingToEncodeError("matrix is identically zero")
    sbar = np.clip(f.singular_values / a, 0.0, 1.0)
    theta = np.arccos(sbar)
    return np.exp(1j * theta), np.exp(-1j * theta), a


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """Unitary whose ancilla-zero block is ``source / normalization``.

    The ancilla is the most significant qubit of ``unitary``.
    """

    unitary: np.ndarray
    normalization: float
    factors: SVDFactors
    ancilla_count: int = 1

    @property
    def system_qubits(self) -> int:
        return self.unitary.shape[0].bit_length() - 2

    @property
    def block(self) -> np.ndarray:
        d = 1 << self.system_qubits
        return self.unitary[:d, :d]

    def gate(self, system: Sequence[int], ancilla: int) -> GateOp:
        """Gate acting on ``system`` qubits (LSB first) plus the ancilla above them."""
        return unitary_gate(self.unitary, tuple(system) + (ancilla,), label="U_A")


def assemble_block_encoding(f: SVDFactors) -> BlockEncoding:
    plus, minus, a = split_unitaries(f)
    select = np.diag(np.concatenate([plus, minus]))
    left = np.kron(HADAMARD, f.Vd)
    right = np.kron(HADAMARD, f.W)
    return BlockEncoding(left @ select @ right, a, f)


def apply_block_encoded(be: BlockEncoding, s: ScaledState):
    """Apply the encoding to ``|0>_e |psi>`` and post-select the ancilla on zero.

    Returns the new scaled state (semantic value ``A @ semantic(s)``) and the
    success probability ``||A psi||^2 / a^2``.
    """
    n = be.system_qubits
    if s.state.num_qubits != n:
        raise ValueError(f"state has {s.state.num_qubits} qubits, encoding expects {n}")
    full = QuantumState.product(QuantumState.basis(1, 0), s.state)
    full = apply_gate(full, be.gate(range(n), n))
    out, prob = postselect(full, [n])
    return ScaledState(out, s.scale * be.normalization * np.sqrt(prob)), prob


def block_encoded_map(be: BlockEncoding, s: ScaledState):
    """Post-selected branch computed directly from ``A``; same contract as above."""
    branch = be.factors.source @ s.state.amplitudes / be.normalization
    prob = float(np.vdot(branch, branch).real)
    if prob < IMPOSSIBLE_PROBABILITY:
        raise ImpossibleOutcomeError(f"block-encoded branch has probability {prob:.3e}")
    st = QuantumState(s.state.num_qubits, branch / np.sqrt(prob))
    return ScaledState(st, s.scale * be.normalization * np.sqrt(prob)), prob


def sigma_max_curve(p: LorenzParams, dts: Iterable[float], order: int = 2,
                    variant: str = "exact") -> list[tuple[float, float]]:
    out = []
    for dt in dts:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        s = np.linalg.svd(build_time_advance(order, p, dt, variant).entries, compute_uv=False)
        out.append((float(dt), float(s[0])))
    return out


def write_sigma_max_csv(path, curve: Sequence[tuple[float, float]]) -> None:
    with text_out(path) as fh:
        w = csv.writer(fh)
        w.writerow(["dt", "sigma_max"])
        for dt, s in curve:
            w.writerow([repr(dt), repr(s)])


def block_encoding_cost(be: BlockEncoding) -> CostRecord:
    """Elementary gates for H, two dense n-qubit unitaries and an (n+1)-qubit diagonal."""
    n = be.system_qubits
    dense = _dense_cost(n, diagonal=False)
    return CostRecord(2, 0, 0) + dense + dense + _dense_cost(n + 1, diagonal=True)
