"""Quantum time marching of the discretized Lorenz system.

One step applies the nonlinear preparation and then the block-encoded
time-advance matrix, post-selecting every ancilla on zero. Two execution modes
share one contract:

* ``full`` simulates the complete register (single steps only);
* ``collapsed`` applies the post-selected maps directly and tracks the
  probabilities classically.

Absolute ``(x, y, z)`` values are recovered from the tracked scale.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._io import text_out
from . import _kernels
from .blockenc import (
    BlockEncoding,
    assemble_block_encoding,
    block_encoded_map,
    svd,
)
from .dynamics import (
    LorenzParams,
    augmented_size,
    build_time_advance,
    euler_step,
    rk2_step,
    rk4_oracle_step,
)
from .errors import RegisterWidthError
from .nonlinear import build_u_nl, nonlinear_map, nonlinear_prep
from .qsim import QuantumState, ScaledState, apply_gate, postselect

__all__ = [
    "StepOutcome",
    "StepEngine",
    "Trajectory",
    "RegisterLayout",
    "ResourceReport",
    "ScheduleCounts",
    "encode_state",
    "decode_state",
    "single_step_full",
    "single_step_collapsed",
    "march",
    "MarchResult",
    "run_trajectory",
    "run_section",
    "classical_chain",
    "replenish_copies",
    "resource_report",
    "simulate_schedule",
    "SCHEDULE_EXPANSION_LIMIT",
    "success_probability_estimate",
    "ENGINES",
]

ENGINES = ("classical", "quantum-collapsed", "quantum-full", "euler", "rk4")
SUPPORT_TOL = 1e-12


def encode_state(s3, order: int = 2) -> ScaledState:
    vec = np.zeros(augmented_size(order), dtype=complex)
    vec[:3] = np.asarray(s3, dtype=float)
    return ScaledState.from_vector(vec)


def decode_state(s: ScaledState) -> np.ndarray:
    return np.real(s.semantic[:3]).copy()


@dataclass(frozen=True)
class StepOutcome:
    next: ScaledState
    p_block: float
    p_nl: float
    cumulative_log_probability: float = 0.0

    @property
    def probability(self) -> float:
        return self.p_block * self.p_nl


@lru_cache(maxsize=64)
def _block_encoding(order: int, p: LorenzParams, dt: float, variant: str) -> BlockEncoding:
    return assemble_block_encoding(svd(build_time_advance(order, p, dt, variant)))


class StepEngine:
    """Single-step operator for fixed parameters, time step and order."""

    def __init__(self, p: LorenzParams, dt: float, order: int = 2, variant: str = "exact"):
        self.params = p
        self.dt = float(dt)
        self.order = order
        self.variant = variant
        self.encoding = _block_encoding(order, p, self.dt, variant)
        self.prep = nonlinear_prep(order, variant)

    @property
    def sigma_max(self) -> float:
        return self.encoding.normalization

    @property
    def register_qubits(self) -> int:
        return self.prep.register_qubits

    @property
    def full_qubits(self) -> int:
        return self.prep.num_qubits + 1

    def _check_support(self, s: ScaledState) -> None:
        # slots outside the monomial list lie in the kernel of the time-advance matrix
        used = max(t for g in self.prep.groups for t in g.target_indices) + 1
        stray = np.max(np.abs(s.state.amplitudes[used:]), initial=0.0)
        if stray > SUPPORT_TOL:
            raise RuntimeError(f"nonlinear state leaks into padding slots (max {stray:.2e})")

    def full(self, s: ScaledState, log_prob: float = 0.0) -> StepOutcome:
        """Simulate the whole register: target, copies, LCU and the encoding ancilla."""
        prep = self.prep
        vec = s.semantic
        u = build_u_nl(self.order, vec, s.scale, self.variant)
        e = prep.num_qubits
        lcu = QuantumState.basis(prep.lcu_qubits, 0) if prep.lcu_qubits else QuantumState.basis(0)
        full = QuantumState.product(QuantumState.basis(1, 0), lcu, *[s.state] * prep.num_registers)
        circuit = u.circuit.remapped(range(prep.num_qubits), self.full_qubits)
        full = circuit.apply(full)
        nl_only, _ = postselect(full, prep.copy_qubits + prep.lcu + [e])
        self._check_support(ScaledState(nl_only, 1.0))
        full = apply_gate(full, self.encoding.gate(prep.target, e))
        # the encoding acts on target and e only, so the ancilla-block probability factorizes
        rest, p_nl = postselect(full, prep.copy_qubits + prep.lcu)
        out, p_block = postselect(rest, [prep.register_qubits])
        scale_nl = math.sqrt(p_nl) / u.constant
        nxt = ScaledState(out, scale_nl * self.sigma_max * math.sqrt(p_block))
        return StepOutcome(nxt, p_block, p_nl, log_prob + math.log(p_block) + math.log(p_nl))

    def collapsed(self, s: ScaledState, log_prob: float = 0.0) -> StepOutcome:
        nl, p_nl = nonlinear_map(s, self.order, self.variant)
        self._check_support(nl)
        nxt, p_block = block_encoded_map(self.encoding, nl)
        return StepOutcome(nxt, p_block, p_nl, log_prob + math.log(p_block) + math.log(p_nl))

    def kernel_args(self):
        """Arrays consumed by the compiled collapsed chain."""
        groups = self.prep.groups
        R = self.prep.num_registers
        dim = groups[0].dim
        tables = np.zeros((len(groups), R, dim), dtype=np.int64)
        for t, g in enumerate(groups):
            for k, tab in enumerate(g.tables):
                tables[t, k] = tab
        degrees = np.array([g.degree for g in groups], dtype=np.int64)
        # The post-selected block is A / sigma_max. Taking it from the real matrix, not
        # from the assembled unitary, keeps roundoff phases out of the state: Hadamard
        # products turn a global phase phi into degree-dependent phases d * phi.
        f = self.encoding.factors
        block = np.ascontiguousarray(f.source / self.sigma_max, dtype=np.complex128)
        return tables, degrees, R, block, self.sigma_max


def single_step_full(s: ScaledState, p: LorenzParams, dt: float, variant: str = "exact") -> StepOutcome:
    return StepEngine(p, dt, 2, variant).full(s)


def single_step_collapsed(s: ScaledState, p: LorenzParams, dt: float,
                          variant: str = "exact") -> StepOutcome:
    return StepEngine(p, dt, 2, variant).collapsed(s)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    params: LorenzParams
    dt: float
    mode: str
    xyz: np.ndarray
    p_block: np.ndarray | None = None
    p_nl: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.xyz) - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.xyz)) * self.dt

    @property
    def cumulative_log_probability(self) -> np.ndarray:
        if self.p_block is None:
            return np.zeros(self.steps)
        return np.cumsum(np.log(self.p_block) + np.log(self.p_nl))

    def write_csv(self, path) -> None:
        with_p = self.p_block is not None
        with text_out(path) as fh:
            w = csv.writer(fh)
            head = ["step", "t", "x", "y", "z"] + (["p_block", "p_nl"] if with_p else [])
            w.writerow(head)
            for n, (x, y, z) in enumerate(self.xyz):
                row = [n, repr(n * self.dt), repr(float(x)), repr(float(y)), repr(float(z))]
                if with_p:
                    row += ["", ""] if n == 0 else [repr(float(self.p_block[n - 1])),
                                                    repr(float(self.p_nl[n - 1]))]
                w.writerow(row)


def _empty_kernel_args(order: int = 2):
    dim = augmented_size(order)
    return (np.zeros(dim, dtype=np.complex128), 1.0, np.zeros((1, 1, dim), dtype=np.int64),
            np.ones(1, dtype=np.int64), 1, np.zeros((dim, dim), dtype=np.complex128), 1.0)


def _method_code(engine: str) -> int:
    return {"euler": _kernels.EULER, "classical": _kernels.RK2, "rk2": _kernels.RK2,
            "rk4": _kernels.RK4, "quantum-collapsed": _kernels.COLLAPSED}[engine]


def _kernel_inputs(engine: str, x0, p: LorenzParams, dt: float, order: int, variant: str):
    if engine != "quantum-collapsed":
        return _empty_kernel_args(order)
    eng = StepEngine(p, dt, order, variant)
    s = encode_state(x0, order)
    tables, degrees, R, block, sig = eng.kernel_args()
    return (s.state.amplitudes.copy(), s.scale, tables, degrees, R, block, sig)


def run_trajectory(x0, p: LorenzParams, dt: float, steps: int, engine: str = "classical",
                   order: int = 2, variant: str = "exact") -> Trajectory:
    """Compiled trajectory run for the classical integrators and the collapsed engine."""
    if engine not in ENGINES or engine == "quantum-full":
        raise ValueError(f"engine {engine!r} is not available for long runs")
    x0 = np.asarray(x0, dtype=float)
    amps, scale, tables, degrees, R, block, sig = _kernel_inputs(engine, x0, p, dt, order, variant)
    xyz, pnl, pbl = _kernels.chain(_method_code(engine), x0[0], x0[1], x0[2], p.sigma, p.rho,
                                   p.beta, dt, int(steps), amps, scale, tables, degrees, R,
                                   block, sig)
    if engine == "quantum-collapsed":
        return Trajectory(p, dt, engine, xyz, pbl, pnl)
    return Trajectory(p, dt, engine, xyz)


def run_section(x0, p: LorenzParams, dt: float, steps: int, skip: int,
                engine: str = "classical", order: int = 2, variant: str = "exact") -> np.ndarray:
    """Descending x = 0 crossings ``(t, y, z)`` of a run, without storing the trajectory."""
    x0 = np.asarray(x0, dtype=float)
    amps, scale, tables, degrees, R, block, sig = _kernel_inputs(engine, x0, p, dt, order, variant)
    return _kernels.section(_method_code(engine), x0[0], x0[1], x0[2], p.sigma, p.rho, p.beta,
                            dt, int(steps), int(skip), amps, scale, tables, degrees, R, block,
                            sig)


# ---------------------------------------------------------------------------
# resources


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit census of the multi-step register."""

    Nt: int
    copy_qubits: int = 8
    e_qubits: int = 1
    lcu_qubits: int = 2
    target_qubits: int = 4

    @property
    def register_sets(self) -> int:
        return 2 * self.Nt - 1

    @property
    def clock_qubits(self) -> int:
        return int(math.floor(math.log2(self.Nt))) + 1

    @property
    def per_set(self) -> int:
        return self.copy_qubits + self.e_qubits + self.lcu_qubits

    @property
    def total(self) -> int:
        return self.register_sets * self.per_set + self.target_qubits + self.clock_qubits

    @property
    def copies(self) -> int:
        return self.register_sets * (self.copy_qubits // self.target_qubits) + 1


@dataclass
class ScheduleCounts:
    n_U1: int = 0
    n_S: int = 0
    leaf_replenish: int = 0
    upper_replenish: int = 0
    max_clock: int = 0


SCHEDULE_EXPANSION_LIMIT = 10


def simulate_schedule(Nt: int) -> ScheduleCounts:
    """Expand the recursion ``U_j = U_1 (U_{j-1})^{x3}`` and count operations.

    Leaf single steps draw their copy pairs from ``Nt`` leaf sets; the final
    single step of level ``j`` uses the level's own set. A set is refilled
    with fresh input copies whenever it is reused after being consumed.
    Beyond ``SCHEDULE_EXPANSION_LIMIT`` the same counts come from the
    per-level recurrences instead of an explicit walk.
    """
    if Nt > SCHEDULE_EXPANSION_LIMIT:
        return _recurrence_counts(Nt)
    counts = ScheduleCounts()
    leaf_fresh = Nt
    upper_used = [False] * (Nt + 1)

    def evaluate(j: int) -> None:
        nonlocal leaf_fresh
        if j == 1:
            if leaf_fresh:
                leaf_fresh -= 1
            else:
                counts.leaf_replenish += 1
            counts.n_U1 += 1
            return
        evaluate(j - 1)
        if upper_used[j]:
            counts.upper_replenish += 1
        evaluate(j - 1)
        evaluate(j - 1)
        counts.n_U1 += 1
        upper_used[j] = True

    if Nt >= 1:
        evaluate(Nt)
    # clock: one increment per completed time level, one reset per level at read-out
    counts.n_S = 2 * Nt
    counts.max_clock = Nt
    return counts


def _recurrence_counts(Nt: int) -> ScheduleCounts:
    u1 = 0
    for _ in range(Nt):
        u1 = 3 * u1 + 1
    # the level-j operator runs 3^(Nt-j) times; every run after the first refills its set
    upper_calls = sum(3 ** (Nt - j) - 1 for j in range(2, Nt + 1))
    leaf_calls = 3 ** (Nt - 1)
    return ScheduleCounts(n_U1=u1, n_S=2 * Nt, leaf_replenish=leaf_calls - Nt,
                          upper_replenish=upper_calls, max_clock=Nt)


@dataclass
class ResourceReport:
    Nt: int
    n_copies: int
    n_qubits: int
    n_qubits_formula: float
    n_qubits_with_lcu_width: int
    clock_qubits: int
    n_U1: int
    n_U1_formula: float
    n_S: int
    n_Upsi: int
    n_Upsi_formula: int
    n_Upsi_upper: int
    n_queries: int
    n_queries_formula: float
    n_queries_physical: int
    query_discrepancy: float
    generalized_cost: float
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _f(x) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.inf


def resource_report(Nt: int, lcu_qubits: int | None = None) -> ResourceReport:
    """Formula values next to counters from the expanded recursion.

    ``lcu_qubits`` is the LCU width of the implemented nonlinear operator
    (three qubits for the exact coefficient set); the census with two LCU
    qubits is reported as ``n_qubits``.
    """
    if Nt < 1:
        raise ValueError(f"Nt must be at least 1, got {Nt}")
    if lcu_qubits is None:
        lcu_qubits = nonlinear_prep(2, "exact").lcu_qubits
    layout = RegisterLayout(Nt)
    actual = RegisterLayout(Nt, lcu_qubits=lcu_qubits)
    sched = simulate_schedule(Nt)
    u1_formula = Fraction(3**Nt, 2)
    upsi_formula = 3 ** (Nt - 1) - Nt
    q_formula = Fraction(5 * 3**Nt, 6) + Nt
    q_exact = sched.n_U1 + sched.n_S + sched.leaf_replenish
    notes = []
    if u1_formula != sched.n_U1:
        notes.append(f"U1 count: recursion gives {sched.n_U1}, closed form gives {_f(u1_formula):.6g}")
    if q_formula != q_exact:
        notes.append(f"query total: recursion gives {q_exact}, closed form gives {_f(q_formula):.6g}")
    if Nt & (Nt - 1):
        notes.append(f"clock width is {layout.clock_qubits} qubits; the closed form uses log2(Nt)")
    return ResourceReport(
        Nt=Nt,
        n_copies=layout.copies,
        n_qubits=layout.total,
        n_qubits_formula=22 * Nt + math.log2(Nt) - 6,
        n_qubits_with_lcu_width=actual.total,
        clock_qubits=layout.clock_qubits,
        n_U1=sched.n_U1,
        n_U1_formula=_f(u1_formula),
        n_S=sched.n_S,
        n_Upsi=sched.leaf_replenish,
        n_Upsi_formula=upsi_formula,
        n_Upsi_upper=sched.upper_replenish,
        n_queries=q_exact,
        n_queries_formula=_f(q_formula),
        n_queries_physical=q_exact + sched.upper_replenish,
        query_discrepancy=float(q_formula - q_exact),
        generalized_cost=_f(60 * 16**2 * 3**Nt),
        notes=notes,
    )


def replenish_copies(Nt: int, mode: str = "collapsed") -> int:
    """Number of controlled copy preparations the schedule issues on leaf sets."""
    if mode not in ("full", "collapsed"):
        raise ValueError(f"unknown mode {mode!r}")
    return simulate_schedule(Nt).leaf_replenish if Nt >= 1 else 0


def success_probability_estimate(Nt: int, sigma_max: float) -> float:
    """Log of the block-encoding success bound ``sigma_max^(-2 * 3^Nt)``."""
    return -(3.0**Nt) * 2.0 * math.log(sigma_max)


# ---------------------------------------------------------------------------
# marching driver


@dataclass
class MarchResult:
    trajectory: Trajectory
    outcomes: list[StepOutcome]
    resources: ResourceReport | None

    @property
    def cumulative_log_probability(self) -> float:
        return self.outcomes[-1].cumulative_log_probability if self.outcomes else 0.0


def march(x0, p: LorenzParams, dt: float, Nt: int, mode: str = "collapsed",
          order: int = 2, variant: str = "exact") -> MarchResult:
    """Step-by-step marching with per-step probability records."""
    if Nt < 0:
        raise ValueError("Nt must be non-negative")
    if mode not in ("full", "collapsed"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "full" and Nt > 1:
        need = resource_report(Nt).n_qubits
        raise RegisterWidthError(
            f"full-register marching over {Nt} steps needs {need} qubits; "
            "use the collapsed mode for more than one step"
        )
    eng = StepEngine(p, dt, order, variant)
    s = encode_state(x0, order)
    xyz = [np.asarray(x0, dtype=float)]
    outcomes: list[StepOutcome] = []
    log_prob = 0.0
    for _ in range(Nt):
        out = eng.full(s, log_prob) if mode == "full" else eng.collapsed(s, log_prob)
        outcomes.append(out)
        log_prob = out.cumulative_log_probability
        s = out.next
        xyz.append(decode_state(s))
    tr = Trajectory(p, dt, f"quantum-{mode}", np.array(xyz),
                    np.array([o.p_block for o in outcomes]), np.array([o.p_nl for o in outcomes]))
    return MarchResult(tr, outcomes, resource_report(Nt) if Nt >= 1 else None)


def classical_chain(x0, p: LorenzParams, dt: float, steps: int, method: str = "rk2") -> np.ndarray:
    """Pure-Python reference chain (no compiled code)."""
    step = {"euler": euler_step, "rk2": rk2_step, "rk4": rk4_oracle_step}[method]
    out = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        out.append(step(out[-1], p, dt))
    return np.array(out)
