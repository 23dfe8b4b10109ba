"""Quick oracle cross-checks used by ``qlorenz verify``.

Each check returns ``(name, passed, detail)``. They run in a few seconds and
use small sample sizes; the test suite covers the same ground in depth.
"""
from __future__ import annotations

import numpy as np

from .blockenc import assemble_block_encoding, svd
from .dynamics import LorenzParams, build_time_advance, classical_augmented_step, rk2_step
from .marching import encode_state, decode_state, resource_report, run_trajectory, single_step_full
from .qsim import QuantumState, postselect, u_h_N


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def check_augmented_rk2(rng, n=200):
    worst = 0.0
    for _ in range(n):
        s = rng.uniform(-20, 20, 3)
        p = LorenzParams(*rng.uniform(0.1, 30, 3))
        dt = rng.uniform(1e-4, 1e-2)
        worst = max(worst, _rel(classical_augmented_step(2, s, p, dt), rk2_step(s, p, dt)))
    return "augmented step equals RK2", worst <= 1e-12, f"max rel {worst:.2e}"


def check_full_step(rng, n=2):
    p = LorenzParams(10, 28, 0.55)
    worst = 0.0
    for _ in range(n):
        s = rng.uniform(-15, 15, 3)
        out = single_step_full(encode_state(s), p, 1e-3)
        worst = max(worst, _rel(decode_state(out.next), rk2_step(s, p, 1e-3)))
    return "full-register step equals RK2", worst <= 1e-8, f"max rel {worst:.2e}"


def check_block_encoding(rng):
    be = assemble_block_encoding(svd(build_time_advance(2, LorenzParams(10, 28, 0.55), 1e-3)))
    u = be.unitary
    unit = float(np.max(np.abs(u.conj().T @ u - np.eye(len(u)))))
    rec = float(np.max(np.abs(be.block * be.normalization - be.factors.source)))
    return "block encoding unitary and exact", max(unit, rec) <= 1e-10, f"{unit:.1e} / {rec:.1e}"


def check_hadamard_power(rng, n=2, N=3):
    c = u_h_N(n, N)
    worst = 0.0
    for _ in range(20):
        v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi = QuantumState.from_vector(v)
        out, prob = postselect(c.apply(QuantumState.product(*[psi] * N)), range(n, n * N))
        expect = psi.amplitudes ** N
        worst = max(worst, float(np.max(np.abs(out.amplitudes * np.sqrt(prob) - expect))))
    return "Hadamard power by shifts", worst <= 1e-12, f"max abs {worst:.2e}"


def check_resources(rng):
    r = resource_report(1)
    ok = (r.n_copies, r.n_qubits) == (3, 16)
    return "resources at Nt = 1", ok, f"copies={r.n_copies} qubits={r.n_qubits}"


def check_collapsed_chain(rng):
    p = LorenzParams(10, 28, 0.55)
    a = run_trajectory((1.0, 1.0, 1.0), p, 1e-3, 1000, "quantum-collapsed").xyz
    b = run_trajectory((1.0, 1.0, 1.0), p, 1e-3, 1000, "classical").xyz
    err = _rel(a, b)
    return "collapsed chain follows RK2", err <= 1e-6, f"max rel {err:.2e}"


CHECKS = (check_augmented_rk2, check_full_step, check_block_encoding, check_hadamard_power,
          check_resources, check_collapsed_chain)


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [chk(rng) for chk in CHECKS]
