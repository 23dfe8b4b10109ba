import csv
import json
import math

import numpy as np
import pytest

from conftest import rel_err
from qlorenz.dynamics import LorenzParams, augmented_vector, build_time_advance, rk2_step
from qlorenz.errors import RegisterWidthError
from qlorenz.marching import (
    RegisterLayout,
    SCHEDULE_EXPANSION_LIMIT,
    StepEngine,
    Trajectory,
    _recurrence_counts,
    classical_chain,
    decode_state,
    encode_state,
    march,
    replenish_copies,
    resource_report,
    run_section,
    run_trajectory,
    simulate_schedule,
    single_step_collapsed,
    single_step_full,
    success_probability_estimate,
)


def test_encode_decode_round_trip():
    s = encode_state([1.0, -2.0, 3.0])
    assert s.state.num_qubits == 4
    assert np.allclose(decode_state(s), [1, -2, 3])


def test_full_and_collapsed_steps_match_rk2(params, rng):
    for _ in range(3):
        s3 = rng.uniform(-15, 15, 3)
        full = single_step_full(encode_state(s3), params, 1e-3)
        coll = single_step_collapsed(encode_state(s3), params, 1e-3)
        ref = rk2_step(s3, params, 1e-3)
        assert rel_err(decode_state(full.next), ref) < 1e-9
        assert rel_err(decode_state(coll.next), ref) < 1e-12
        assert full.p_block == pytest.approx(coll.p_block, rel=1e-9)
        assert full.p_nl == pytest.approx(coll.p_nl, rel=1e-9)


def test_block_probability_oracle(params, rng):
    a = build_time_advance(2, params, 1e-3).entries
    sig = np.linalg.norm(a, 2)
    s3 = rng.uniform(-10, 10, 3)
    nl = augmented_vector(2, s3)
    psi = nl / np.linalg.norm(nl)
    out = single_step_full(encode_state(s3), params, 1e-3)
    assert out.p_block == pytest.approx(np.linalg.norm(a @ psi) ** 2 / sig**2, abs=1e-10)


def test_full_register_width(params):
    eng = StepEngine(params, 1e-3)
    assert eng.full_qubits == 16
    assert StepEngine(params, 1e-3, variant="reduced").full_qubits == 15


def test_reduced_layout_reproduces_its_matrix(params, rng):
    s3 = rng.uniform(-10, 10, 3)
    out = single_step_full(encode_state(s3), params, 1e-3, variant="reduced")
    a = build_time_advance(2, params, 1e-3, "reduced").entries
    expect = (a @ augmented_vector(2, s3, "reduced"))[:3]
    assert rel_err(decode_state(out.next), expect) < 1e-9


@pytest.mark.parametrize("engine,method", [("classical", "rk2"), ("euler", "euler"), ("rk4", "rk4")])
def test_compiled_integrators_match_reference(params, engine, method):
    x0 = (0.1, -1.1, 1.1)
    a = run_trajectory(x0, params, 1e-3, 500, engine).xyz
    b = classical_chain(x0, params, 1e-3, 500, method)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_collapsed_chain_matches_rk2(params):
    x0 = (1.0, 2.0, 3.0)
    tr = run_trajectory(x0, params, 1e-3, 2000, "quantum-collapsed")
    ref = classical_chain(x0, params, 1e-3, 2000)
    err = np.linalg.norm(tr.xyz - ref, axis=1) / np.linalg.norm(ref, axis=1)
    assert err.max() < 1e-9
    assert np.all((tr.p_block > 0) & (tr.p_block <= 1)) and np.all((tr.p_nl > 0) & (tr.p_nl <= 1))
    assert tr.cumulative_log_probability[-1] < 0


def test_march_records_probabilities(params):
    res = march((1.0, 1.0, 1.0), params, 1e-3, 5)
    assert res.trajectory.steps == 5
    assert res.resources.Nt == 5
    logs = [o.cumulative_log_probability for o in res.outcomes]
    assert all(b < a for a, b in zip(logs, logs[1:]))
    assert res.cumulative_log_probability == pytest.approx(
        sum(math.log(o.p_block) + math.log(o.p_nl) for o in res.outcomes))


def test_march_edge_cases(params):
    res = march((1.0, 1.0, 1.0), params, 1e-3, 0)
    assert res.trajectory.steps == 0 and res.resources is None
    with pytest.raises(RegisterWidthError, match="qubits"):
        march((1.0, 1.0, 1.0), params, 1e-3, 2, mode="full")
    one = march((1.0, 1.0, 1.0), params, 1e-3, 1, mode="full")
    assert rel_err(one.trajectory.xyz[1], rk2_step([1, 1, 1], params, 1e-3)) < 1e-9
    with pytest.raises(ValueError):
        march((1.0, 1.0, 1.0), params, 1e-3, -1)
    with pytest.raises(ValueError):
        run_trajectory((1, 1, 1), params, 1e-3, 3, "quantum-full")


def test_trajectory_csv(tmp_path, params):
    tr = run_trajectory((1.0, 1.0, 1.0), params, 1e-3, 3, "quantum-collapsed")
    path = tmp_path / "t.csv"
    tr.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["step", "t", "x", "y", "z", "p_block", "p_nl"]
    assert rows[1][5:] == ["", ""] and len(rows) == 5
    assert float(rows[4][2]) == tr.xyz[3, 0]
    Trajectory(params, 1e-3, "classical", tr.xyz).write_csv(path)
    assert next(csv.reader(path.open())) == ["step", "t", "x", "y", "z"]


def test_section_kernel_matches_python_section(params):
    from qlorenz.analysis import poincare_section
    tr = run_trajectory((0.1, -1.1, 1.1), params, 1e-3, 30000)
    rec = run_section((0.1, -1.1, 1.1), params, 1e-3, 30000, 10000)
    sec = poincare_section(tr, 10000 * 1e-3)
    assert np.allclose(rec[:, 2], sec.z, rtol=1e-12)


def test_register_census():
    for Nt in range(1, 7):
        lay = RegisterLayout(Nt)
        assert lay.copies == 4 * Nt - 1
        assert lay.total == 11 * (2 * Nt - 1) + 4 + math.floor(math.log2(Nt)) + 1
    assert RegisterLayout(1).total == 16


def test_schedule_recursion_against_recurrences():
    for Nt in range(1, SCHEDULE_EXPANSION_LIMIT + 1):
        a, b = simulate_schedule(Nt), _recurrence_counts(Nt)
        assert (a.n_U1, a.leaf_replenish, a.upper_replenish, a.n_S) == \
               (b.n_U1, b.leaf_replenish, b.upper_replenish, b.n_S)
        assert a.n_U1 == (3**Nt - 1) // 2


def test_resource_report_values():
    table = {1: (3, 16, 1, 2, 3), 2: (7, 39, 4, 4, 9), 3: (11, 61, 13, 6, 25), 4: (15, 84, 40, 8, 71)}
    for Nt, (copies, qubits, u1, ns, q) in table.items():
        r = resource_report(Nt)
        assert (r.n_copies, r.n_qubits, r.n_U1, r.n_S, r.n_queries) == (copies, qubits, u1, ns, q)
        assert r.query_discrepancy == 0.5
        assert r.n_U1_formula - r.n_U1 == 0.5
    big = resource_report(2000)
    assert math.isinf(big.n_U1_formula) and big.n_copies == 7999
    data = json.loads(resource_report(2).to_json())
    assert data["n_copies"] == 7
    with pytest.raises(ValueError):
        resource_report(0)


def test_replenish_and_success_bound():
    assert replenish_copies(1) == 0
    assert replenish_copies(3) == simulate_schedule(3).leaf_replenish
    with pytest.raises(ValueError):
        replenish_copies(2, "other")
    assert success_probability_estimate(2, 1.01) == pytest.approx(-18 * math.log(1.01))
