import numpy as np
import pytest

from qlorenz.blockenc import (
    apply_block_encoded,
    assemble_block_encoding,
    block_encoded_map,
    block_encoding_cost,
    sigma_max_curve,
    split_unitaries,
    svd,
    write_sigma_max_csv,
)
from qlorenz.dynamics import LorenzParams, build_time_advance
from qlorenz.errors import ImpossibleOutcomeError, NothingToEncodeError
from qlorenz.qsim import QuantumState, ScaledState


@pytest.fixture
def encoding(params):
    return assemble_block_encoding(svd(build_time_advance(2, params, 1e-3)))


def test_unitary_and_block(encoding):
    u = encoding.unitary
    assert u.shape == (32, 32)
    assert np.max(np.abs(u.conj().T @ u - np.eye(32))) < 1e-12
    a = encoding.factors.source
    assert np.max(np.abs(encoding.block * encoding.normalization - a)) < 1e-12
    assert encoding.system_qubits == 4


def test_normalization_is_spectral_norm(params):
    for dt in (2.5e-4, 5e-4, 1e-3, 5e-3):
        a = build_time_advance(2, params, dt).entries
        assert svd(a).singular_values[0] == pytest.approx(np.linalg.norm(a, 2), rel=1e-13)


def test_random_matrix_encoding(rng):
    a = rng.normal(size=(8, 8))
    be = assemble_block_encoding(svd(a))
    assert np.allclose(be.block * be.normalization, a, atol=1e-12)
    plus, minus, s = split_unitaries(svd(a))
    assert np.allclose(np.abs(plus), 1) and np.allclose(plus, minus.conj())


def test_zero_matrix_rejected():
    with pytest.raises(NothingToEncodeError):
        split_unitaries(svd(np.zeros((4, 4))))
    with pytest.raises(ValueError):
        svd(np.zeros((2, 3)))


def test_post_selection_probability_identity(encoding, rng):
    a = encoding.factors.source
    for _ in range(5):
        v = np.zeros(16)
        v[:12] = rng.normal(size=12)
        s = ScaledState.from_vector(v)
        out, p = apply_block_encoded(encoding, s)
        psi = v / np.linalg.norm(v)
        assert p == pytest.approx(np.linalg.norm(a @ psi) ** 2 / encoding.normalization**2, rel=1e-10)
        assert np.allclose(out.semantic, a @ v, atol=1e-10)
        out2, p2 = block_encoded_map(encoding, s)
        assert p2 == pytest.approx(p, rel=1e-10)
        assert np.allclose(out2.semantic, out.semantic, atol=1e-10)


def test_kernel_state_is_impossible(encoding):
    v = np.zeros(16)
    v[14] = 1.0
    with pytest.raises(ImpossibleOutcomeError):
        block_encoded_map(encoding, ScaledState(QuantumState.from_vector(v), 1.0))


def test_sigma_max_first_order_law(params):
    """sigma_max = 1 + dt * lambda_max(sym(L)) + O(dt^2), L the linear part."""
    L = np.array([[-params.sigma, params.sigma, 0], [params.rho, -1, 0], [0, 0, -params.beta]])
    lam = np.linalg.eigvalsh((L + L.T) / 2).max()
    for dt, s in sigma_max_curve(params, [1e-5, 1e-4, 1e-3]):
        assert abs(s - (1 + dt * lam)) < 5 * (dt * lam) ** 2 + 1e-12
    curve = sigma_max_curve(params, np.linspace(1e-4, 1e-2, 20))
    assert all(b[1] > a[1] for a, b in zip(curve, curve[1:]))
    with pytest.raises(ValueError):
        sigma_max_curve(params, [0.0])


def test_sigma_max_csv(tmp_path, params):
    path = tmp_path / "s.csv"
    write_sigma_max_csv(path, sigma_max_curve(params, [1e-3]))
    lines = path.read_text().splitlines()
    assert lines[0] == "dt,sigma_max"
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0141240573657, rel=1e-12)


def test_cost_record(encoding):
    c = block_encoding_cost(encoding)
    assert c.elementary > 0 and c.cnot > 0
