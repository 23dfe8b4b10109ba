import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import rel_err
from qlorenz.dynamics import (
    LorenzParams,
    augmented_size,
    augmented_vector,
    build_time_advance,
    classical_augmented_step,
    divergence,
    euler_step,
    fixed_points,
    jacobian,
    lorenz_rhs,
    rk2_coefficients,
    rk2_step,
    rk4_oracle_step,
)


def heun(s, p, h):
    def f(v):
        x, y, z = v
        return np.array([p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z])
    k1 = f(s)
    k2 = f(s + h * k1)
    return s + h / 2 * (k1 + k2)


def test_rhs_matches_hand_written_field(params):
    s = np.array([1.5, -2.0, 3.0])
    expect = [10 * (-3.5), 1.5 * 25 + 2.0, -3.0 - 0.55 * 3.0]
    assert np.allclose(lorenz_rhs(s, params), expect)


def test_jacobian_matches_finite_differences(params, rng):
    s = rng.normal(size=3) * 5
    h = 1e-6
    fd = np.column_stack([(lorenz_rhs(s + h * e, params) - lorenz_rhs(s - h * e, params)) / (2 * h)
                          for e in np.eye(3)])
    assert np.allclose(jacobian(s, params), fd, atol=1e-7)
    assert np.trace(jacobian(s, params)) == pytest.approx(divergence(params))


def test_fixed_points_are_stationary(params):
    pts = fixed_points(params)
    assert len(pts) == 3
    c = np.sqrt(0.55 * 27)
    assert np.allclose(pts[1], [c, c, 27.0])
    for q in pts:
        assert np.allclose(lorenz_rhs(q, params), 0.0, atol=1e-12)
    assert len(fixed_points(LorenzParams(10, 0.5, 1.0))) == 1


def test_rk2_and_rk4_against_independent_formulas(params, rng):
    for _ in range(20):
        s = rng.uniform(-20, 20, 3)
        assert rel_err(rk2_step(s, params, 1e-3), heun(s, params, 1e-3)) < 1e-14
        assert np.allclose(euler_step(s, params, 1e-3), s + 1e-3 * lorenz_rhs(s, params))


def test_rk4_converges_at_fourth_order(params):
    s0 = np.array([1.0, 1.0, 20.0])

    def run(h, T=0.5):
        s = s0.copy()
        for _ in range(int(round(T / h))):
            s = rk4_oracle_step(s, params, h)
        return s

    ref = run(1e-4)
    e1 = np.linalg.norm(run(4e-3) - ref)
    e2 = np.linalg.norm(run(2e-3) - ref)
    assert 12 < e1 / e2 < 20


def test_negative_dt_rejected(params):
    with pytest.raises(ValueError):
        rk2_step([1, 2, 3], params, -1e-3)
    with pytest.raises(ValueError):
        build_time_advance(2, params, 0.0)


def test_rk2_coefficients_match_symbolic_expansion():
    """Expand the Heun step symbolically and read off every monomial coefficient."""
    x, y, z, s, r, b, h = sp.symbols("x y z s r b h")

    def f(v):
        return [s * (v[1] - v[0]), v[0] * (r - v[2]) - v[1], v[0] * v[1] - b * v[2]]

    v0 = [x, y, z]
    k1 = f(v0)
    k2 = f([v0[i] + h * k1[i] for i in range(3)])
    step = [sp.expand(v0[i] + h / 2 * (k1[i] + k2[i])) for i in range(3)]
    monomials = [x, y, z, x * y, x * z, y * z, x * y**2, x**2 * y, x**2 * z, x * y * z, x**2, y**2]
    vals = {s: 10.0, r: 28.0, b: 0.55, h: 1e-3}
    m = build_time_advance(2, LorenzParams(10, 28, 0.55), 1e-3).entries
    for row in range(3):
        poly = sp.Poly(step[row], x, y, z)
        seen = 0
        for col, mono in enumerate(monomials):
            c = float(poly.coeff_monomial(mono).subs(vals))
            assert m[row, col] == pytest.approx(c, rel=1e-12, abs=1e-18)
            seen += 1
        # nothing else appears in the expansion
        total = sum(poly.coeff_monomial(mono) * mono for mono in monomials)
        assert sp.simplify(step[row] - total) == 0
    assert seen == 12


def test_reduced_layout_differs_at_second_order(params):
    s = np.array([3.0, -4.0, 20.0])
    errs = [np.abs(classical_augmented_step(2, s, params, h, "reduced") - rk2_step(s, params, h)).max()
            for h in (2e-3, 1e-3)]
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert augmented_vector(2, s, "reduced")[10:].tolist() == [0.0] * 6
    assert set(rk2_coefficients(params, 1e-3, "reduced")) == set(rk2_coefficients(params, 1e-3)) - {"c11", "c12"}


def test_euler_time_advance_matches_euler_step(params, rng):
    for _ in range(10):
        s = rng.uniform(-10, 10, 3)
        assert rel_err(classical_augmented_step(1, s, params, 1e-3), euler_step(s, params, 1e-3)) < 1e-13


def test_augmented_layout():
    assert augmented_size(1) == 8 and augmented_size(2) == 16
    v = augmented_vector(2, [2.0, 3.0, 5.0])
    assert v[:12].tolist() == [2, 3, 5, 6, 10, 15, 18, 12, 20, 30, 4, 9]
    assert augmented_vector(1, [2.0, 3.0, 5.0]).tolist() == [2, 3, 5, 6, 10, 0, 0, 0]
    with pytest.raises(ValueError):
        augmented_size(3)


def test_unknown_variant_rejected(params):
    with pytest.raises(ValueError):
        rk2_coefficients(params, 1e-3, "other")


finite = st.floats(-30, 30, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(finite, finite, finite, st.floats(1e-4, 1e-2))
def test_mirror_symmetry_of_the_step(x, y, z, h):
    p = LorenzParams(10, 28, 0.58)
    a = rk2_step([x, y, z], p, h)
    b = rk2_step([-x, -y, z], p, h)
    assert np.allclose(b, [-a[0], -a[1], a[2]], rtol=1e-13, atol=1e-11)


def test_mirror_symmetry_of_trajectories():
    p = LorenzParams(10, 28, 0.58)
    a = np.array([0.1, -1.1, 10.1])
    b = a * [-1, -1, 1]
    for _ in range(2000):
        a = rk4_oracle_step(a, p, 1e-3)
        b = rk4_oracle_step(b, p, 1e-3)
    assert np.allclose(b, a * [-1, -1, 1], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(finite, finite, finite, st.floats(1e-4, 1e-2))
def test_augmented_step_property(x, y, z, h):
    p = LorenzParams(10, 28, 0.55)
    got = classical_augmented_step(2, [x, y, z], p, h)
    ref = heun(np.array([x, y, z]), p, h)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * (1 + np.abs(ref).max()))
