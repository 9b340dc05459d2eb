import numpy as np
import pytest

from splitac.grid import (
    DiscreteOperator,
    GridFunction,
    Mesh,
    apply_laplacian,
    apply_semigroup,
    eigenvector,
    norm_e,
    norm_h,
    solve_resolvent,
)

from oracles import resolvent_dense, sine_matrix


def test_mesh_geometry():
    m = Mesh(3)
    assert m.dx == pytest.approx(0.25, abs=1e-15)
    assert m.dx * (m.n_interior + 1) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(m.nodes, [0.25, 0.5, 0.75])


def test_mesh_requires_interior_node():
    with pytest.raises(ValueError):
        Mesh(0)


def test_grid_function_shape_check():
    with pytest.raises(ValueError):
        GridFunction(Mesh(3), np.zeros(4))


def test_eigenvalues_increasing_and_consistent():
    for n in (15, 127):
        op = DiscreteOperator(Mesh(n))
        assert np.all(np.diff(op.eigenvalues) > 0)
    # fixed mode k: discrete eigenvalue approaches k^2 pi^2 as dx shrinks
    for k in (1, 3):
        errs = []
        for n in (63, 127):
            op = DiscreteOperator(Mesh(n))
            errs.append(abs(op.eigenvalues[k - 1] - (k * np.pi) ** 2))
        assert errs[1] < errs[0] / 3.0


def test_laplacian_zero():
    m = Mesh(8)
    op = DiscreteOperator(m)
    out = apply_laplacian(op, GridFunction.zeros(m))
    assert np.all(out.values == 0.0)


def test_laplacian_eigenvector_identity():
    m = Mesh(31)
    op = DiscreteOperator(m)
    for k in (1, 5, 31):
        v = eigenvector(m, k)
        out = apply_laplacian(op, v)
        np.testing.assert_allclose(
            out.values, -op.eigenvalues[k - 1] * v.values, rtol=1e-10, atol=1e-12
        )


def test_laplacian_hand_stencil():
    # n=3, dx=1/4, x=(1,0,0): ((-2)/dx^2, (1)/dx^2, 0) = (-32, 16, 0)
    m = Mesh(3)
    op = DiscreteOperator(m)
    out = apply_laplacian(op, GridFunction(m, np.array([1.0, 0.0, 0.0])))
    np.testing.assert_allclose(out.values, [-32.0, 16.0, 0.0], atol=1e-12)


def test_laplacian_mesh_mismatch():
    op = DiscreteOperator(Mesh(3))
    with pytest.raises(ValueError):
        apply_laplacian(op, GridFunction.zeros(Mesh(4)))


def test_resolvent_zero_rhs():
    m = Mesh(9)
    op = DiscreteOperator(m)
    out = solve_resolvent(op, 0.3, GridFunction.zeros(m))
    assert np.all(out.values == 0.0)


def test_resolvent_eigenvector_via_dst_oracle():
    m = Mesh(31)
    op = DiscreteOperator(m)
    dt = 0.05
    for k in (1, 7, 31):
        v = eigenvector(m, k)
        out = solve_resolvent(op, dt, v)
        expected = v.values / (1.0 + dt * op.eigenvalues[k - 1])
        np.testing.assert_allclose(out.values, expected, rtol=1e-10)


def test_resolvent_scalar_example():
    # n=1, dx=1/2, lambda_1 = 8; dt=1/8 -> 1/(1 + 1) = 0.5
    m = Mesh(1)
    op = DiscreteOperator(m)
    assert op.eigenvalues[0] == pytest.approx(8.0, rel=1e-12)
    out = solve_resolvent(op, 0.125, GridFunction(m, np.array([1.0])))
    assert out.values[0] == pytest.approx(0.5, rel=1e-12)


def test_resolvent_residual_bound():
    rng = np.random.default_rng(3)
    m = Mesh(40)
    op = DiscreteOperator(m)
    for dt in (1e-4, 0.01, 0.5):
        rhs = GridFunction(m, rng.standard_normal(40))
        y = solve_resolvent(op, dt, rhs)
        resid = y.values - dt * op.laplacian_values(y.values) - rhs.values
        assert np.abs(resid).max() <= 1e-10 * np.abs(rhs.values).max()


def test_resolvent_inverts_operator():
    rng = np.random.default_rng(4)
    m = Mesh(25)
    op = DiscreteOperator(m)
    for dt in (0.01, 0.2):
        x = rng.standard_normal(25)
        forward = x - dt * op.laplacian_values(x)
        back = solve_resolvent(op, dt, GridFunction(m, forward))
        np.testing.assert_allclose(back.values, x, rtol=1e-10, atol=1e-12)


def test_resolvent_matches_dense_inverse():
    rng = np.random.default_rng(5)
    n, dt = 12, 0.07
    op = DiscreteOperator(Mesh(n))
    x = rng.standard_normal(n)
    out = solve_resolvent(op, dt, GridFunction(Mesh(n), x))
    np.testing.assert_allclose(out.values, resolvent_dense(n, dt) @ x, rtol=1e-10)


def test_maximum_principle_resolvent():
    # entries of the resolvent matrix are nonnegative with row sums <= 1,
    # hence sup-norm contraction
    n = 17
    R = resolvent_dense(n, 0.3)
    assert R.min() >= -1e-14
    assert R.sum(axis=1).max() <= 1.0 + 1e-12

    rng = np.random.default_rng(6)
    op = DiscreteOperator(Mesh(n))
    for dt in (1e-3, 0.1, 0.9):
        for _ in range(5):
            x = GridFunction(Mesh(n), rng.standard_normal(n) * 10)
            y = solve_resolvent(op, dt, x)
            assert norm_e(y) <= norm_e(x) * (1 + 1e-13)


def test_maximum_principle_semigroup():
    rng = np.random.default_rng(7)
    m = Mesh(21)
    op = DiscreteOperator(m)
    damp = np.exp(-0.2 * op.eigenvalues)
    assert np.all(damp > 0) and np.all(damp <= 1.0)
    for dt in (1e-3, 0.2, 0.8):
        for _ in range(5):
            x = GridFunction(m, rng.standard_normal(21) * 5)
            y = apply_semigroup(op, dt, x)
            assert norm_e(y) <= norm_e(x) * (1 + 1e-12)


def test_semigroup_identity_at_zero():
    rng = np.random.default_rng(8)
    m = Mesh(19)
    op = DiscreteOperator(m)
    x = GridFunction(m, rng.standard_normal(19))
    out = apply_semigroup(op, 0.0, x)
    np.testing.assert_allclose(out.values, x.values, rtol=1e-12, atol=1e-14)


def test_semigroup_eigenvector_decay():
    m = Mesh(15)
    op = DiscreteOperator(m)
    dt = 0.03
    for k in (1, 8):
        v = eigenvector(m, k)
        out = apply_semigroup(op, dt, v)
        np.testing.assert_allclose(
            out.values,
            np.exp(-dt * op.eigenvalues[k - 1]) * v.values,
            rtol=1e-11,
            atol=1e-13,
        )


def test_semigroup_law():
    rng = np.random.default_rng(9)
    m = Mesh(33)
    op = DiscreteOperator(m)
    x = GridFunction(m, rng.standard_normal(33))
    once = apply_semigroup(op, 0.07, apply_semigroup(op, 0.13, x))
    direct = apply_semigroup(op, 0.2, x)
    np.testing.assert_allclose(once.values, direct.values, rtol=1e-10, atol=1e-13)


def test_dst_round_trip_arbitrary_lengths():
    rng = np.random.default_rng(10)
    for n in (1, 7, 12, 127, 128):
        op = DiscreteOperator(Mesh(n))
        v = rng.standard_normal(n)
        back = op.from_modes(op.to_modes(v))
        assert np.abs(back - v).max() <= 1e-12 * max(1.0, np.abs(v).max())


def test_dst_matches_sine_matrix():
    n = 9
    op = DiscreteOperator(Mesh(n))
    rng = np.random.default_rng(11)
    v = rng.standard_normal(n)
    S = sine_matrix(n) * np.sqrt(2.0 / (n + 1))  # orthonormal synthesis
    np.testing.assert_allclose(op.to_modes(v), S @ v, rtol=1e-12, atol=1e-13)


def test_norm_h():
    m = Mesh(3)
    assert norm_h(GridFunction.zeros(m)) == 0.0
    ones = GridFunction(m, np.ones(3))
    assert norm_h(ones) == pytest.approx(np.sqrt(0.75), rel=1e-12)
    # fine-mesh first mode: integral of sin^2 is 1/2
    fine = Mesh(255)
    v1 = eigenvector(fine, 1)
    assert norm_h(v1) == pytest.approx(np.sqrt(0.5), abs=2 * fine.dx**2)


def test_norm_e():
    m = Mesh(3)
    assert norm_e(GridFunction.zeros(m)) == 0.0
    assert norm_e(GridFunction(m, np.array([1.0, -3.0, 2.0]))) == 3.0
    big = Mesh(50)
    for k in (1, 25, 50):
        assert norm_e(eigenvector(big, k)) <= 1.0 + 1e-14
