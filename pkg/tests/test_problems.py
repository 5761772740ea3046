import numpy as np
import pytest

from rcg.diagnostics import fd_gradient_check, lyapunov_residual, reference_solution
from rcg.geometry import DomainError, ProductArray
from rcg.manifolds import qf
from rcg.problems import (
    generate_instance,
    lyapunov_problem,
    rayleigh_problem,
    read_instance,
    svd_problem,
    write_instance,
)


def test_rayleigh_identity_is_constant():
    p = rayleigh_problem(np.eye(4))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = p.geometry.random_point(rng)
        assert p.cost(x) == pytest.approx(1.0)
        np.testing.assert_allclose(p.gradient(x), 0, atol=1e-14)


def test_rayleigh_diagonal_minimum():
    p = rayleigh_problem(np.diag([1.0, 2.0, 3.0]))
    assert reference_solution(p).value == pytest.approx(1.0)
    x = np.array([1.0, 0, 0])
    assert p.cost(x) == 1.0
    np.testing.assert_allclose(p.gradient(x), 0, atol=1e-15)


def test_rayleigh_rejects_nonsymmetric():
    with pytest.raises(DomainError):
        rayleigh_problem(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_svd_zero_matrix():
    p = svd_problem(np.zeros((4, 3)), 2)
    x = ProductArray((np.eye(4)[:, :2], np.eye(3)[:, :2]))
    assert p.cost(x) == 0.0
    assert p.geometry.norm(x, p.gradient(x)) == 0.0


def test_svd_diagonal_optimum():
    a = np.zeros((4, 3))
    a[[0, 1, 2], [0, 1, 2]] = [3.0, 2.0, 1.0]
    p = svd_problem(a, 2)
    x = ProductArray((np.eye(4)[:, :2], np.eye(3)[:, :2]))
    assert p.cost(x) == pytest.approx(-6.5)
    assert reference_solution(p).value == pytest.approx(-6.5)
    assert p.geometry.norm(x, p.gradient(x)) < 1e-14


def test_svd_cost_invariant_under_basis_change():
    p = generate_instance("svd", (7, 5, 2), 3)
    u, v = p.initial_point
    rng = np.random.default_rng(1)
    q1 = qf(rng.standard_normal((2, 2)))[0]
    q2 = qf(rng.standard_normal((2, 2)))[0]
    assert p.cost(ProductArray((u @ q1, v @ q2))) == pytest.approx(p.cost(p.initial_point),
                                                                  rel=1e-13)


def test_svd_bad_rank():
    with pytest.raises(DomainError):
        svd_problem(np.ones((3, 2)), 3)


def test_lyapunov_stationary_at_identity():
    rng = np.random.default_rng(2)
    b = rng.standard_normal((4, 4))
    a = b @ b.T + 4 * np.eye(4)
    p = lyapunov_problem(a, 2 * a)
    x = np.eye(4)
    assert p.geometry.norm(x, p.gradient(x)) < 1e-12
    assert lyapunov_residual(p, x) < 1e-15


def test_lyapunov_identity_operator_halves_c():
    c = np.diag([2.0, 4.0, 6.0])
    p = lyapunov_problem(np.eye(3), c)
    np.testing.assert_allclose(reference_solution(p).point, c / 2)


def test_lyapunov_rejects_indefinite_a():
    with pytest.raises(DomainError):
        lyapunov_problem(np.diag([1.0, -1.0]), np.eye(2))


def test_gradient_zero_iff_residual_zero():
    p = generate_instance("lyapunov", (8,), 0)
    ref = reference_solution(p)
    np.testing.assert_allclose(ref.point, p.data["X_star"], rtol=1e-8, atol=1e-8)
    assert lyapunov_residual(p, ref.point) < 1e-8
    assert p.geometry.norm(ref.point, p.gradient(ref.point)) < 1e-8
    x = p.initial_point
    assert lyapunov_residual(p, x) > 1e-3
    assert p.geometry.norm(x, p.gradient(x)) > 1e-3


@pytest.mark.parametrize("kind,dims", [("rayleigh", (6,)), ("svd", (6, 5, 2)), ("lyapunov", (5,))])
def test_generation_is_deterministic(kind, dims):
    a = generate_instance(kind, dims, 11)
    b = generate_instance(kind, dims, 11)
    c = generate_instance(kind, dims, 12)
    assert np.array_equal(a.data["A"], b.data["A"])
    assert not np.array_equal(a.data["A"], c.data["A"])
    a.geometry.check_point(a.initial_point)


@pytest.mark.parametrize("kind,dims", [("rayleigh", (6,)), ("svd", (6, 5, 2)), ("lyapunov", (5,))])
def test_archive_roundtrip(tmp_path, kind, dims):
    p = generate_instance(kind, dims, 5)
    path = tmp_path / "inst.rcgi"
    write_instance(p, path)
    q = read_instance(path)
    assert q.kind == p.kind and q.seed == 5 and q.dims == p.dims
    for key, val in p.data.items():
        if isinstance(val, np.ndarray):
            assert np.array_equal(q.data[key], val)
    assert q.cost(q.initial_point) == p.cost(p.initial_point)


def test_archive_rejects_garbage(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_instance(path)


@pytest.mark.parametrize("kind,dims", [("rayleigh", (30,)), ("svd", (20, 12, 3)), ("lyapunov", (10,))])
def test_gradients_match_finite_differences(kind, dims):
    p = generate_instance(kind, dims, 9)
    rng = np.random.default_rng(0)
    x = p.geometry.random_point(rng) if kind != "lyapunov" else p.initial_point
    assert fd_gradient_check(p, x, trials=5, rng=1) < 1e-6


def test_bad_dims():
    with pytest.raises(DomainError):
        generate_instance("svd", (3, 4), 0)
    with pytest.raises(DomainError):
        generate_instance("knapsack", (3,), 0)
