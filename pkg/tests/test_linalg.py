import numpy as np
import pytest

from ellq.cases import f_one, f_three
from ellq.errors import AssemblyError, DenseCeilingError, InvalidParameterError
from ellq.fem import assemble_system
from ellq.linalg import (
    CSRMatrix,
    cholesky_factor,
    check_dense,
    dense_ceiling,
    dense_eig_sym,
    dense_expm_apply,
    direct_solve,
    spmv,
    spmv_transpose,
)
from ellq import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return request.param


def test_identity(backend):
    v = np.arange(5.0)
    assert np.array_equal(spmv(CSRMatrix.identity(5), v, backend), v)
    assert np.array_equal(spmv_transpose(CSRMatrix.identity(5), v, backend), v)


def test_random_vs_dense(backend):
    rng = np.random.default_rng(0)
    for shape in [(5, 5), (7, 3), (3, 8)]:
        a = rng.standard_normal(shape) * (rng.random(shape) < 0.5)
        m = CSRMatrix.from_dense(a)
        x = rng.standard_normal(shape[1])
        y = rng.standard_normal(shape[0])
        assert np.allclose(spmv(m, x, backend), a @ x, rtol=0, atol=1e-14)
        assert np.allclose(spmv_transpose(m, y, backend), a.T @ y, rtol=0, atol=1e-14)


def test_adjoint_identity(backend):
    g = assemble_system(8, f_one).G
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(g.shape[1]), rng.standard_normal(g.shape[0])
    lhs = spmv(g, x, backend) @ y
    assert np.isclose(lhs, x @ spmv_transpose(g, y, backend), rtol=1e-13)


def test_n2_factor_on_ones():
    g = assemble_system(2, f_one).G
    assert np.isclose(np.sum(spmv(g, np.ones(1)) ** 2), 16.0)


def test_from_coo_sums_duplicates_and_sorts():
    m = CSRMatrix.from_coo([1, 0, 1, 0], [2, 1, 2, 0], [1.0, 2.0, 3.0, 4.0], (2, 3))
    assert np.array_equal(m.to_dense(), [[4, 2, 0], [0, 0, 4]])
    assert np.array_equal(m.indices, [0, 1, 2])


def test_length_mismatch_rejected():
    with pytest.raises(InvalidParameterError):
        spmv(CSRMatrix.identity(3), np.ones(4))


def test_direct_solve_n2():
    s = assemble_system(2, lambda x, y: 0 * x + 1).with_rhs(np.array([16.0]))
    assert np.isclose(direct_solve(s)[0], 1.0)


def test_direct_solve_residual_and_linearity():
    s = assemble_system(16, f_three)
    x = direct_solve(s)
    assert np.linalg.norm(s.b - s.dense_A() @ x) <= 1e-10 * np.linalg.norm(s.b)
    assert np.allclose(direct_solve(s, 2 * s.b), 2 * x, rtol=1e-12, atol=0)


def test_cholesky_rejects_indefinite():
    with pytest.raises(AssemblyError):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_eig_small_cases():
    w, _ = dense_eig_sym(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
    w, _ = dense_eig_sym(assemble_system(2, f_one).dense_A())
    assert np.allclose(w, [16.0])
    a = assemble_system(8, f_one).dense_A()
    w, v = dense_eig_sym(a)
    assert np.linalg.norm(v @ np.diag(w) @ v.T - a) <= 1e-10


def test_eig_rejects_nonsymmetric():
    with pytest.raises(InvalidParameterError):
        dense_eig_sym(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_expm_cases():
    v = np.array([1.0, 2.0])
    assert np.array_equal(dense_expm_apply(np.eye(2), 0.0, v), v)
    assert np.allclose(dense_expm_apply(-np.eye(2), 1.0, np.array([1.0, 0.0])), [np.exp(-1), 0])
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    t = 0.7
    closed = np.array([np.cos(t) - 2 * np.sin(t), np.sin(t) + 2 * np.cos(t)])
    assert np.allclose(dense_expm_apply(rot, t, v), closed, rtol=0, atol=1e-12)


def test_dense_ceiling_env(monkeypatch):
    monkeypatch.setenv("ELLQ_DENSE_CEILING", "10")
    assert dense_ceiling() == 10
    with pytest.raises(DenseCeilingError):
        check_dense(11)
    with pytest.raises(DenseCeilingError):
        assemble_system(8, f_one).dense_A()
