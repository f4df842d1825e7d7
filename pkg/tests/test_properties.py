import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ellq.cases import f_one
from ellq.certificate import eta_admissible, lyapunov_constants
from ellq.dynamics import RelaxState, residual_probability, solution_block_weight
from ellq.fem import assemble_system
from ellq.filters import inverse_poly
from ellq.linalg import CSRMatrix, spmv, spmv_transpose
from ellq.mesh import build_uniform_mesh, validate_mesh
from ellq.stopping import StabilityCertificate, coasting_time, hoeffding_buffer

finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_csr_matches_dense(rows, cols, data):
    vals = data.draw(st.lists(finite, min_size=rows * cols, max_size=rows * cols))
    a = np.array(vals).reshape(rows, cols)
    a[np.abs(a) < 300] = 0.0
    m = CSRMatrix.from_dense(a)
    x = np.array(data.draw(st.lists(finite, min_size=cols, max_size=cols)))
    y = np.array(data.draw(st.lists(finite, min_size=rows, max_size=rows)))
    assert np.allclose(spmv(m, x), a @ x, rtol=1e-12, atol=1e-9)
    assert np.allclose(spmv_transpose(m, y), a.T @ y, rtol=1e-12, atol=1e-9)
    assert np.array_equal(m.to_dense(), a)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 12))
def test_mesh_always_valid(n):
    mesh = build_uniform_mesh(n)
    assert all(validate_mesh(mesh).values())
    assert mesh.n_dof == (n - 1) ** 2 and mesh.n_triangles == 2 * n * n


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 9))
def test_gram_factor_is_spd(n):
    a = assemble_system(n, f_one).dense_A()
    assert np.allclose(a, a.T)
    assert np.linalg.eigvalsh(a)[0] > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.01, 1.0))
def test_certificate_constants_positive(gamma0, frac):
    bound = 2 * gamma0 ** 2 / (2 * gamma0 ** 2 + 1)
    eta = frac * min(gamma0, bound) * 0.999
    assert eta_admissible(gamma0, eta)
    c = lyapunov_constants(gamma0, eta)
    assert c.c0 > 0 and c.c_st > 0 and c.C_st >= 1 and c.m_minus > 0
    assert c.C_tail == c.C_st / c.c_st


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_probabilities_complementary(v):
    v = np.array(v)
    state = RelaxState(0.0, v[:2], v[2:4], v[4:])
    if not np.any(v):
        return
    p = residual_probability(state)
    assert 0.0 <= p <= 1.0
    assert abs(p + solution_block_weight(state) - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.floats(1e-4, 0.5), st.integers(1, 10 ** 6))
def test_buffer_quarter_at_four_times_shots(K, nu, N):
    assert np.isclose(hoeffding_buffer(K, nu, 4 * N), hoeffding_buffer(K, nu, N) / 2)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-8, 0.5), st.floats(1e-6, 0.05))
def test_coasting_decreasing_in_epsilon(eps, p0):
    cert = StabilityCertificate(1.0, 0.5, 0.5, 1.0, 1.0)
    assert coasting_time(eps, cert, p0) >= coasting_time(min(2 * eps, 0.9), cert, p0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.002, 0.95), st.integers(0, 40))
def test_sup_error_monotone_in_degree(lo, d):
    first = inverse_poly((lo, 1.0), 0).sup_error
    assert inverse_poly((lo, 1.0), d + 1).sup_error <= inverse_poly((lo, 1.0), d).sup_error + 1e-12 * first
