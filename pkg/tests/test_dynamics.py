import numpy as np
import pytest

from ellq.cases import f_one, f_three
from ellq.certificate import certify
from ellq.dynamics import (
    RelaxState,
    algebraic_residual,
    apply_generator,
    evolve,
    generator_diagnostics,
    init_cold,
    init_warm,
    invariant_residual,
    joint_generator,
    recover_flux,
    residual_probability,
    solution_block_weight,
    time_step,
    trajectory,
)
from ellq.errors import DivergenceError, InvalidParameterError, UndefinedProbabilityError
from ellq.fem import assemble_system
from ellq.linalg import dense_expm_apply, direct_solve


@pytest.fixture(scope="module")
def sys8():
    return assemble_system(8, f_three)


def test_cold_start(sys8):
    st = init_cold(sys8)
    assert residual_probability(st) == 1.0
    assert solution_block_weight(st) == 0.0
    assert np.isclose(np.linalg.norm(st.w), np.linalg.norm(sys8.b))
    assert np.all(invariant_residual(sys8, st) == 0)
    assert np.array_equal(algebraic_residual(sys8, st), sys8.b)
    assert np.all(recover_flux(sys8, st) == 0)


def test_warm_start_variants(sys8):
    xs = direct_solve(sys8)
    g = sys8.G.to_dense()
    assert np.array_equal(init_warm(sys8, np.zeros(sys8.n_dof), np.zeros(sys8.n_flux)).z, init_cold(sys8).z)
    st = init_warm(sys8, 0.9 * xs, g @ (0.9 * xs))
    assert np.isclose(np.linalg.norm(st.w), 0.1 * np.linalg.norm(sys8.b), rtol=1e-12)
    fixed = init_warm(sys8, xs, g @ xs)
    assert np.linalg.norm(fixed.w) < 1e-12 * np.linalg.norm(sys8.b)
    out = evolve(sys8, fixed, 5.0)
    assert np.linalg.norm(out.x - xs) <= 1e-11 * np.linalg.norm(xs)
    assert np.allclose(recover_flux(sys8, fixed), g @ xs, atol=1e-12)
    assert np.linalg.norm(algebraic_residual(sys8, fixed)) < 1e-10


def test_warm_start_length_checked(sys8):
    with pytest.raises(InvalidParameterError):
        init_warm(sys8, np.zeros(3), np.zeros(sys8.n_flux))


def test_generator(sys8):
    st = init_cold(sys8)
    dx, dr, ds = apply_generator(sys8, st)
    assert np.array_equal(dx, sys8.b) and np.all(dr == 0)
    assert np.allclose(ds, sys8.G.to_dense() @ sys8.b)
    zero = RelaxState(0.0, np.zeros(sys8.n_dof), np.zeros(sys8.n_dof), np.zeros(sys8.n_flux))
    assert all(np.all(v == 0) for v in apply_generator(sys8, zero))
    rng = np.random.default_rng(5)
    rand = RelaxState(0.0, *(rng.standard_normal(k) for k in (sys8.n_dof, sys8.n_dof, sys8.n_flux)))
    got = np.concatenate(apply_generator(sys8, rand))
    assert np.allclose(got, joint_generator(sys8) @ rand.z, rtol=0, atol=1e-13 * np.linalg.norm(got))


def test_probability_cases():
    one = np.ones(1)
    assert residual_probability(RelaxState(0.0, one, 0 * one, np.zeros(2))) == 0.0
    assert residual_probability(RelaxState(0.0, one, one, np.zeros(2))) == 0.5
    with pytest.raises(UndefinedProbabilityError):
        residual_probability(RelaxState(0.0, 0 * one, 0 * one, np.zeros(2)))
    tiny = RelaxState(0.0, 0 * one, 0 * one, np.array([0.0, 6e-258]))
    assert residual_probability(tiny) == 1.0 and solution_block_weight(tiny) == 0.0


def test_evolve_zero_time_is_identity(sys8):
    st = init_cold(sys8)
    out = evolve(sys8, st, 0.0)
    assert np.array_equal(out.z, st.z)
    with pytest.raises(InvalidParameterError):
        evolve(sys8, out, -1.0)


def test_evolve_hits_final_time_exactly(sys8):
    out = evolve(sys8, init_cold(sys8), 1.2345)
    assert out.t == pytest.approx(1.2345, abs=1e-12)


def test_evolve_does_not_mutate_input(sys8):
    st = init_cold(sys8)
    before = st.z.copy()
    evolve(sys8, st, 1.0)
    assert np.array_equal(st.z, before)


@pytest.mark.slow
def test_matches_expm_oracle_n16(systems16):
    s = systems16["III"]
    st = init_cold(s)
    got = evolve(s, st, 10.0).z
    ref = dense_expm_apply(joint_generator(s), 10.0, st.z)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) <= 1e-7


def test_invariant_conserved(sys8):
    tr = trajectory(sys8, init_cold(sys8), 10.0, stride=None, track_invariant=True)
    assert tr.max_invariant <= 1e-12


def test_algebraic_residual_identity(sys8):
    st = evolve(sys8, init_cold(sys8), 3.7)
    direct = sys8.b - sys8.dense_A() @ st.x
    assert np.linalg.norm(algebraic_residual(sys8, st) - direct) <= 1e-11 * np.linalg.norm(sys8.b)


def test_divergence_detected(sys8):
    bad = init_cold(sys8)
    bad.r[0] = np.inf
    with pytest.raises(DivergenceError):
        evolve(sys8, bad, 1.0)
    with pytest.raises(InvalidParameterError):
        evolve(sys8, init_cold(sys8), 1.0, theta=5.0)


def test_residual_decay_rate_and_flux_limit(systems16, cert16):
    s = systems16["III"]
    tr = trajectory(s, init_cold(s), 40.0, stride=50, keep_states=True)
    t, w = np.asarray(tr.t), np.asarray(tr.norm_w)
    late = t >= 10.0
    slope = np.polyfit(t[late], np.log(w[late]), 1)[0]
    assert slope <= -cert16.c_st
    # b - G^T q equals r along the flow, so it inherits the certified decay
    for st in tr.states:
        gap = np.linalg.norm(s.b - s.GT.to_dense() @ recover_flux(s, st))
        assert gap <= cert16.C_st * np.exp(-cert16.c_st * st.t) * w[0] * (1 + 1e-9)


def test_trajectory_csv(sys8, tmp_path):
    tr = trajectory(sys8, init_cold(sys8), 1.0, reference=direct_solve(sys8))
    path = tr.write_csv(tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,norm_x,norm_w,p_res,norm_rA,rel_err"
    assert len(lines) == len(tr.t) + 1


def test_time_step_and_diagnostics(sys8):
    norm_g = sys8.spectral().norm_G
    assert time_step(sys8, 0.5) == pytest.approx(0.5 / (1 + norm_g), rel=1e-6)
    diag = generator_diagnostics(sys8)
    assert diag["hermitian_norm"] == pytest.approx(norm_g, rel=1e-10)
    assert diag["damping_norm"] == 1.0
    with pytest.raises(InvalidParameterError):
        time_step(sys8, 0.0)


def test_manufactured_relaxation_decays(systems16):
    s = systems16["III"]
    tr = trajectory(s, init_cold(s), 40.0, reference=direct_solve(s))
    assert tr.rel_err[-1] < 1e-6
    assert tr.norm_w[-1] / tr.norm_w[0] < 1e-6
