import math

import numpy as np
import pytest

from ellq.certificate import StabilityCertificate
from ellq.dynamics import RelaxState, init_cold, init_warm
from ellq.errors import InvalidParameterError, InvalidThresholdError, NoEntryError
from ellq.linalg import direct_solve
from ellq.stopping import (
    CheckpointRunner,
    StoppingConfig,
    bernoulli_count,
    checkpoint_rng,
    coasting_time,
    default_config,
    entry_test,
    hoeffding_buffer,
    make_schedule,
    max_threshold,
    run_dynamic_solve,
    sample_checkpoint,
    threshold_beta,
    worst_case_time,
    write_checkpoints_csv,
    write_results_csv,
)

UNIT = StabilityCertificate(gamma0=1.0, eta=0.5, c0=0.5, C_st=1.0, c_st=1.0)


def test_schedule():
    assert np.allclose(make_schedule(0.5, 2, 4), [0.5, 1, 2, 4])
    assert np.allclose(make_schedule(0.5, 2, 1), [0.5])
    with pytest.raises(InvalidParameterError):
        make_schedule(0.5, 1, 4)
    with pytest.raises(InvalidParameterError):
        make_schedule(0.0, 2, 4)


def test_bernoulli_extremes_and_determinism():
    assert bernoulli_count(0.0, 500, checkpoint_rng(1, 0)) == 0
    assert bernoulli_count(1.0, 500, checkpoint_rng(1, 0)) == 500
    a = bernoulli_count(0.3, 1000, checkpoint_rng(7, 2))
    b = bernoulli_count(0.3, 1000, checkpoint_rng(7, 2))
    assert a == b
    assert bernoulli_count(0.3, 1000, checkpoint_rng(7, 3)) != a or bernoulli_count(
        0.3, 1000, checkpoint_rng(8, 2)) != a


def test_bernoulli_mean():
    rng = checkpoint_rng(0, 0)
    counts = [bernoulli_count(0.2, 1000, rng) for _ in range(200)]
    assert abs(np.mean(counts) / 1000 - 0.2) < 0.005


def test_hoeffding_values():
    assert hoeffding_buffer(8, 0.05, 200) == pytest.approx(math.sqrt(math.log(320) / 400), rel=1e-12)
    assert hoeffding_buffer(8, 0.05, 200) == pytest.approx(0.1201, abs=1e-4)
    assert hoeffding_buffer(8, 0.05, 800) == pytest.approx(hoeffding_buffer(8, 0.05, 200) / 2)
    assert hoeffding_buffer(1, 2 / math.e ** 2, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("p_hat, accept", [(0.05, True), (0.15, False), (0.14, True)])
def test_entry_test(p_hat, accept):
    assert entry_test(p_hat, 0.06, 0.2) is accept


def test_coasting_hand_value():
    assert coasting_time(1e-3, UNIT, 0.2) == pytest.approx(math.log(1000), rel=1e-12)
    fast = StabilityCertificate(1.0, 0.5, 0.5, 1.0, 2.0)
    shorter = coasting_time(1e-3, fast, 0.2) - coasting_time(1e-2, fast, 0.2)
    assert shorter == pytest.approx(math.log(10) / 2.0)


def test_threshold_hypothesis():
    # beta0 = C_tail * sqrt(p0/(1-p0)) = 1.2 with C_tail = 1
    p0 = 1.44 / 2.44
    assert threshold_beta(UNIT, p0) == pytest.approx(1.2)
    with pytest.raises(InvalidThresholdError):
        StoppingConfig(epsilon=1e-3, p0=p0, t0=1.0).validate(UNIT)
    with pytest.raises(InvalidThresholdError):
        coasting_time(1e-3, UNIT, p0)
    assert threshold_beta(UNIT, max_threshold(UNIT, 0.5)) == pytest.approx(0.5)


def test_worst_case_time():
    assert worst_case_time(UNIT, 1.0, 1e-3) == pytest.approx(math.log(8000))
    assert worst_case_time(StabilityCertificate(1.0, 0.5, 0.5, 0.125, 0.125), 1.0, 1.0) == pytest.approx(0.0)
    assert worst_case_time(UNIT, 2.0, 1e-3) > worst_case_time(UNIT, 1.0, 1e-3)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        StoppingConfig(epsilon=0.0, p0=0.1, t0=1.0).validate()
    with pytest.raises(InvalidParameterError):
        StoppingConfig(epsilon=1e-3, p0=0.1, t0=1.0, N_shot=0).validate()


def test_default_config_buffer_fits(cert16):
    cfg = default_config(cert16, seed=3)
    delta = hoeffding_buffer(cfg.K_max, cfg.nu, cfg.N_shot)
    assert delta <= cfg.p0 / 4
    assert threshold_beta(cert16, cfg.p0) <= 0.5 + 1e-12


@pytest.fixture(scope="module")
def runners(systems16):
    return {k: CheckpointRunner(s) for k, s in systems16.items()}


@pytest.mark.slow
def test_case_one_meets_tolerance(systems16, cert16, runners, xstar16):
    res = run_dynamic_solve(systems16["I"], default_config(cert16, seed=11), cert16,
                            runner=runners["I"], reference=xstar16["I"], label="I")
    assert res.final_rel_err <= 1e-3
    assert res.T_star == pytest.approx(res.t_ent + res.delta_t)
    assert res.T_star < res.T_worst
    assert res.shots_used == res.config.N_shot * len(res.checkpoint_log)
    assert res.p_x_final >= 1 - 10 * 1e-6
    assert res.p_res_final + res.p_x_final == pytest.approx(1.0)
    assert not res.false_accept


def test_four_hundred_shots_cannot_enter(systems16, cert16, runners):
    # with the certified C_tail the admissible p0 sits far below the 400-shot buffer
    cfg = default_config(cert16, N_shot=400, K_max=3, seed=0)
    assert hoeffding_buffer(cfg.K_max, cfg.nu, 400) > cfg.p0
    with pytest.raises(NoEntryError) as info:
        run_dynamic_solve(systems16["I"], cfg, cert16, runner=runners["I"])
    assert len(info.value.log) == cfg.K_max


@pytest.mark.slow
def test_smooth_case_enters_no_later(systems16, cert16, runners):
    cfg = default_config(cert16, seed=5)
    t = {k: run_dynamic_solve(systems16[k], cfg, cert16, runner=runners[k]).t_ent for k in ("I", "III")}
    assert t["I"] <= t["III"]


def test_warm_start_enters_first(systems16, cert16, xstar16):
    s = systems16["II"]
    x = xstar16["II"]
    start = init_warm(s, x, s.G.to_dense() @ x)
    res = run_dynamic_solve(s, default_config(cert16, seed=0), cert16, initial=start, reference=x)
    assert res.k_ent == 0
    assert res.final_rel_err <= 1e-10


def test_seed_reproducible(systems8, cert8):
    s = systems8["IV"]
    runner = CheckpointRunner(s)
    a = run_dynamic_solve(s, default_config(cert8, seed=4), cert8, runner=runner)
    b = run_dynamic_solve(s, default_config(cert8, seed=4), cert8)
    assert [r.X_k for r in a.checkpoint_log] == [r.X_k for r in b.checkpoint_log]
    assert np.array_equal(a.final_state.z, b.final_state.z)


def test_sample_checkpoint_zero_residual(systems8):
    s = systems8["I"]
    x = direct_solve(s)
    runner = CheckpointRunner(s, init_warm(s, x, s.G.to_dense() @ x))
    assert sample_checkpoint(s, 1.0, 1000, checkpoint_rng(0, 0), runner) == 0


def test_csv_schemas(systems8, cert8, tmp_path):
    s = systems8["I"]
    res = run_dynamic_solve(s, default_config(cert8, seed=1), cert8, label="I")
    lines = write_results_csv([res], tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ("case,n,eps,p0,N_shot,seed,t_ent,delta_t,T_star,T_worst,shots_used,"
                        "final_rel_err,p_res_final,p_x_final,gamma_out")
    assert lines[1].startswith("I,8,")
    lines = write_checkpoints_csv(res.checkpoint_log, tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "k,t_k,X_k,p_hat,delta,accepted"
    assert len(lines) == len(res.checkpoint_log) + 1
    assert lines[-1].endswith(",1")


def test_gamma_out_matches_definition(systems8, cert8):
    s = systems8["III"]
    res = run_dynamic_solve(s, default_config(cert8, seed=2), cert8)
    z0 = np.linalg.norm(init_cold(s).z)
    assert res.gamma_out == pytest.approx(z0 / np.linalg.norm(res.final_state.z))
