"""Checkpoint sampling, the buffered constant-threshold entry test and coasting.

The residual "measurement" is simulated: the exact residual probability of a
fresh evolution to each checkpoint time is computed, then ``N_shot`` Bernoulli
outcomes are drawn from a stream derived from ``(seed, k)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ellq.certificate import StabilityCertificate
from ellq.dynamics import (
    DEFAULT_THETA,
    RelaxState,
    evolve,
    init_cold,
    residual_probability,
    solution_block_weight,
)
from ellq.errors import InvalidParameterError, InvalidThresholdError, NoEntryError
from ellq.fem import EllipticSystem
from ellq.linalg import direct_solve


@dataclass(frozen=True)
class StoppingConfig:
    epsilon: float
    p0: float
    t0: float
    growth: float = 2.0
    K_max: int = 10
    N_shot: int = 400
    nu: float = 0.01
    seed: int = 0
    theta: float = DEFAULT_THETA

    def validate(self, cert: StabilityCertificate | None = None) -> None:
        if not (0.0 < self.epsilon < 1.0):
            raise InvalidParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (0.0 < self.p0 < 1.0):
            raise InvalidParameterError(f"p0 must lie in (0, 1), got {self.p0}")
        if not (0.0 < self.nu < 1.0):
            raise InvalidParameterError(f"nu must lie in (0, 1), got {self.nu}")
        if self.N_shot < 1:
            raise InvalidParameterError("N_shot must be at least 1")
        make_schedule(self.t0, self.growth, self.K_max)
        if cert is not None:
            beta0 = threshold_beta(cert, self.p0)
            if beta0 >= 1.0:
                raise InvalidThresholdError(
                    f"beta0 = C_tail*sqrt(p0/(1-p0)) = {beta0:.4g} >= 1 for p0={self.p0}"
                )


def threshold_eta(p0: float) -> float:
    return math.sqrt(p0 / (1.0 - p0))


def threshold_beta(cert: StabilityCertificate, p0: float) -> float:
    return cert.C_tail * threshold_eta(p0)


def max_threshold(cert: StabilityCertificate, beta: float) -> float:
    """Largest ``p0`` with ``C_tail sqrt(p0/(1-p0)) <= beta``."""
    eta0 = beta / cert.C_tail
    return eta0 * eta0 / (1.0 + eta0 * eta0)


def shots_for_buffer(K: int, nu: float, delta: float) -> int:
    """Smallest ``N_shot`` whose Hoeffding buffer is at most ``delta``."""
    return math.ceil(math.log(2 * K / nu) / (2.0 * delta * delta))


def default_config(cert: StabilityCertificate, epsilon: float = 1e-3, seed: int = 0,
                   p0: float | None = None, N_shot: int | None = None, K_max: int = 10,
                   nu: float = 0.01, growth: float = 2.0, t0: float | None = None,
                   theta: float = DEFAULT_THETA) -> StoppingConfig:
    """Defaults: ``p0 = min(0.2, p0 at beta0 = 1/2)``, ``t0 = 1/(2 c_st)`` and
    ``N_shot`` sized so the buffer is a quarter of ``p0``."""
    if p0 is None:
        p0 = min(0.2, max_threshold(cert, 0.5))
    if N_shot is None:
        N_shot = shots_for_buffer(K_max, nu, 0.25 * p0)
    if t0 is None:
        t0 = 1.0 / (2.0 * cert.c_st)
    return StoppingConfig(epsilon=epsilon, p0=p0, t0=t0, growth=growth, K_max=K_max,
                          N_shot=N_shot, nu=nu, seed=seed, theta=theta)


def make_schedule(t0: float, growth: float, K_max: int) -> np.ndarray:
    if not t0 > 0:
        raise InvalidParameterError(f"t0 must be positive, got {t0}")
    if not growth > 1:
        raise InvalidParameterError(f"growth must exceed 1, got {growth}")
    if int(K_max) != K_max or K_max < 1:
        raise InvalidParameterError(f"K_max must be a positive integer, got {K_max}")
    return t0 * float(growth) ** np.arange(int(K_max))


def hoeffding_buffer(K: int, nu: float, N_shot: int) -> float:
    if K < 1 or N_shot < 1 or not (0.0 < nu < 1.0):
        raise InvalidParameterError(f"need K >= 1, N_shot >= 1, 0 < nu < 1 (got {K}, {N_shot}, {nu})")
    return math.sqrt(math.log(2 * K / nu) / (2.0 * N_shot))


def entry_test(p_hat: float, delta: float, p0: float) -> bool:
    # boundary equality accepts; the 1e-12 absorbs decimal round-off in p_hat + delta
    return p_hat + delta <= p0 + 1e-12


def coasting_time(epsilon: float, cert: StabilityCertificate, p0: float) -> float:
    if not (0.0 < epsilon < 1.0):
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    eta0 = threshold_eta(p0)
    beta0 = cert.C_tail * eta0
    if beta0 >= 1.0:
        raise InvalidThresholdError(f"beta0 = {beta0:.4g} >= 1; lower p0")
    arg = cert.C_tail * cert.C_st * eta0 / ((1.0 - beta0) * epsilon)
    return max(0.0, math.log(arg) / cert.c_st)


def worst_case_time(cert: StabilityCertificate, gamma_b: float, epsilon: float) -> float:
    if not gamma_b > 0:
        raise InvalidParameterError(f"Gamma_b must be positive, got {gamma_b}")
    return math.log(4.0 * cert.C_st * (1.0 + cert.C_tail) * gamma_b / epsilon) / cert.c_st


def checkpoint_rng(seed: int, k: int) -> np.random.Generator:
    """Independent Philox stream for checkpoint ``k`` of run ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(k)])))


def bernoulli_count(p: float, N_shot: int, rng: np.random.Generator) -> int:
    """Number of successes among ``N_shot`` independent Bernoulli(``p``) draws."""
    if N_shot < 1:
        raise InvalidParameterError("N_shot must be at least 1")
    p = min(max(float(p), 0.0), 1.0)
    return int(rng.binomial(int(N_shot), p))


class CheckpointRunner:
    """Fresh evolutions from one initial state, memoized by target time.

    Each requested time is integrated from ``t = 0``; repeated requests (other
    seeds, the same schedule) reuse the identical deterministic result.
    """

    def __init__(self, system: EllipticSystem, initial: RelaxState | None = None,
                 theta: float = DEFAULT_THETA):
        self.system = system
        self.initial = init_cold(system) if initial is None else initial.copy()
        self.theta = theta
        self._states: dict[float, RelaxState] = {}

    def state_at(self, t: float) -> RelaxState:
        key = float(t)
        if key not in self._states:
            self._states[key] = evolve(self.system, self.initial, self.initial.t + key, theta=self.theta)
        return self._states[key]

    def p_res(self, t: float) -> float:
        return residual_probability(self.state_at(t))


def sample_checkpoint(system: EllipticSystem, t_k: float, N_shot: int, rng: np.random.Generator,
                      runner: CheckpointRunner | None = None) -> int:
    runner = CheckpointRunner(system) if runner is None else runner
    return bernoulli_count(runner.p_res(t_k), N_shot, rng)


@dataclass(frozen=True)
class CheckpointRecord:
    k: int
    t_k: float
    X_k: int
    p_hat: float
    delta: float
    accepted: bool
    p_true: float


@dataclass
class SolveResult:
    t_ent: float
    delta_t: float
    T_star: float
    T_worst: float
    shots_used: int
    checkpoint_log: list
    final_rel_err: float
    p_res_final: float
    p_x_final: float
    gamma_out: float
    config: StoppingConfig
    label: str = ""
    n: int = 0
    final_state: RelaxState | None = field(default=None, repr=False)

    @property
    def k_ent(self) -> int:
        return self.checkpoint_log[-1].k

    @property
    def false_accept(self) -> bool:
        """Entry accepted although the true residual probability exceeded ``p0``."""
        last = self.checkpoint_log[-1]
        return last.accepted and last.p_true > self.config.p0


def run_dynamic_solve(system: EllipticSystem, config: StoppingConfig, cert: StabilityCertificate,
                      rng: np.random.Generator | None = None, initial: RelaxState | None = None,
                      runner: CheckpointRunner | None = None, reference=None,
                      label: str = "") -> SolveResult:
    """Scan checkpoints, accept on ``p_hat + delta <= p0``, coast, and run production.

    Without ``rng`` each checkpoint draws from ``checkpoint_rng(config.seed, k)``.
    ``runner`` may be shared across calls on the same system and initial state.
    """
    config.validate(cert)
    if runner is None:
        runner = CheckpointRunner(system, initial, config.theta)
    schedule = make_schedule(config.t0, config.growth, config.K_max)
    delta = hoeffding_buffer(config.K_max, config.nu, config.N_shot)
    log = []
    t_ent = None
    for k, t_k in enumerate(schedule):
        stream = rng if rng is not None else checkpoint_rng(config.seed, k)
        p_true = runner.p_res(t_k)
        x_k = bernoulli_count(p_true, config.N_shot, stream)
        p_hat = x_k / config.N_shot
        accepted = entry_test(p_hat, delta, config.p0)
        log.append(CheckpointRecord(k, float(t_k), x_k, p_hat, delta, accepted, p_true))
        if accepted:
            t_ent = float(t_k)
            break
    if t_ent is None:
        raise NoEntryError(
            f"no checkpoint accepted within {config.K_max} times (last p_hat={log[-1].p_hat:.4g}, "
            f"delta={delta:.4g}, p0={config.p0:.4g}); raise N_shot, p0 or K_max",
            last_p_hat=log[-1].p_hat, log=log,
        )

    delta_t = coasting_time(config.epsilon, cert, config.p0)
    T_star = t_ent + delta_t
    final = runner.state_at(T_star)
    x_ref = direct_solve(system) if reference is None else np.asarray(reference)
    xnorm = float(np.linalg.norm(x_ref))
    gamma_b = float(np.linalg.norm(system.b)) / xnorm
    z0 = float(np.linalg.norm(runner.initial.z))
    return SolveResult(
        t_ent=t_ent,
        delta_t=delta_t,
        T_star=T_star,
        T_worst=worst_case_time(cert, gamma_b, config.epsilon),
        shots_used=config.N_shot * len(log),
        checkpoint_log=log,
        final_rel_err=float(np.linalg.norm(x_ref - final.x)) / xnorm,
        p_res_final=residual_probability(final),
        p_x_final=solution_block_weight(final),
        gamma_out=z0 / float(np.linalg.norm(final.z)),
        config=config,
        label=label,
        n=system.mesh.n if system.mesh is not None else 0,
        final_state=final,
    )


RESULT_COLUMNS = ["case", "n", "eps", "p0", "N_shot", "seed", "t_ent", "delta_t", "T_star", "T_worst",
                  "shots_used", "final_rel_err", "p_res_final", "p_x_final", "gamma_out"]
CHECKPOINT_COLUMNS = ["k", "t_k", "X_k", "p_hat", "delta", "accepted"]


def write_results_csv(results, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for res in results:
            c = res.config
            w.writerow([res.label, res.n, repr(c.epsilon), repr(c.p0), c.N_shot, c.seed,
                        repr(res.t_ent), repr(res.delta_t), repr(res.T_star), repr(res.T_worst),
                        res.shots_used, repr(res.final_rel_err), repr(res.p_res_final),
                        repr(res.p_x_final), repr(res.gamma_out)])
    return path


def write_checkpoints_csv(log, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHECKPOINT_COLUMNS)
        for rec in log:
            w.writerow([rec.k, repr(rec.t_k), rec.X_k, repr(rec.p_hat), repr(rec.delta),
                        int(rec.accepted)])
    return path
