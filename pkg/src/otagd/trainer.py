"""Over-the-air gradient descent and heavy-ball momentum, with Monte Carlo trials.

Randomness is addressed per trial: trial ``m`` under master seed ``s`` owns
``RngStream(s, m)``, whose lane 0 feeds fading gains and lane 1 feeds
interference.  Draws are taken in fixed blocks of ``NOISE_BLOCK`` rounds, so
a trial's noise never depends on which other trials share its batch or
process.  Keeping interference on its own lane also means that sweeps over
the number of agents see identical interference sequences.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from otagd.alpha_core import alpha_norm_pow
from otagd.channel import ChannelModel, combine_direct, combine_waveform, make_basis
from otagd.objectives import FederatedProblem
from otagd.stable import RngStream

NOISE_BLOCK = 256
TRIAL_BATCH = 50
SCHEDULES = ("theta_over_k", "power", "constant")


@dataclass(frozen=True)
class Schedule:
    kind: str = "theta_over_k"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.kind!r}")
        if self.kind == "power" and not (0.0 < self.value < 1.0):
            raise ValueError(f"power schedule needs rho in (0, 1), got {self.value!r}")
        if self.kind != "power" and not self.value > 0:
            raise ValueError(f"{self.kind} schedule needs a positive value, got {self.value!r}")


def lr(schedule: Schedule, k: int) -> float:
    """Step size for round ``k >= 1``."""
    if k < 1:
        raise ValueError("schedules are defined from round 1")
    if schedule.kind == "theta_over_k":
        return schedule.value / k
    if schedule.kind == "power":
        return k ** (-schedule.value)
    return schedule.value


def gd_step(w, g, eta: float) -> np.ndarray:
    return np.asarray(w, dtype=float) - eta * np.asarray(g, dtype=float)


def momentum_step(w, v_prev, g, beta: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """``v = beta * v_prev + g``; ``w_next = w - eta * v``."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta!r}")
    v = beta * np.asarray(v_prev, dtype=float) + np.asarray(g, dtype=float)
    return np.asarray(w, dtype=float) - eta * v, v


@dataclass(frozen=True)
class TrainConfig:
    schedule: Schedule = field(default_factory=Schedule)
    momentum: bool = False
    beta: float = 0.0
    rounds: int = 1000
    trials: int = 1
    init_distance: float = 1.0
    init: tuple[float, ...] | None = None
    seed: int = 0
    mode: str = "direct"
    basis_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta!r}")
        if self.beta > 0 and not self.momentum:
            raise ValueError("beta > 0 requires momentum to be enabled")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("direct", "waveform"):
            raise ValueError("mode must be 'direct' or 'waveform'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def initial_point(self, problem: FederatedProblem) -> np.ndarray:
        if self.init is not None:
            w0 = np.asarray(self.init, dtype=float)
            if w0.shape != (problem.dim,):
                raise ValueError(f"init must have {problem.dim} entries")
            return w0
        w0 = np.array(problem.w_star, dtype=float)
        w0[0] += self.init_distance
        return w0

    def snapshot(self) -> dict:
        out = asdict(self)
        out["schedule"] = asdict(self.schedule)
        return out


@dataclass
class TrialResult:
    trial_id: int
    w: np.ndarray            # (K+1, d)
    alpha_err: np.ndarray    # (K+1,)
    loss: np.ndarray         # (K+1,)
    flagged: bool = False
    last_finite_round: int = -1
    grads: np.ndarray | None = None      # (K, d) aggregated g_1..g_K
    velocities: np.ndarray | None = None  # (K, d) v_1..v_K


@dataclass
class TrajectoryStats:
    rounds: np.ndarray
    mean_alpha_err: np.ndarray
    median_alpha_err: np.ndarray
    trimmed_mean_alpha_err: np.ndarray
    mean_loss: np.ndarray
    n_trials: np.ndarray
    final_errors: np.ndarray
    flagged: tuple[int, ...]
    alpha: float
    config: dict

    @property
    def initial_error(self) -> float:
        return float(self.mean_alpha_err[0])


class _TrialNoise:
    """Blocked fading/interference draws for a batch of trials."""

    def __init__(self, channel: ChannelModel, seed: int, trial_ids, d: int):
        self.channel = channel
        self.d = d
        streams = [RngStream(seed, int(t)) for t in trial_ids]
        self.gen_h = [s.substream(0).generator() for s in streams]
        self.gen_xi = [s.substream(1).generator() for s in streams]
        self._h = self._xi = None

    def round(self, k: int):
        j = (k - 1) % NOISE_BLOCK
        if j == 0:
            n = self.channel.num_agents
            self._h = np.stack([self.channel.draw_fading(g, (NOISE_BLOCK, n)) for g in self.gen_h], axis=1)
            self._xi = np.stack([self.channel.draw_interference(g, (NOISE_BLOCK, self.d)) for g in self.gen_xi], axis=1)
        return self._h[j], self._xi[j]


def _alpha(channel: ChannelModel) -> float:
    return channel.interference.alpha if channel.interference is not None else 2.0


def _simulate(problem: FederatedProblem, channel: ChannelModel, config: TrainConfig,
              trial_ids, keep_w: bool = False, log_grads: bool = False):
    """Run a batch of trials in lockstep; rows index trials."""
    if problem.num_agents != channel.num_agents:
        raise ValueError(f"problem has {problem.num_agents} agents, channel {channel.num_agents}")
    trial_ids = list(trial_ids)
    M, d, K = len(trial_ids), problem.dim, config.rounds
    alpha = _alpha(channel)
    basis = None
    if config.mode == "waveform":
        basis = make_basis(d, max(channel.waveform_samples, d), seed=config.basis_seed)
    noise = _TrialNoise(channel, config.seed, trial_ids, d)
    w = np.tile(config.initial_point(problem), (M, 1))
    v = np.zeros((M, d))
    err = np.full((K + 1, M), np.nan)
    loss = np.full((K + 1, M), np.nan)
    traj = np.full((K + 1, M, d), np.nan) if keep_w else None
    glog = np.full((K, M, d), np.nan) if log_grads else None
    vlog = np.full((K, M, d), np.nan) if log_grads else None
    alive = np.ones(M, dtype=bool)
    last = np.full(M, K)

    def record(k):
        # A trial dies when its iterate, error or loss stops being finite;
        # its row is parked at w* so later rounds stay cheap and quiet.
        diff = w - problem.w_star
        ok = np.all(np.isfinite(diff), axis=1)
        diff[~ok] = 0.0
        e = alpha_norm_pow(diff, alpha)
        f = problem.loss(w)
        bad = alive & ~(ok & np.isfinite(e) & np.isfinite(f))
        if np.any(bad):
            last[bad] = k - 1
            alive[bad] = False
            w[bad] = problem.w_star
            v[bad] = 0.0
        err[k] = np.where(alive, e, np.nan)
        loss[k] = np.where(alive, f, np.nan)
        if keep_w:
            traj[k] = np.where(alive[:, None], w, np.nan)

    with np.errstate(over="ignore", invalid="ignore"):
        record(0)
        for k in range(1, K + 1):
            h, xi = noise.round(k)
            grads = problem.agent_grads(w)
            if basis is None:
                g = combine_direct(grads, h, xi)
            else:
                g = combine_waveform(grads, h, xi, basis)
            eta = lr(config.schedule, k)
            if config.momentum:
                w, v = momentum_step(w, v, g, config.beta, eta)
            else:
                w = gd_step(w, g, eta)
            if log_grads:
                glog[k - 1] = g
                vlog[k - 1] = v if config.momentum else g
            record(k)
    return err, loss, traj, glog, vlog, last


def run_trial(problem: FederatedProblem, channel: ChannelModel, config: TrainConfig,
              trial_id: int = 0, log_grads: bool = False) -> TrialResult:
    """One trajectory, deterministic in ``(config.seed, trial_id)``.

    A trajectory that reaches a non-finite iterate is cut at the last finite
    round and flagged; the remaining entries are NaN.
    """
    err, loss, traj, glog, vlog, last = _simulate(problem, channel, config, [trial_id],
                                                  keep_w=True, log_grads=log_grads)
    return TrialResult(
        trial_id=trial_id,
        w=traj[:, 0],
        alpha_err=err[:, 0],
        loss=loss[:, 0],
        flagged=bool(last[0] < config.rounds),
        last_finite_round=int(last[0]),
        grads=None if glog is None else glog[:, 0],
        velocities=None if vlog is None else vlog[:, 0],
    )


def _batch_job(args):
    problem, channel, config, ids = args
    err, loss, _, _, _, last = _simulate(problem, channel, config, ids)
    return ids, err, loss, last


def run_monte_carlo(problem: FederatedProblem, channel: ChannelModel, config: TrainConfig,
                    trial_order=None) -> TrajectoryStats:
    """Average ``config.trials`` trajectories (stream ids ``0 .. M-1``).

    Per-round statistics use the trials that are still finite at that round;
    ``n_trials`` records how many.  ``trial_order`` only changes the order in
    which batches are executed, never the result.
    """
    M, K = config.trials, config.rounds
    order = list(range(M)) if trial_order is None else [int(t) for t in trial_order]
    if sorted(order) != list(range(M)):
        raise ValueError("trial_order must be a permutation of range(trials)")
    jobs = [(problem, channel, config, order[i:i + TRIAL_BATCH]) for i in range(0, M, TRIAL_BATCH)]
    err = np.empty((K + 1, M))
    loss = np.empty((K + 1, M))
    last = np.empty(M, dtype=int)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]
    for ids, e, l, la in results:
        err[:, ids] = e
        loss[:, ids] = l
        last[ids] = la
    return summarize(err, loss, last, alpha=_alpha(channel), config=config.snapshot())


def _trimmed_mean(x: np.ndarray, frac: float = 0.1) -> float:
    x = np.sort(x[np.isfinite(x)])
    if x.size == 0:
        return math.nan
    cut = int(math.floor(frac * x.size))
    return float(x[cut:x.size - cut].mean()) if x.size - 2 * cut > 0 else float(x.mean())


def summarize(err: np.ndarray, loss: np.ndarray, last: np.ndarray, alpha: float, config: dict) -> TrajectoryStats:
    """Reduce ``(K+1, M)`` per-trial arrays in trial-id order."""
    K = err.shape[0] - 1
    finite = np.isfinite(err)
    n = finite.sum(axis=1)
    with np.errstate(invalid="ignore"):
        mean_err = np.where(n > 0, np.nansum(err, axis=1) / np.maximum(n, 1), np.nan)
        mean_loss = np.where(n > 0, np.nansum(loss, axis=1) / np.maximum(n, 1), np.nan)
    median = np.array([np.median(row[np.isfinite(row)]) if np.isfinite(row).any() else np.nan for row in err])
    trimmed = np.array([_trimmed_mean(row) for row in err])
    flagged = tuple(int(i) for i in np.flatnonzero(last < K))
    return TrajectoryStats(
        rounds=np.arange(K + 1),
        mean_alpha_err=mean_err,
        median_alpha_err=median,
        trimmed_mean_alpha_err=trimmed,
        mean_loss=mean_loss,
        n_trials=n,
        final_errors=err[-1].copy(),
        flagged=flagged,
        alpha=alpha,
        config=config,
    )
