"""Round-based federated SGD on a synthetic quadratic with controlled noise.

The task is a strongly convex diagonal quadratic whose largest curvature is
the declared smoothness constant, with additive Gaussian gradient noise of
per-sample variance sigma^2 (an m-sample batch sees sigma^2/m). That makes
every quantity in the convergence bound exactly controllable, which real
training denies us.

Each agent owns a named RNG substream, so trajectories are bit-identical
across schedules and worker counts, and pausing/resuming local training is
equivalent to one long run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NoContributorsError, ValidationError
from .model import AgentProfile
from .rng import substream


@dataclass(frozen=True)
class SyntheticTask:
    """Quadratic objective 0.5 * sum_j eig_j (w_j - opt_j)^2 with noisy gradients."""

    eigenvalues: tuple[float, ...]
    optimum: tuple[float, ...]
    noise_variance: float

    def __post_init__(self) -> None:
        if len(self.eigenvalues) == 0 or len(self.eigenvalues) != len(self.optimum):
            raise ValidationError("eigenvalues and optimum must be same nonzero length")
        for v in self.eigenvalues:
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"eigenvalues must be finite and > 0, got {v!r}")
        for v in self.optimum:
            if not math.isfinite(v):
                raise ValidationError(f"optimum coords must be finite, got {v!r}")
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ValidationError(
                f"noise_variance must be finite and >= 0, got {self.noise_variance!r}")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in self.eigenvalues))
        object.__setattr__(self, "optimum", tuple(float(v) for v in self.optimum))

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    @property
    def lipschitz(self) -> float:
        """Smoothness constant; equals the largest curvature by construction."""
        return max(self.eigenvalues)

    @property
    def strong_convexity(self) -> float:
        return min(self.eigenvalues)

    def objective(self, params: np.ndarray) -> float:
        d = np.asarray(params, dtype=float) - np.asarray(self.optimum)
        return float(0.5 * np.sum(np.asarray(self.eigenvalues) * d * d))

    def gradient(self, params: np.ndarray) -> np.ndarray:
        d = np.asarray(params, dtype=float) - np.asarray(self.optimum)
        return np.asarray(self.eigenvalues) * d

    def stochastic_gradient(self, params: np.ndarray, batch_size: int,
                            rng: np.random.Generator) -> np.ndarray:
        """Gradient estimate from a batch of `batch_size` samples.

        Noise is spread evenly over coordinates so the expected squared
        noise norm is exactly noise_variance / batch_size.
        """
        if not isinstance(batch_size, (int, np.integer)) or batch_size < 1:
            raise ValidationError(f"batch_size must be an int >= 1, got {batch_size!r}")
        g = self.gradient(params)
        if self.noise_variance == 0.0:
            return g
        scale = math.sqrt(self.noise_variance / (self.dimension * batch_size))
        return g + rng.normal(0.0, scale, size=self.dimension)


def rounded_batch_size(data_amount: float) -> int:
    """Mechanism-side data amounts are continuous; batches are not.

    0 stays 0 (free rider); anything positive becomes an integer >= 1.
    """
    if not (math.isfinite(data_amount) and data_amount >= 0):
        raise ValidationError(f"data_amount must be finite and >= 0, got {data_amount!r}")
    if data_amount == 0.0:
        return 0
    return max(1, round(data_amount))


@dataclass
class AgentSimState:
    """Per-agent training cursor: its batch size, RNG stream, and step count.

    free_rider marks agents carried at weight 0; agent_update records the
    skip instead of raising so rosters keep their shape.
    """

    index: int
    batch_size: int
    generator: np.random.Generator
    steps_taken: int = 0

    @property
    def free_rider(self) -> bool:
        return self.batch_size == 0


def make_agent_states(agents: Sequence[AgentProfile] | Sequence[int], master_seed: int,
                      stream_factory: Callable[[int], np.random.Generator] | None = None,
                      ) -> list[AgentSimState]:
    """Build simulation states; agents may be profiles or raw batch sizes."""
    states = []
    for i, a in enumerate(agents):
        m = rounded_batch_size(a.data_amount if isinstance(a, AgentProfile) else float(a))
        gen = stream_factory(i) if stream_factory else substream(master_seed, "fedsim-agent", i)
        states.append(AgentSimState(index=i, batch_size=m, generator=gen))
    return states


def agent_update(params: np.ndarray, state: AgentSimState, task: SyntheticTask,
                 local_steps: int, step_size: float) -> np.ndarray:
    """Run `local_steps` stochastic gradient steps from `params`.

    The state's generator and step counter persist across calls, so two
    calls of h steps match one call of 2h exactly. Free riders return the
    params untouched and consume no randomness.
    """
    if not isinstance(local_steps, int) or isinstance(local_steps, bool) or local_steps < 1:
        raise ValidationError(f"local_steps must be an int >= 1, got {local_steps!r}")
    if not (math.isfinite(step_size) and step_size > 0):
        raise ValidationError(f"step_size must be finite and > 0, got {step_size!r}")
    w = np.array(params, dtype=float, copy=True)
    if state.free_rider:
        return w
    for _ in range(local_steps):
        w -= step_size * task.stochastic_gradient(w, state.batch_size, state.generator)
        state.steps_taken += 1
    return w


@dataclass(frozen=True)
class TrainingRun:
    """Everything a finished training loop knows about itself."""

    iterations: int
    local_steps: int
    epochs: int
    step_size: float
    batch_sizes: tuple[int, ...]
    weights: tuple[float, ...]
    grad_sq_norm_history: tuple[float, ...]
    effective_batch: int
    start_params: tuple[float, ...]
    final_params: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.grad_sq_norm_history) != self.iterations:
            raise ValidationError("history length must equal the iteration count")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValidationError(f"weights must sum to 1, got {sum(self.weights)!r}")


def run_pfl_training(agents: Sequence[AgentProfile] | Sequence[int], task: SyntheticTask,
                     iterations: int, local_steps: int, epochs: int, step_size: float,
                     master_seed: int, start_params: Sequence[float] | None = None,
                     workers: int = 1,
                     stream_factory: Callable[[int], np.random.Generator] | None = None,
                     ) -> TrainingRun:
    """Weighted-averaging federated loop.

    Per round: broadcast the aggregate, let every contributing agent take
    `local_steps` noisy steps in parallel, then recombine with weights
    m_i / sum(m). The history records the true squared gradient norm of the
    aggregate at the *start* of each round. epochs is carried as metadata
    describing the configured data-pass budget; the loop itself runs
    iterations x local_steps steps per agent.
    """
    if not isinstance(iterations, int) or isinstance(iterations, bool) or iterations < 1:
        raise ValidationError(f"iterations must be an int >= 1, got {iterations!r}")
    if not isinstance(epochs, int) or isinstance(epochs, bool) or epochs < 1:
        raise ValidationError(f"epochs must be an int >= 1, got {epochs!r}")
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers!r}")

    states = make_agent_states(agents, master_seed, stream_factory)
    total = sum(s.batch_size for s in states)
    if total == 0:
        raise NoContributorsError("every agent has batch size 0; nothing to train on")
    weights = [s.batch_size / total for s in states]
    active = [s for s in states if not s.free_rider]

    if start_params is None:
        w = np.asarray(task.optimum, dtype=float) + 1.0
    else:
        w = np.array(start_params, dtype=float)
        if w.shape != (task.dimension,):
            raise ValidationError(
                f"start_params must have shape ({task.dimension},), got {w.shape}")
    start = tuple(float(x) for x in w)

    history = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for _ in range(iterations):
            g = task.gradient(w)
            history.append(float(np.dot(g, g)))
            if pool is not None:
                results = list(pool.map(
                    lambda s: (s.index, agent_update(w, s, task, local_steps, step_size)),
                    active))
            else:
                results = [(s.index, agent_update(w, s, task, local_steps, step_size))
                           for s in active]
            new_w = np.zeros_like(w)
            for idx, wi in sorted(results):
                new_w += weights[idx] * wi
            w = new_w
    finally:
        if pool is not None:
            pool.shutdown()

    return TrainingRun(iterations=iterations, local_steps=local_steps, epochs=epochs,
                       step_size=step_size,
                       batch_sizes=tuple(s.batch_size for s in states),
                       weights=tuple(weights),
                       grad_sq_norm_history=tuple(history),
                       effective_batch=total, start_params=start,
                       final_params=tuple(float(x) for x in w))


def convergence_bound(task: SyntheticTask, objective_gap: float, iterations: int,
                      step_size: float, total_batch: int) -> float:
    """Bound on the time-averaged squared gradient norm:
    2 * objective_gap / (step_size * iterations)
    + step_size * noise_variance * lipschitz / (2 * total_batch).

    Only valid for step_size * lipschitz < 2.
    """
    if not (math.isfinite(objective_gap) and objective_gap >= 0):
        raise ValidationError(f"objective_gap must be finite and >= 0, got {objective_gap!r}")
    if not isinstance(iterations, int) or isinstance(iterations, bool) or iterations < 1:
        raise ValidationError(f"iterations must be an int >= 1, got {iterations!r}")
    if not isinstance(total_batch, int) or isinstance(total_batch, bool) or total_batch < 1:
        raise ValidationError(f"total_batch must be an int >= 1, got {total_batch!r}")
    if not (math.isfinite(step_size) and step_size > 0):
        raise ValidationError(f"step_size must be finite and > 0, got {step_size!r}")
    if step_size * task.lipschitz >= 2.0:
        raise DomainError(
            f"bound requires step_size * lipschitz < 2, got "
            f"{step_size * task.lipschitz!r}")
    transient = 2.0 * objective_gap / (step_size * iterations)
    floor = step_size * task.noise_variance * task.lipschitz / (2.0 * total_batch)
    return transient + floor


@dataclass(frozen=True)
class VarianceScaling:
    """Empirical noise of the batch-averaged gradient, per batch size."""

    variances: tuple[tuple[int, float], ...]  # (batch size, mean ||noise||^2)
    log_log_slope: float


def measure_variance_scaling(task: SyntheticTask, batch_sizes: Sequence[int],
                             draws: int, master_seed: int,
                             at_params: Sequence[float] | None = None) -> VarianceScaling:
    """Estimate E||g_M - grad||^2 at a fixed point for each batch size M.

    Calls the task's public gradient oracle per draw — this measures what
    training actually sees, not a shortcut formula. The slope comes from a
    log-log least-squares fit (skipped as nan when any variance is 0).
    """
    if draws < 1000:
        raise ValidationError(f"draws must be >= 1000 for a stable estimate, got {draws!r}")
    if len(batch_sizes) == 0:
        raise ValidationError("batch_sizes must be nonempty")
    w = (np.asarray(task.optimum, dtype=float) if at_params is None
         else np.array(at_params, dtype=float))
    g_true = task.gradient(w)
    out = []
    for m in batch_sizes:
        rng = substream(master_seed, "variance-scaling", int(m))
        acc = 0.0
        for _ in range(draws):
            diff = task.stochastic_gradient(w, int(m), rng) - g_true
            acc += float(np.dot(diff, diff))
        out.append((int(m), acc / draws))
    if len(out) >= 2 and all(v > 0 for _, v in out):
        xs = np.log([m for m, _ in out])
        ys = np.log([v for _, v in out])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = float("nan")
    return VarianceScaling(variances=tuple(out), log_log_slope=slope)
