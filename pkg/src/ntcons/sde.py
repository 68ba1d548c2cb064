"""Euler-Maruyama integration of the grounded network under measurement noise.

Each stored edge ``(i, j)`` carries two independent scalar Brownian motions:
an additive channel with intensity ``sigma * |A_ij| 1_d`` and a
multiplicative channel with intensity ``|A_ij| f(x_j - x_i)``, both scaled by
the gain ``c(t)`` and injected into agent ``i``.

Normal variates come from a Philox counter-based generator keyed by
``(seed, path)``.  Every step consumes a fixed ``2 x E_max`` block per path,
where ``E_max`` is the largest edge count in the schedule, so a path's draws
do not depend on which other paths are simulated alongside it.  Contractions
use ``einsum`` rather than BLAS ``matmul`` for the same reason: BLAS kernels
change their summation order with the batch size, ``einsum`` does not, so a
path gives bit-identical output whether it runs alone or in a batch.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NumericalBlowup
from .gain import eval_gain
from .structure import NoiseIntensity

BLOWUP_NORM = 1e12
RNG_CHUNK = 512


def path_rng(seed, path):
    """Counter-based generator for one sample path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0, path))))


def initial_state_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1,))))


def default_initial_state(n_agents, dim, seed, spread=5.0):
    """Initial condition drawn uniformly from ``[-spread, spread]^(N d)``."""
    return initial_state_rng(seed).uniform(-spread, spread, size=n_agents * dim)


class _Operator:
    """Everything the integrator needs from one (graph, design) pair."""

    def __init__(self, graph, design, sigma, intensity):
        if (graph.n_agents, graph.dim) != (design.n_agents, design.dim):
            raise InvalidInput("graph and design disagree on (N, d)")
        N, d = graph.n_agents, graph.dim
        self.N, self.d = N, d
        self.LB = np.ascontiguousarray(design.grounded_laplacian, dtype=float)
        self.b = design.external_input
        keys = graph.edges
        self.n_edges = len(keys)
        self.dst = np.array([i - 1 for i, _ in keys], dtype=int)
        self.src = np.array([j - 1 for _, j in keys], dtype=int)
        self.absA = np.array([graph.weights[k].abs for k in keys]).reshape(-1, d, d)
        self.additive = sigma * self.absA.sum(axis=-1)
        # edges are sorted by receiving agent, so each agent owns a contiguous run
        self.run_starts = np.flatnonzero(np.r_[True, self.dst[1:] != self.dst[:-1]]) if keys else self.dst
        self.receivers = self.dst[self.run_starts]
        self.intensity = intensity

    def drift(self, x, c):
        """``c (-L_B x + (Delta kron I) B x0)`` for a batch ``x`` of shape (M, N d)."""
        return c * (self.b - np.einsum("mk,ik->mi", x, self.LB))

    def noise(self, x, z, c, sqrt_dt):
        """Diffusion increment for a batch; ``z`` has shape (M, 2, E_max)."""
        M = x.shape[0]
        if self.n_edges == 0:
            return np.zeros_like(x)
        E = self.n_edges
        z1 = z[:, 0, :E]
        z2 = z[:, 1, :E]
        per_edge = z1[:, :, None] * self.additive
        if not self.intensity.is_zero:
            blocks = x.reshape(M, self.N, self.d)
            rel = blocks[:, self.src, :] - blocks[:, self.dst, :]
            f = self.intensity(rel)
            mult = f[:, :, 0, None] * self.absA[:, :, 0]
            for col in range(1, self.d):
                mult += f[:, :, col, None] * self.absA[:, :, col]
            per_edge = per_edge + z2[:, :, None] * mult
        out = np.zeros((M, self.N, self.d))
        out[:, self.receivers] = np.add.reduceat(per_edge, self.run_starts, axis=1)
        return (c * sqrt_dt) * out.reshape(M, -1)


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def drift(t, x, graph, design, gain):
    """Deterministic part of the dynamics at time ``t``."""
    op = _Operator(graph, design, 0.0, NoiseIntensity.linear(0.0))
    xb, single = _as_batch(x)
    if xb.shape[1] != op.N * op.d:
        raise InvalidInput(f"state has {xb.shape[1]} entries, expected {op.N * op.d}")
    out = op.drift(xb, eval_gain(gain, t))
    return out[0] if single else out


def diffusion_step(t, x, dt, graph, design, gain, sigma, intensity, rng=None, z=None):
    """Stochastic increment over one step of length ``dt``.

    Pass either ``rng`` (a numpy Generator) or explicit standard normals
    ``z`` of shape ``(2, E)``: row 0 feeds the additive channels and row 1
    the multiplicative ones, one column per stored edge in sorted order.
    """
    op = _Operator(graph, design, sigma, intensity)
    xb, single = _as_batch(x)
    if z is None:
        z = rng.standard_normal((xb.shape[0], 2, op.n_edges))
    else:
        z = np.asarray(z, dtype=float)
        z = z[None] if z.ndim == 2 else z
    out = op.noise(xb, z, eval_gain(gain, t), math.sqrt(dt))
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class SimConfig:
    schedule: object
    gain: object
    sigma_add: float
    intensity: NoiseIntensity
    dt: float
    horizon: float
    initial_state: np.ndarray
    seed: int = 0
    n_steps: int = field(init=False)

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise InvalidInput("dt and horizon must be positive")
        if self.sigma_add < 0:
            raise InvalidInput("sigma must be non-negative")
        n = round(self.horizon / self.dt)
        if n < 1 or abs(n * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise InvalidInput(f"horizon {self.horizon} is not a whole number of steps of {self.dt}")
        if self.schedule.mode != "fixed" and self.dt > self.schedule.min_duration * (1 + 1e-12):
            raise InvalidInput("dt exceeds the shortest schedule segment")
        x0 = np.asarray(self.initial_state, dtype=float).reshape(-1)
        if x0.shape != (self.schedule.n_agents * self.schedule.dim,):
            raise InvalidInput(f"initial state must have N*d = {self.schedule.n_agents * self.schedule.dim} entries")
        object.__setattr__(self, "initial_state", x0)
        object.__setattr__(self, "n_steps", int(n))

    @property
    def theta(self):
        return self.schedule.theta

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in
              ("schedule", "gain", "sigma_add", "intensity", "dt", "horizon", "initial_state", "seed")}
        kw.update(changes)
        return SimConfig(**kw)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    theta: np.ndarray
    n_agents: int
    dim: int

    def agent(self, i):
        """States of agent ``i`` (1-based) as an array of shape (steps, d)."""
        d = self.dim
        return self.states[:, (i - 1) * d:i * d]


def _step_plan(cfg):
    sched = cfg.schedule
    ops, index = [], {}
    for seg in sched.segments:
        key = (seg.graph_id, seg.design_id)
        if key not in index:
            index[key] = len(ops)
            ops.append(_Operator(sched.graphs[seg.graph_id], sched.designs[seg.design_id],
                                 cfg.sigma_add, cfg.intensity))
    seg_op = [index[(s.graph_id, s.design_id)] for s in sched.segments]
    times = np.arange(cfg.n_steps) * cfg.dt
    step_op = np.array([seg_op[sched.segment_index(t)] for t in times], dtype=int)
    gains = np.asarray(eval_gain(cfg.gain, times), dtype=float).reshape(-1)
    return ops, step_op, gains


def simulate_batch(cfg, paths, store_every=1):
    """Integrate several sample paths at once.

    Returns ``(times, states)`` with ``states`` of shape
    ``(len(paths), n_store, N d)`` holding every ``store_every``-th step.
    """
    paths = list(paths)
    if store_every < 1 or cfg.n_steps % store_every:
        raise InvalidInput(f"store_every={store_every} must divide the step count {cfg.n_steps}")
    ops, step_op, gains = _step_plan(cfg)
    e_max = max((op.n_edges for op in ops), default=0)
    M = len(paths)
    rngs = [path_rng(cfg.seed, p) for p in paths]
    n_store = cfg.n_steps // store_every + 1
    states = np.empty((M, n_store, cfg.initial_state.size))
    x = np.tile(cfg.initial_state, (M, 1))
    states[:, 0] = x
    dt, sqrt_dt = cfg.dt, math.sqrt(cfg.dt)
    noisy = cfg.sigma_add > 0 or not cfg.intensity.is_zero
    z = np.zeros((M, RNG_CHUNK, 2, max(e_max, 1)))
    limit = BLOWUP_NORM ** 2
    for k in range(cfg.n_steps):
        if noisy and k % RNG_CHUNK == 0 and e_max:
            for m, rng in enumerate(rngs):
                z[m, :, :, :e_max] = rng.standard_normal((RNG_CHUNK, 2, e_max))
        op = ops[step_op[k]]
        c = gains[k]
        step = op.drift(x, c) * dt
        if noisy:
            step = step + op.noise(x, z[:, k % RNG_CHUNK], c, sqrt_dt)
        x = x + step
        sq = (x * x).sum(axis=-1)
        if not np.all(sq <= limit):
            bad = int(np.argmax(~(sq <= limit)))
            raise NumericalBlowup(
                f"path {paths[bad]} left the ball of radius {BLOWUP_NORM:g} at t={(k + 1) * dt:g}",
                path=paths[bad], time=(k + 1) * dt,
            )
        if (k + 1) % store_every == 0:
            states[:, (k + 1) // store_every] = x
    times = np.arange(n_store) * (store_every * dt)
    return times, states


def simulate_path(cfg, path=0, store_every=1):
    """One Euler-Maruyama sample path, deterministic given ``cfg.seed`` and ``path``."""
    times, states = simulate_batch(cfg, [path], store_every)
    sched = cfg.schedule
    return Trajectory(times, states[0], cfg.theta, sched.n_agents, sched.dim)


def squared_errors(states, theta, n_agents):
    """Per-agent ``|x_i - theta|^2`` for states with trailing axis ``N d``."""
    diff = states.reshape(*states.shape[:-1], n_agents, -1) - theta
    return (diff * diff).sum(axis=-1)


def error_process(traj):
    """Matrix of shape (steps, N) with entry ``|x_i(t_k) - theta|^2``."""
    return squared_errors(traj.states, traj.theta, traj.n_agents)
