"""Particle filtering over individualization chains.

A belief is a weighted set of K particle states. One chain step individualizes
a sampled vertex in every particle, refines, reweights by an observation
function, and soft-resamples. The loop is generic over the particle
collection: hash mode carries colorings and certificate histories, neural
mode carries embedding matrices on an autodiff tape. Weight arithmetic is
duck-typed so both numpy arrays and tape tensors flow through unchanged.

Determinism: every random draw comes from a stream derived from
(seed, step, particle index), so runs with a fixed seed are bit-identical
and independent of execution order over particles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .errors import NumericalError, UnsupportedModeError
from .graphs import Graph
from .refine import Coloring, certificate, initial_coloring, refine
from .search import individualize, target_cell

WEIGHT_FLOOR = 1e-12

# stream tag for the resampling draw, outside any realistic particle index
_RESAMPLE_TAG = 1 << 20


def _values(x) -> np.ndarray:
    """Plain float64 view of x, unwrapping tape tensors but not numpy."""
    if isinstance(x, (np.ndarray, np.generic)) or not hasattr(x, "data"):
        return np.asarray(x, dtype=np.float64)
    return np.asarray(x.data, dtype=np.float64)


class StreamFactory:
    """Deterministic RNG streams keyed by (step, particle index)."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def particle(self, step: int, k: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(step, k))
        )

    def resample(self, step: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(step, _RESAMPLE_TAG))
        )


@dataclass
class PfConfig:
    K: int
    T: int
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass
class Belief:
    """Weighted particle set at a chain step. particles is an opaque
    collection owned by the mode adapter; weights sum to 1."""

    particles: Any
    weights: Any
    step: int = 1

    @property
    def K(self) -> int:
        return self.particles.size()

    def weight_values(self) -> np.ndarray:
        return _values(self.weights)

    def validate(self) -> None:
        w = self.weight_values()
        if w.shape != (self.K,):
            raise ValueError(f"weights shape {w.shape} does not match K={self.K}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NumericalError("weights must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise NumericalError(f"weights sum to {w.sum()}, expected 1")

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "weights": [float(x) for x in self.weight_values()],
                "particles": self.particles.describe(),
            }
        )


@dataclass
class HashParticles:
    """Hash-mode collection: colorings plus per-particle certificate history
    and accumulated selection log-probs."""

    graph: Graph
    colorings: list[Coloring]
    logps: np.ndarray
    certs: list[list[bytes]] = field(default_factory=list)

    def __post_init__(self):
        if not self.certs:
            self.certs = [[] for _ in self.colorings]

    def size(self) -> int:
        return len(self.colorings)

    def gather(self, idx: Sequence[int]) -> "HashParticles":
        return HashParticles(
            self.graph,
            [self.colorings[i] for i in idx],
            self.logps[list(idx)].copy(),
            [list(self.certs[i]) for i in idx],
        )

    def add_logps(self, logps) -> "HashParticles":
        return replace(self, logps=self.logps + np.asarray(logps))

    def path_logps(self):
        return self.logps.copy()

    def describe(self):
        return [pi.to_json() for pi in self.colorings]


def init_belief(state0: Coloring, K: int, graph: Graph | None = None) -> Belief:
    """Uniform belief of K copies of a hash-mode state at step 1."""
    if not isinstance(state0, Coloring):
        raise UnsupportedModeError(
            "init_belief builds hash-mode beliefs from colorings; neural "
            "beliefs are built by the model"
        )
    if graph is None:
        raise ValueError("hash-mode init_belief needs the underlying graph")
    particles = HashParticles(graph, [state0] * K, np.zeros(K))
    return Belief(particles, np.full(K, 1.0 / K), step=1)


def transition(
    b: Belief,
    policy: Callable,
    individualizer: Callable,
    refiner: Callable,
    rng: StreamFactory,
) -> Belief:
    """Advance every particle one individualization-refinement step.

    policy(particles, streams) samples one vertex per particle and returns
    (choices, step log-probs); individualizer and refiner act on the whole
    collection. Weights are untouched; the step counter advances."""
    streams = [rng.particle(b.step, k) for k in range(b.K)]
    choices, logps = policy(b.particles, streams)
    particles = refiner(individualizer(b.particles, choices))
    particles = particles.add_logps(logps)
    return Belief(particles, b.weights, b.step + 1)


def reweight(b: Belief, obs_fn: Callable) -> Belief:
    """Multiply weights by per-particle observation values and renormalize.

    Incoming weights are floored at WEIGHT_FLOOR first, so a particle only
    carries exact weight zero for the step that zeroed it."""
    obs = obs_fn(b.particles)
    obs_values = _values(obs)
    for k in range(b.K):
        if not np.isfinite(obs_values[k]) or obs_values[k] < 0:
            raise NumericalError(
                f"observation value {obs_values[k]} invalid", particle=k
            )
    w = _clip_min(b.weights, WEIGHT_FLOOR)
    raw = w * obs
    total = raw.sum()
    total_value = float(_values(total))
    if not np.isfinite(total_value) or total_value <= 0.0:
        raise NumericalError(f"weight normalizer {total_value} after reweight")
    return Belief(b.particles, raw / total, b.step)


@dataclass
class SoftResampleAux:
    indices: np.ndarray
    proposal: np.ndarray
    raw_ratios: np.ndarray


def soft_resample_detailed(
    b: Belief, alpha: float, rng: StreamFactory, indices=None
) -> tuple[Belief, SoftResampleAux]:
    """Draw K particles i.i.d. from q = alpha * w + (1 - alpha) / K, set raw
    weights to the importance ratio w/q at the drawn index, and renormalize.

    The raw ratios are exactly unbiased for weighted expectations; the
    returned belief carries them normalized to sum 1. indices, when given,
    replaces the draw (replaying a recorded run under perturbed parameters)."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    K = b.K
    q = alpha * b.weights + (1.0 - alpha) / K
    q_values = _values(q)
    q_values = q_values / q_values.sum()
    if indices is None:
        gen = rng.resample(b.step)
        idx = gen.choice(K, size=K, p=q_values)
    else:
        idx = np.asarray(indices, dtype=np.intp)
        if idx.shape != (K,):
            raise ValueError(f"override indices shape {idx.shape}, expected ({K},)")
    w_drawn = _gather(b.weights, idx)
    q_drawn = _gather(q, idx)
    raw = w_drawn / q_drawn
    total = raw.sum()
    new_w = raw / total
    particles = b.particles.gather(idx)
    aux = SoftResampleAux(np.asarray(idx), q_values, _values(raw))
    return Belief(particles, new_w, b.step), aux


def soft_resample(b: Belief, alpha: float, rng: StreamFactory) -> Belief:
    return soft_resample_detailed(b, alpha, rng)[0]


def mean_state(b: Belief):
    """Weight-averaged particle state. Defined for states with linear
    structure (embedding matrices); hash-mode colorings have none."""
    if isinstance(b.particles, HashParticles):
        raise UnsupportedModeError(
            "mean_state is undefined for hash-mode colorings; compare "
            "certificate multisets instead"
        )
    return b.particles.mean_state(b.weights)


def _gather(w, idx):
    if hasattr(w, "gather"):
        return w.gather(idx)
    return w[idx]


def _clip_min(w, floor):
    if hasattr(w, "clip_min"):
        return w.clip_min(floor)
    return np.maximum(w, floor)


# -- hash-mode hooks ---------------------------------------------------------

def hash_policy(particles: HashParticles, streams) -> tuple[list, np.ndarray]:
    """Uniform choice over the target cell of each coloring. Discrete
    colorings are absorbing: no choice, zero log-prob."""
    choices = []
    logps = np.zeros(len(particles.colorings))
    for k, pi in enumerate(particles.colorings):
        if pi.is_discrete():
            choices.append(None)
            continue
        cell = pi.cells[target_cell(pi)]
        j = int(streams[k].integers(len(cell)))
        choices.append(cell[j])
        logps[k] = -np.log(len(cell))
    return choices, logps


def hash_individualizer(particles: HashParticles, choices) -> HashParticles:
    colorings = [
        pi if v is None else individualize(pi, v)
        for pi, v in zip(particles.colorings, choices)
    ]
    return replace(particles, colorings=colorings)


def hash_refiner(particles: HashParticles) -> HashParticles:
    colorings = [refine(particles.graph, pi) for pi in particles.colorings]
    certs = [
        hist + [certificate(particles.graph, pi)]
        for hist, pi in zip(particles.certs, colorings)
    ]
    return replace(particles, colorings=colorings, certs=certs)


def hash_obs_constant(particles: HashParticles) -> np.ndarray:
    return np.ones(particles.size())


def hash_obs_cell_entropy(particles: HashParticles) -> np.ndarray:
    """exp(entropy of the cell-size distribution): rewards refinement."""
    out = np.empty(particles.size())
    for k, pi in enumerate(particles.colorings):
        sizes = np.array([len(c) for c in pi.cells], dtype=np.float64)
        p = sizes / sizes.sum()
        out[k] = np.exp(-(p * np.log(p)).sum())
    return out


@dataclass
class ChainHooks:
    init: Callable
    policy: Callable
    individualizer: Callable
    refiner: Callable
    observe: Callable
    summarize: Callable


def hash_chain_hooks(g: Graph, obs_fn: Callable | None = None) -> ChainHooks:
    def init(cfg: PfConfig) -> Belief:
        return init_belief(refine(g, initial_coloring(g)), cfg.K, graph=g)

    def summarize(b: Belief):
        return sorted(hist[-1] for hist in b.particles.certs)

    return ChainHooks(
        init=init,
        policy=hash_policy,
        individualizer=hash_individualizer,
        refiner=hash_refiner,
        observe=obs_fn or hash_obs_constant,
        summarize=summarize,
    )


@dataclass
class ChainResult:
    belief: Belief
    step_summaries: list
    path_logps: Any


def run_chain(cfg: PfConfig, hooks: ChainHooks, trace=None) -> ChainResult:
    """Run T chain steps: transition, reweight, summarize, soft-resample.

    step_summaries holds one entry per step, taken after reweighting (the
    posterior at that step): mean states in neural mode, sorted certificate
    lists in hash mode. With T=0 the initial belief is returned untouched."""
    rng = StreamFactory(cfg.seed)
    b = hooks.init(cfg)
    b.validate()
    summaries = []
    for _ in range(cfg.T):
        b = transition(b, hooks.policy, hooks.individualizer, hooks.refiner, rng)
        b = reweight(b, hooks.observe)
        summaries.append(hooks.summarize(b))
        if trace is not None:
            trace.append(b.to_json())
        b = soft_resample(b, cfg.alpha, rng)
    return ChainResult(b, summaries, b.particles.path_logps())
