"""Trainable particle chain over vertex embeddings.

The chain mirrors hash mode: sample a vertex per particle, individualize it,
refine, reweight, soft-resample. Here every piece is a differentiable
network: refinement is message passing, individualization rescales the chosen
row, the observation scores each particle, and a readout over the per-step
posterior mean states produces class logits. Selection gradients use the
score-function estimator on the accumulated path log-probabilities.

A forward pass can record its stochastic draws (vertex choices, resample
indices) into a ChainRecord and later replay them under perturbed
parameters, which makes the full loss a deterministic differentiable
function of the parameters; gradient checks rely on this.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..filtering import (
    Belief,
    StreamFactory,
    mean_state,
    reweight,
    soft_resample_detailed,
    transition,
)
from ..graphs import Graph
from .layers import (
    gin_layer,
    individualize_embed,
    observe,
    policy_scores,
    readout,
    sample_vertices,
)
from .params import ParamStore, init_mlp, xavier
from .tensor import (
    Tensor,
    as_tensor,
    check_finite,
    cross_entropy,
    gather0,
    log,
    pick_rows,
    rms_norm,
    tensor_sum,
    tile0,
    weighted_sum0,
)


@dataclass
class NeuralConfig:
    d: int = 64
    T: int = 2
    K: int = 8
    alpha: float = 0.5
    gamma: float = 0.1
    seed: int = 0
    classes: int = 2
    hidden: int | None = None
    backbone_layers: int = 3
    refine_layers: int = 1
    policy_arch: str = "mlp"
    include_resampling_logprob: bool = False
    resample: bool = True

    def __post_init__(self):
        if self.hidden is None:
            self.hidden = self.d
        if self.d < 1 or self.hidden < 1:
            raise ValueError("embedding and hidden widths must be positive")
        if self.T < 0 or self.K < 1:
            raise ValueError(f"need T >= 0 and K >= 1, got T={self.T} K={self.K}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.classes < 2:
            raise ValueError("need at least two classes")
        if self.policy_arch not in ("mlp", "gnn"):
            raise ValueError(f"unknown policy architecture {self.policy_arch!r}")


def build_params(cfg: NeuralConfig) -> ParamStore:
    """Fresh parameter store for a config. Sizes depend on d, T and the layer
    counts but never on the graph size or the particle count."""
    rng = np.random.default_rng(cfg.seed)
    store = ParamStore()
    store.add("embed.h0", xavier(rng, 1, cfg.d))
    for i in range(cfg.backbone_layers):
        store.add(f"backbone.{i}.eps", np.zeros(()))
        init_mlp(store, rng, f"backbone.{i}.mlp", cfg.d, cfg.hidden, cfg.d)
    for t in range(cfg.T):
        for j in range(cfg.refine_layers):
            store.add(f"step.{t}.{j}.eps", np.zeros(()))
            init_mlp(store, rng, f"step.{t}.{j}.mlp", cfg.d, cfg.hidden, cfg.d)
    init_mlp(store, rng, "trans", cfg.d, cfg.hidden, cfg.d)
    if cfg.policy_arch == "gnn":
        store.add("policy.gnn.eps", np.zeros(()))
        init_mlp(store, rng, "policy.gnn.mlp", cfg.d, cfg.hidden, cfg.d)
    init_mlp(store, rng, "policy", cfg.d, cfg.hidden, 1)
    init_mlp(store, rng, "obs", cfg.d, cfg.hidden, 1)
    # modest gain keeps initial logit margins O(1): cross-entropy then has
    # usable gradients for either label instead of a saturated softmax
    init_mlp(store, rng, "rho", cfg.d * max(cfg.T, 1), cfg.hidden, cfg.classes,
             gain=0.5)
    return store


@dataclass
class EmbedParticles:
    """Neural-mode collection: embedding stack H (K, n, d) plus accumulated
    selection log-probs (K,), both on the tape. gather() carries log-probs
    through resampling, so each survivor keeps its full ancestry term."""

    H: Tensor
    logp: Tensor

    def size(self) -> int:
        return self.H.data.shape[0]

    def gather(self, idx) -> "EmbedParticles":
        return EmbedParticles(gather0(self.H, idx), gather0(self.logp, idx))

    def add_logps(self, logps) -> "EmbedParticles":
        return EmbedParticles(self.H, self.logp + logps)

    def path_logps(self) -> Tensor:
        return self.logp

    def mean_state(self, weights) -> Tensor:
        return weighted_sum0(as_tensor(weights), self.H)

    def describe(self):
        return [float(np.linalg.norm(self.H.data[k])) for k in range(self.size())]


@dataclass
class ChainRecord:
    """Stochastic draws of one forward pass, enough to replay it exactly."""

    choices: list = field(default_factory=list)
    resample_indices: list = field(default_factory=list)


@dataclass
class ModelOutput:
    logits: Tensor
    path_logps: Tensor
    mean_states: list
    record: ChainRecord
    belief: Belief


@dataclass
class LossReport:
    task: float
    surrogate: float
    coef: float
    grads: dict
    output: ModelOutput


class Model:
    """Particle chain over embeddings ending in a graph-level classifier."""

    def __init__(self, cfg: NeuralConfig, params: ParamStore | None = None):
        self.cfg = cfg
        self.params = params if params is not None else build_params(cfg)
        # optional per-feature affine applied to each pooled chain state; the
        # raw pooled coordinates mix O(1) offsets shared by every input graph
        # with much smaller structure-dependent variation, and the classifier
        # head only trains well once that variation is brought to unit scale
        self.feature_norm: tuple[np.ndarray, np.ndarray] | None = None

    def set_feature_norm(self, shift: np.ndarray, scale: np.ndarray) -> None:
        """Install standardization constants for the pooled per-step states.

        shift/scale have shape (max(T, 1), d): pooled state t is mapped to
        (pooled - shift[t]) / scale[t] coordinate-wise before the readout.
        """
        shift = np.asarray(shift, dtype=np.float64)
        scale = np.asarray(scale, dtype=np.float64)
        want = (max(self.cfg.T, 1), self.cfg.d)
        if shift.shape != want or scale.shape != want:
            raise ValueError(
                f"feature norm shape {shift.shape}/{scale.shape}, expected {want}"
            )
        if np.any(scale <= 0):
            raise ValueError("feature norm scale must be positive")
        self.feature_norm = (shift, scale)

    # -- chain ---------------------------------------------------------------

    def _refine_block(self, prefixes, h: Tensor, adj: np.ndarray) -> Tensor:
        # stacked message passing grows activations by roughly (1 + degree)
        # per layer. Rows are renormalized once per block, not per layer:
        # inside a block the growth is bounded, and a per-layer norm would
        # shrink the relative footprint of an individualized vertex until
        # structurally distinct graphs become numerically indistinguishable.
        for prefix in prefixes:
            h = gin_layer(self.params, prefix, h, adj)
        return rms_norm(h)

    def initial_state(self, g: Graph, adj: np.ndarray) -> Tensor:
        """Pre-chain embedding (n, d): one learned row broadcast to every
        vertex, mixed by the backbone layers. Identical across particles."""
        h = as_tensor(np.zeros((g.n, self.cfg.d))) + self.params["embed.h0"]
        h = self._refine_block(
            [f"backbone.{i}" for i in range(self.cfg.backbone_layers)], h, adj
        )
        return h

    def forward(self, g: Graph, seed: int | None = None,
                record: ChainRecord | None = None) -> ModelOutput:
        cfg = self.cfg
        adj = np.asarray(g.adjacency_matrix(), dtype=np.float64)
        replay = record is not None
        rec = record if replay else ChainRecord()
        want_resamples = cfg.T if cfg.resample else 0
        if replay and (
            len(rec.choices) != cfg.T
            or len(rec.resample_indices) != want_resamples
        ):
            raise ValueError(
                f"record holds {len(rec.choices)} steps, config wants {cfg.T}"
            )
        rng = StreamFactory(cfg.seed if seed is None else seed)

        particles = EmbedParticles(
            tile0(self.initial_state(g, adj), cfg.K), Tensor(np.zeros(cfg.K))
        )
        b = Belief(particles, as_tensor(np.full(cfg.K, 1.0 / cfg.K)), step=1)
        # readout consumes the T per-step posterior means; a chain of zero
        # steps falls back to the initial state so T=0 stays a valid control.
        # Means are divided by n so the pooled readout input stays O(1) on
        # graphs of any order. With feature_norm set, the affine is folded in
        # per vertex row; summing over rows then yields the standardized
        # pooled state.
        def shape_state(ms, t):
            if self.feature_norm is None:
                return ms * (1.0 / g.n)
            shift, scl = self.feature_norm
            return ms * (1.0 / (g.n * scl[t])) + (-shift[t] / (g.n * scl[t]))

        states = (
            [] if cfg.T > 0 else [shape_state(b.particles.mean_state(b.weights), 0)]
        )

        for t in range(cfg.T):
            b = transition(
                b,
                self._policy_hook(adj, rec, t, replay),
                self._individualize,
                self._refiner(t, adj),
                rng,
            )
            b = reweight(b, self._observe)
            states.append(shape_state(mean_state(b), t))
            if not cfg.resample:
                continue
            q_pre = None
            if cfg.include_resampling_logprob:
                q_pre = cfg.alpha * b.weights + (1.0 - cfg.alpha) / cfg.K
            forced = rec.resample_indices[t] if replay else None
            b, aux = soft_resample_detailed(b, cfg.alpha, rng, indices=forced)
            if not replay:
                rec.resample_indices.append(aux.indices)
            if cfg.include_resampling_logprob:
                lp = log(gather0(q_pre / tensor_sum(q_pre), aux.indices))
                b = Belief(b.particles.add_logps(lp), b.weights, b.step)

        logits = check_finite(readout(self.params, states), "class logits")
        return ModelOutput(logits, b.particles.path_logps(), states, rec, b)

    def _policy_hook(self, adj, rec, t, replay):
        def policy(particles, streams):
            lp = policy_scores(self.params, particles.H, adj, self.cfg.policy_arch)
            if replay:
                choices = rec.choices[t]
                return choices, pick_rows(lp, choices)
            choices, chosen = sample_vertices(lp, streams)
            rec.choices.append(choices)
            return choices, chosen

        return policy

    def _individualize(self, particles, choices):
        return replace(
            particles, H=individualize_embed(self.params, particles.H, choices)
        )

    def _refiner(self, t, adj):
        def refiner(particles):
            h = self._refine_block(
                [f"step.{t}.{j}" for j in range(self.cfg.refine_layers)],
                particles.H,
                adj,
            )
            return replace(particles, H=h)

        return refiner

    def _observe(self, particles):
        return observe(self.params, particles.H)

    # -- training ------------------------------------------------------------

    def predict(self, g: Graph, seed: int | None = None) -> int:
        return int(np.argmax(self.forward(g, seed=seed).logits.data))

    def surrogate_loss(self, out: ModelOutput, label: int, coef: float | None = None):
        """Classification loss plus the selection term gamma * c * mean_k
        log P_k with c the detached loss value (or a frozen override). The
        term's gradient is the score-function estimator of the selection
        distribution's effect on the expected loss; the coefficient itself
        is never differentiated through."""
        task = cross_entropy(out.logits, int(label))
        task_value = float(task.data)
        if self.cfg.gamma == 0.0:
            return task, task_value, 0.0
        used = task_value if coef is None else float(coef)
        mean_lp = tensor_sum(out.path_logps) * (1.0 / self.cfg.K)
        return task + self.cfg.gamma * used * mean_lp, task_value, used

    def loss_and_grad(self, g: Graph, label: int, seed: int | None = None,
                      record: ChainRecord | None = None,
                      coef: float | None = None) -> LossReport:
        out = self.forward(g, seed=seed, record=record)
        surrogate, task_value, used = self.surrogate_loss(out, label, coef)
        self.params.zero_grad()
        surrogate.backward()
        return LossReport(
            task_value, float(surrogate.data), used, self.params.grads(), out
        )

    # -- persistence ---------------------------------------------------------

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {"config": asdict(self.cfg)}
        if self.feature_norm is not None:
            meta["feature_norm"] = {
                "shift": self.feature_norm[0].tolist(),
                "scale": self.feature_norm[1].tolist(),
            }
        if extra_meta:
            meta.update(extra_meta)
        self.params.save(path, meta)

    @classmethod
    def load(cls, path) -> "Model":
        store, meta = ParamStore.load(path)
        model = cls(NeuralConfig(**meta["config"]), store)
        if "feature_norm" in meta:
            fn = meta["feature_norm"]
            model.set_feature_norm(np.array(fn["shift"]), np.array(fn["scale"]))
        return model
