"""Self-contained differentiable stack: float64 reverse-mode tensors, GIN
message passing, the particle-chain model, and Adam."""

from .model import ChainRecord, Model, ModelOutput, NeuralConfig, build_params
from .optim import Adam, PlateauScheduler
from .params import ParamStore, init_mlp, xavier
from .tensor import Tensor, as_tensor

__all__ = [
    "Tensor", "as_tensor", "ParamStore", "init_mlp", "xavier",
    "NeuralConfig", "Model", "ModelOutput", "ChainRecord", "build_params",
    "Adam", "PlateauScheduler",
]
