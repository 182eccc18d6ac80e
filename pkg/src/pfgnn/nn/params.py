"""Named parameter store with a versioned binary checkpoint format.

Checkpoint layout: magic, format version, header length, JSON header
(parameter names and shapes in order, plus caller metadata such as
hyperparameters and the rng seed), then the raw float64 buffers
back to back in header order, little-endian.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .tensor import Tensor

MAGIC = b"PFGN"
FORMAT_VERSION = 1


class ParamStore:
    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def num_scalars(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Current gradients, zeros for parameters the tape never touched."""
        return {
            name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._params.items()
        }

    def set_values(self, values: dict[str, np.ndarray]) -> None:
        for name, v in values.items():
            t = self._params[name]
            if t.data.shape != np.asarray(v).shape:
                raise ValueError(f"shape mismatch for {name!r}")
            t.data = np.asarray(v, dtype=np.float64).copy()

    def values(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    # -- checkpoint io -------------------------------------------------------

    def save(self, path, meta: dict | None = None) -> None:
        header = {
            "format_version": FORMAT_VERSION,
            "params": [
                {"name": name, "shape": list(t.data.shape)}
                for name, t in self._params.items()
            ],
            "meta": meta or {},
        }
        blob = json.dumps(header).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
            fh.write(blob)
            for t in self._params.values():
                fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> tuple["ParamStore", dict]:
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
            version, hlen = struct.unpack("<II", fh.read(8))
            if version != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint format version {version}")
            header = json.loads(fh.read(hlen).decode())
            store = cls()
            for entry in header["params"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                buf = fh.read(count * 8)
                if len(buf) != count * 8:
                    raise ValueError(f"truncated checkpoint at {entry['name']!r}")
                data = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
                store.add(entry["name"], data)
        return store, header["meta"]


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0):
    std = gain * np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


def init_mlp(
    store: ParamStore,
    rng: np.random.Generator,
    prefix: str,
    d_in: int,
    d_hidden: int,
    d_out: int,
    gain: float = 1.0,
) -> None:
    """Two-layer MLP parameters: relu hidden, linear output."""
    store.add(f"{prefix}.w1", xavier(rng, d_in, d_hidden, gain))
    store.add(f"{prefix}.b1", np.zeros(d_hidden))
    store.add(f"{prefix}.w2", xavier(rng, d_hidden, d_out))
    store.add(f"{prefix}.b2", np.zeros(d_out))
