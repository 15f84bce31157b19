"""Network specifications, shape checking and the layer stack."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Conv1d, Dense, Dropout, Flatten, Layer, MaxPool1d, Reshape1d, conv_out_len

N_LABELS = 7
INPUT_WIDTH = 90

LAYER_KINDS = {"dense": 1, "conv1d": 5, "maxpool1d": 3, "flatten": 0, "dropout": 1}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Layer list such as ``(("dense", 64), ("dense", 7))``.

    Argument tuples: ``dense(out)``, ``conv1d(in_ch, out_ch, kernel, stride, padding)``,
    ``maxpool1d(kernel, stride, padding)``, ``flatten()``, ``dropout(rate)``.
    Hidden dense and convolution layers use ReLU; the last layer must be dense
    and emits logits.
    """

    layers: tuple
    input_width: int = INPUT_WIDTH
    output_width: int = N_LABELS
    name: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(
            (str(l[0]),) + tuple(float(a) if l[0] == "dropout" else int(a) for a in l[1:])
            for l in self.layers))
        self.shapes()

    def shapes(self) -> list[tuple]:
        """Output shape (without batch axis) after every layer; raises SpecError."""
        if not self.layers:
            raise SpecError("a network needs at least one layer")
        shape: tuple = (self.input_width,)
        out = []
        for i, layer in enumerate(self.layers):
            kind, args = layer[0], layer[1:]
            if kind not in LAYER_KINDS:
                raise SpecError(f"layer {i}: unknown kind {kind!r}")
            if len(args) != LAYER_KINDS[kind]:
                raise SpecError(f"layer {i}: {kind} takes {LAYER_KINDS[kind]} arguments")
            if kind == "dense":
                if len(shape) != 1:
                    raise SpecError(f"layer {i}: dense needs a flat input, got shape {shape}")
                if args[0] < 1:
                    raise SpecError(f"layer {i}: dense width must be positive")
                shape = (args[0],)
            elif kind in ("conv1d", "maxpool1d"):
                if len(shape) == 1:
                    shape = (1, shape[0])
                ch, length = shape
                if kind == "conv1d":
                    cin, cout, k, s, p = args
                    if cin != ch:
                        raise SpecError(f"layer {i}: conv1d expects {cin} channels, got {ch}")
                else:
                    k, s, p = args
                    cout = ch
                if k < 1 or s < 1 or p < 0:
                    raise SpecError(f"layer {i}: bad kernel/stride/padding")
                if kind == "maxpool1d" and p > k // 2:
                    raise SpecError(f"layer {i}: pooling padding exceeds half the kernel")
                n = conv_out_len(length, k, s, p)
                if n < 1:
                    raise SpecError(f"layer {i}: sequence of length {length} too short for kernel {k}")
                shape = (cout, n)
            elif kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif kind == "dropout":
                if not 0.0 <= args[0] < 1.0:
                    raise SpecError(f"layer {i}: dropout rate must be in [0, 1)")
            out.append(shape)
        if self.layers[-1][0] != "dense" or shape != (self.output_width,):
            raise SpecError(f"the last layer must be dense with width {self.output_width}")
        return out

    def to_dict(self) -> dict:
        return {"name": self.name, "input_width": self.input_width,
                "output_width": self.output_width, "layers": [list(l) for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(tuple(l) for l in d["layers"]), int(d["input_width"]),
                   int(d["output_width"]), d.get("name", "network"))


def ann_spec(hidden_layers: int, neurons: int, input_width: int = INPUT_WIDTH,
             output_width: int = N_LABELS) -> NetworkSpec:
    """Fully connected network with ``hidden_layers`` ReLU layers of equal width."""
    if hidden_layers < 0:
        raise SpecError("hidden layer count must be non-negative")
    layers = tuple(("dense", neurons) for _ in range(hidden_layers)) + (("dense", output_width),)
    return NetworkSpec(layers, input_width, output_width, name=f"ann-{hidden_layers}x{neurons}")


def cnn_spec(dropout1: float = 0.0, dropout2: float = 0.3, input_width: int = INPUT_WIDTH,
             output_width: int = N_LABELS) -> NetworkSpec:
    """Convolutional classifier with three conv/pool stages and a two-layer dense head.

    The demand profile enters as one channel; a pointwise convolution lifts it
    to 32 channels before the first wide convolution.
    """
    layers = (
        ("conv1d", 1, 32, 1, 1, 0),
        ("conv1d", 32, 64, 10, 1, 1),
        ("maxpool1d", 5, 5, 0),
        ("conv1d", 64, 128, 5, 1, 1),
        ("maxpool1d", 3, 3, 0),
        ("conv1d", 128, 256, 3, 1, 1),
        ("maxpool1d", 2, 3, 0),
        ("flatten",),
        ("dense", 256),
        ("dropout", dropout1),
        ("dense", 128),
        ("dropout", dropout2),
        ("dense", output_width),
    )
    return NetworkSpec(layers, input_width, output_width, name="cnn")


@dataclass
class Network:
    spec: NetworkSpec
    layers: list[Layer] = field(default_factory=list)

    @classmethod
    def build(cls, spec: NetworkSpec, seed: int = 0) -> "Network":
        rng = np.random.default_rng(seed)
        n_param_layers = [i for i, l in enumerate(spec.layers) if l[0] in ("dense", "conv1d")]
        last = n_param_layers[-1]
        layers: list[Layer] = []
        width = spec.input_width
        seq = False
        for i, (kind, *args) in enumerate(spec.layers):
            if kind in ("conv1d", "maxpool1d") and not seq:
                layers.append(Reshape1d())
                seq = True
            if kind == "dense":
                layers.append(Dense(width, args[0], relu=i != last, rng=rng))
                width = args[0]
            elif kind == "conv1d":
                layers.append(Conv1d(*args, relu=i != last, rng=rng))
            elif kind == "maxpool1d":
                layers.append(MaxPool1d(*args))
            elif kind == "flatten":
                layers.append(Flatten())
                seq = False
            elif kind == "dropout":
                layers.append(Dropout(args[0]))
            if kind in ("conv1d", "maxpool1d", "flatten"):
                width = int(np.prod(spec.shapes()[i]))
        return cls(spec, layers)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.spec.input_width:
            raise SpecError(f"expected input of shape (N, {self.spec.input_width}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = grad_logits
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g
