"""Graph neural cellular automaton forward passes.

The core model maps per-node states through an optional pre-MLP, one round
of message passing (messages are relu-affine images of neighbour features,
aggregated by sum or mean), and a post-MLP over the concatenation of the
node's own features with the aggregated message. A boids variant adds an
edge-difference branch and integrates predicted velocities into positions.

Messages depend on the sender only, so they are computed once per node and
gathered per edge; this is algebraically identical to mapping each edge
separately and considerably cheaper on dense graphs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict, field

import numpy as np

from . import autodiff as ad
from .graphs import Graph, radius_graph
from .rng import Stream

ACTIVATIONS = ("sigmoid", "tanh", "identity")
AGGREGATIONS = ("sum", "mean")


@dataclass
class GncaConfig:
    d_in: int
    d_out: int
    d_hidden: int = 256
    post_hidden: int | None = None  # defaults to d_hidden
    out_activation: str = "sigmoid"
    aggregation: str = "sum"
    use_pre_mlp: bool = True

    def __post_init__(self):
        if self.post_hidden is None:
            self.post_hidden = self.d_hidden
        if self.out_activation not in ACTIVATIONS:
            raise ValueError(f"out_activation must be one of {ACTIVATIONS}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")


def _param_shapes(cfg: GncaConfig) -> dict[str, tuple[int, int]]:
    h, p = cfg.d_hidden, cfg.post_hidden
    shapes = {}
    if cfg.use_pre_mlp:
        shapes.update(
            pre_w1=(cfg.d_in, h), pre_b1=(1, h), pre_w2=(h, h), pre_b2=(1, h)
        )
        width = h
    else:
        width = cfg.d_in
    shapes.update(
        msg_w=(width, h),
        msg_b=(1, h),
        post_w1=(2 * h if cfg.use_pre_mlp else width + h, p),
        post_b1=(1, p),
        post_w2=(p, cfg.d_out),
        post_b2=(1, cfg.d_out),
    )
    return shapes


class GncaModel:
    """One message-passing round between two MLPs; states in, states out."""

    def __init__(self, config: GncaConfig, params: dict[str, ad.Tensor]):
        self.config = config
        shapes = _param_shapes(config)
        if set(params) != set(shapes):
            raise ValueError(f"expected params {sorted(shapes)}, got {sorted(params)}")
        for name, shape in shapes.items():
            if params[name].data.shape != shape:
                raise ValueError(f"param {name} must have shape {shape}")
        self.params = params
        self._names = sorted(shapes)

    @classmethod
    def init(cls, config: GncaConfig, seed_or_stream) -> "GncaModel":
        stream = seed_or_stream if isinstance(seed_or_stream, Stream) else Stream(seed_or_stream)
        params = {}
        for name, (rows, cols) in _param_shapes(config).items():
            if "_b" in name:
                params[name] = ad.param(np.zeros((rows, cols)))
            else:
                params[name] = ad.param(stream.glorot(rows, cols))
        return cls(config, params)

    def parameters(self) -> list[ad.Tensor]:
        return [self.params[n] for n in self._names]

    def parameter_names(self) -> list[str]:
        return list(self._names)

    def forward_logits(self, g: Graph, s) -> ad.Tensor:
        """Pre-activation output; `s` may be a Tensor already on the tape."""
        x = s if isinstance(s, ad.Tensor) else ad.Tensor(s)
        if x.data.ndim != 2 or x.data.shape[1] != self.config.d_in:
            raise ValueError(
                f"state shape {x.data.shape} incompatible with model d_in {self.config.d_in}"
            )
        P = self.params
        h = x
        if self.config.use_pre_mlp:
            h = ad.relu(ad.add(ad.matmul(h, P["pre_w1"]), P["pre_b1"]))
            h = ad.relu(ad.add(ad.matmul(h, P["pre_w2"]), P["pre_b2"]))
        per_node = ad.relu(ad.add(ad.matmul(h, P["msg_w"]), P["msg_b"]))
        messages = ad.gather_rows(per_node, g.src)
        agg = ad.segment_reduce(messages, g.dst, g.n, mode=self.config.aggregation)
        z = ad.concat_rows(h, agg)
        z = ad.relu(ad.add(ad.matmul(z, P["post_w1"]), P["post_b1"]))
        return ad.add(ad.matmul(z, P["post_w2"]), P["post_b2"])

    def forward(self, g: Graph, s) -> ad.Tensor:
        logits = self.forward_logits(g, s)
        if self.config.out_activation == "sigmoid":
            return ad.sigmoid(logits)
        if self.config.out_activation == "tanh":
            return ad.tanh(logits)
        return logits

    def step(self, g: Graph, s_values: np.ndarray) -> np.ndarray:
        """Inference outside any tape; returns raw activated values."""
        return self.forward(g, s_values).data


def round_binary(values: np.ndarray) -> np.ndarray:
    """Round sigmoid outputs to exact 0/1; exactly 0.5 rounds up."""
    return (np.asarray(values) >= 0.5).astype(np.float64)


# ----------------------------------------------------------------------------
# boids variant: velocity head + edge-difference branch
# ----------------------------------------------------------------------------


@dataclass
class BoidsGncaConfig:
    d_state: int = 4
    d_vel: int = 2
    d_hidden: int = 256
    edge_hidden: int = 256
    velocity_only_inputs: bool = False
    radius: float = 0.15  # used when rolling out autonomously

    def base_config(self) -> GncaConfig:
        d_in = self.d_vel if self.velocity_only_inputs else self.d_state
        return GncaConfig(
            d_in=d_in,
            d_out=self.d_vel,
            d_hidden=self.d_hidden,
            out_activation="identity",
            aggregation="sum",
        )


class BoidsGnca:
    """Base model predicting velocities plus an edge branch over state
    differences; the new position is the old one advanced by the predicted
    velocity, so the full output row is [p', v']."""

    def __init__(self, config: BoidsGncaConfig, base: GncaModel, edge_params: dict[str, ad.Tensor]):
        self.config = config
        self.base = base
        shapes = self._edge_shapes(config)
        if set(edge_params) != set(shapes):
            raise ValueError(f"expected edge params {sorted(shapes)}")
        for name, shape in shapes.items():
            if edge_params[name].data.shape != shape:
                raise ValueError(f"edge param {name} must have shape {shape}")
        self.edge_params = edge_params
        self._edge_names = sorted(shapes)

    @staticmethod
    def _edge_shapes(cfg: BoidsGncaConfig) -> dict[str, tuple[int, int]]:
        return {
            "edge_w1": (cfg.d_state + 1, cfg.edge_hidden),
            "edge_b1": (1, cfg.edge_hidden),
            "edge_w2": (cfg.edge_hidden, cfg.d_vel),
            "edge_b2": (1, cfg.d_vel),
        }

    @classmethod
    def init(cls, config: BoidsGncaConfig, seed_or_stream) -> "BoidsGnca":
        stream = seed_or_stream if isinstance(seed_or_stream, Stream) else Stream(seed_or_stream)
        base = GncaModel.init(config.base_config(), stream.derive(1))
        estream = stream.derive(2)
        shapes = cls._edge_shapes(config)
        edge_params = {}
        for name, (rows, cols) in shapes.items():
            if "_b" in name:
                edge_params[name] = ad.param(np.zeros((rows, cols)))
            else:
                edge_params[name] = ad.param(estream.glorot(rows, cols))
        return cls(config, base, edge_params)

    def parameters(self) -> list[ad.Tensor]:
        return self.base.parameters() + [self.edge_params[n] for n in self._edge_names]

    def parameter_names(self) -> list[str]:
        return [f"base.{n}" for n in self.base.parameter_names()] + list(self._edge_names)

    def forward(self, g: Graph, s_values: np.ndarray) -> ad.Tensor:
        """Full next state [p', v'] as a tensor; input states are constants."""
        s_values = np.asarray(s_values, dtype=np.float64)
        if s_values.shape[1] != self.config.d_state:
            raise ValueError(f"boids state width must be {self.config.d_state}")
        base_in = s_values[:, 2:] if self.config.velocity_only_inputs else s_values
        v = self.base.forward(g, base_in)

        E = self.edge_params
        if len(g.src):
            diff = s_values[g.dst] - s_values[g.src]
            norm = np.sqrt(np.sum(diff * diff, axis=1, keepdims=True))
            feats = ad.Tensor(np.concatenate([diff, norm], axis=1))
            e = ad.relu(ad.add(ad.matmul(feats, E["edge_w1"]), E["edge_b1"]))
            e = ad.add(ad.matmul(e, E["edge_w2"]), E["edge_b2"])
            v = ad.add(v, ad.segment_reduce(e, g.dst, g.n, mode="sum"))
        else:
            # keep the edge branch on the tape even for empty graphs so the
            # parameter list always matches the gradient list
            zeros = ad.Tensor(np.zeros((0, self.config.d_state + 1)))
            e = ad.relu(ad.add(ad.matmul(zeros, E["edge_w1"]), E["edge_b1"]))
            e = ad.add(ad.matmul(e, E["edge_w2"]), E["edge_b2"])
            v = ad.add(v, ad.segment_reduce(e, np.zeros(0, dtype=np.int64), g.n, mode="sum"))
        p_new = ad.add(ad.Tensor(s_values[:, :2]), v)
        return ad.concat_rows(p_new, v)

    def step(self, s_values: np.ndarray) -> tuple[np.ndarray, Graph]:
        """Autonomous step: rebuild the radius graph from current positions."""
        g = radius_graph(np.asarray(s_values)[:, :2], self.config.radius)
        return self.forward(g, s_values).data, g


# ----------------------------------------------------------------------------
# exact hand-weight constructions
# ----------------------------------------------------------------------------

# a published exact solution for the density-rule network at kappa=0.42:
# z = relu([s, rho] @ W1 + b1); out = sigmoid(z @ W2 + b2). The orientation
# (inputs @ W1, not W1 @ inputs) is the one that reproduces the rule on
# 196/198 enumerated transitions, fixed once by enumeration and frozen here.
MINIMAL_W1 = np.array([[-1.98, 1.64], [2.63, -2.80]])
MINIMAL_B1 = np.array([[-0.46, 0.17]])
MINIMAL_W2 = np.array([[3.30], [3.30]])
MINIMAL_B2 = np.array([[-2.10]])


@dataclass
class MinimalVoronoiNet:
    """Two-hidden-neuron classifier over (state, density) feature pairs."""

    w1: np.ndarray = field(default_factory=lambda: MINIMAL_W1.copy())
    b1: np.ndarray = field(default_factory=lambda: MINIMAL_B1.copy())
    w2: np.ndarray = field(default_factory=lambda: MINIMAL_W2.copy())
    b2: np.ndarray = field(default_factory=lambda: MINIMAL_B2.copy())

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x rows are [s, rho]; returns flip probabilities in (0, 1)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        z = np.maximum(x @ self.w1 + self.b1, 0.0)
        logits = z @ self.w2 + self.b2
        return 1.0 / (1.0 + np.exp(-logits))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return round_binary(self.forward(x))


def build_minimal_voronoi_gnca(net: MinimalVoronoiNet | None = None) -> GncaModel:
    """Exact-rule automaton: mean aggregation with unit message weights makes
    the aggregated message equal the neighbourhood density, and the minimal
    net serves as the post-MLP over [s, rho]."""
    net = net or MinimalVoronoiNet()
    config = GncaConfig(
        d_in=1,
        d_out=1,
        d_hidden=1,
        post_hidden=2,
        out_activation="sigmoid",
        aggregation="mean",
        use_pre_mlp=False,
    )
    params = {
        "msg_w": ad.param(np.array([[1.0]])),
        "msg_b": ad.param(np.array([[0.0]])),
        "post_w1": ad.param(net.w1.copy()),
        "post_b1": ad.param(net.b1.copy()),
        "post_w2": ad.param(net.w2.copy()),
        "post_b2": ad.param(net.b2.copy()),
    }
    return GncaModel(config, params)


def enumerate_rule_dataset(kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """All 198 (s, rho) pairs with rho in {0.01, ..., 0.99} and the rule's
    next state as target."""
    rho = np.arange(1, 100) / 100.0
    s = np.repeat([0.0, 1.0], len(rho))
    rho2 = np.tile(rho, 2)
    x = np.stack([s, rho2], axis=1)
    y = np.where(rho2 > kappa, 1.0 - s, s).reshape(-1, 1)
    return x, y


@dataclass
class NeighborCounter:
    """Thermometer encoding of the live-neighbour count c:
    relu(c * [1,1,1,1] + [-1,-2,-3,-4]), affine applied after aggregation.

    Note c=0 and c=1 both encode to all zeros; counts 1..8 are pairwise
    distinct and counts >= 2 are separated by the first component alone.
    """

    weights: np.ndarray = field(default_factory=lambda: np.ones((1, 4)))
    bias: np.ndarray = field(default_factory=lambda: np.array([[-1.0, -2.0, -3.0, -4.0]]))

    def encode_counts(self, counts: np.ndarray) -> np.ndarray:
        c = np.asarray(counts, dtype=np.float64).reshape(-1, 1)
        return np.maximum(c @ self.weights + self.bias, 0.0)

    def encode(self, g: Graph, s_values: np.ndarray) -> np.ndarray:
        """Per-node encoding of the number of live neighbours."""
        s_values = np.asarray(s_values, dtype=np.float64).reshape(-1, 1)
        counts = np.zeros((g.n, 1))
        if len(g.src):
            starts = np.flatnonzero(np.r_[True, g.dst[1:] != g.dst[:-1]])
            counts[g.dst[starts]] = np.add.reduceat(s_values[g.src], starts, axis=0)
        return self.encode_counts(counts)


def build_neighbor_counter() -> NeighborCounter:
    return NeighborCounter()


# ----------------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------------


def save_checkpoint(path, model) -> None:
    """JSON checkpoint: config + named row-major parameter arrays."""
    if isinstance(model, BoidsGnca):
        doc = {
            "kind": "boids_gnca",
            "config": asdict(model.config),
            "params": _params_doc(dict(model.base.params, **{f"edge.{k}": v for k, v in model.edge_params.items()})),
        }
    elif isinstance(model, GncaModel):
        doc = {"kind": "gnca", "config": asdict(model.config), "params": _params_doc(model.params)}
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def _params_doc(params: dict[str, ad.Tensor]) -> dict:
    return {
        name: {"shape": list(t.data.shape), "values": [float(v) for v in t.data.ravel()]}
        for name, t in sorted(params.items())
    }


def _params_from_doc(doc: dict) -> dict[str, ad.Tensor]:
    out = {}
    for name, entry in doc.items():
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        out[name] = ad.param(arr)
    return out


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    params = _params_from_doc(doc["params"])
    if doc["kind"] == "gnca":
        return GncaModel(GncaConfig(**doc["config"]), params)
    if doc["kind"] == "boids_gnca":
        cfg = BoidsGncaConfig(**doc["config"])
        base_params = {k: v for k, v in params.items() if not k.startswith("edge.")}
        edge_params = {k[5:]: v for k, v in params.items() if k.startswith("edge.")}
        return BoidsGnca(cfg, GncaModel(cfg.base_config(), base_params), edge_params)
    raise ValueError(f"unknown checkpoint kind {doc['kind']!r}")
