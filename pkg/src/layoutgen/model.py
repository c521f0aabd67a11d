"""Encoder-fusion-decoder architecture for layout generation, with its losses."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import layers as nn
from .autodiff import DiffArray
from .engines import Layout
from .features import layout_feature
from .graphs import Graph, SENPartition
from .transport import GWConfig, sen_permutation, unit_slices

GNN_KINDS = ("mlp", "gcn", "gin1", "ginmlp")
GLM_MAGIC = b"GLM1"


@dataclass(frozen=True)
class ModelConfig:
    gnn: str = "ginmlp"
    use_gw: bool = True
    layers: int = 3
    hidden: int = 32
    latent_dim: int = 2
    beta: float = 10.0
    slices: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.gnn not in GNN_KINDS:
            raise ValueError(f"gnn must be one of {GNN_KINDS}, got {self.gnn!r}")
        if self.hidden not in (32, 64, 128):
            raise ValueError(f"hidden width must be 32, 64, or 128, got {self.hidden}")
        if self.latent_dim != 2:
            raise ValueError("the latent space is two-dimensional")

    @property
    def name(self) -> str:
        base = {"mlp": "MLP", "gcn": "GCN", "gin1": "GIN-1", "ginmlp": "GIN-MLP"}[self.gnn]
        return base + ("+GW" if self.use_gw else "")


def hidden_width_for(n: int) -> int:
    if n <= 150:
        return 32
    if n <= 500:
        return 64
    return 128


def batch_size_for(n: int) -> int:
    return 40 if n > 500 else 100


@dataclass
class GNNLayer:
    kind: str
    dense1: nn.Dense
    bn: nn.BatchNorm
    dense2: nn.Dense | None = None
    bn_inner: nn.BatchNorm | None = None
    eps: float = 0.0  # GIN epsilon, fixed

    @classmethod
    def init(cls, kind: str, fan_in: int, width: int, rng) -> "GNNLayer":
        dense2 = bn_inner = None
        if kind == "ginmlp":
            dense1 = nn.Dense.init(fan_in, width, rng)
            bn_inner = nn.BatchNorm.init(width)
            dense2 = nn.Dense.init(width, width, rng)
        else:
            dense1 = nn.Dense.init(fan_in, width, rng)
        return cls(kind=kind, dense1=dense1, bn=nn.BatchNorm.init(width),
                   dense2=dense2, bn_inner=bn_inner)

    def apply(self, h, g: Graph, mode: str) -> DiffArray:
        if self.kind == "mlp":
            x = nn.linear(h, self.dense1)
        elif self.kind == "gcn":
            x = nn.gcn_layer(h, g, self.dense1.w)
        elif self.kind == "gin1":
            x = nn.gin_layer(h, g, self.eps, lambda t: nn.linear(t, self.dense1))
        elif self.kind == "ginmlp":
            def inner(t):
                t = nn.linear(t, self.dense1)
                t = nn.elu(nn.batch_norm(t, self.bn_inner, mode))
                return nn.linear(t, self.dense2)
            x = nn.gin_layer(h, g, self.eps, inner)
        else:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        return nn.elu(nn.batch_norm(x, self.bn, mode))

    def pieces(self, prefix: str):
        out = [(f"{prefix}.dense1", self.dense1), (f"{prefix}.bn", self.bn)]
        if self.dense2 is not None:
            out.append((f"{prefix}.dense2", self.dense2))
        if self.bn_inner is not None:
            out.append((f"{prefix}.bn_inner", self.bn_inner))
        return out


@dataclass
class ModelParams:
    """All learnable weights plus architecture configuration; graph-specific."""

    config: ModelConfig
    n: int
    enc_layers: list[GNNLayer]
    enc_mlp1: nn.Dense
    enc_mlp_bn: nn.BatchNorm
    enc_mlp2: nn.Dense
    dec_layers: list[GNNLayer]
    dec_head: nn.Dense

    @classmethod
    def init(cls, config: ModelConfig, n: int) -> "ModelParams":
        rng = np.random.default_rng(config.seed)
        h = config.hidden
        enc_layers = []
        fan = n
        for _ in range(config.layers):
            enc_layers.append(GNNLayer.init(config.gnn, fan, h, rng))
            fan = h
        enc_mlp1 = nn.Dense.init(config.layers * h, h, rng)
        enc_mlp_bn = nn.BatchNorm.init(h)
        enc_mlp2 = nn.Dense.init(h, config.latent_dim, rng)
        dec_layers = []
        fan = n + config.latent_dim
        for _ in range(config.layers):
            dec_layers.append(GNNLayer.init(config.gnn, fan, h, rng))
            fan = h
        dec_head = nn.Dense.init(h, 2, rng)
        return cls(config=config, n=n, enc_layers=enc_layers, enc_mlp1=enc_mlp1,
                   enc_mlp_bn=enc_mlp_bn, enc_mlp2=enc_mlp2,
                   dec_layers=dec_layers, dec_head=dec_head)

    # -- parameter enumeration ----------------------------------------------
    def _pieces(self):
        out = []
        for i, lp in enumerate(self.enc_layers):
            out.extend(lp.pieces(f"enc{i}"))
        out.extend([("enc_mlp1", self.enc_mlp1), ("enc_mlp_bn", self.enc_mlp_bn),
                    ("enc_mlp2", self.enc_mlp2)])
        for i, lp in enumerate(self.dec_layers):
            out.extend(lp.pieces(f"dec{i}"))
        out.append(("dec_head", self.dec_head))
        return out

    def named_params(self) -> list[tuple[str, DiffArray]]:
        out = []
        for prefix, piece in self._pieces():
            for name, p in piece.params():
                out.append((f"{prefix}.{name}", p))
        return out

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Trainable values plus batch-norm running statistics, stable order."""
        out = [(name, p.value) for name, p in self.named_params()]
        for prefix, piece in self._pieces():
            if isinstance(piece, nn.BatchNorm):
                out.append((f"{prefix}.running_mean", piece.running_mean))
                out.append((f"{prefix}.running_var", piece.running_var))
        return out

    def set_array(self, name: str, value: np.ndarray) -> None:
        for pname, p in self.named_params():
            if pname == name:
                p.value = value.reshape(p.value.shape).astype(np.float64)
                return
        for prefix, piece in self._pieces():
            if isinstance(piece, nn.BatchNorm):
                if name == f"{prefix}.running_mean":
                    piece.running_mean = value.astype(np.float64)
                    return
                if name == f"{prefix}.running_var":
                    piece.running_var = value.astype(np.float64)
                    return
        raise KeyError(name)

    def quantize(self) -> None:
        """Round every array through float32 so 32-bit persistence is lossless."""
        for _, p in self.named_params():
            p.value = p.value.astype(np.float32).astype(np.float64)
        for prefix, piece in self._pieces():
            if isinstance(piece, nn.BatchNorm):
                piece.running_mean = piece.running_mean.astype(np.float32).astype(np.float64)
                piece.running_var = piece.running_var.astype(np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# Forward passes


def _ensure_batch(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None, ...], True
    return x, False


def encode_batch(g: Graph, x, params: ModelParams, mode: str = "eval") -> DiffArray:
    """Layout features (B, N, N) -> latent codes (B, 2) in [-1, 1]^2."""
    h = ad.as_diff(x)
    if h.shape[-1] != params.n or h.shape[-2] != params.n:
        raise ValueError(f"feature shape {h.shape} does not match n={params.n}")
    outs = []
    for lp in params.enc_layers:
        h = lp.apply(h, g, mode)
        outs.append(h)
    jk = nn.concat_layers(*outs)
    pooled = nn.mean_readout(jk)
    t = nn.linear(pooled, params.enc_mlp1)
    t = nn.elu(nn.batch_norm(t, params.enc_mlp_bn, mode))
    return ad.tanh(nn.linear(t, params.enc_mlp2))


def encode(g: Graph, x: np.ndarray, params: ModelParams, mode: str = "eval") -> np.ndarray:
    x, _ = _ensure_batch(x, 3)
    return encode_batch(g, x, params, mode).value[0]


def fuse(z, n: int) -> DiffArray:
    """(B, 2) latent codes -> (B, n, n+2) fused node features [one-hot | z]."""
    z = ad.as_diff(z)
    b = z.shape[0]
    eye = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    z_rows = ad.add(ad.constant(np.zeros((b, n, 2))), ad.reshape(z, (b, 1, 2)))
    return ad.concatenate([ad.constant(eye), z_rows], axis=-1)


def decode_batch(g: Graph, z, params: ModelParams, mode: str = "eval") -> DiffArray:
    """Latent codes (B, 2) -> positions (B, N, 2)."""
    h = fuse(z, params.n)
    for lp in params.dec_layers:
        h = lp.apply(h, g, mode)
    return nn.linear(h, params.dec_head)


def decode(g: Graph, z, params: ModelParams, mode: str = "eval") -> Layout:
    z = np.asarray(z, dtype=np.float64).reshape(1, 2)
    if np.any(np.abs(z) > 1.0 + 1e-9):
        raise ValueError(f"latent point {z.reshape(-1)} outside [-1, 1]^2")
    pos = decode_batch(g, z, params, mode).value[0]
    return Layout(pos, provenance={"engine": "model", "params": {"z": z.reshape(-1).tolist()},
                                   "seed": None})


# ---------------------------------------------------------------------------
# Losses


@dataclass
class LossState:
    """Running batch-mean of the reconstruction loss, for the degenerate penalty."""

    running: float | None = None
    momentum: float = 0.9

    def update(self, value: float) -> None:
        if self.running is None:
            self.running = value
        else:
            self.running = self.momentum * self.running + (1 - self.momentum) * value

    @property
    def penalty(self) -> float:
        return 10.0 * self.running if self.running is not None else 10.0


def align_inputs(
    g: Graph,
    part: SENPartition,
    input_positions: np.ndarray,
    recon_positions: np.ndarray,
    use_gw: bool,
    gw_config: GWConfig = GWConfig(),
) -> np.ndarray:
    """Per-item SEN-permuted input features (the reconstruction targets)."""
    inputs, _ = _ensure_batch(input_positions, 3)
    recons, _ = _ensure_batch(recon_positions, 3)
    targets = np.empty((inputs.shape[0], g.n, g.n))
    for i in range(inputs.shape[0]):
        pos = inputs[i]
        if use_gw and part.nontrivial_count > 0:
            perm = sen_permutation(pos, recons[i], part, gw_config)
            pos = pos[perm]
        targets[i] = layout_feature(pos)
    return targets


def reconstruction_loss(
    g: Graph,
    part: SENPartition,
    input_positions: np.ndarray,
    recon,
    use_gw: bool,
    gw_config: GWConfig = GWConfig(),
    loss_state: LossState | None = None,
) -> DiffArray:
    """Mean elementwise L1 between the (GW-aligned) input feature and the
    reconstructed layout's feature.

    No gradient flows through the alignment. Degenerate reconstructions
    (all points coincident) contribute a large finite penalty instead of
    raising, so early training epochs survive them.
    """
    recon = ad.as_diff(recon)
    rvals = recon.value
    if rvals.ndim == 2:
        recon = ad.reshape(recon, (1,) + rvals.shape)
        rvals = recon.value
    b, n = rvals.shape[0], rvals.shape[1]
    targets = align_inputs(g, part, input_positions, rvals, use_gw, gw_config)

    d = ad.pairwise_dist(recon)                       # (B, N, N)
    dbar = ad.mean(d, axis=(1, 2), keepdims=True)     # (B, 1, 1)
    spread = rvals.max(axis=1) - rvals.min(axis=1)
    good = (spread.max(axis=1) > 1e-9).astype(np.float64)  # (B,)
    dbar_safe = ad.add(ad.mul(dbar, good.reshape(b, 1, 1)),
                       ad.constant(1.0 - good.reshape(b, 1, 1)))
    x_rec = ad.div(d, dbar_safe)
    item = ad.mean(ad.absolute(ad.sub(x_rec, ad.constant(targets))), axis=(1, 2))  # (B,)
    penalty = loss_state.penalty if loss_state is not None else 10.0
    combined = ad.add(ad.mul(item, good), ad.constant((1.0 - good) * penalty))
    loss = ad.mean(combined)
    if loss_state is not None:
        loss_state.update(float(loss.value))
    return loss


def variational_loss(z, seed: int, slices: int = 50) -> DiffArray:
    """Sliced-Wasserstein distance from the latent batch to fresh uniform
    samples on [-1, 1]^2, squared-difference cost."""
    z = ad.as_diff(z)
    m = z.shape[0]
    if m < 2:
        raise ValueError("variational loss needs a batch of at least 2")
    rng = np.random.default_rng(seed)
    prior = rng.uniform(-1.0, 1.0, size=(m, z.shape[1]))
    theta = unit_slices(slices, z.shape[1], rng)
    proj = ad.matmul(z, ad.constant(theta.T))                  # (M, L)
    order = np.argsort(proj.value, axis=0)
    proj_sorted = ad.take_along(proj, order, axis=0)
    prior_sorted = np.sort(prior @ theta.T, axis=0)
    return ad.mean(ad.square(ad.sub(proj_sorted, ad.constant(prior_sorted))))


def total_loss(lx, lz, beta: float = 10.0) -> DiffArray:
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    return ad.add(lx, ad.mul(lz, beta))


# ---------------------------------------------------------------------------
# GLM1 persistence


def save_model(params: ModelParams, path) -> None:
    arrays = params.named_arrays()
    header = {
        "format": "GLM1",
        "version": 1,
        "n": params.n,
        "config": {
            "gnn": params.config.gnn, "use_gw": params.config.use_gw,
            "layers": params.config.layers, "hidden": params.config.hidden,
            "latent_dim": params.config.latent_dim, "beta": params.config.beta,
            "slices": params.config.slices, "seed": params.config.seed,
        },
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    blob = json.dumps(header).encode("utf-8")
    fh = path if hasattr(path, "write") else open(path, "wb")
    try:
        fh.write(GLM_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(a.astype("<f4").tobytes())
    finally:
        if fh is not path:
            fh.close()


def load_model(path) -> ModelParams:
    fh = path if hasattr(path, "read") else open(path, "rb")
    try:
        magic = fh.read(4)
        if magic != GLM_MAGIC:
            raise ValueError(f"bad model magic {magic!r}; expected {GLM_MAGIC!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported model version {header.get('version')}")
        config = ModelConfig(**header["config"])
        params = ModelParams.init(config, int(header["n"]))
        for spec in header["arrays"]:
            size = int(np.prod(spec["shape"])) if spec["shape"] else 1
            raw = fh.read(size * 4)
            if len(raw) != size * 4:
                raise ValueError(f"truncated array {spec['name']!r}")
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(spec["shape"])
            params.set_array(spec["name"], arr)
    finally:
        if fh is not path:
            fh.close()
    return params
