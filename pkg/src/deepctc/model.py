"""The joint transmission autoencoder: a two-branch transmitter feeding one
shared OFDM grid, an AWGN channel, one in-technology receiver on the
transmitter's grid and any number of cross-technology receivers on their own
grids. Forward and backward passes are exact and run batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as ch
from . import nn
from .otfg import GridSignal, OTFGSpec, ResamplePlan, resample_batch, resample_batch_backward, resample_plan


class ConfigError(ValueError):
    """Invalid model or training configuration; message names the field."""


@dataclass(frozen=True)
class ModelConfig:
    """Alphabets, grids, loss weighting and architecture of one experiment.

    ``alpha`` trades the in-technology loss against the mean cross-technology
    loss. In broadcast mode (``intech_enabled=False``) the in-technology
    branch and receiver do not exist and ``ctc_weights`` (default all ones)
    weight the per-receiver losses instead.
    """

    intech_alphabet: int
    ctc_alphabet: int
    tx_grid: OTFGSpec
    ctc_rx_grids: tuple[OTFGSpec, ...]
    alpha: float = 0.9
    ctc_weights: tuple[float, ...] | None = None
    hidden_width: int | None = None
    hidden_depth: int = 1
    intech_enabled: bool = True
    seed: int = 0

    @property
    def intech_rx_grid(self) -> OTFGSpec:
        """The in-technology receiver always shares the transmitter's grid."""
        return self.tx_grid

    def validate(self) -> None:
        if self.intech_enabled and self.intech_alphabet < 2:
            raise ConfigError("intech_alphabet must be >= 2 when the branch is enabled")
        if self.ctc_alphabet < 2:
            raise ConfigError("ctc_alphabet must be >= 2")
        if not self.ctc_rx_grids:
            raise ConfigError("ctc_rx_grids must name at least one receiver grid")
        for grid in self.ctc_rx_grids:
            resample_plan(self.tx_grid, grid)  # raises GridError if incompatible
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.intech_enabled and self.ctc_weights is not None:
            raise ConfigError("ctc_weights only apply in broadcast mode (intech_enabled=False)")
        if self.ctc_weights is not None:
            if len(self.ctc_weights) != len(self.ctc_rx_grids):
                raise ConfigError("ctc_weights length must match ctc_rx_grids")
            if any(w < 0 for w in self.ctc_weights):
                raise ConfigError("ctc_weights must be nonnegative")
        if self.hidden_width is not None and self.hidden_width < 1:
            raise ConfigError("hidden_width must be positive")
        if self.hidden_depth < 1:
            raise ConfigError("hidden_depth must be positive")

    def width_for(self, alphabet: int, uses: int) -> int:
        """Hidden width of one network: explicit, or max(alphabet, 2 * grid uses)."""
        return self.hidden_width if self.hidden_width is not None else max(alphabet, 2 * uses)

    def broadcast_weights(self) -> tuple[float, ...]:
        if self.ctc_weights is not None:
            return self.ctc_weights
        return tuple(1.0 for _ in self.ctc_rx_grids)

    def to_dict(self) -> dict:
        return {
            "intech_alphabet": self.intech_alphabet,
            "ctc_alphabet": self.ctc_alphabet,
            "tx_grid": self.tx_grid.as_string(),
            "ctc_rx_grids": [g.as_string() for g in self.ctc_rx_grids],
            "alpha": self.alpha,
            "ctc_weights": list(self.ctc_weights) if self.ctc_weights is not None else None,
            "hidden_width": self.hidden_width,
            "hidden_depth": self.hidden_depth,
            "intech_enabled": self.intech_enabled,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            cfg = cls(
                intech_alphabet=int(d["intech_alphabet"]),
                ctc_alphabet=int(d["ctc_alphabet"]),
                tx_grid=OTFGSpec.from_string(d["tx_grid"]),
                ctc_rx_grids=tuple(OTFGSpec.from_string(g) for g in d["ctc_rx_grids"]),
                alpha=float(d["alpha"]),
                ctc_weights=tuple(float(w) for w in d["ctc_weights"]) if d.get("ctc_weights") is not None else None,
                hidden_width=int(d["hidden_width"]) if d.get("hidden_width") is not None else None,
                hidden_depth=int(d.get("hidden_depth", 1)),
                intech_enabled=bool(d.get("intech_enabled", True)),
                seed=int(d.get("seed", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"model config is missing field {exc.args[0]!r}") from None
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class MessagePair:
    """One in-technology message index and one CTC message index (0-based)."""

    s_intech: int
    s_ctc: int


@dataclass
class LossBreakdown:
    total: float
    intech: float | None
    ctc: list[float]


@dataclass
class ForwardResult:
    p_intech: np.ndarray | None
    p_ctc: list[np.ndarray]


def one_hot(s: int, size: int) -> np.ndarray:
    if not 0 <= s < size:
        raise IndexError(f"message {s} out of range for alphabet of {size}")
    v = np.zeros(size)
    v[s] = 1.0
    return v


def one_hot_batch(indices: np.ndarray, size: int) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        raise IndexError(f"message index out of range for alphabet of {size}")
    out = np.zeros((indices.shape[0], size))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


def decode(p: np.ndarray) -> int:
    """Index of the most probable message; ties break toward the lowest index."""
    p = np.asarray(p)
    if p.size == 0:
        raise ValueError("cannot decode an empty probability vector")
    return int(np.argmax(p))


class Autoencoder:
    """All trainable networks of one configured system, plus the resample plans."""

    def __init__(
        self,
        config: ModelConfig,
        tx_intech: nn.DenseStack | None,
        tx_ctc: nn.DenseStack,
        rx_intech: nn.DenseStack | None,
        rx_ctc: list[nn.DenseStack],
    ):
        self.config = config
        self.tx_intech = tx_intech
        self.tx_ctc = tx_ctc
        self.rx_intech = rx_intech
        self.rx_ctc = rx_ctc
        self.plans: list[ResamplePlan] = [
            resample_plan(config.tx_grid, grid) for grid in config.ctc_rx_grids
        ]

    def stacks(self) -> list[tuple[str, nn.DenseStack]]:
        out = []
        if self.tx_intech is not None:
            out.append(("tx_intech", self.tx_intech))
        out.append(("tx_ctc", self.tx_ctc))
        if self.rx_intech is not None:
            out.append(("rx_intech", self.rx_intech))
        for i, rx in enumerate(self.rx_ctc):
            out.append((f"rx_ctc{i}", rx))
        return out

    def parameters(self) -> dict[str, np.ndarray]:
        params = {}
        for name, stack in self.stacks():
            params.update(dict(stack.parameters(prefix=name + ".")))
        return params

    def gradients(self) -> nn.GradientStore:
        store = nn.GradientStore()
        for name, stack in self.stacks():
            for gname, g in stack.gradients(prefix=name + "."):
                store.add(gname, g)
        return store

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def checksum(self) -> str:
        return nn.parameter_checksum(self.parameters())

    def to_document(self) -> dict:
        """Versioned serialization: config echo, layer dims, row-major arrays."""
        networks = {}
        for name, stack in self.stacks():
            networks[name] = {
                "dims": [stack.layers[0].n_in] + [l.n_out for l in stack.layers],
                "activations": [l.activation for l in stack.layers],
                "layers": [
                    {"weights": l.weights.reshape(-1).tolist(), "bias": l.bias.tolist()}
                    for l in stack.layers
                ],
            }
        return {
            "format": "deepctc-model",
            "version": 1,
            "config": self.config.to_dict(),
            "networks": networks,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Autoencoder":
        from .training import ModelFormatError  # sibling module owns file-format errors

        for key in ("format", "version", "config", "networks"):
            if key not in doc:
                raise ModelFormatError(f"model document is missing section {key!r}")
        if doc["format"] != "deepctc-model":
            raise ModelFormatError(f"not a model document (format={doc['format']!r})")
        if doc["version"] != 1:
            raise ModelFormatError(f"unsupported model version {doc['version']!r}")
        config = ModelConfig.from_dict(doc["config"])
        expected = [name for name, _ in _network_layout(config)]
        networks = doc["networks"]
        missing = [n for n in expected if n not in networks]
        if missing:
            raise ModelFormatError(f"model document is missing network {missing[0]!r}")
        stacks = {}
        for name, dims in _network_layout(config):
            net = networks[name]
            if net["dims"] != dims:
                raise ModelFormatError(
                    f"network {name!r} dims {net['dims']} do not match config-derived {dims}"
                )
            layers = []
            for i, rec in enumerate(net["layers"]):
                w = np.array(rec["weights"], dtype=np.float64)
                if w.size != dims[i] * dims[i + 1]:
                    raise ModelFormatError(f"network {name!r} layer {i} has wrong weight count")
                layers.append(
                    nn.DenseLayer(w.reshape(dims[i + 1], dims[i]), np.array(rec["bias"]), net["activations"][i])
                )
            stacks[name] = nn.DenseStack(layers)
        rx_ctc = [stacks[f"rx_ctc{i}"] for i in range(len(config.ctc_rx_grids))]
        return cls(config, stacks.get("tx_intech"), stacks["tx_ctc"], stacks.get("rx_intech"), rx_ctc)


def _network_layout(config: ModelConfig) -> list[tuple[str, list[int]]]:
    """Name and dim chain of every network the config implies, in build order."""
    uses = config.tx_grid.uses
    depth = config.hidden_depth
    layout = []
    if config.intech_enabled:
        w = config.width_for(config.intech_alphabet, uses)
        layout.append(("tx_intech", [config.intech_alphabet] + [w] * depth + [uses]))
    w = config.width_for(config.ctc_alphabet, uses)
    layout.append(("tx_ctc", [config.ctc_alphabet] + [w] * depth + [uses]))
    if config.intech_enabled:
        w = config.width_for(config.intech_alphabet, uses)
        layout.append(("rx_intech", [uses] + [w] * depth + [config.intech_alphabet]))
    for i, grid in enumerate(config.ctc_rx_grids):
        w = config.width_for(config.ctc_alphabet, grid.uses)
        layout.append((f"rx_ctc{i}", [grid.uses] + [w] * depth + [config.ctc_alphabet]))
    return layout


def build(config: ModelConfig, rng: np.random.Generator) -> Autoencoder:
    """Glorot-initialize every network the config asks for."""
    config.validate()
    depth = config.hidden_depth
    stacks = {}
    for name, dims in _network_layout(config):
        acts = ["relu"] * depth + (["softmax"] if name.startswith("rx") else ["linear"])
        stacks[name] = nn.DenseStack.build(dims, acts, rng)
    rx_ctc = [stacks[f"rx_ctc{i}"] for i in range(len(config.ctc_rx_grids))]
    return Autoencoder(config, stacks.get("tx_intech"), stacks["tx_ctc"], stacks.get("rx_intech"), rx_ctc)


def _encode_batch(model: Autoencoder, s_intech: np.ndarray | None, s_ctc: np.ndarray):
    """Branch outputs, superposition, energy normalization. Returns (x, cache)."""
    cfg = model.config
    z = model.tx_ctc.forward(one_hot_batch(s_ctc, cfg.ctc_alphabet))
    if cfg.intech_enabled:
        z = z + model.tx_intech.forward(one_hot_batch(s_intech, cfg.intech_alphabet))
    return ch.normalize_energy_rows(z)


def _receiver_probs(model: Autoencoder, y: np.ndarray):
    """Receiver outputs for channel output y of shape (batch, tx uses)."""
    cfg = model.config
    p_intech = model.rx_intech.forward(y) if cfg.intech_enabled else None
    t, f = cfg.tx_grid.symbols, cfg.tx_grid.subcarriers
    y_grid = y.reshape(y.shape[0], t, f)
    p_ctc = []
    for plan, rx in zip(model.plans, model.rx_ctc):
        y_rx = resample_batch(y_grid, plan).reshape(y.shape[0], -1)
        p_ctc.append(rx.forward(y_rx))
    return p_intech, p_ctc


def _loss_weights(config: ModelConfig) -> tuple[float | None, list[float]]:
    """Per-receiver loss prefactors implementing the alpha/broadcast weighting."""
    n = len(config.ctc_rx_grids)
    if config.intech_enabled:
        return config.alpha, [(1.0 - config.alpha) / n] * n
    return None, list(config.broadcast_weights())


def _weighted_loss(model: Autoencoder, s_intech, s_ctc, noise: np.ndarray) -> LossBreakdown:
    """Forward-only loss evaluation with a fixed noise realization."""
    x, _ = _encode_batch(model, s_intech, s_ctc)
    p_intech, p_ctc = _receiver_probs(model, x + noise)
    w_intech, w_ctc = _loss_weights(model.config)
    l_intech = None
    total = 0.0
    if p_intech is not None:
        l_intech = nn.cross_entropy_mean(p_intech, s_intech)
        total += w_intech * l_intech
    l_ctc = [nn.cross_entropy_mean(p, s_ctc) for p in p_ctc]
    total += sum(w * l for w, l in zip(w_ctc, l_ctc))
    return LossBreakdown(total, l_intech, l_ctc)


def joint_loss(
    model: Autoencoder,
    s_intech: np.ndarray | None,
    s_ctc: np.ndarray,
    sigma: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> tuple[LossBreakdown, nn.GradientStore]:
    """One training step's losses and exact parameter gradients.

    The same noise realization serves forward and backward (the noise enters
    additively, so it is a constant w.r.t. the parameters). Pass ``noise``
    explicitly to pin it, e.g. for finite-difference checks.
    """
    cfg = model.config
    s_ctc = np.asarray(s_ctc)
    batch = s_ctc.shape[0]
    if batch == 0:
        raise ValueError("batch must be nonempty")
    x, norm_cache = _encode_batch(model, s_intech, s_ctc)
    if noise is None:
        noise = rng.normal(0.0, sigma, size=x.shape) if sigma > 0.0 else np.zeros_like(x)
    y = x + noise
    p_intech, p_ctc = _receiver_probs(model, y)
    w_intech, w_ctc = _loss_weights(cfg)

    grad_y = np.zeros_like(y)
    l_intech = None
    total = 0.0
    if p_intech is not None:
        l_intech = nn.cross_entropy_mean(p_intech, s_intech)
        total += w_intech * l_intech
        g_pre = (p_intech - one_hot_batch(s_intech, cfg.intech_alphabet)) * (w_intech / batch)
        grad_y += model.rx_intech.backward(g_pre)
    l_ctc = []
    t, f = cfg.tx_grid.symbols, cfg.tx_grid.subcarriers
    onehot_ctc = one_hot_batch(s_ctc, cfg.ctc_alphabet)
    for plan, rx, w, p in zip(model.plans, model.rx_ctc, w_ctc, p_ctc):
        l = nn.cross_entropy_mean(p, s_ctc)
        l_ctc.append(l)
        total += w * l
        g_pre = (p - onehot_ctc) * (w / batch)
        g_rx_in = rx.backward(g_pre)
        g_grid = resample_batch_backward(g_rx_in.reshape(batch, plan.dst.symbols, plan.dst.subcarriers), plan)
        grad_y += g_grid.reshape(batch, t * f)

    # noise layer backward is the identity; then through normalization and the add
    grad_z = ch.normalize_energy_rows_backward(grad_y, norm_cache)
    model.tx_ctc.backward(grad_z)
    if cfg.intech_enabled:
        model.tx_intech.backward(grad_z)
    if not np.isfinite(total):
        raise nn.NonFiniteError("joint loss is non-finite")
    return LossBreakdown(total, l_intech, l_ctc), model.gradients()


def encode(model: Autoencoder, pair: MessagePair) -> GridSignal:
    """The transmitted signal for one message pair, on the transmitter's grid."""
    cfg = model.config
    s_i = np.array([pair.s_intech]) if cfg.intech_enabled else None
    x, _ = _encode_batch(model, s_i, np.array([pair.s_ctc]))
    return GridSignal(cfg.tx_grid, x[0].reshape(cfg.tx_grid.symbols, cfg.tx_grid.subcarriers))


def forward(
    model: Autoencoder,
    pair: MessagePair,
    sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ForwardResult:
    """Transmit one pair through the channel and return every receiver's probabilities."""
    cfg = model.config
    s_i = np.array([pair.s_intech]) if cfg.intech_enabled else None
    x, _ = _encode_batch(model, s_i, np.array([pair.s_ctc]))
    y = ch.awgn_apply(x, sigma, rng) if sigma > 0.0 else x
    p_intech, p_ctc = _receiver_probs(model, y)
    return ForwardResult(
        p_intech[0] if p_intech is not None else None,
        [p[0] for p in p_ctc],
    )


GRADCHECK_CONFIG = ModelConfig(
    intech_alphabet=4,
    ctc_alphabet=2,
    tx_grid=OTFGSpec(2, 2),
    ctc_rx_grids=(OTFGSpec(1, 4),),
    alpha=0.5,
    hidden_width=8,
    hidden_depth=1,
    seed=0,
)


def model_gradient_check(
    config: ModelConfig = GRADCHECK_CONFIG,
    batch_size: int = 8,
    snr_db: float = 3.0,
    seed: int = 0,
    step: float = 1e-5,
) -> nn.GradCheckReport:
    """End-to-end finite-difference check of the full joint loss.

    The noise draw is made once and held fixed while every parameter is
    perturbed, so analytic and numeric gradients see the same channel.
    """
    rng = ch.substream(seed, ch.STREAM_INIT)
    model = build(config, rng)
    data_rng = ch.substream(seed, ch.STREAM_BATCH)
    s_i = data_rng.integers(0, config.intech_alphabet, size=batch_size) if config.intech_enabled else None
    s_c = data_rng.integers(0, config.ctc_alphabet, size=batch_size)
    sigma = ch.snr_db_to_sigma(snr_db)
    noise = ch.substream(seed, ch.STREAM_NOISE).normal(0.0, sigma, size=(batch_size, config.tx_grid.uses))
    _, grads = joint_loss(model, s_i, s_c, sigma, noise=noise)
    params = model.parameters()
    analytic = {k: v.copy() for k, v in grads.grads.items()}
    loss_fn = lambda: _weighted_loss(model, s_i, s_c, noise).total
    return nn.finite_difference_check(loss_fn, params, analytic, step=step)
