"""Dataset generation, the end-to-end training loop, checkpoints, model files.

Training is single-threaded and fully deterministic: the experiment seed
drives three independent Philox substreams (init, batches, noise), so the
same (config, plan) pair always yields bit-identical parameters.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel as ch
from . import nn
from .model import Autoencoder, ConfigError, MessagePair, ModelConfig, build, joint_loss


class DivergenceError(RuntimeError):
    """Training hit a non-finite loss or gradient."""


class ModelFormatError(ValueError):
    """Model file is malformed, truncated, or from an unsupported version."""


@dataclass(frozen=True)
class TrainPlan:
    """Budget and optimizer settings for one training run.

    ``lr_final`` enables a linear learning-rate decay from ``lr`` to
    ``lr_final`` over the run; None keeps the rate constant.
    """

    total_samples: int = 1_000_000
    batch_size: int = 256
    optimizer: str = "adam"
    lr: float = 1e-3
    lr_final: float | None = None
    train_snr_db: float = 3.0
    checkpoint_every: int = 500
    log_every: int = 100

    def validate(self) -> None:
        if self.total_samples < 1:
            raise ConfigError("total_samples must be positive")
        if not 1 <= self.batch_size <= self.total_samples:
            raise ConfigError("batch_size must be in [1, total_samples]")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.lr_final is not None and self.lr_final <= 0:
            raise ConfigError("lr_final must be positive when set")
        if not math.isfinite(self.train_snr_db):
            raise ConfigError("train_snr_db must be finite")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigError("checkpoint_every and log_every must be positive")

    def steps(self) -> int:
        return self.total_samples // self.batch_size

    def lr_at(self, step: int) -> float:
        """Learning rate for 1-indexed optimizer step ``step``."""
        if self.lr_final is None:
            return self.lr
        n = self.steps()
        if n <= 1:
            return self.lr
        frac = (step - 1) / (n - 1)
        return self.lr + (self.lr_final - self.lr) * frac

    def to_dict(self) -> dict:
        return {
            "total_samples": self.total_samples,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "lr": self.lr,
            "lr_final": self.lr_final,
            "train_snr_db": self.train_snr_db,
            "checkpoint_every": self.checkpoint_every,
            "log_every": self.log_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainPlan":
        conv = {
            "total_samples": int,
            "batch_size": int,
            "optimizer": str,
            "lr": float,
            "lr_final": lambda v: float(v) if v not in (None, "") else None,
            "train_snr_db": float,
            "checkpoint_every": int,
            "log_every": int,
        }
        unknown = set(d) - set(conv)
        if unknown:
            raise ConfigError(f"unknown train plan field {sorted(unknown)[0]!r}")
        plan = cls(**{k: conv[k](v) for k, v in d.items()})
        plan.validate()
        return plan


class MessageBatch:
    """A batch of message pairs, stored as two index arrays."""

    def __init__(self, s_intech: np.ndarray, s_ctc: np.ndarray):
        self.s_intech = np.asarray(s_intech)
        self.s_ctc = np.asarray(s_ctc)

    def __len__(self) -> int:
        return self.s_ctc.shape[0]

    def __getitem__(self, i: int) -> MessagePair:
        return MessagePair(int(self.s_intech[i]), int(self.s_ctc[i]))


def sample_batch(m: int, c: int, n: int, rng: np.random.Generator) -> MessageBatch:
    """n i.i.d. uniform message pairs over {0..m-1} x {0..c-1}."""
    if n < 1:
        raise ValueError("batch size must be >= 1")
    return MessageBatch(rng.integers(0, m, size=n), rng.integers(0, c, size=n))


@dataclass
class LossRecord:
    step: int
    loss: float
    loss_intech: float | None
    loss_ctc: list[float]
    ema: float


@dataclass
class TrainReport:
    """Per-interval losses, wall-clock seconds, final parameter checksum."""

    records: list[LossRecord] = field(default_factory=list)
    wall_clock_s: float = 0.0
    checksum: str = ""
    steps: int = 0

    def log_lines(self, n_ctc: int, intech: bool) -> list[str]:
        cols = ["step", "loss"] + (["loss_intech"] if intech else []) + [
            f"loss_ctc_{i + 1}" for i in range(n_ctc)
        ] + ["loss_ema"]
        lines = [",".join(cols)]
        for r in self.records:
            vals = [str(r.step), repr(r.loss)]
            if intech:
                vals.append(repr(r.loss_intech))
            vals.extend(repr(v) for v in r.loss_ctc)
            vals.append(repr(r.ema))
            lines.append(",".join(vals))
        return lines


def train(
    config: ModelConfig,
    plan: TrainPlan,
    checkpoint_dir: str | Path | None = None,
    log_path: str | Path | None = None,
) -> tuple[Autoencoder, TrainReport]:
    """Run the full training budget at fixed channel noise.

    On divergence the last checkpoint (if any) is retained and a
    DivergenceError is raised; on success rolling checkpoints are removed.
    """
    config.validate()
    plan.validate()
    seed = config.seed
    model = build(config, ch.substream(seed, ch.STREAM_INIT))
    batch_rng = ch.substream(seed, ch.STREAM_BATCH)
    noise_rng = ch.substream(seed, ch.STREAM_NOISE)
    sigma = ch.snr_db_to_sigma(plan.train_snr_db)
    params = model.parameters()
    adam_state = nn.AdamState.zeros_like(params) if plan.optimizer == "adam" else None

    report = TrainReport()
    ema = None
    checkpoints: list[Path] = []
    start = time.perf_counter()
    n_steps = plan.steps()
    for step in range(1, n_steps + 1):
        batch = sample_batch(config.intech_alphabet, config.ctc_alphabet, plan.batch_size, batch_rng)
        s_i = batch.s_intech if config.intech_enabled else None
        try:
            losses, grads = joint_loss(model, s_i, batch.s_ctc, sigma, rng=noise_rng)
            if plan.optimizer == "adam":
                nn.adam_step(params, grads, adam_state, lr=plan.lr_at(step))
            else:
                nn.sgd_step(params, grads, plan.lr_at(step))
        except nn.NonFiniteError as exc:
            raise DivergenceError(
                f"training diverged at step {step}: {exc}"
                + (f" (last checkpoint: {checkpoints[-1]})" if checkpoints else "")
            ) from exc
        ema = losses.total if ema is None else 0.99 * ema + 0.01 * losses.total
        if step % plan.log_every == 0 or step == n_steps:
            report.records.append(
                LossRecord(step, losses.total, losses.intech, list(losses.ctc), ema)
            )
        if checkpoint_dir is not None and step % plan.checkpoint_every == 0:
            ckpt = Path(checkpoint_dir) / f"checkpoint-{step:07d}.json"
            save_model(model, ckpt)
            checkpoints.append(ckpt)
            while len(checkpoints) > 2:
                checkpoints.pop(0).unlink(missing_ok=True)

    report.wall_clock_s = time.perf_counter() - start
    report.checksum = model.checksum()
    report.steps = n_steps
    for ckpt in checkpoints:
        ckpt.unlink(missing_ok=True)
    if log_path is not None:
        lines = report.log_lines(len(config.ctc_rx_grids), config.intech_enabled)
        Path(log_path).write_text("\n".join(lines) + "\n")
    return model, report


def loss_ema_trend(report: TrainReport, window: int = 100) -> list[tuple[int, float]]:
    """(step, EMA over the trailing window of raw losses) per logged record."""
    out = []
    window_losses: list[float] = []
    for r in report.records:
        window_losses.append(r.loss)
        if len(window_losses) > window:
            window_losses.pop(0)
        out.append((r.step, sum(window_losses) / len(window_losses)))
    return out


def save_model(model: Autoencoder, path: str | Path) -> None:
    """Write the versioned model document; floats keep full round-trip precision."""
    doc = model.to_document()
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path: str | Path) -> Autoencoder:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"model file {path} does not hold a document")
    return Autoencoder.from_document(doc)
