"""Shared fixtures: the expensive paper-scale trainings run once per session."""

from dataclasses import replace

import pytest

from deepctc import PRESETS, TrainPlan, train
from deepctc.model import ModelConfig
from deepctc.otfg import OTFGSpec

ACCEPT_SEED = 7

TINY_CONFIG = ModelConfig(
    intech_alphabet=4,
    ctc_alphabet=2,
    tx_grid=OTFGSpec(2, 2),
    ctc_rx_grids=(OTFGSpec(1, 4),),
    alpha=0.5,
    hidden_width=16,
    seed=5,
)

TINY_PLAN = TrainPlan(
    total_samples=120_000,
    batch_size=64,
    lr=3e-3,
    lr_final=1e-4,
    train_snr_db=200.0,  # effectively noiseless
)


@pytest.fixture(scope="session")
def tiny_trained():
    """Small separable system trained noiseless; decodes all 8 pairs exactly."""
    return train(TINY_CONFIG, TINY_PLAN)


@pytest.fixture(scope="session")
def joint_alpha09():
    preset = PRESETS["joint-alpha"]
    config = replace(preset.config, seed=ACCEPT_SEED)
    return train(config, preset.plan)


@pytest.fixture(scope="session")
def joint_alpha10():
    preset = PRESETS["joint-alpha"]
    config = replace(preset.config, alpha=1.0, seed=ACCEPT_SEED)
    return train(config, preset.plan)


@pytest.fixture(scope="session")
def broadcast_trained():
    out = {}
    for name in ("broadcast-hetero", "broadcast-homo-a", "broadcast-homo-b"):
        preset = PRESETS[name]
        config = replace(preset.config, seed=ACCEPT_SEED)
        out[name] = train(config, preset.plan)
    return out
