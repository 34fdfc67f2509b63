"""Named experiment presets bundling a model config with a training plan.

joint-alpha is the 64-message in-technology + 4-message CTC system on a 4x4
transmit grid with a factor-4 CTC receiver; the broadcast presets disable the
in-technology input and serve two CTC receivers with unit loss weights.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ModelConfig
from .otfg import OTFGSpec
from .training import TrainPlan

GRID_4X4 = OTFGSpec(4, 4)
GRID_1X16 = OTFGSpec(1, 16)  # 16 subcarriers x 1 symbol: a 4x larger FFT


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    config: ModelConfig
    plan: TrainPlan


def _broadcast(name: str, grids: tuple[OTFGSpec, ...]) -> ExperimentPreset:
    return ExperimentPreset(
        name,
        ModelConfig(
            intech_alphabet=1,
            ctc_alphabet=4,
            tx_grid=GRID_4X4,
            ctc_rx_grids=grids,
            ctc_weights=(1.0,) * len(grids),
            intech_enabled=False,
        ),
        TrainPlan(lr=1e-3, lr_final=1e-5),
    )


PRESETS = {
    "joint-alpha": ExperimentPreset(
        "joint-alpha",
        ModelConfig(
            intech_alphabet=64,
            ctc_alphabet=4,
            tx_grid=GRID_4X4,
            ctc_rx_grids=(GRID_1X16,),
            alpha=0.9,
        ),
        TrainPlan(lr=3e-3, lr_final=1e-5),
    ),
    "broadcast-hetero": _broadcast("broadcast-hetero", (GRID_4X4, GRID_1X16)),
    "broadcast-homo-a": _broadcast("broadcast-homo-a", (GRID_4X4, GRID_4X4)),
    "broadcast-homo-b": _broadcast("broadcast-homo-b", (GRID_1X16, GRID_1X16)),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
