"""Joint in-technology + cross-technology OFDM autoencoder simulator.

Learns transmitter and receiver networks end-to-end over an AWGN channel and
measures block error rates across SNR, including heterogeneous-receiver
broadcast setups where the receivers demodulate through mismatched FFT grids.
"""

from .channel import awgn_apply, normalize_energy, sigma_to_snr_db, snr_db_to_sigma, substream
from .evaluation import (
    BlerCurve,
    BlerPoint,
    bpsk_reference_bler,
    broadcast_max_bler,
    curve_to_csv,
    estimate_bler,
    snr_at_bler,
    sweep,
)
from .model import (
    Autoencoder,
    ConfigError,
    MessagePair,
    ModelConfig,
    build,
    decode,
    encode,
    forward,
    joint_loss,
    model_gradient_check,
    one_hot,
)
from .otfg import GridSignal, OTFGSpec, flatten, grid_resample, resample_plan, technology_preset, unflatten
from .presets import PRESETS, ExperimentPreset, get_preset
from .training import (
    DivergenceError,
    ModelFormatError,
    TrainPlan,
    TrainReport,
    load_model,
    sample_batch,
    save_model,
    train,
)

__version__ = "0.1.0"
