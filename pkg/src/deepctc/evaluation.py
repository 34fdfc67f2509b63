"""Monte-Carlo block-error-rate estimation over AWGN, SNR sweeps, the
broadcast max-BLER metric and an analytic uncoded-BPSK reference curve.

Every sweep point owns a generator substream derived from (seed, point
index), so points can run in parallel and still give order-independent,
reproducible results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .model import Autoencoder, _receiver_probs, _encode_batch
from .training import sample_batch

CHUNK = 20_000  # samples per vectorized forward pass

RULE_OF_THREE = 3.0  # one-sided 95% upper bound on p when 0 errors observed


@dataclass
class BlerPoint:
    """BLER estimates of every receiver at one SNR; bler == errors/n exactly."""

    snr_db: float
    n_samples: int
    errors_intech: int | None
    bler_intech: float | None
    errors_ctc: list[int]
    bler_ctc: list[float]

    def max_bler_ctc(self) -> float:
        return max(self.bler_ctc)

    def zero_error_upper_bound(self) -> float:
        """Upper 95% bound to quote instead of a bare 0.0."""
        return RULE_OF_THREE / self.n_samples


@dataclass
class BlerCurve:
    """Sweep result: config echo plus points sorted by strictly increasing SNR."""

    config: dict
    points: list[BlerPoint] = field(default_factory=list)

    def __post_init__(self):
        snrs = [p.snr_db for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("curve points must be strictly increasing in snr_db")


def estimate_bler(model: Autoencoder, snr_db: float, n_samples: int, seed: int) -> BlerPoint:
    """Count decode mismatches per receiver over uniform random message pairs."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = model.config
    sigma = ch.snr_db_to_sigma(snr_db)
    rng = ch.substream(seed, ch.STREAM_EVAL)
    err_intech = 0
    err_ctc = [0] * len(model.rx_ctc)
    done = 0
    while done < n_samples:
        n = min(CHUNK, n_samples - done)
        batch = sample_batch(cfg.intech_alphabet, cfg.ctc_alphabet, n, rng)
        s_i = batch.s_intech if cfg.intech_enabled else None
        x, _ = _encode_batch(model, s_i, batch.s_ctc)
        y = ch.awgn_apply(x, sigma, rng)
        p_intech, p_ctc = _receiver_probs(model, y)
        if p_intech is not None:
            err_intech += int((p_intech.argmax(axis=1) != batch.s_intech).sum())
        for i, p in enumerate(p_ctc):
            err_ctc[i] += int((p.argmax(axis=1) != batch.s_ctc).sum())
        done += n
    return BlerPoint(
        snr_db=snr_db,
        n_samples=n_samples,
        errors_intech=err_intech if cfg.intech_enabled else None,
        bler_intech=err_intech / n_samples if cfg.intech_enabled else None,
        errors_ctc=err_ctc,
        bler_ctc=[e / n_samples for e in err_ctc],
    )


def snr_grid(snr_start: float, snr_stop: float, snr_step: float) -> list[float]:
    if snr_step <= 0:
        raise ValueError("snr_step must be positive")
    if snr_start > snr_stop:
        raise ValueError("snr_start must not exceed snr_stop")
    n = int(math.floor((snr_stop - snr_start) / snr_step + 1e-9)) + 1
    return [snr_start + i * snr_step for i in range(n)]


def _sweep_point(args) -> BlerPoint:
    model, snr_db, n_samples, seed, index = args
    return estimate_bler(model, snr_db, n_samples, _point_seed(seed, index))


def _point_seed(seed: int, index: int) -> int:
    # derived per-point seed; estimate_bler spawns its own substream from it
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(ch.STREAM_EVAL, index)).generate_state(1)[0])


def sweep(
    model: Autoencoder,
    snr_start: float,
    snr_stop: float,
    snr_step: float,
    n_samples: int,
    seed: int,
    jobs: int = 1,
) -> BlerCurve:
    """One independent BLER point per grid value; points may run in parallel."""
    grid = snr_grid(snr_start, snr_stop, snr_step)
    tasks = [(model, s, n_samples, seed, i) for i, s in enumerate(grid)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_sweep_point, tasks))
    else:
        points = [_sweep_point(t) for t in tasks]
    return BlerCurve(model.config.to_dict(), points)


def broadcast_max_bler(curve: BlerCurve) -> list[tuple[float, float]]:
    """Pointwise maximum over the per-receiver BLERs."""
    if not curve.points or not curve.points[0].bler_ctc:
        raise ValueError("curve has no CTC receivers")
    return [(p.snr_db, p.max_bler_ctc()) for p in curve.points]


def q_function(x: float) -> float:
    """Gaussian tail probability via the complementary error function."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def bpsk_reference_bler(snr_db: float, k_bits: int) -> float:
    """Block error of k independent uncoded BPSK bits, one per channel use.

    BLER = 1 - (1 - Q(sqrt(2 SNR)))^k with SNR linear per use.
    """
    if k_bits < 1:
        raise ValueError("k_bits must be >= 1")
    snr = 10.0 ** (snr_db / 10.0)
    return 1.0 - (1.0 - q_function(math.sqrt(2.0 * snr))) ** k_bits


def wilson_interval(errors: int, n: int, z: float = 2.5758293035489004) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default z: 99% two-sided)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def snr_at_bler(points: list[tuple[float, float]], target: float, floor_n: int | None = None) -> float | None:
    """SNR where a descending BLER curve crosses ``target``.

    Interpolates linearly in log10(BLER) between the last point above the
    target and the first at/below it. Zero estimates are floored at
    1/(2 floor_n) so the interpolation stays finite. Returns None when the
    curve never reaches the target.
    """
    if not points:
        return None
    floor = 1.0 / (2.0 * floor_n) if floor_n else 1e-12
    pts = [(s, max(b, floor)) for s, b in points]
    if pts[0][1] <= target:
        return pts[0][0]
    for (s1, b1), (s2, b2) in zip(pts, pts[1:]):
        if b1 > target >= b2:
            if b2 == b1:
                return s2
            frac = (math.log10(b1) - math.log10(target)) / (math.log10(b1) - math.log10(b2))
            return s1 + frac * (s2 - s1)
    return None


def curve_to_csv(curve: BlerCurve) -> str:
    """CSV per the external contract; absent receivers leave empty fields."""
    n_ctc = len(curve.points[0].bler_ctc) if curve.points else 0
    header = ["snr_db", "n_samples", "bler_intech"]
    header += [f"bler_ctc_{i + 1}" for i in range(n_ctc)]
    header += ["max_bler_ctc"]
    lines = [",".join(header)]
    for p in curve.points:
        row = [repr(p.snr_db), str(p.n_samples)]
        row.append("" if p.bler_intech is None else repr(p.bler_intech))
        row.extend(repr(b) for b in p.bler_ctc)
        row.append(repr(p.max_bler_ctc()) if p.bler_ctc else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
