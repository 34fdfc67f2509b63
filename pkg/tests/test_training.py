"""Training loop, dataset sampling, checkpointing and model file tests."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from deepctc import channel as ch
from deepctc import estimate_bler
from deepctc.model import ConfigError, ModelConfig
from deepctc.otfg import OTFGSpec
from deepctc.training import (
    DivergenceError,
    ModelFormatError,
    TrainPlan,
    load_model,
    sample_batch,
    save_model,
    train,
)
from conftest import TINY_CONFIG, TINY_PLAN


def test_sample_batch_degenerate_alphabets():
    batch = sample_batch(1, 1, 100, ch.substream(0, ch.STREAM_BATCH))
    assert np.all(batch.s_intech == 0) and np.all(batch.s_ctc == 0)
    assert len(batch) == 100
    assert (batch[5].s_intech, batch[5].s_ctc) == (0, 0)


def test_sample_batch_seeded_determinism():
    a = sample_batch(64, 4, 1000, ch.substream(8, ch.STREAM_BATCH))
    b = sample_batch(64, 4, 1000, ch.substream(8, ch.STREAM_BATCH))
    assert np.array_equal(a.s_intech, b.s_intech) and np.array_equal(a.s_ctc, b.s_ctc)


def test_sample_batch_uniform_pair_frequencies():
    # binomial 3-sigma bound per joint pair at n = 1e6
    n = 1_000_000
    batch = sample_batch(64, 4, n, ch.substream(2, ch.STREAM_BATCH))
    joint = batch.s_intech.astype(np.int64) * 4 + batch.s_ctc
    freq = np.bincount(joint, minlength=256) / n
    p = 1.0 / 256.0
    bound = 3.0 * math.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(freq - p) <= bound)


def test_sample_batch_rejects_empty():
    with pytest.raises(ValueError):
        sample_batch(4, 2, 0, ch.substream(0, 1))


def test_tiny_noiseless_training_converges(tiny_trained):
    _, report = tiny_trained
    assert report.records[-1].loss < 0.01


def test_loss_ema_trend_decreases(tiny_trained):
    _, report = tiny_trained
    ema = {r.step: r.ema for r in report.records}
    checked = 0
    for step in ema:
        if 2 * step in ema:
            assert ema[2 * step] <= ema[step] + 0.1
            checked += 1
    assert checked > 0


def test_alpha_one_reaches_low_intech_loss(joint_alpha10):
    _, report = joint_alpha10
    assert report.records[-1].loss_intech < 0.1 * math.log(64.0)


def test_alpha_one_ctc_accuracy_is_uniform_guessing(joint_alpha10):
    # two-sided binomial z-test at 1%: the transmitter had no incentive to
    # encode the ctc message, so the ctc receiver can only guess
    model, _ = joint_alpha10
    n = 100_000
    point = estimate_bler(model, 3.0, n, seed=42)
    accuracy = 1.0 - point.bler_ctc[0]
    p = 1.0 / model.config.ctc_alphabet
    z99 = 2.5758293035489004
    assert abs(accuracy - p) <= z99 * math.sqrt(p * (1 - p) / n)


def test_training_is_deterministic():
    config = replace(TINY_CONFIG, seed=21)
    plan = replace(TINY_PLAN, total_samples=20_000)
    m1, r1 = train(config, plan)
    m2, r2 = train(config, plan)
    assert m1.checksum() == m2.checksum()
    assert r1.checksum == r2.checksum
    m3, _ = train(replace(config, seed=22), plan)
    assert m3.checksum() != m1.checksum()


def test_train_validates_plan():
    with pytest.raises(ConfigError):
        train(TINY_CONFIG, replace(TINY_PLAN, batch_size=10**9))
    with pytest.raises(ConfigError):
        train(TINY_CONFIG, replace(TINY_PLAN, optimizer="rmsprop"))
    with pytest.raises(ConfigError):
        train(TINY_CONFIG, replace(TINY_PLAN, lr=-1.0))


def test_sgd_optimizer_available():
    config = replace(TINY_CONFIG, seed=3)
    plan = TrainPlan(total_samples=20_000, batch_size=64, optimizer="sgd", lr=0.05, train_snr_db=200.0)
    model, report = train(config, plan)
    assert report.records[-1].loss < report.records[0].loss


def test_divergence_aborts_and_retains_checkpoint(tmp_path):
    config = replace(TINY_CONFIG, seed=1)
    plan = TrainPlan(
        total_samples=640, batch_size=64, optimizer="sgd", lr=1e12,
        train_snr_db=3.0, checkpoint_every=1,
    )
    with pytest.raises(DivergenceError):
        train(config, plan, checkpoint_dir=tmp_path)
    assert list(tmp_path.glob("checkpoint-*.json"))


def test_checkpoints_roll_and_clear_on_success(tmp_path):
    config = replace(TINY_CONFIG, seed=2)
    plan = replace(TINY_PLAN, total_samples=6400, checkpoint_every=10)
    train(config, plan, checkpoint_dir=tmp_path, log_path=tmp_path / "log.csv")
    assert not list(tmp_path.glob("checkpoint-*.json"))
    lines = (tmp_path / "log.csv").read_text().strip().split("\n")
    assert lines[0] == "step,loss,loss_intech,loss_ctc_1,loss_ema"
    assert len(lines) > 1


def test_save_load_round_trip_byte_identical(tiny_trained, tmp_path):
    model, _ = tiny_trained
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, p1)
    clone = load_model(p1)
    save_model(clone, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert clone.checksum() == model.checksum()


def test_load_rejects_missing_section(tiny_trained, tmp_path):
    model, _ = tiny_trained
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    del doc["networks"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="networks"):
        load_model(path)


def test_load_rejects_truncated_file(tiny_trained, tmp_path):
    model, _ = tiny_trained
    path = tmp_path / "m.json"
    save_model(model, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_load_rejects_mismatched_dims(tiny_trained, tmp_path):
    model, _ = tiny_trained
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["networks"]["tx_ctc"]["dims"][1] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="tx_ctc"):
        load_model(path)


def test_load_rejects_wrong_version(tiny_trained, tmp_path):
    model, _ = tiny_trained
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)


def test_train_plan_dict_round_trip():
    plan = TrainPlan(total_samples=5000, batch_size=50, lr=2e-3, lr_final=1e-5)
    assert TrainPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(ConfigError, match="unknown"):
        TrainPlan.from_dict({"momentum": 0.9})


def test_lr_schedule_endpoints():
    plan = TrainPlan(total_samples=1000, batch_size=10, lr=1e-2, lr_final=1e-4)
    assert plan.lr_at(1) == pytest.approx(1e-2)
    assert plan.lr_at(plan.steps()) == pytest.approx(1e-4)
    constant = TrainPlan(total_samples=1000, batch_size=10, lr=1e-2)
    assert constant.lr_at(1) == constant.lr_at(100) == 1e-2
