"""Command-line entry point: train, eval, sweep-alpha, gradcheck, inspect.

Configuration precedence is flags > config file > preset. Exit codes:
0 success, 2 configuration error, 3 training divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .evaluation import curve_to_csv, snr_grid, sweep
from .model import ConfigError, ModelConfig, model_gradient_check
from .otfg import GridError, OTFGSpec
from .presets import PRESETS, get_preset
from .training import DivergenceError, ModelFormatError, TrainPlan, load_model, save_model, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

SEED_ENV_VAR = "DEEPCTC_SEED"


def _resolve_seed(args, file_seed: int | None = None) -> int:
    """--seed wins, then DEEPCTC_SEED, then a config-file seed, then entropy."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    if file_seed is not None:
        return file_seed
    seed = int(np.random.SeedSequence().entropy) % 2**64
    print(f"seed not given; derived from entropy: {seed}")
    return seed


def _parse_grid_list(text: str) -> tuple[OTFGSpec, ...]:
    return tuple(OTFGSpec.from_string(part) for part in text.split(",") if part.strip())


def _read_config_file(path: str) -> tuple[dict, dict, int | None]:
    """Parse the flat-sectioned key/value config document ([model], [train])."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    known = {"model", "train"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config section {sorted(unknown)[0]!r}")
    model_raw = dict(parser["model"]) if parser.has_section("model") else {}
    train_raw = dict(parser["train"]) if parser.has_section("train") else {}
    file_seed = None
    if "seed" in model_raw:
        file_seed = int(model_raw.pop("seed"))
    return model_raw, train_raw, file_seed


_MODEL_FIELDS = {
    "intech_alphabet": int,
    "ctc_alphabet": int,
    "tx_grid": OTFGSpec.from_string,
    "ctc_rx_grids": _parse_grid_list,
    "alpha": float,
    "ctc_weights": lambda s: tuple(float(w) for w in s.split(",") if w.strip()),
    "hidden_width": lambda s: int(s) if s.strip() else None,
    "hidden_depth": int,
    "intech_enabled": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def _apply_model_overrides(config: ModelConfig | None, raw: dict) -> ModelConfig:
    unknown = set(raw) - set(_MODEL_FIELDS)
    if unknown:
        raise ConfigError(f"unknown model config field {sorted(unknown)[0]!r}")
    fields = {}
    for key, value in raw.items():
        try:
            fields[key] = _MODEL_FIELDS[key](value)
        except (ValueError, GridError) as exc:
            raise ConfigError(f"bad value for model field {key!r}: {exc}") from None
    if config is None:
        try:
            return ModelConfig(**fields)
        except TypeError:
            missing = {"intech_alphabet", "ctc_alphabet", "tx_grid", "ctc_rx_grids"} - set(fields)
            raise ConfigError(f"model config is missing field {sorted(missing)[0]!r}") from None
    return replace(config, **fields)


def _build_config_and_plan(args) -> tuple[ModelConfig, TrainPlan]:
    """Merge preset, config file and command-line flags into one experiment."""
    config = None
    plan = None
    if args.preset:
        preset = get_preset(args.preset)
        config, plan = preset.config, preset.plan
    file_seed = None
    if args.config:
        model_raw, train_raw, file_seed = _read_config_file(args.config)
        config = _apply_model_overrides(config, model_raw)
        base = plan.to_dict() if plan else TrainPlan().to_dict()
        base.update(train_raw)
        plan = TrainPlan.from_dict(base)
    if config is None:
        raise ConfigError("either --preset or --config is required")
    if plan is None:
        plan = TrainPlan()

    flag_model = {}
    if args.alpha is not None:
        flag_model["alpha"] = args.alpha
    if args.hidden_width is not None:
        flag_model["hidden_width"] = args.hidden_width
    if args.hidden_depth is not None:
        flag_model["hidden_depth"] = args.hidden_depth
    if flag_model:
        config = replace(config, **flag_model)
    flag_plan = {}
    for flag, field in (
        ("samples", "total_samples"),
        ("batch_size", "batch_size"),
        ("optimizer", "optimizer"),
        ("lr", "lr"),
        ("lr_final", "lr_final"),
        ("train_snr_db", "train_snr_db"),
        ("checkpoint_every", "checkpoint_every"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            flag_plan[field] = value
    if flag_plan:
        plan = replace(plan, **flag_plan)

    config = replace(config, seed=_resolve_seed(args, file_seed))
    config.validate()
    plan.validate()
    return config, plan


def cmd_train(args) -> int:
    config, plan = _build_config_and_plan(args)
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".log.csv")
    ckpt_dir = Path(args.checkpoint_dir) if args.checkpoint_dir else out.parent
    # fail on an unwritable destination before spending the training budget
    out.parent.mkdir(parents=True, exist_ok=True)
    probe = out.parent / f".{out.name}.writetest"
    probe.write_text("")
    probe.unlink()
    model, report = train(config, plan, checkpoint_dir=ckpt_dir, log_path=log_path)
    save_model(model, out)
    last = report.records[-1]
    loss_bits = f"loss={last.loss:.6f}"
    if last.loss_intech is not None:
        loss_bits += f" intech={last.loss_intech:.6f}"
    loss_bits += " ctc=" + ",".join(f"{v:.6f}" for v in last.loss_ctc)
    print(f"trained {report.steps} steps in {report.wall_clock_s:.1f}s; final {loss_bits}")
    print(f"model written to {out} (checksum {report.checksum[:16]}...)")
    print(f"training log written to {log_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    seed = _resolve_seed(args)
    curve = sweep(model, args.snr_start, args.snr_stop, args.snr_step, args.eval_samples, seed, jobs=args.jobs)
    text = curve_to_csv(curve)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(curve.points)} SNR points to {args.out}")
    else:
        sys.stdout.write(text)
    for p in curve.points:
        if any(e == 0 for e in p.errors_ctc) or p.errors_intech == 0:
            bound = p.zero_error_upper_bound()
            print(f"note: zero errors observed at {p.snr_db:g} dB; one-sided 95% upper bound {bound:g}")
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    if not alphas:
        raise ConfigError("alpha list is empty")
    deduped = []
    for a in alphas:
        if a in deduped:
            print(f"warning: duplicate alpha {a:g} ignored")
        else:
            deduped.append(a)
    for a in deduped:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {a}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(args)
    args.seed = seed  # freeze so every alpha shares it
    summary_rows = []
    header = None
    for a in deduped:
        args.alpha = a
        config, plan = _build_config_and_plan(args)
        tag = f"{a:g}"
        model, report = train(config, plan, checkpoint_dir=out_dir, log_path=out_dir / f"train-alpha-{tag}.log.csv")
        save_model(model, out_dir / f"model-alpha-{tag}.json")
        curve = sweep(model, args.snr_start, args.snr_stop, args.snr_step, args.eval_samples, seed, jobs=args.jobs)
        csv_text = curve_to_csv(curve)
        (out_dir / f"bler-alpha-{tag}.csv").write_text(csv_text)
        lines = csv_text.strip().split("\n")
        header = lines[0]
        summary_rows.extend(f"{tag},{line}" for line in lines[1:])
        print(f"alpha={tag}: trained {report.steps} steps, swept {len(curve.points)} points")
    (out_dir / "summary.csv").write_text("alpha," + header + "\n" + "\n".join(summary_rows) + "\n")
    print(f"summary written to {out_dir / 'summary.csv'}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .model import GRADCHECK_CONFIG

    config = replace(
        GRADCHECK_CONFIG,
        intech_alphabet=args.intech_alphabet,
        ctc_alphabet=args.ctc_alphabet,
        tx_grid=OTFGSpec.from_string(args.tx_grid),
        ctc_rx_grids=_parse_grid_list(args.ctc_grids),
        hidden_width=args.hidden_width or 8,
        hidden_depth=args.hidden_depth or 1,
    )
    config.validate()
    seed = _resolve_seed(args)
    report = model_gradient_check(config, batch_size=args.batch_size or 8, seed=seed, step=args.step)
    print(report.summary())
    if report.passed(args.tolerance):
        print(f"PASS: max relative error {report.max_rel_error:.3e} <= {args.tolerance:g}")
        return EXIT_OK
    print(f"FAIL: max relative error {report.max_rel_error:.3e} > {args.tolerance:g}")
    return 1


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    cfg = model.config
    print(f"model config: {cfg.to_dict()}")
    for name, stack in model.stacks():
        dims = [stack.layers[0].n_in] + [l.n_out for l in stack.layers]
        acts = ",".join(l.activation for l in stack.layers)
        print(f"  {name}: dims {dims} activations [{acts}]")
    print(f"parameters: {model.parameter_count()}")
    print(f"checksum: {model.checksum()}")
    return EXIT_OK


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"experiment seed (default: ${SEED_ENV_VAR} or entropy)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="named experiment preset")
    p.add_argument("--config", help="INI config file with [model] and [train] sections")
    p.add_argument("--alpha", type=float, default=None, help="in-technology loss weight in [0, 1]")
    p.add_argument("--hidden-width", type=int, default=None, help="hidden layer width (default: per-network rule)")
    p.add_argument("--hidden-depth", type=int, default=None, help="number of hidden layers per network")
    p.add_argument("--samples", type=int, default=None, help="training set size")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--lr", type=float, default=None, help="learning rate")
    p.add_argument("--lr-final", type=float, default=None, help="final learning rate for linear decay")
    p.add_argument("--train-snr-db", type=float, default=None, help="fixed channel SNR during training")
    p.add_argument("--checkpoint-every", type=int, default=None, help="steps between rolling checkpoints")
    _add_seed(p)


def _add_sweep_flags(p: argparse.ArgumentParser, samples_flag: str = "--samples") -> None:
    p.add_argument("--snr-start", type=float, default=-2.0)
    p.add_argument("--snr-stop", type=float, default=8.0)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument(
        samples_flag, dest="eval_samples", type=int, default=100_000,
        help="Monte-Carlo samples per SNR point",
    )
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers for sweep points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepctc",
        description="Train and evaluate joint in-technology + cross-technology OFDM autoencoders over AWGN.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write the model file + training log")
    _add_train_flags(p)
    p.add_argument("-o", "--out", required=True, help="output model file (JSON)")
    p.add_argument("--log", default=None, help="training log path (default: <out>.log.csv)")
    p.add_argument("--checkpoint-dir", default=None, help="rolling checkpoint directory (default: out dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Monte-Carlo BLER sweep of a trained model, written as CSV")
    p.add_argument("model", help="model file from train")
    _add_sweep_flags(p)
    p.add_argument("-o", "--out", default=None, help="output CSV (default: stdout)")
    _add_seed(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-alpha", help="train + evaluate one model per alpha with a shared seed")
    _add_train_flags(p)
    _add_sweep_flags(p, samples_flag="--eval-samples")
    p.add_argument("--alphas", required=True, help="comma-separated alpha values, e.g. 1.0,0.9")
    p.add_argument("--out-dir", required=True, help="directory for per-alpha models, CSVs and the summary")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference gradient check")
    p.add_argument("--intech-alphabet", type=int, default=4)
    p.add_argument("--ctc-alphabet", type=int, default=2)
    p.add_argument("--tx-grid", default="2x2")
    p.add_argument("--ctc-grids", default="1x4", help="comma-separated receiver grids")
    p.add_argument("--hidden-width", type=int, default=None)
    p.add_argument("--hidden-depth", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--step", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--tolerance", type=float, default=1e-4, help="max relative error to pass")
    _add_seed(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="print a model file's configuration and dimensions")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridError, KeyError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
