"""Command line entry points.

Subcommands cover the whole workflow: generate a synthetic corpus, train the
completion / local / global / entangled models into a checkpoint bundle,
forecast a single record to SVG, and evaluate predictors into a report
directory.  Every command is deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_params, save_params
from .completion import CompletionModel, train_completion
from .config import ConfigError, ExperimentConfig
from .dataset import DatasetFormatError, load_dataset, save_dataset
from .forecast import (EntangledForecaster, GlobalForecaster, LocalForecaster,
                       PipelineError, forecast_entangled, forecast_locomotion,
                       train_entangled, train_global, train_local)
from .pose import LocomotionSequence, confidence_filter, kde
from .report import (evaluate, make_baseline_predictor, make_entangled_predictor,
                     make_pipeline_predictor, write_report)
from .synth import PinholeCamera, make_dataset
from .viz import render_svg, save_svg

BASELINE_SUBJECTS = ("zero-velocity", "constant-velocity", "last-observed-velocity")
SUBJECTS = ("pipeline", "entangled") + BASELINE_SUBJECTS


class CliError(RuntimeError):
    """User-facing failure: bad paths, missing checkpoints, malformed input."""


# ---------------------------------------------------------------------------
# config and bundle plumbing


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """--config file wins, then the bundle manifest, then defaults; --seed overrides."""
    cfg = None
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_file(args.config)
    elif getattr(args, "bundle", None):
        manifest = Path(args.bundle) / "manifest.json"
        if manifest.exists():
            cfg = ExperimentConfig.from_dict(json.loads(manifest.read_text())["config"])
    if cfg is None:
        cfg = ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write_manifest(bundle: Path, cfg: ExperimentConfig) -> None:
    manifest = bundle / "manifest.json"
    if manifest.exists():
        stored = json.loads(manifest.read_text())["config"]
        ours = cfg.to_dict()
        diff = [k for k in ours if ours[k] != stored.get(k) and k != "seed"]
        if diff:
            raise CliError(f"bundle {bundle} was trained with a different config "
                           f"(mismatched keys: {', '.join(sorted(diff))})")
        return
    bundle.mkdir(parents=True, exist_ok=True)
    manifest.write_text(json.dumps({"schema_version": 1, "config": cfg.to_dict()},
                                   indent=2) + "\n")


def _load_records(path: str) -> list[LocomotionSequence]:
    p = Path(path)
    if not p.exists():
        raise CliError(f"dataset not found: {p}")
    return load_dataset(p)


def _ckpt_dict(bundle: Path, name: str) -> dict[str, np.ndarray]:
    path = bundle / name
    if not path.exists():
        raise CliError(f"missing checkpoint {path}; train that stage first")
    return dict(load_params(path))


def _load_completion(bundle: Path, cfg: ExperimentConfig) -> CompletionModel:
    return CompletionModel(cfg.d_ae, params=_ckpt_dict(bundle, "completion.ckpt"))


def _load_local(bundle: Path, cfg: ExperimentConfig) -> LocalForecaster:
    return LocalForecaster(cfg.d_ae, cfg.qrnn_hidden, cfg.n_local, cfg.qrnn_kernel,
                           cfg.qrnn_pooling, cfg.context_mode,
                           params=_ckpt_dict(bundle, "local.ckpt"))


def _load_global(bundle: Path, cfg: ExperimentConfig) -> GlobalForecaster:
    return GlobalForecaster(cfg.qrnn_hidden, cfg.n_global, cfg.qrnn_kernel,
                            cfg.frame_encoder_hidden, cfg.qrnn_pooling,
                            cfg.context_mode, cfg.residual_mode, cfg.pooling_mode,
                            cfg.depth_scale, cfg.trans_scale,
                            params=_ckpt_dict(bundle, "global.ckpt"))


def _load_entangled(bundle: Path, cfg: ExperimentConfig) -> EntangledForecaster:
    return EntangledForecaster(cfg.qrnn_hidden, cfg.n_local, cfg.qrnn_kernel,
                               cfg.qrnn_pooling, cfg.context_mode,
                               params=_ckpt_dict(bundle, "entangled.ckpt"))


def _completion_if_trained(bundle: Path, cfg: ExperimentConfig,
                           use: bool) -> CompletionModel | None:
    if not use:
        return None
    return _load_completion(bundle, cfg)


# ---------------------------------------------------------------------------
# subcommand bodies


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if args.scenes < 1:
        raise CliError(f"--scenes must be >= 1, got {args.scenes}")
    camera = PinholeCamera(cx=cfg.frame_width / 2.0, cy=cfg.frame_height / 2.0,
                           width=cfg.frame_width, height=cfg.frame_height)
    noisy, clean = make_dataset(args.scenes, cfg.t_p, cfg.t_f, cfg.noise(), cfg.seed,
                                cfg.camera_profile, camera, cfg.fps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out / "noisy.jsonl", noisy)
    save_dataset(out / "clean.jsonl", clean)
    print(f"wrote {len(noisy)} records to {out / 'noisy.jsonl'} and {out / 'clean.jsonl'}")
    return 0


def cmd_train_completion(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    poses = confidence_filter([p for r in records for p in r.poses()], cfg.alpha_c)
    if not poses:
        raise CliError("no fully confident poses in the dataset; completion cannot train")
    model = train_completion(poses, d_ae=cfg.d_ae, dropout=cfg.completion_dropout,
                             lr=cfg.lr_completion, steps=cfg.completion_steps,
                             batch=cfg.completion_batch, seed=cfg.seed,
                             beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    bundle = Path(args.bundle)
    _write_manifest(bundle, cfg)
    save_params(bundle / "completion.ckpt", model.named_arrays())
    print(f"trained completion on {len(poses)} poses -> {bundle / 'completion.ckpt'}")
    return 0


def cmd_train_local(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    bundle = Path(args.bundle)
    completion = _completion_if_trained(bundle, cfg, not args.no_completion)
    model = train_local(records, completion, alpha_c=cfg.alpha_c, d_ae=cfg.d_ae,
                        hidden=cfg.qrnn_hidden, n_layers=cfg.n_local,
                        kernel=cfg.qrnn_kernel, pooling=cfg.qrnn_pooling,
                        context_mode=cfg.context_mode, lr=cfg.lr_local,
                        epochs=cfg.seq_epochs, batch=cfg.seq_batch,
                        codec_steps=cfg.codec_steps, seed=cfg.seed,
                        beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    _write_manifest(bundle, cfg)
    save_params(bundle / "local.ckpt", model.named_arrays())
    print(f"trained local forecaster on {len(records)} records -> {bundle / 'local.ckpt'}")
    return 0


def cmd_train_global(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    bundle = Path(args.bundle)
    completion = _completion_if_trained(bundle, cfg, not args.no_completion)
    model = train_global(records, completion, alpha_c=cfg.alpha_c,
                         hidden=cfg.qrnn_hidden, n_layers=cfg.n_global,
                         kernel=cfg.qrnn_kernel, fe_hidden=cfg.frame_encoder_hidden,
                         pooling=cfg.qrnn_pooling, context_mode=cfg.context_mode,
                         residual_mode=cfg.residual_mode, pooling_mode=cfg.pooling_mode,
                         depth_scale=cfg.depth_scale, trans_scale=cfg.trans_scale,
                         lr=cfg.lr_global, epochs=cfg.seq_epochs, batch=cfg.seq_batch,
                         seed=cfg.seed, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
                         eps=cfg.adam_eps)
    _write_manifest(bundle, cfg)
    save_params(bundle / "global.ckpt", model.named_arrays())
    print(f"trained global forecaster on {len(records)} records -> {bundle / 'global.ckpt'}")
    return 0


def cmd_train_entangled(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    bundle = Path(args.bundle)
    completion = _completion_if_trained(bundle, cfg, args.use_completion)
    model = train_entangled(records, completion, alpha_c=cfg.alpha_c,
                            hidden=cfg.qrnn_hidden, n_layers=cfg.n_local,
                            kernel=cfg.qrnn_kernel, pooling=cfg.qrnn_pooling,
                            context_mode=cfg.context_mode, lr=cfg.lr_entangled,
                            epochs=cfg.seq_epochs, batch=cfg.seq_batch, seed=cfg.seed,
                            beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    _write_manifest(bundle, cfg)
    save_params(bundle / "entangled.ckpt", model.named_arrays())
    print(f"trained entangled forecaster on {len(records)} records -> {bundle / 'entangled.ckpt'}")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    if not 0 <= args.index < len(records):
        raise CliError(f"--index {args.index} out of range for {len(records)} records")
    rec = records[args.index]
    bundle = Path(args.bundle)
    if args.subject == "entangled":
        model = _load_entangled(bundle, cfg)
        completion = _completion_if_trained(bundle, cfg, args.use_completion)
        pred = forecast_entangled(rec, model, completion, alpha_c=cfg.alpha_c)
    else:
        completion = _completion_if_trained(bundle, cfg, not args.no_completion)
        pred = forecast_locomotion(rec, completion, _load_local(bundle, cfg),
                                   _load_global(bundle, cfg), alpha_c=cfg.alpha_c)
    save_svg(render_svg(rec, pred, show_truth=args.show_truth), args.out)
    if rec.t_f > 0:
        err = kde(pred, rec.future_coords(), cfg.kde_norm)
        print(f"{rec.pedestrian_id or args.index}: KDE {err:.4f} px over {rec.t_f} frames")
    print(f"wrote {args.out}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    records = _load_records(args.data)
    if not 0 <= args.index < len(records):
        raise CliError(f"--index {args.index} out of range for {len(records)} records")
    save_svg(render_svg(records[args.index], show_truth=args.show_truth), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = _load_records(args.data)
    truth = _load_records(args.truth) if args.truth else None
    if args.subject in BASELINE_SUBJECTS:
        predictor = make_baseline_predictor(args.subject, args.stream)
    elif args.subject == "entangled":
        if not args.bundle:
            raise CliError("--bundle is required for subject 'entangled'")
        bundle = Path(args.bundle)
        completion = _completion_if_trained(bundle, cfg, args.use_completion)
        predictor = make_entangled_predictor(_load_entangled(bundle, cfg),
                                             completion, cfg.alpha_c)
        if args.stream != "full":
            raise CliError("subject 'entangled' only supports --stream full")
    else:
        if not args.bundle:
            raise CliError("--bundle is required for subject 'pipeline'")
        bundle = Path(args.bundle)
        completion = _completion_if_trained(bundle, cfg, not args.no_completion)
        predictor = make_pipeline_predictor(completion, _load_local(bundle, cfg),
                                            _load_global(bundle, cfg),
                                            cfg.alpha_c, args.stream)
    report = evaluate(records, predictor, cfg, args.subject, truth, args.stream)
    paths = write_report(report, args.out)
    agg = report["aggregate"]
    print(f"{args.subject}: KDE {agg['kde']:.4f}, mean KDE {agg['mean_kde']:.4f} "
          f"over {report['records_evaluated']} records")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, bundle: bool = True) -> None:
    p.add_argument("--config", help="JSON config file (defaults otherwise)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    if bundle:
        p.add_argument("--bundle", required=True, help="checkpoint bundle directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locoforecast",
        description="Synthetic egocentric pedestrian locomotion forecasting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a (noisy, clean) dataset pair")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenes", type=int, default=100)
    _add_common(p, bundle=False)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train-completion", help="fit the pose completion autoencoder")
    p.add_argument("--data", required=True, help="noisy JSONL dataset")
    _add_common(p)
    p.set_defaults(fn=cmd_train_completion)

    p = sub.add_parser("train-local", help="fit the anchor-relative pose forecaster")
    p.add_argument("--data", required=True)
    p.add_argument("--no-completion", action="store_true",
                   help="train on raw streams (completion ablation)")
    _add_common(p)
    p.set_defaults(fn=cmd_train_local)

    p = sub.add_parser("train-global", help="fit the anchor track forecaster")
    p.add_argument("--data", required=True)
    p.add_argument("--no-completion", action="store_true")
    _add_common(p)
    p.set_defaults(fn=cmd_train_global)

    p = sub.add_parser("train-entangled", help="fit the whole-pose ablation forecaster")
    p.add_argument("--data", required=True)
    p.add_argument("--use-completion", action="store_true",
                   help="complete poses before the entangled model")
    _add_common(p)
    p.set_defaults(fn=cmd_train_entangled)

    p = sub.add_parser("forecast", help="forecast one record and render an SVG")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--subject", choices=("pipeline", "entangled"), default="pipeline")
    p.add_argument("--show-truth", action="store_true")
    p.add_argument("--no-completion", action="store_true")
    p.add_argument("--use-completion", action="store_true",
                   help="with --subject entangled, complete poses first")
    _add_common(p)
    p.set_defaults(fn=cmd_forecast)

    p = sub.add_parser("plot", help="render a record (history, optional truth) to SVG")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--show-truth", action="store_true")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("evaluate", help="score a predictor and write a report directory")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", help="clean JSONL to score against (defaults to --data)")
    p.add_argument("--subject", choices=SUBJECTS, default="pipeline")
    p.add_argument("--stream", choices=("full", "global", "local"), default="full")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--no-completion", action="store_true")
    p.add_argument("--use-completion", action="store_true")
    p.add_argument("--config", help="JSON config file (defaults otherwise)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bundle", help="checkpoint bundle directory (model subjects)")
    p.set_defaults(fn=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError, DatasetFormatError, CheckpointError,
            PipelineError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
