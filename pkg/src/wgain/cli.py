"""Command line front end: prepare / train / eval / inpaint / baseline / serve.

Settings resolve in three layers: built-in defaults, then a flat YAML config
file (--config), then explicit CLI flags. Every run that writes outputs also
writes a manifest with the fully resolved settings and content hashes, enough
to reproduce it. Exit codes: 0 success, 1 invalid input or usage, 2 runtime
fault.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .checkpoints import checkpoint_hash, load_checkpoint, save_checkpoint
from .corpus import (
    Corpus,
    CorpusConfig,
    decode_image_file,
    load_corpus,
    make_synthetic_corpus,
    normalize_image,
    preprocess_image,
)
from .errors import DivergenceError, ValidationError, WgainError
from .evaluation import (
    damaged_view,
    render_grid,
    run_scenarios,
    scenario_masks,
    write_table,
)
from .masks import (
    Mask,
    ScenarioKind,
    ScenarioSpec,
    mask_from_png_bytes,
    mask_from_rle,
    mask_to_png_bytes,
    sample_eval_mask,
    standard_eval_scenarios,
)
from .baseline import biharmonic_inpaint
from .metrics import evaluate_pair
from .model import GeneratorConfig, CriticConfig, inpaint_image, scaled_config
from .seeding import named_stream
from .training import TrainConfig, train

log = logging.getLogger(__name__)

TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
MODEL_KEYS = {"input_side", "encoder_widths", "decoder_widths", "critic_widths", "width_scale"}
DATA_KEYS = {"data_dir", "target_side", "split_train", "split_eval", "shuffle_seed"}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must be a flat key-value mapping")
    unknown = set(data) - TRAIN_KEYS - MODEL_KEYS - DATA_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return data


def _resolve(file_cfg: dict, args: argparse.Namespace, key: str, default=None):
    """Priority: CLI flag > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def resolve_train_config(file_cfg: dict, args: argparse.Namespace) -> TrainConfig:
    kwargs = {}
    for f in dataclasses.fields(TrainConfig):
        value = _resolve(file_cfg, args, f.name)
        if value is not None:
            kwargs[f.name] = value
    return TrainConfig(**kwargs)


def resolve_model_configs(
    file_cfg: dict, args: argparse.Namespace
) -> tuple[GeneratorConfig, CriticConfig]:
    side = int(_resolve(file_cfg, args, "input_side", 128))
    scale = _resolve(file_cfg, args, "width_scale")
    if scale is not None:
        return scaled_config(side, int(scale))
    gen_kwargs: dict = {"input_side": side}
    enc = _resolve(file_cfg, args, "encoder_widths")
    dec = _resolve(file_cfg, args, "decoder_widths")
    if enc is not None:
        gen_kwargs["encoder_widths"] = tuple(int(v) for v in enc)
    if dec is not None:
        gen_kwargs["decoder_widths"] = tuple(int(v) for v in dec)
    crit = _resolve(file_cfg, args, "critic_widths")
    critic_cfg = (
        CriticConfig(widths=tuple(int(v) for v in crit)) if crit is not None else CriticConfig()
    )
    return GeneratorConfig(**gen_kwargs), critic_cfg


def resolve_corpus_config(file_cfg: dict, args: argparse.Namespace) -> CorpusConfig:
    split_train = float(_resolve(file_cfg, args, "split_train", 0.8))
    split_eval = float(_resolve(file_cfg, args, "split_eval", 0.2))
    return CorpusConfig(
        source_dir=_resolve(file_cfg, args, "data_dir"),
        target_side=int(_resolve(file_cfg, args, "target_side", 128)),
        split=(split_train, split_eval),
        shuffle_seed=int(_resolve(file_cfg, args, "shuffle_seed", 0)),
    )


def write_manifest(out_dir: Path, command: str, resolved: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "wgain",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "time": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "resolved": resolved,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def _jsonable_config(cfg) -> dict:
    return dataclasses.asdict(cfg)


# --- corpus loading helpers -------------------------------------------------


def _load_packed(path: Path, target_side: int) -> tuple[Corpus, Corpus]:
    with np.load(path) as data:
        train = np.asarray(data["train"], dtype=np.float32)
        eval_ = np.asarray(data["eval"], dtype=np.float32)
    side = train.shape[1] if len(train) else target_side
    return (
        Corpus(list(train), side, name="packed-train"),
        Corpus(list(eval_), side, name="packed-eval"),
    )


def _corpora_for(args: argparse.Namespace, file_cfg: dict, seed: int) -> tuple[Corpus, Corpus]:
    if getattr(args, "synthetic", None):
        side = int(_resolve(file_cfg, args, "input_side", 32))
        n = int(args.synthetic)
        corpus = make_synthetic_corpus(n, side, named_stream(seed, "synthetic-corpus"))
        return corpus, corpus
    data = getattr(args, "data", None)
    if data is not None and Path(data).suffix == ".npz":
        target = int(_resolve(file_cfg, args, "target_side", 128))
        return _load_packed(Path(data), target)
    cfg = resolve_corpus_config(file_cfg, args)
    if data is not None:
        cfg = dataclasses.replace(cfg, source_dir=data)
    return load_corpus(cfg)


def _read_mask_file(path: Path) -> Mask:
    data = path.read_bytes()
    if path.suffix == ".rle":
        return mask_from_rle(data.decode("ascii"))
    return mask_from_png_bytes(data)


def _mask_from_args(args: argparse.Namespace, h: int, w: int, seed: int) -> Mask:
    if args.mask is not None:
        return _read_mask_file(Path(args.mask))
    if args.scenario is None:
        raise ValidationError("either --mask or --scenario is required")
    kind = ScenarioKind(args.scenario.replace("-", "_"))
    params: dict = {}
    if kind is ScenarioKind.NOISE:
        params["p"] = args.p if args.p is not None else 0.5
    elif kind is ScenarioKind.CENTER_SQUARE:
        params["side"] = args.side if args.side is not None else min(h, w) // 2
    else:
        params["count"] = args.count if args.count is not None else 5
        params["side"] = args.side if args.side is not None else 31
    spec = ScenarioSpec(kind, "eval", params)
    return sample_eval_mask(spec, h, w, named_stream(seed, "cli-mask"))


def _save_png(image: np.ndarray, path: Path) -> None:
    from PIL import Image

    arr = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


# --- subcommand implementations ---------------------------------------------


def cmd_prepare(args: argparse.Namespace, file_cfg: dict) -> int:
    cfg = resolve_corpus_config(file_cfg, args)
    train_c, eval_c = load_corpus(cfg)
    out = Path(args.out or "prepared")
    out.mkdir(parents=True, exist_ok=True)
    packed = out / "corpus.npz"
    np.savez_compressed(packed, train=train_c.load_all(), eval=eval_c.load_all())
    write_manifest(out, "prepare", {
        "corpus": _jsonable_config(cfg),
        "n_train": len(train_c),
        "n_eval": len(eval_c),
        "packed": str(packed),
    })
    print(f"packed {len(train_c)} train / {len(eval_c)} eval images into {packed}")
    return 0


def cmd_train(args: argparse.Namespace, file_cfg: dict) -> int:
    tcfg = resolve_train_config(file_cfg, args)
    gen_cfg, critic_cfg = resolve_model_configs(file_cfg, args)
    train_c, _ = _corpora_for(args, file_cfg, tcfg.seed)
    if train_c.target_side != gen_cfg.input_side:
        raise ValidationError(
            f"corpus side {train_c.target_side} does not match model input_side "
            f"{gen_cfg.input_side}"
        )
    out = Path(args.out or "runs/train")
    write_manifest(out, "train", {
        "train": _jsonable_config(tcfg),
        "generator": _jsonable_config(gen_cfg),
        "critic": _jsonable_config(critic_cfg),
        "n_images": len(train_c),
    })
    model, reports = train(
        train_c, tcfg, generator_config=gen_cfg, critic_config=critic_cfg, out_dir=out
    )
    final = reports[-1] if reports else None
    if final is not None:
        print(
            f"trained {len(reports)} steps; final critic {final.critic_objective:.5f} "
            f"recon {final.recon_loss_value:.5f}"
        )
    print(f"checkpoint: {out / 'checkpoint'} (hash {checkpoint_hash(out / 'checkpoint')[:12]})")
    return 0


def cmd_eval(args: argparse.Namespace, file_cfg: dict) -> int:
    model = load_checkpoint(args.checkpoint)
    _, eval_c = _corpora_for(args, file_cfg, args.seed or 0)
    if len(eval_c) == 0:
        raise ValidationError("eval split is empty")
    images = [eval_c[i] for i in range(len(eval_c))]
    side = model.generator_config.input_side
    if images[0].shape[0] != side:
        raise ValidationError(f"eval images are {images[0].shape[0]}px, model wants {side}px")

    all_scenarios = standard_eval_scenarios(side)
    if args.scenarios in (None, "all"):
        scenarios = all_scenarios
    else:
        names = [s.strip() for s in args.scenarios.split(",")]
        missing = [n for n in names if n not in all_scenarios]
        if missing:
            raise ValidationError(f"unknown scenarios {missing}; known: {sorted(all_scenarios)}")
        scenarios = {n: all_scenarios[n] for n in names}

    seed = args.seed or 0
    report = run_scenarios(model, images, scenarios, seed=seed)
    out = Path(args.out or f"runs/eval-{time.strftime('%Y%m%d-%H%M%S')}")
    out.mkdir(parents=True, exist_ok=True)
    write_table(report, out / "table.csv", format="csv")
    write_table(report, out / "table.txt", format="text")

    # one grid row per scenario using the first eval image
    img = images[0]
    masks = scenario_masks(scenarios, [img], seed)
    truth, damaged, model_out, base_out, labels = [], [], [], [], []
    for name, spec in scenarios.items():
        mk = masks[name][0]
        rng = named_stream(seed, f"grid-noise-{name}")
        truth.append(img)
        damaged.append(damaged_view(img, mk))
        model_out.append(inpaint_image(model.generator, img, mk, rng, sigma=model.sigma))
        base_out.append(biharmonic_inpaint(img, mk))
        labels.append(name)
    render_grid(truth, damaged, model_out, base_out, out / "grid.png", row_labels=labels)

    write_manifest(out, "eval", {
        "checkpoint": args.checkpoint,
        "checkpoint_hash": report.fingerprint["checkpoint"],
        "seed": seed,
        "n_images": len(images),
        "scenarios": sorted(scenarios),
    })
    print(f"report written to {out}")
    for cell in report.cells:
        print(
            f"  {cell.scenario:<18} {cell.method:<12} psnr {cell.mean_psnr:7.2f}  "
            f"ssim {cell.mean_ssim:.4f}  n={cell.n}"
        )
    return 0


def cmd_inpaint(args: argparse.Namespace, file_cfg: dict) -> int:
    model = load_checkpoint(args.checkpoint)
    side = model.generator_config.input_side
    raw = preprocess_image(decode_image_file(args.image), side)
    seed = args.seed if args.seed is not None else 0
    mask = _mask_from_args(args, side, side, seed)
    if (mask.height, mask.width) != (side, side):
        raise ValidationError(
            f"mask is {mask.width}x{mask.height}, expected {side}x{side}"
        )
    rng = named_stream(seed, "cli-noise")
    out = inpaint_image(model.generator, raw, mask, rng, sigma=model.sigma)
    out_path = Path(args.output or "inpainted.png")
    _save_png(out, out_path)
    if args.save_mask:
        Path(args.save_mask).write_bytes(mask_to_png_bytes(mask))
    print(f"wrote {out_path}")
    return 0


def cmd_baseline(args: argparse.Namespace, file_cfg: dict) -> int:
    raw = decode_image_file(args.image)
    if args.target_side is not None:
        raw = preprocess_image(raw, int(args.target_side))
    else:
        raw = normalize_image(raw)
    h, w = raw.shape[:2]
    seed = args.seed if args.seed is not None else 0
    mask = _mask_from_args(args, h, w, seed)
    if (mask.height, mask.width) != (h, w):
        raise ValidationError(f"mask is {mask.width}x{mask.height}, image is {w}x{h}")
    out = biharmonic_inpaint(raw, mask)
    score = evaluate_pair(raw, out, mask)
    out_path = Path(args.output or "baseline.png")
    _save_png(out, out_path)
    print(f"wrote {out_path} (psnr {score.psnr:.2f}, ssim {score.ssim:.4f} vs input)")
    return 0


def cmd_serve(args: argparse.Namespace, file_cfg: dict) -> int:
    from .service import serve

    serve(
        args.checkpoint,
        host=args.host,
        port=args.port,
        max_payload_bytes=args.max_payload_bytes,
        allow_resize=args.allow_resize,
    )
    return 0


# --- parser -----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat YAML config file")
    p.add_argument("--seed", type=int, help="base seed for all RNG streams")
    p.add_argument("--data-dir", dest="data_dir", help="image directory (or set WGAIN_DATA_DIR)")
    p.add_argument("--out", help="output directory")


def _add_mask_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mask", help="mask file (PNG, 0 = missing; or .rle)")
    p.add_argument(
        "--scenario",
        choices=["noise", "center-square", "multi-square"],
        help="generate the eval-variant mask instead of reading one",
    )
    p.add_argument("--p", type=float, help="noise scenario missing probability")
    p.add_argument("--side", type=int, help="square side for square scenarios")
    p.add_argument("--count", type=int, help="square count for multi-square")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wgain", description="WGAIN image inpainting toolkit")
    parser.add_argument("--version", action="version", version=f"wgain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="preprocess an image directory into a packed cache")
    _add_common(p)
    p.add_argument("--target-side", dest="target_side", type=int)
    p.add_argument("--split-train", dest="split_train", type=float)
    p.add_argument("--split-eval", dest="split_eval", type=float)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--data", help="image directory or packed .npz from `prepare`")
    p.add_argument("--synthetic", type=int, help="train on N generated synthetic images")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--recon-loss", dest="recon_loss", choices=["mae", "mse"])
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--input-side", dest="input_side", type=int)
    p.add_argument("--width-scale", dest="width_scale", type=int,
                   help="divide all layer widths by this factor (desk-scale runs)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run the evaluation scenarios")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="image directory or packed .npz")
    p.add_argument("--synthetic", type=int)
    p.add_argument("--input-side", dest="input_side", type=int)
    p.add_argument("--scenarios", help="'all' or comma-separated scenario names")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inpaint", help="inpaint one image")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    _add_mask_flags(p)
    p.add_argument("--output", help="output PNG path")
    p.add_argument("--save-mask", dest="save_mask", help="also write the mask PNG here")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("baseline", help="biharmonic fill of one image")
    _add_common(p)
    p.add_argument("--image", required=True)
    _add_mask_flags(p)
    p.add_argument("--target-side", dest="target_side", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-payload-bytes", dest="max_payload_bytes", type=int,
                   default=8 * 1024 * 1024)
    p.add_argument("--allow-resize", dest="allow_resize", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("WGAIN_LOG", "INFO"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        file_cfg = load_config_file(args.config) if getattr(args, "config", None) else {}
        if getattr(args, "data_dir", None) is not None:
            os.environ["WGAIN_DATA_DIR"] = args.data_dir
        return args.func(args, file_cfg)
    except SystemExit:
        raise
    except DivergenceError as exc:
        sys.stderr.write(f"error: training diverged: {exc}\n")
        return 2
    except WgainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime faults distinct from bad input
        log.exception("unhandled failure")
        sys.stderr.write(f"fatal: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
