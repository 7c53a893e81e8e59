#!/usr/bin/env python3

"""
Command-line driver for the attribute-disentanglement face-aging GAN:

  train          two-stage training from a YAML config (``--dry-run``, ``--resume``)
  synthesize     one input, one output per target age group, as a PNG grid
  evaluate       gender / race preservation rate over held-out inputs
  synth export   write the synthetic dataset as PNGs + manifest.csv
  gradcheck      finite-difference check of every primitive and loss

Logs go both to screen and to  <output>/logs/<command>_<timestamp>.log

example of CLI run:
`
python main.py --config config.yml train
python main.py synthesize --checkpoint runs/desk/checkpoints/final.adgn \\
    --index 3 --attributes race=1 --out aging.png
`
"""

from __future__ import annotations

import argparse
import logging
import posixpath
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

import fsspec
import numpy as np

from adgan.attributes import AttributeLabel, parse_attribute_overrides
from adgan.checkpoint import checkpoint_load
from adgan.config import TrainConfig, config_from_dict, load_config
from adgan.data import Dataset, SyntheticDataset, check_all_classes, dataset_from_config, export_synthetic
from adgan.diagnostics import run_gradcheck, summarize
from adgan.errors import AdganError, ConfigError, DataError, LabelError
from adgan.evaluate import age_sweep, load_classifier, preservation_rate
from adgan.grid import grid_emit
from adgan.networks import ModelBundle, audit_report
from adgan.train import restore_bundle, train
from adgan.utils.log import configure_logging, get_logger
from adgan.utils.preprocessing import load_image
from adgan.utils.synthetic_faces import SyntheticSpec, oracle_classify

LOGGER = get_logger("adgan.cli")


# ───────────────────────────────────────────────────────────────────────────
#  Helpers
# ───────────────────────────────────────────────────────────────────────────
def _load_run_config(args: argparse.Namespace) -> TrainConfig:
    """YAML config with CLI overrides: CLI > config > defaults."""
    return load_config(args.config, overrides={"seed": args.seed, "output_dir": args.output})


def _checkpoint_config(args: argparse.Namespace):
    ckpt = checkpoint_load(args.checkpoint)
    cfg = config_from_dict(ckpt.header["config"])
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.output is not None:
        cfg = cfg.replace(output_dir=args.output)
    return ckpt, cfg


def _eval_dataset(cfg: TrainConfig) -> Dataset:
    train_set, held_out = dataset_from_config(cfg)
    if len(held_out) == 0:
        LOGGER.warning("⚠️  held-out split is empty; evaluating on the training records")
        return train_set
    return held_out


def _read_image(uri: str, resolution: int) -> np.ndarray:
    try:
        with fsspec.open(uri, "rb") as fh:
            return load_image(fh.read(), resolution)
    except OSError as exc:
        raise DataError(f"cannot read image {uri}: {exc}") from exc


def _parse_groups(text: Optional[str], cfg: TrainConfig) -> List[int]:
    n_a = cfg.space.n_a
    if not text:
        return list(range(n_a))
    names = [n.lower() for n in cfg.labels.get("age", [])]
    groups = []
    for tok in text.split(","):
        tok = tok.strip()
        g = names.index(tok.lower()) if tok.lower() in names else None
        if g is None:
            try:
                g = int(tok)
            except ValueError:
                raise LabelError(f"age group {tok!r} is neither an index nor a known name") from None
        if not 0 <= g < n_a:
            raise LabelError(f"age group {g} outside the trained space [0, {n_a})")
        groups.append(g)
    return groups


def _setup_logging(command: str, output_dir: str, cfg: Optional[TrainConfig], verbose: bool) -> Path:
    ts = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_path = Path(output_dir) / "logs" / f"{command.replace(' ', '_')}_{ts}.log"
    lg = cfg.logging if cfg is not None else None
    level = logging.DEBUG if verbose else getattr(logging, lg.level if lg else "INFO")
    configure_logging(
        log_path,
        level=level,
        datefmt=lg.datefmt if lg else "%Y-%m-%d %H:%M:%S",
        tz=lg.tz if lg else "UTC",
    )
    return log_path


# ───────────────────────────────────────────────────────────────────────────
#  Commands
# ───────────────────────────────────────────────────────────────────────────
def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    _setup_logging("train", cfg.output_dir, cfg, args.verbose)
    LOGGER.info("🚀  train: config %s (hash %s)", args.config, cfg.config_hash()[:12])

    train_set, held_out = dataset_from_config(cfg)
    LOGGER.info("📂  %d training / %d held-out records", len(train_set), len(held_out))

    if args.dry_run:
        check_all_classes(train_set)
        bundle = ModelBundle(cfg.attribute_space, cfg.network_config, np.random.default_rng(cfg.seed))
        print(audit_report(bundle))
        LOGGER.info("✅  dry run: config and dataset are valid, 0 iterations run")
        return 0

    start = time.perf_counter()
    result = train(cfg, train_set, output_dir=cfg.output_dir, resume=args.resume,
                   progress=not args.no_progress, stop_at=args.stop_at)
    LOGGER.info("🎉  training finished in %.1fs → %s", time.perf_counter() - start, result.checkpoint_path)
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    ckpt, cfg = _checkpoint_config(args)
    _setup_logging("synthesize", cfg.output_dir, cfg, args.verbose)
    bundle = restore_bundle(ckpt, cfg)
    space = bundle.space
    rng = np.random.default_rng(cfg.seed)

    if args.input:
        image = _read_image(args.input, cfg.resolution)
        label = oracle_classify(image, space) if cfg.dataset.selector == "synthetic" else None
    else:
        dataset = _eval_dataset(cfg)
        if not 0 <= args.index < len(dataset):
            raise DataError(f"--index {args.index} outside the evaluation set [0, {len(dataset)})")
        image, label = dataset.image(args.index), dataset.label(args.index)

    overrides = parse_attribute_overrides(args.attributes or [], space, cfg.labels)
    if label is None:
        missing = [a for a in ("gender", "race") if a not in overrides]
        if missing:
            raise LabelError(f"cannot infer {', '.join(missing)} of {args.input}; pass --attributes "
                             + " ".join(f"{a}=<value>" for a in missing))
        label = AttributeLabel(overrides.get("age", 0), overrides["gender"], overrides["race"])
    held = label.replace(**{k: v for k, v in overrides.items() if k != "age"})
    input_age = overrides.get("age", label.age_group)

    groups = _parse_groups(args.groups, cfg)
    style = None
    if args.style_image:
        paths = args.style_image if len(args.style_image) > 1 else args.style_image * len(groups)
        if len(paths) != len(groups):
            raise LabelError(f"{len(args.style_image)} style images for {len(groups)} target groups")
        style = [_read_image(p, cfg.resolution) for p in paths]

    outputs = age_sweep(bundle, image, held, rng, groups, cfg.zero_noise, style)
    framed = [1 + groups.index(input_age)] if input_age in groups else []
    out = args.out or posixpath.join(cfg.output_dir, "synthesis.png")
    grid_emit([image, *outputs], (1, 1 + len(groups)), out, framed=framed)
    LOGGER.info("✅  %d target group(s) rendered for %s", len(groups), held.as_tuple())
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    ckpt, cfg = _checkpoint_config(args)
    _setup_logging("evaluate", cfg.output_dir, cfg, args.verbose)
    bundle = restore_bundle(ckpt, cfg)
    dataset = _eval_dataset(cfg)
    classifier = load_classifier(args.classifier) if args.classifier else None

    report = preservation_rate(
        bundle,
        dataset,
        np.random.default_rng(cfg.seed),
        axes=args.axes,
        target_groups=_parse_groups(args.groups, cfg),
        sample_count=args.samples,
        classifier=classifier,
        embedding=args.embedding,
        passthrough=args.passthrough,
        zero_noise=cfg.zero_noise,
        batch_size=cfg.batch_size,
        config_hash=config_from_dict(ckpt.header["config"]).config_hash(),
        group_names=cfg.labels.get("age"),
        workers=cfg.dataset.workers,
        progress=not args.no_progress,
    )
    out = args.report or posixpath.join(cfg.output_dir, "eval_report.json")
    with fsspec.open(out, "w") as fh:
        fh.write(report.to_json() + "\n")
    print(report.to_table())
    LOGGER.info("💾  report → %s", out)
    return 0


def cmd_synth_export(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    _setup_logging("synth export", cfg.output_dir, cfg, args.verbose)
    space = cfg.attribute_space
    spec = SyntheticSpec(cfg.resolution, space.n_a, space.n_g, space.n_c,
                         samples_per_label=cfg.dataset.samples_per_label, seed=cfg.seed)
    out = args.out or posixpath.join(cfg.output_dir, "synthetic")
    manifest = export_synthetic(SyntheticDataset(spec), out, show_progress=not args.no_progress)
    print(manifest)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    output = args.output or "runs/gradcheck"
    _setup_logging("gradcheck", output, None, args.verbose)
    start = args.seed or 0
    try:
        results = run_gradcheck(seeds=range(start, start + args.seeds), tolerance=args.tolerance,
                                names=args.case, progress=not args.no_progress)
    except KeyError as exc:
        raise ConfigError("--case", exc.args[0]) from None
    print(summarize(results))
    failed = [r for r in results if not r.passed]
    if failed:
        LOGGER.error("❌  %d of %d gradient checks failed", len(failed), len(results))
        return 4
    LOGGER.info("✅  all %d gradient checks passed", len(results))
    return 0


# ───────────────────────────────────────────────────────────────────────────
#  Main driver
# ───────────────────────────────────────────────────────────────────────────
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Attribute-disentangled face aging GAN")
    ap.add_argument("--config", type=Path, default=Path("config.yml"),
                    help="YAML config file (default: %(default)s)")
    ap.add_argument("--seed", type=int, default=None, help="Overrides the config seed")
    ap.add_argument("--output", default=None, help="Output directory (overrides output_dir)")
    ap.add_argument("--no-progress", action="store_true", help="Hide tqdm progress bars")
    ap.add_argument("-v", "--verbose", action="store_true", help="DEBUG on the console")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Two-stage training")
    p.add_argument("--dry-run", action="store_true",
                   help="Validate config and dataset, print the parameter audit, run 0 iterations")
    p.add_argument("--resume", default=None, metavar="CHECKPOINT",
                   help="Continue from a checkpoint's counters, optimizer and RNG state")
    p.add_argument("--stop-at", type=int, default=None, metavar="ITER",
                   help="Stop once the global iteration counter reaches ITER (resumable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="Render one input into every target age group")
    p.add_argument("--checkpoint", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", default=None, help="Input image (local path or fsspec URI)")
    src.add_argument("--index", type=int, default=0, help="Record of the held-out set (default: %(default)s)")
    p.add_argument("--attributes", nargs="*", metavar="AXIS=VALUE",
                   help="Override held attributes, e.g. race=african gender=female")
    p.add_argument("--groups", default=None, help="Comma-separated target age groups (default: all)")
    p.add_argument("--style-image", nargs="*", default=None,
                   help="Render through E(style) instead of F(code); one image, or one per group")
    p.add_argument("--out", default=None, help="PNG path (default: <output>/synthesis.png)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="Attribute preservation rate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--samples", type=int, default=2000, help="Inputs per target group (default: %(default)s)")
    p.add_argument("--axes", nargs="+", default=["gender", "race"], choices=("gender", "race"))
    p.add_argument("--groups", default=None, help="Comma-separated target age groups (default: all)")
    p.add_argument("--embedding", choices=("common", "individual"), default="common",
                   help="common: G(X, F(S_t)); individual: G(X, E(X_t))")
    p.add_argument("--passthrough", action="store_true", help="Classify the inputs themselves")
    p.add_argument("--classifier", default=None, metavar="MODULE:CALLABLE",
                   help="Attribute classifier for real datasets")
    p.add_argument("--report", default=None, help="JSON path (default: <output>/eval_report.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="Synthetic dataset tools")
    synth = p.add_subparsers(dest="synth_command", required=True)
    e = synth.add_parser("export", help="Write PNGs + manifest.csv")
    e.add_argument("--out", default=None, help="Directory or fsspec URI (default: <output>/synthetic)")
    e.set_defaults(func=cmd_synth_export)

    p = sub.add_parser("gradcheck", help="Finite-difference gradient checks")
    p.add_argument("--seeds", type=int, default=20, help="Seeds per case (default: %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--case", nargs="*", default=None, help="Only these cases")
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdganError as exc:
        if not logging.getLogger().handlers:
            configure_logging(None)
        LOGGER.error("❌  %s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
