"""``uncage`` command line.

Exit codes: 0 success, 2 invalid arguments, 3 I/O error, 4 schema error,
5 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .exceptions import InvalidArgumentError, SchemaError, UnsatisfiableError, UndefinedMetricError
from .pipeline import DEFAULTS, StageError, run_gabor, run_inpaint, run_pipeline, run_segment

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_SCHEMA, EXIT_INTERNAL = 0, 2, 3, 4, 5

log = logging.getLogger("uncage")

DEFAULT_CONSTANTS = """\
published constants (defaults):
  sigma_x 1.8, sigma_y 2.4, wavelength 4.0, 72 orientations (batches of 6),
  confidence boost 0.4, mask threshold 0.3, confidence thresholds 0.1-0.2,
  synthesis: 512x288, brightness [-30, 30], contrast [0.8, 1.3],
  saturation [0.7, 1.4], 3 post-augmentation copies, 80/20 split
"""

SYNTH_DEFAULTS = {
    "seed": 7, "copies": 3, "width": 512, "height": 288, "alpha_gain": 1.0,
    "zoom": [0.8, 1.2], "brightness": [-30.0, 30.0], "contrast": [0.8, 1.3],
    "saturation": [0.7, 1.4], "cages_per_animal": None, "post_augment": True,
    "val_fraction": 0.2, "jobs": 1, "demo": 0,
}

EVAL_DEFAULTS = {
    "pck": [0.05, 0.10], "auc_range": [0.0, 0.10], "auc_samples": 101, "oks_sigma": [0.05],
    "map_thresholds": [round(0.5 + 0.05 * i, 2) for i in range(10)],
    "nme_normalizer": "bbox_diagonal", "group_by": None,
}


class ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _opt(p, flag, key, defaults, help_text, **kw):
    d = defaults[key]
    p.add_argument(flag, dest=key, default=argparse.SUPPRESS,
                   help=f"{help_text} (default: {d})", **kw)


def _add_config(p):
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file supplying any option (a run.json manifest also works); flags override it")


def _add_gabor(p):
    g = p.add_argument_group("Gabor bank")
    _opt(g, "--sigma-x", "sigma_x", DEFAULTS, "Gaussian std-dev along the carrier", type=float)
    _opt(g, "--sigma-y", "sigma_y", DEFAULTS, "Gaussian std-dev across the carrier", type=float)
    _opt(g, "--wavelength", "wavelength", DEFAULTS, "carrier wavelength in px", type=float)
    _opt(g, "--phase", "phase", DEFAULTS, "carrier phase offset (rad)", type=float)
    _opt(g, "--orientations", "n_orientations", DEFAULTS, "number of orientations over [0, pi)", type=int)
    _opt(g, "--kernel-radius", "kernel_radius", DEFAULTS, "kernel radius in px; None = ceil(3 max sigma)", type=int)
    _opt(g, "--t-low", "threshold_low", DEFAULTS, "confidence ramp start", type=float)
    _opt(g, "--t-high", "threshold_high", DEFAULTS, "confidence ramp end", type=float)
    g.add_argument("--no-rescale", dest="rescale", action="store_false", default=argparse.SUPPRESS,
                   help="use raw variance instead of variance / max (default: rescale)")
    _opt(g, "--gate", "gate", DEFAULTS, "orientation-channel confidence gate", type=float)


def _add_fusion(p, dilate_iters_flag):
    g = p.add_argument_group("mask fusion")
    _opt(g, "--boost", "confidence_boost", DEFAULTS, "confidence boost", type=float)
    _opt(g, "--threshold", "mask_threshold", DEFAULTS, "mask threshold (strict >)", type=float)
    _opt(g, "--dilate", "dilate", DEFAULTS, "square dilation kernel; enables dilation", type=int)
    _opt(g, dilate_iters_flag, "dilate_iters", DEFAULTS, "dilation iterations", type=int)
    g.add_argument("--logits", dest="logits", action="store_true", default=argparse.SUPPRESS,
                   help="p_base PNG holds logits; apply sigmoid on load (default: off)")


def _add_inpaint(p):
    g = p.add_argument_group("PatchMatch inpainting")
    _opt(g, "--patch", "patch", DEFAULTS, "odd patch size", type=int)
    _opt(g, "--levels", "levels", DEFAULTS, "pyramid levels; None = halve while min side >= 32", type=int)
    _opt(g, "--iters", "iters", DEFAULTS, "EM iterations per level", type=int)
    _opt(g, "--decay", "decay", DEFAULTS, "random-search radius decay", type=float)
    _opt(g, "--seed", "seed", DEFAULTS, "RNG seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = ArgParser(prog="uncage", description="Cage segmentation, removal and pose evaluation.",
                       epilog=DEFAULT_CONSTANTS, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"uncage {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgParser)
    fmt = {"epilog": DEFAULT_CONSTANTS, "formatter_class": argparse.RawDescriptionHelpFormatter}

    p = sub.add_parser("synth", help="render a synthetic caged dataset", **fmt)
    p.add_argument("--animals", type=Path, required=True, help="directory of RGB animal PNGs")
    p.add_argument("--cages", type=Path, required=True, help="directory of RGBA cage PNGs")
    p.add_argument("--out", type=Path, required=True)
    _opt(p, "--seed", "seed", SYNTH_DEFAULTS, "dataset seed", type=int)
    _opt(p, "--copies", "copies", SYNTH_DEFAULTS, "post-augmentation copies per composite", type=int)
    _opt(p, "--width", "width", SYNTH_DEFAULTS, "output width", type=int)
    _opt(p, "--height", "height", SYNTH_DEFAULTS, "output height", type=int)
    _opt(p, "--alpha-gain", "alpha_gain", SYNTH_DEFAULTS, "cage alpha multiplier", type=float)
    _opt(p, "--zoom", "zoom", SYNTH_DEFAULTS, "cage zoom range", type=float, nargs=2)
    _opt(p, "--brightness", "brightness", SYNTH_DEFAULTS, "brightness range (8-bit units)", type=float, nargs=2)
    _opt(p, "--contrast", "contrast", SYNTH_DEFAULTS, "contrast range", type=float, nargs=2)
    _opt(p, "--saturation", "saturation", SYNTH_DEFAULTS, "saturation range", type=float, nargs=2)
    _opt(p, "--cages-per-animal", "cages_per_animal", SYNTH_DEFAULTS, "random cage subset per animal", type=int)
    _opt(p, "--val-fraction", "val_fraction", SYNTH_DEFAULTS, "validation share of animals", type=float)
    p.add_argument("--no-post-augment", dest="post_augment", action="store_false", default=argparse.SUPPRESS,
                   help="skip full-image photometric copies' jitter (default: on)")
    _opt(p, "--jobs", "jobs", SYNTH_DEFAULTS, "parallel workers", type=int)
    _opt(p, "--demo", "demo", SYNTH_DEFAULTS, "first write N procedural animals and bar cages into the input dirs", type=int)
    _add_config(p)

    p = sub.add_parser("gabor", help="Gabor orientation analysis of one image", **fmt)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--responses", action="store_true", help="also dump every per-orientation response map")
    _add_gabor(p)
    _add_config(p)

    p = sub.add_parser("segment", help="fuse p_base with Gabor confidence into a cage mask", **fmt)
    p.add_argument("--image", type=Path, required=True, help="image PNG, or a directory of them")
    p.add_argument("--pbase", type=Path, required=True, help="16-bit probability PNG (or directory)")
    p.add_argument("--out-mask", type=Path, required=True, help="mask PNG (directory when batching)")
    p.add_argument("--debug-dir", type=Path, default=None)
    _add_gabor(p)
    _add_fusion(p, "--iters")
    p.add_argument("--jobs", type=int, default=1)
    _add_config(p)

    p = sub.add_parser("inpaint", help="fill masked pixels with PatchMatch", **fmt)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_inpaint(p)
    p.add_argument("--jobs", type=int, default=1)
    _add_config(p)

    p = sub.add_parser("pipeline", help="segment then inpaint", **fmt)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--pbase", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--debug", action="store_true", help="dump stage intermediates under OUT/debug")
    _add_gabor(p)
    _add_fusion(p, "--dilate-iters")
    _add_inpaint(p)
    p.add_argument("--jobs", type=int, default=1)
    _add_config(p)

    p = sub.add_parser("evaluate", help="pose metric table from keypoint JSON files", **fmt)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="directory for metrics.csv / metrics.json")
    _opt(p, "--pck", "pck", EVAL_DEFAULTS, "PCK thresholds", type=float, nargs="+")
    _opt(p, "--auc-range", "auc_range", EVAL_DEFAULTS, "AUC threshold interval", type=float, nargs=2)
    _opt(p, "--auc-samples", "auc_samples", EVAL_DEFAULTS, "AUC samples", type=int)
    _opt(p, "--oks-sigma", "oks_sigma", EVAL_DEFAULTS, "OKS per-keypoint constants (one value = uniform)",
         type=float, nargs="+")
    _opt(p, "--map-thresholds", "map_thresholds", EVAL_DEFAULTS, "OKS TP thresholds", type=float, nargs="+")
    _opt(p, "--nme-normalizer", "nme_normalizer", EVAL_DEFAULTS, "NME normaliser",
         choices=["bbox_diagonal", "bbox_max_side"])
    _opt(p, "--group-by", "group_by", EVAL_DEFAULTS, "frame field to group rows by (group/species/sequence)")
    _add_config(p)
    return parser


def effective_config(args, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None) is not None:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{args.config}: invalid JSON ({exc})") from None
        if isinstance(data, dict) and isinstance(data.get("config"), dict) and "subcommand" in data:
            data = data["config"]
        if not isinstance(data, dict):
            raise SchemaError(f"{args.config}: expected a JSON object")
        unknown = set(data) - set(defaults)
        if unknown:
            raise InvalidArgumentError(f"{args.config}: unknown option(s) {sorted(unknown)}")
        cfg.update(data)
    cfg.update({k: v for k, v in vars(args).items() if k in defaults})
    return cfg


def _enable_dilation(args, cfg):
    # asking for a kernel without an iteration count means one pass
    if "dilate" in vars(args) and "dilate_iters" not in vars(args) and not cfg["dilate_iters"]:
        cfg["dilate_iters"] = 1


def _pngs(d: Path):
    return {p.stem: p for p in sorted(d.iterdir()) if p.suffix.lower() == ".png"}


def _batch(a_dir: Path, b_dir: Path, jobs: int, fn):
    a, b = _pngs(a_dir), _pngs(b_dir)
    stems = sorted(set(a) & set(b))
    if not stems:
        raise InvalidArgumentError(f"no PNG names shared by {a_dir} and {b_dir}")
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(lambda s: fn(s, a[s], b[s]), stems))


def cmd_synth(args):
    from .assets import bar_cage, flat_animal
    from .io import write_image
    from .synth import SynthConfig, generate_dataset

    cfg = effective_config(args, SYNTH_DEFAULTS)
    if cfg["demo"]:
        w, h = cfg["width"], cfg["height"]
        for i in range(cfg["demo"]):
            write_image(args.animals / f"animal_{i:03d}.png", flat_animal(w, h, seed=cfg["seed"] * 1000 + i))
            write_image(args.cages / f"cage_{i:03d}.png",
                        bar_cage(w, h, spacing=w / 6, bar_width=w / 40, angle_deg=(0, 90, 30, 120)[i % 4]))
    config = SynthConfig(
        target_w=cfg["width"], target_h=cfg["height"], zoom_range=tuple(cfg["zoom"]),
        brightness_range=tuple(cfg["brightness"]), contrast_range=tuple(cfg["contrast"]),
        saturation_range=tuple(cfg["saturation"]), post_aug_copies=cfg["copies"],
        post_augment=cfg["post_augment"], alpha_gain=cfg["alpha_gain"], rng_seed=cfg["seed"],
        cages_per_animal=cfg["cages_per_animal"], val_fraction=cfg["val_fraction"],
    )
    manifest = generate_dataset(args.animals, args.cages, config, args.out, jobs=cfg["jobs"])
    print(f"wrote {len(manifest['samples'])} samples to {args.out}")
    return EXIT_OK


def cmd_gabor(args):
    cfg = effective_config(args, DEFAULTS)
    run_gabor(args.image, args.out, cfg, responses=args.responses)
    print(f"wrote Gabor maps to {args.out}")
    return EXIT_OK


def cmd_segment(args):
    cfg = effective_config(args, DEFAULTS)
    _enable_dilation(args, cfg)
    if args.image.is_dir():
        _batch(args.image, args.pbase, args.jobs,
               lambda s, i, p: run_segment(i, p, args.out_mask / f"{s}.png", cfg,
                                           args.debug_dir / s if args.debug_dir else None))
    else:
        run_segment(args.image, args.pbase, args.out_mask, cfg, args.debug_dir)
    return EXIT_OK


def cmd_inpaint(args):
    cfg = effective_config(args, DEFAULTS)
    if args.image.is_dir():
        _batch(args.image, args.mask, args.jobs,
               lambda s, i, m: run_inpaint(i, m, args.out / f"{s}.png", cfg))
    else:
        run_inpaint(args.image, args.mask, args.out, cfg)
    return EXIT_OK


def cmd_pipeline(args):
    cfg = effective_config(args, DEFAULTS)
    _enable_dilation(args, cfg)
    if args.image.is_dir():
        _batch(args.image, args.pbase, args.jobs,
               lambda s, i, p: run_pipeline(i, p, args.out / s, cfg, args.debug))
    else:
        run_pipeline(args.image, args.pbase, args.out, cfg, args.debug)
    return EXIT_OK


def cmd_evaluate(args):
    from .metrics import MetricConfig, evaluate, load_keypoint_file, write_table_csv, write_table_json
    from .pipeline import RunRecord

    cfg = effective_config(args, EVAL_DEFAULTS)
    mc = MetricConfig(pck_thresholds=tuple(cfg["pck"]), auc_range=tuple(cfg["auc_range"]),
                      auc_samples=cfg["auc_samples"],
                      oks_sigmas=cfg["oks_sigma"][0] if len(cfg["oks_sigma"]) == 1 else tuple(cfg["oks_sigma"]),
                      map_oks_thresholds=tuple(cfg["map_thresholds"]), nme_normalizer=cfg["nme_normalizer"])
    rec = RunRecord("evaluate", dict(cfg))
    rec.add_input("pred", args.pred)
    rec.add_input("gt", args.gt)
    gts, gt_groups, k = load_keypoint_file(args.gt)
    preds, _, _ = load_keypoint_file(args.pred, n_keypoints=k)
    groups = None
    if cfg["group_by"]:
        with open(args.gt) as fh:
            raw = json.load(fh)
        groups = {fr["frame_id"]: fr[cfg["group_by"]] for fr in raw["frames"] if cfg["group_by"] in fr}
    try:
        rows = evaluate(preds, gts, mc, groups)
    except UndefinedMetricError as exc:
        log.warning("%s", exc)
        rows = [{"group": "all", "n_gt": 0, "n_pred": sum(map(len, preds.values())), "n_matched": 0}]
    header = ["group", "MED", "RMSE", "NME"] + [f"PCK@{t:.2f}" for t in mc.pck_thresholds] + \
             ["AUC", "OKS", "mAP@OKS"]
    print("\t".join(header))
    for r in rows:
        print("\t".join(_fmt(r.get(h)) for h in header))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_table_csv(args.out / "metrics.csv", rows, mc)
        write_table_json(args.out / "metrics.json", rows, mc)
        rec.add_output("csv", args.out / "metrics.csv")
        rec.add_output("json", args.out / "metrics.json")
        rec.write(args.out / "run.json")
    return EXIT_OK


def _fmt(v):
    if v is None:
        return "-"
    return f"{v:.4f}" if isinstance(v, float) else str(v)


COMMANDS = {"synth": cmd_synth, "gabor": cmd_gabor, "segment": cmd_segment,
            "inpaint": cmd_inpaint, "pipeline": cmd_pipeline, "evaluate": cmd_evaluate}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code_for(exc.cause)
    if isinstance(exc, SchemaError):
        return EXIT_SCHEMA
    if isinstance(exc, (InvalidArgumentError, UnsatisfiableError)):
        return EXIT_ARGS
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except Exception as exc:  # mapped onto the exit-code taxonomy
        code = exit_code_for(exc)
        print(f"uncage {args.command}: error: {exc}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            log.exception("internal error")
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
