"""Command-line pipeline driver: synth, train, lift, eval, verify.

Exit codes are a stable contract: 0 success, 1 usage error, 2 I/O failure,
3 numerical failure. A JSON config file (``--config``) may supply any
flag's value under its long name (dashes as underscores); explicit flags
override the file, which overrides built-in defaults. Output files carry
no timestamps, so identical inputs and seeds reproduce them byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .diffusion import (
    TorchDenoiser,
    TrainingSet,
    build_model,
    disentangled_to_tensor,
    load_checkpoint,
    make_schedule,
    oracle_denoiser,
    save_checkpoint,
    train,
)
from .diffusion.model import DenoiserConfig
from .diffusion.model import init_from_single_view
from .errors import IoFailure, MotionLiftError
from .geometry import project
from .lifting import lift
from .metrics import evaluate_all, reports_to_csv
from .refine import FitConfig, fit_skeleton
from .representation import GlobalMotion2D, decode
from .skeleton import SKELETONS, get_skeleton
from .synth import AugmentParams, build_dataset, default_rig, load_dataset

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def _apply_config_file(parser: "_Parser", argv: list[str]) -> None:
    """Pre-scan for --config and fold its values in as subparser defaults.

    Explicit command-line flags still win because defaults only fill in
    arguments that were not supplied.
    """
    if "--config" not in argv:
        return
    pos = argv.index("--config")
    if pos + 1 >= len(argv):
        raise _UsageError("--config needs a file argument")
    if not argv or argv[0] not in parser.subparser_map:
        raise _UsageError("--config must follow a subcommand")
    sub = parser.subparser_map[argv[0]]
    config = io.load_json(argv[pos + 1])
    known = {a.dest for a in sub._actions}
    unknown = set(config) - known
    if unknown:
        raise _UsageError(f"config file has unknown keys: {sorted(unknown)}")
    sub.set_defaults(**config)


def build_parser() -> _Parser:
    parser = _Parser(prog="motionlift",
                     description="single-view 2D motion to absolute 3D via multi-view lifting")
    parser.subparser_map = {}
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        parser.subparser_map[name] = p
        return p

    p = add_parser("synth", help="generate a synthetic multi-view dataset")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--kinds", default="walker,circle,squat,random_smooth",
                   help="comma-separated motion kinds")
    p.add_argument("--skeleton", default="toy8", choices=sorted(SKELETONS))
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--rig", help="rig JSON file (default: built-in circular rig)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--yaw-range", type=float, default=np.pi)
    p.add_argument("--translation-range", type=float, default=0.8)
    p.add_argument("--pointmap-grid", type=int, default=16)

    p = add_parser("train", help="train the diffusion denoiser")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--data", required=True, help="dataset directory from synth")
    p.add_argument("--stage", choices=("pretrain", "finetune"), default="finetune")
    p.add_argument("--out", required=True, help="checkpoint output path (.npz)")
    p.add_argument("--init-from", help="single-view checkpoint to initialize from")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--steps", type=int, default=100, help="diffusion steps")
    p.add_argument("--schedule", choices=("linear", "cosine"), default="cosine")
    p.add_argument("--pointmaps", type=_onoff, default=True, metavar="{on,off}")
    p.add_argument("--decouple", type=_onoff, default=True, metavar="{on,off}")
    p.add_argument("--early-stop-ratio", type=float, default=None)

    p = add_parser("lift", help="lift a 2D motion file to 3D")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--input", required=True, help="2D motion JSON (primary view)")
    p.add_argument("--rig", required=True, help="rig JSON file")
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--oracle", help="ground-truth 3D motion JSON (oracle denoiser)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--schedule", choices=("linear", "cosine"), default="cosine")
    p.add_argument("--skeleton", default="toy8", choices=sorted(SKELETONS))
    p.add_argument("--decouple", type=_onoff, default=True, metavar="{on,off}")
    p.add_argument("--fit", action="store_true", help="also run skeleton refinement")
    p.add_argument("--fps", type=float, default=30.0)

    p = add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--pred", required=True, help="motion JSON or directory of them")
    p.add_argument("--gt", required=True, help="motion JSON or directory of them")
    p.add_argument("--rig", help="rig JSON for camera-frame pose metrics")
    p.add_argument("--skeleton", default="toy8", choices=sorted(SKELETONS))
    p.add_argument("--out", help="CSV output path")

    p = add_parser("verify", help="run dataset self-consistency checks")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--tolerance", type=float, default=1e-6)
    return parser


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    rig = io.load_rig(args.rig) if args.rig else default_rig(views=args.views)
    skeleton = get_skeleton(args.skeleton)
    params = AugmentParams(
        yaw_range=args.yaw_range,
        translation_range=(args.translation_range, args.translation_range),
        seed=args.seed)
    manifest = build_dataset(
        skeleton, args.kinds.split(","), args.count, args.frames, rig, params,
        args.out, pointmap_grid=args.pointmap_grid, fps=args.fps)
    print(f"wrote {manifest['count']} samples to {args.out}")
    print(f"  kinds: {manifest['kinds']}  frames: {manifest['frames']}  "
          f"views: {manifest['views']}  skeleton: {manifest['skeleton']}")
    print(f"  coords min: {np.round(manifest['coords_min'], 3).tolist()}  "
          f"max: {np.round(manifest['coords_max'], 3).tolist()}")
    return EXIT_OK


def cmd_train(args) -> int:
    samples, manifest = load_dataset(args.data)
    decouple = args.decouple
    use_pm = args.pointmaps
    stage = "pretrain_2d" if args.stage == "pretrain" else "finetune_mv"
    mode = "single_view" if args.stage == "pretrain" else "multi_view"
    data = TrainingSet.from_samples(samples, decouple=decouple, use_pointmaps=use_pm)
    config = DenoiserConfig(
        joint_count=samples[0].motion.joint_count, mode=mode, decouple=decouple,
        width=args.width, blocks=args.blocks, heads=args.heads,
        use_pointmaps=use_pm and mode == "multi_view",
        pointmap_grid=int(manifest.get("pointmap_grid", 16)),
        n_steps=args.steps, schedule=args.schedule)
    model = build_model(config, seed=args.seed)
    if args.init_from:
        source, _ = load_checkpoint(args.init_from)
        init_from_single_view(model, source)
    schedule = make_schedule(args.steps, args.schedule)
    log = train(model, data, schedule, stage, args.epochs, lr=args.lr, seed=args.seed,
                batch_size=args.batch, early_stop_ratio=args.early_stop_ratio)
    extra = {"root_joint": samples[0].motion.skeleton.root if samples[0].motion.skeleton else 0,
             "train_log": log.to_dict()}
    save_checkpoint(model, args.out, extra=extra)
    io.atomic_write_json(log.to_dict(), str(args.out) + ".log.json")
    print(f"{stage}: initial loss {log.initial_loss:.6f}, "
          f"final loss {log.final_loss:.6f} after {len(log.epoch_losses)} epoch(s)")
    print(f"checkpoint written to {args.out}")
    return EXIT_OK


def cmd_lift(args) -> int:
    if bool(args.checkpoint) == bool(args.oracle):
        raise _UsageError("lift needs exactly one of --checkpoint or --oracle")
    m0 = io.load_motion2d(args.input)
    rig = io.load_rig(args.rig)
    skeleton = get_skeleton(args.skeleton)
    if skeleton.joint_count != m0.joint_count:
        skeleton = None
    root_joint = skeleton.root if skeleton is not None else 0

    if args.checkpoint:
        model, extra = load_checkpoint(args.checkpoint)
        schedule = make_schedule(model.config.n_steps, model.config.schedule)
        denoiser = TorchDenoiser(model, primary_index=rig.primary_index)
        root_joint = int(extra.get("root_joint", root_joint))
    else:
        gt = io.load_motion3d(args.oracle, skeleton)
        schedule = make_schedule(args.steps, args.schedule)
        coords2d = np.stack([project(cam, gt.coords) for cam in rig.cameras])
        from .diffusion import make_codec

        codec = make_codec(rig.cameras, gt.joint_count, root_joint, decouple=args.decouple)
        denoiser = oracle_denoiser(codec.tensor_from_global(coords2d),
                                   decouple=args.decouple)

    result = lift(m0, rig, denoiser, schedule, seed=args.seed,
                  root_joint=root_joint, fps=args.fps, skeleton=skeleton)
    out = Path(args.out)
    io.save_motion3d(result.motion3d, out / "motion.json")
    io.atomic_write_json({
        "format_version": io.FORMAT_VERSION,
        "type": "lift_residuals",
        "seed": result.seed,
        "per_step_residuals_px": result.per_step_residuals.tolist(),
    }, out / "residuals.json")
    print(f"lifted {m0.frame_count} frames; final-step residual "
          f"{result.per_step_residuals[0]:.3e} px")
    if args.fit:
        if skeleton is None:
            raise _UsageError("--fit requires a skeleton matching the motion's joint count")
        fitted = fit_skeleton(result.motion3d, skeleton, FitConfig())
        io.save_motion3d(fitted, out / "fitted.json")
        print(f"refined motion written to {out / 'fitted.json'}")
    print(f"motion written to {out / 'motion.json'}")
    return EXIT_OK


def _motion_files(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == ".json")
    return [path]


def cmd_eval(args) -> int:
    skeleton = get_skeleton(args.skeleton)
    rig = io.load_rig(args.rig) if args.rig else None
    pred_files = _motion_files(Path(args.pred))
    gt_files = _motion_files(Path(args.gt))
    if len(pred_files) != len(gt_files):
        raise _UsageError(
            f"{len(pred_files)} prediction file(s) vs {len(gt_files)} ground-truth file(s)")
    rows = []
    for pf, gf in zip(pred_files, gt_files):
        gt = io.load_motion3d(gf)
        skel = skeleton if skeleton.joint_count == gt.joint_count else None
        pred = io.load_motion3d(pf, skel)
        gt = io.load_motion3d(gf, skel)
        rows.append((pf.stem, evaluate_all(pred, gt, rig=rig)))
    csv = reports_to_csv(rows)
    print(csv, end="")
    if len(rows) == 1:
        print(rows[0][1].summary())
    if args.out:
        try:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(csv)
        except OSError as e:
            raise IoFailure(f"cannot write {args.out}: {e}") from e
    return EXIT_OK


def cmd_verify(args) -> int:
    samples, manifest = load_dataset(args.data)
    tol = args.tolerance
    failures = []

    def check(name: str, ok: bool, detail: str = ""):
        print(f"  [{'ok' if ok else 'FAIL'}] {name}{': ' + detail if detail else ''}")
        if not ok:
            failures.append(name)

    worst_proj, worst_rt, worst_dec, worst_pm = 0.0, 0.0, 0.0, 0.0
    for s in samples:
        coords2d = np.stack([project(cam, s.motion.coords) for cam in s.rig.cameras])
        stored2d = np.stack([v.coords for v in s.views_2d])
        worst_proj = max(worst_proj, float(np.abs(coords2d - stored2d).max()))
        decoded = np.stack([decode(d).coords for d in s.disentangled])
        worst_dec = max(worst_dec, float(np.abs(decoded - stored2d).max()))
        from .geometry import triangulate

        rt = triangulate(s.rig, decoded)
        worst_rt = max(worst_rt, float(np.abs(rt - s.motion.coords).max()))
        for v, pm in enumerate(s.pointmaps):
            if not pm.valid.any():
                continue
            cam = s.rig.cameras[v]
            cell = np.array([cam.image_w / pm.grid_w, cam.image_h / pm.grid_h])
            us = (np.arange(pm.grid_w) + 0.5) * cell[0]
            vs = (np.arange(pm.grid_h) + 0.5) * cell[1]
            uu, vv = np.meshgrid(us, vs)
            expect = np.stack([uu, vv], -1)
            repro = project(cam, pm.points[pm.valid])
            err = np.abs(repro - expect[pm.valid]) / cell
            worst_pm = max(worst_pm, float(err.max()))
    check("stored 2D equals projected motion", worst_proj < 1e-9, f"max {worst_proj:.2e} px")
    check("decode(encode) equals stored 2D", worst_dec < 1e-9, f"max {worst_dec:.2e} px")
    check("triangulated decode equals motion", worst_rt < tol, f"max {worst_rt:.2e} m")
    check("pointmaps reproject into their cells", worst_pm < 0.5,
          f"max {worst_pm:.3f} cell widths")
    skel_name = manifest.get("skeleton")
    if skel_name in SKELETONS:
        skel = get_skeleton(skel_name)
        nonroot = np.arange(skel.joint_count) != skel.root
        worst_bone = max(
            float(np.abs(np.linalg.norm(
                s.motion.coords - s.motion.coords[:, skel.parent], axis=-1)[:, nonroot]
                - skel.rest_bone_lengths[nonroot]).max())
            for s in samples)
        check("bone lengths match skeleton", worst_bone < 1e-6, f"max dev {worst_bone:.2e} m")
    print(f"verified {len(samples)} sample(s): "
          + ("all checks passed" if not failures else f"{len(failures)} check(s) FAILED"))
    if failures:
        raise MotionLiftError(f"dataset verification failed: {failures}")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "lift": cmd_lift,
    "eval": cmd_eval,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IoFailure as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except MotionLiftError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
