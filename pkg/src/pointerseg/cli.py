"""Command-line entry point.

Subcommands: gen-data, train, eval-single, eval-full, infer, render.
Every run key can come from --config FILE (key = value lines) or from
trailing key=value overrides; --help lists all keys with defaults.
On failure the exit code is nonzero, one diagnostic line goes to
stderr, and files written by the failed run are removed.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from . import pngio, render
from .cascade import segment_image
from .metrics import eval_full, eval_single
from .network import load_checkpoint, predict_mask
from .scenes import build_split, generate_scene
from .seeds import rng_for
from .train import train


class _Outputs:
    """Tracks files and directories created by a run for failure cleanup."""

    def __init__(self):
        self._files: list = []
        self._dirs: list = []

    def dir(self, path: str) -> str:
        parts = []
        probe = os.path.abspath(path)
        while probe and not os.path.isdir(probe):
            parts.append(probe)
            probe = os.path.dirname(probe)
        os.makedirs(path, exist_ok=True)
        self._dirs.extend(reversed(parts))
        return path

    def file(self, path: str) -> str:
        self._files.append(path)
        return path

    def discard(self) -> None:
        for path in self._files:
            try:
                os.unlink(path)
            except OSError:
                pass
        for path in reversed(self._dirs):
            try:
                os.rmdir(path)
            except OSError:
                pass


def _parse_pointer(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"pointer must be ROW,COL, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"pointer must be two integers, got {text!r}") from None


def _cfg(args) -> dict:
    return cfgmod.resolve(args.config, args.overrides, args.seed)


def _write_text(out: _Outputs, path: str, text: str) -> None:
    with open(out.file(path), "w", encoding="utf-8") as f:
        f.write(text)


def cmd_gen_data(args, out: _Outputs) -> None:
    cfg = _cfg(args)
    split = cfg["gen_split"]
    if split not in ("train", "eval"):
        raise ValueError(f"gen_split must be 'train' or 'eval', got {split!r}")
    scfg = cfgmod.scene_config(cfg, emit_unfamiliar=(split == "eval"))
    images = out.dir(os.path.join(args.out, "images"))
    annotations = out.dir(os.path.join(args.out, "annotations"))
    n = cfg["gen_count"]
    if n < 1:
        raise ValueError("gen_count must be at least 1")
    for i in range(n):
        scene = generate_scene(scfg, i)
        name = f"scene_{i:05d}.png"
        pngio.save_image_png(out.file(os.path.join(images, name)), scene.image)
        ann = os.path.join(annotations, name)
        out.file(os.path.splitext(ann)[0] + ".json")
        pngio.save_labelmap_png(out.file(ann), scene.labels)
    manifest = {"count": n, "split": split, "config": cfg}
    _write_text(out, os.path.join(args.out, "manifest.json"),
                json.dumps(manifest, sort_keys=True, indent=2, default=list) + "\n")
    print(f"wrote {n} scenes to {args.out}")


def cmd_train(args, out: _Outputs) -> None:
    cfg = _cfg(args)
    out.dir(args.out)
    train_stream, _ = build_split(
        cfgmod.scene_config(cfg), cfg["n_train_scenes"], cfg["n_eval_scenes"])
    tcfg = cfgmod.train_config(cfg)
    # register planned artifacts so an aborted run leaves nothing behind
    out.file(os.path.join(args.out, "model.psg"))
    out.file(os.path.join(args.out, "model.json"))
    out.file(os.path.join(args.out, "loss.csv"))
    if tcfg.checkpoint_every:
        for step in range(tcfg.checkpoint_every, tcfg.iterations,
                          tcfg.checkpoint_every):
            out.file(os.path.join(args.out, f"checkpoint_{step}.psg"))
            out.file(os.path.join(args.out, f"checkpoint_{step}.json"))

    def progress(step, loss):
        print(f"step {step}/{tcfg.iterations} loss {loss:.4f}", flush=True)

    _, losses = train(train_stream, tcfg, out_dir=args.out, progress=progress)
    print(f"trained {tcfg.iterations} steps; final loss {losses[-1][1]:.4f}; "
          f"model at {os.path.join(args.out, 'model.psg')}")


def _load_net(path):
    if not os.path.exists(path):
        raise ValueError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def cmd_eval_single(args, out: _Outputs) -> None:
    cfg = _cfg(args)
    net = _load_net(args.checkpoint)
    _, eval_stream = build_split(
        cfgmod.scene_config(cfg), cfg["n_train_scenes"], cfg["n_eval_scenes"])

    def predict(sample):
        logits = net.forward(sample.image, sample.pointer, sample.roi)
        return predict_mask(logits, sample.roi, cfg["threshold"])

    report = eval_single(
        predict, eval_stream, cfg["eval_samples"], seed=cfg["seed"],
        roi_mode_fraction=cfg["roi_mode_fraction"],
        connectivity=cfg["connectivity"],
        min_segment_area=cfg["min_segment_area"],
    )
    out.dir(args.out)
    _write_text(out, os.path.join(args.out, "single_report.csv"), report.to_csv())
    _write_text(out, os.path.join(args.out, "single_report.txt"), report.to_text())
    print(report.to_text())


def cmd_eval_full(args, out: _Outputs) -> None:
    cfg = _cfg(args)
    net = _load_net(args.checkpoint)
    _, eval_stream = build_split(
        cfgmod.scene_config(cfg), cfg["n_train_scenes"], cfg["n_eval_scenes"])
    ccfg = cfgmod.cascade_config(cfg, use_roi=False if args.no_roi else None)
    traces = []

    def segment(scene):
        rng = rng_for(cfg["seed"], "cascade", scene.index)
        labels, trace = segment_image(net, scene.image, ccfg, rng=rng)
        traces.append({"scene": scene.index, "steps": trace.steps})
        return labels, trace

    report = eval_full(segment, eval_stream, cfg["eval_scenes"])
    out.dir(args.out)
    _write_text(out, os.path.join(args.out, "full_report.csv"), report.to_csv())
    _write_text(out, os.path.join(args.out, "full_report.txt"), report.to_text())
    _write_text(out, os.path.join(args.out, "traces.json"),
                json.dumps(traces, indent=2) + "\n")
    print(report.to_text())


def cmd_infer(args, out: _Outputs) -> None:
    cfg = _cfg(args)
    net = _load_net(args.checkpoint)
    image = pngio.load_image_png(args.image)
    pointer = _parse_pointer(args.pointer)
    if args.roi is not None:
        roi = pngio.load_mask_png(args.roi)
    else:
        roi = np.ones(image.shape[1:], dtype=bool)
    logits = net.forward(image, pointer, roi)
    mask = predict_mask(logits, roi, cfg["threshold"])
    out.dir(args.out)
    pngio.save_mask_png(out.file(os.path.join(args.out, "mask.png")), mask)
    print(f"mask area {int(mask.sum())} of {mask.size} pixels "
          f"-> {os.path.join(args.out, 'mask.png')}")


def cmd_render(args, out: _Outputs) -> None:
    _cfg(args)  # reject unknown keys even where no key is consumed
    image = pngio.load_image_png(args.image)
    labels = pngio.load_labelmap_png(args.labels)
    blended = render.overlay(image, labels, alpha=args.alpha)
    out.dir(args.out)
    pngio.save_image_png(out.file(os.path.join(args.out, "overlay.png")), blended)
    print(f"wrote {os.path.join(args.out, 'overlay.png')}")


def _add_common(sub) -> None:
    sub.add_argument("--config", metavar="FILE", default=None,
                     help="config file of key = value lines")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the master seed")
    sub.add_argument("overrides", nargs="*", metavar="key=value",
                     help="config overrides, applied after --config")


def build_parser() -> argparse.ArgumentParser:
    epilog = "configuration keys (defaults shown):\n" + cfgmod.describe_keys()
    parser = argparse.ArgumentParser(
        prog="pointerseg",
        description="Pointer-conditioned segmentation of synthetic scenes.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name, help_text):
        p = subs.add_parser(
            name, help=help_text, epilog=epilog,
            formatter_class=argparse.RawDescriptionHelpFormatter)
        return p

    p = sub("gen-data", "write a scene dataset (images/ + annotations/)")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub("train", "train a model on generated scenes")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub("eval-single", "pointer-sample accuracy report on the eval split")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=cmd_eval_single)

    p = sub("eval-full", "full-image cascade report on the eval split")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--no-roi", action="store_true",
                   help="feed an all-ones ROI to the net at every step")
    _add_common(p)
    p.set_defaults(func=cmd_eval_full)

    p = sub("infer", "segment one pointed-at region of an image")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--image", required=True, metavar="FILE")
    p.add_argument("--pointer", required=True, metavar="ROW,COL")
    p.add_argument("--roi", default=None, metavar="FILE",
                   help="mask PNG restricting the prediction")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub("render", "overlay a label map on its image")
    p.add_argument("--image", required=True, metavar="FILE")
    p.add_argument("--labels", required=True, metavar="FILE")
    p.add_argument("--alpha", type=float, default=0.55)
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = _Outputs()
    try:
        args.func(args, out)
    except (ValueError, RuntimeError, OSError) as e:
        out.discard()
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
