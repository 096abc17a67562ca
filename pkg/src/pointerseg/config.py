"""Flat key=value run configuration.

One schema covers data generation, training, and both evaluations.
Values come from (lowest to highest precedence) built-in defaults, a
config file of `key = value` lines, then command-line `key=value`
overrides.  Unknown keys are rejected by name, never ignored.
"""

from .cascade import CascadeConfig
from .scenes import SceneConfig
from .train import TrainConfig


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_names(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


# key -> (parser, default, help)
SCHEMA = {
    "seed": (int, 0, "master seed; every random stream derives from it"),
    "height": (int, 64, "scene height in pixels (multiple of 64)"),
    "width": (int, 64, "scene width in pixels (multiple of 64)"),
    "things_min": (int, 2, "minimum shapes per scene"),
    "things_max": (int, 6, "maximum shapes per scene"),
    "bands_min": (int, 1, "minimum background bands per scene"),
    "bands_max": (int, 3, "maximum background bands per scene"),
    "noise": (float, 0.02, "pixel noise sigma"),
    "color_jitter": (float, 0.08, "per-segment color jitter range"),
    "holdout": (_parse_names, ("ring", "cross", "gradient"),
                "comma-separated class names excluded from training"),
    "wrap_things": (_parse_bool, False, "rasterize shapes in wrapped coordinates"),
    "n_train_scenes": (int, 512, "distinct training scenes"),
    "n_eval_scenes": (int, 400, "distinct evaluation scenes"),
    "gen_count": (int, 100, "scenes written by gen-data"),
    "gen_split": (str, "eval", "gen-data variant: train (familiar only) or eval"),
    "iterations": (int, 20000, "optimizer steps"),
    "lr": (float, 0.01, "learning rate"),
    "momentum": (float, 0.9, "classical momentum coefficient"),
    "batch_size": (int, 1, "samples accumulated per optimizer step"),
    "roi_mode_fraction": (float, 0.8,
                          "fraction of samples with a segment-exclusion ROI"),
    "connectivity": (int, 4, "stuff component connectivity: 4 or 8"),
    "min_segment_area": (int, 4, "segments below this area are never selected"),
    "checkpoint_every": (int, 5000, "periodic checkpoint interval (0 = off)"),
    "log_every": (int, 200, "progress print interval in steps"),
    "coverage_stop": (float, 0.95, "cascade stops at this labeled fraction"),
    "max_steps": (int, 0, "cascade step cap (0 = image area)"),
    "use_roi": (_parse_bool, True, "feed the shrinking ROI to the net"),
    "cascade_min_area": (int, 1, "predictions below this area fall back to a pixel"),
    "eval_samples": (int, 16000, "samples drawn by eval-single"),
    "eval_scenes": (int, 100, "scenes cascaded by eval-full"),
    "threshold": (float, 0.5, "mask binarization threshold"),
}


def defaults() -> dict:
    return {k: v for k, (_, v, _) in SCHEMA.items()}


def describe_keys() -> str:
    lines = []
    for key, (_, default, help_text) in SCHEMA.items():
        if isinstance(default, tuple):
            default = ",".join(default)
        lines.append(f"  {key} = {default}")
        lines.append(f"      {help_text}")
    return "\n".join(lines)


def _apply(cfg: dict, key: str, raw: str, origin: str) -> None:
    if key not in SCHEMA:
        raise ValueError(f"unknown config key {key!r} (from {origin})")
    parser = SCHEMA[key][0]
    try:
        cfg[key] = parser(raw)
    except ValueError as e:
        raise ValueError(f"bad value for {key!r} (from {origin}): {e}") from None


def load_config_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment; blank lines skipped."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            _apply(out, key.strip(), value.strip(), f"{path}:{lineno}")
    return out


def resolve(config_path=None, overrides=(), seed=None) -> dict:
    """defaults <- config file <- key=value overrides <- --seed."""
    cfg = defaults()
    if config_path is not None:
        cfg.update(load_config_file(config_path))
    staged: dict = {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        _apply(staged, key.strip(), value.strip(), "command line")
    cfg.update(staged)
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def scene_config(cfg: dict, emit_unfamiliar: bool = True) -> SceneConfig:
    return SceneConfig(
        height=cfg["height"],
        width=cfg["width"],
        holdout=frozenset(cfg["holdout"]),
        things_range=(cfg["things_min"], cfg["things_max"]),
        bands_range=(cfg["bands_min"], cfg["bands_max"]),
        noise=cfg["noise"],
        color_jitter=cfg["color_jitter"],
        emit_unfamiliar=emit_unfamiliar,
        wrap_things=cfg["wrap_things"],
        seed=cfg["seed"],
    )


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        iterations=cfg["iterations"],
        lr=cfg["lr"],
        momentum=cfg["momentum"],
        batch_size=cfg["batch_size"],
        roi_mode_fraction=cfg["roi_mode_fraction"],
        connectivity=cfg["connectivity"],
        min_segment_area=cfg["min_segment_area"],
        seed=cfg["seed"],
        checkpoint_every=cfg["checkpoint_every"],
        log_every=cfg["log_every"],
    )


def cascade_config(cfg: dict, use_roi=None) -> CascadeConfig:
    return CascadeConfig(
        coverage_stop=cfg["coverage_stop"],
        max_steps=cfg["max_steps"] or None,
        use_roi=cfg["use_roi"] if use_roi is None else use_roi,
        min_segment_area=cfg["cascade_min_area"],
        seed=cfg["seed"],
    )
