"""Training loop: sample, forward, loss, backward, update.

Per-pixel binary cross-entropy over the whole output map, so the net
is also pushed to predict zeros outside the ROI.  One optimizer step
consumes batch_size samples (gradient accumulation; default 1).  A
NaN/Inf loss aborts with a dump of the offending sample rather than
training on garbage.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import ops
from .masks import iou
from .network import ArchConfig, PointerSegNet, predict_mask, save_checkpoint
from .sampling import TrainingSample, make_sample
from .optim import SGD
from .seeds import rng_for
from .tensor import Tensor, backward


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20000
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 1
    roi_mode_fraction: float = 0.8
    connectivity: int = 4
    min_segment_area: int = 4
    seed: int = 0
    checkpoint_every: int = 5000
    log_every: int = 200

    def __post_init__(self):
        if not 0.0 <= self.roi_mode_fraction <= 1.0:
            raise ValueError("roi_mode_fraction must lie in [0, 1]")
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be positive")
        if self.lr < 0.0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


def _loss_for_sample(net: PointerSegNet, sample: TrainingSample):
    logits = net.forward(sample.image, sample.pointer, sample.roi)
    target = Tensor(sample.target.astype(np.float32)[None])
    return ops.sigmoid_bce(logits, target)


def _dump_divergence(out_dir, step: int, sample: TrainingSample) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"diverged_step{step}.npz")
    np.savez(
        path,
        image=sample.image,
        pointer=np.array(sample.pointer),
        roi=sample.roi,
        target=sample.target,
    )
    return path


def train(stream, config: TrainConfig, out_dir=None, net: PointerSegNet | None = None,
          arch: ArchConfig = ArchConfig(), progress=None):
    """Run the loop over a scene stream; returns (net, loss curve).

    The loss curve is a list of (step, loss) pairs, one per optimizer
    step.  With out_dir set, also writes loss.csv, periodic
    checkpoint_<step>.psg files, and a final model.psg.
    """
    if len(stream) < 1:
        raise ValueError("training stream is empty")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    if net is None:
        net = PointerSegNet(arch, seed=config.seed)
    rng = rng_for(config.seed, "samples")
    opt = SGD(net.params, lr=config.lr, momentum=config.momentum)
    losses = []
    sample_idx = 0
    last_sample = None

    for step in range(1, config.iterations + 1):
        step_loss = 0.0
        for _ in range(config.batch_size):
            scene = stream[sample_idx % len(stream)]
            sample_idx += 1
            sample = make_sample(
                scene, rng,
                roi_mode_fraction=config.roi_mode_fraction,
                connectivity=config.connectivity,
                min_segment_area=config.min_segment_area,
            )
            last_sample = sample
            loss = _loss_for_sample(net, sample)
            if config.batch_size > 1:
                loss = ops.scale(loss, 1.0 / config.batch_size)
            backward(loss, net.params)
            step_loss += float(loss.data)
        if not np.isfinite(step_loss):
            dump = ""
            if out_dir is not None:
                dump = " sample dumped to " + _dump_divergence(out_dir, step, last_sample)
            raise RuntimeError(
                f"training diverged at step {step}: loss {step_loss};{dump}"
            )
        opt.step()
        losses.append((step, step_loss))
        if progress is not None and (step % config.log_every == 0 or step == 1):
            progress(step, step_loss)
        if out_dir is not None and config.checkpoint_every and \
                step % config.checkpoint_every == 0 and step < config.iterations:
            save_checkpoint(os.path.join(out_dir, f"checkpoint_{step}.psg"), net)

    if out_dir is not None:
        with open(os.path.join(out_dir, "loss.csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "loss"])
            writer.writerows(losses)
        save_checkpoint(os.path.join(out_dir, "model.psg"), net)
    return net, losses


def overfit_sample(sample: TrainingSample, iterations: int = 2000,
                   lr: float = 0.01, momentum: float = 0.9, seed: int = 0,
                   arch: ArchConfig = ArchConfig()):
    """Train on one fixed sample; returns (net, loss curve, final IOU)."""
    net = PointerSegNet(arch, seed=seed)
    opt = SGD(net.params, lr=lr, momentum=momentum)
    losses = []
    for step in range(1, iterations + 1):
        loss = _loss_for_sample(net, sample)
        if not np.isfinite(float(loss.data)):
            raise RuntimeError(f"overfit run diverged at step {step}")
        backward(loss, net.params)
        opt.step()
        losses.append((step, float(loss.data)))
    logits = net.forward(sample.image, sample.pointer, sample.roi)
    final_iou = iou(predict_mask(logits, sample.roi, arch.threshold), sample.target)
    return net, losses, final_iou
