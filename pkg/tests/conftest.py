"""Shared fixtures.

The desk-scale trained model is expensive (minutes), so it is built
once per session and shared by the acceptance tests and the trained-
model behavior tests.  Set POINTERSEG_TEST_CHECKPOINT=/path/model.psg
to reuse a saved desk-scale checkpoint instead of retraining (the
acceptance output then reports the training time as reused).
"""

import os
import time

import pytest

from pointerseg.metrics import eval_single
from pointerseg.network import load_checkpoint, predict_mask
from pointerseg.scenes import SceneConfig, build_split
from pointerseg.train import TrainConfig, train

N_TRAIN_SCENES = 512
N_EVAL_SCENES = 400
N_EVAL_SAMPLES = 16000


@pytest.fixture(scope="session")
def desk_run():
    """Trained desk-scale net + streams + wall-clock training time."""
    scfg = SceneConfig()
    train_stream, eval_stream = build_split(scfg, N_TRAIN_SCENES, N_EVAL_SCENES)
    reused = os.environ.get("POINTERSEG_TEST_CHECKPOINT", "")
    t0 = time.time()
    if reused:
        net = load_checkpoint(reused)
    else:
        net, _ = train(train_stream, TrainConfig())
    train_seconds = time.time() - t0
    return {
        "net": net,
        "train_stream": train_stream,
        "eval_stream": eval_stream,
        "train_seconds": train_seconds,
        "reused_checkpoint": reused,
    }


@pytest.fixture(scope="session")
def desk_report(desk_run):
    """Pointer-sample eval report over the desk eval split (+ its runtime)."""
    net = desk_run["net"]

    def predict(sample):
        logits = net.forward(sample.image, sample.pointer, sample.roi)
        return predict_mask(logits, sample.roi)

    t0 = time.time()
    report = eval_single(predict, desk_run["eval_stream"], N_EVAL_SAMPLES)
    return {"report": report, "eval_seconds": time.time() - t0}
