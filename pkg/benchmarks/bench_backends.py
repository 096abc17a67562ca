"""Compare the numba conv kernels against the pure-numpy build.

Times each conv shape the 64x64 net actually runs (forward, input
gradient, weight gradient), then a full optimizer step with either
kernel set swapped into the live dispatch.  Run from the repo root:

    python3 benchmarks/bench_backends.py [--steps 30] [--repeats 50]
"""

import argparse
import time

import numpy as np

from pointerseg import kernels, kernels_numba, kernels_numpy
from pointerseg.network import ArchConfig, PointerSegNet
from pointerseg.optim import SGD
from pointerseg.sampling import make_sample
from pointerseg.scenes import SceneConfig, generate_scene
from pointerseg.seeds import rng_for
from pointerseg.tensor import backward
from pointerseg.train import _loss_for_sample

# (label, x_shape, w_shape, stride, pad) for every conv in the default net
NET_SHAPES = [
    ("stem 3>16", (1, 3, 64, 64), (16, 3, 3, 3), 1, 1),
    ("pointer 1>16", (1, 1, 64, 64), (16, 1, 3, 3), 1, 1),
    ("enc0 16>32 s2", (1, 16, 64, 64), (32, 16, 3, 3), 2, 1),
    ("enc0 32>32", (1, 32, 32, 32), (32, 32, 3, 3), 1, 1),
    ("enc0 skip 1x1", (1, 16, 64, 64), (32, 16, 1, 1), 2, 0),
    ("enc1 32>64 s2", (1, 32, 32, 32), (64, 32, 3, 3), 2, 1),
    ("enc1 64>64", (1, 64, 16, 16), (64, 64, 3, 3), 1, 1),
    ("enc2 64>64 s2", (1, 64, 16, 16), (64, 64, 3, 3), 2, 1),
    ("enc2 64>64", (1, 64, 8, 8), (64, 64, 3, 3), 1, 1),
    ("psp fuse 128>64", (1, 128, 8, 8), (64, 128, 3, 3), 1, 1),
    ("dec0 64>32", (1, 64, 16, 16), (32, 64, 3, 3), 1, 1),
    ("dec1 32>16", (1, 32, 32, 32), (16, 32, 3, 3), 1, 1),
    ("dec2 16>8", (1, 16, 64, 64), (8, 16, 3, 3), 1, 1),
    ("head 8>1", (1, 8, 64, 64), (1, 8, 1, 1), 1, 0),
]

BACKENDS = {"numba": kernels_numba, "numpy": kernels_numpy}


def _time(fn, repeats: int) -> float:
    fn()  # warm (also triggers jit compilation)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e3


def bench_kernels(repeats: int) -> None:
    print(f"per-kernel times, ms mean of {repeats} runs (numpy / numba / speedup)")
    header = f"{'shape':<18}" + "".join(f"{p:>28}" for p in ("forward", "grad input", "grad weight"))
    print(header)
    rng = np.random.default_rng(0)
    totals = {("numpy", p): 0.0 for p in range(3)}
    totals.update({("numba", p): 0.0 for p in range(3)})
    for label, xs, ws, stride, pad in NET_SHAPES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        b = rng.standard_normal(ws[0]).astype(np.float32)
        y = kernels_numpy.conv2d_forward(x, w, b, stride, pad)
        gy = rng.standard_normal(y.shape).astype(np.float32)
        cells = []
        for part in range(3):
            times = {}
            for name, mod in BACKENDS.items():
                if part == 0:
                    fn = lambda m=mod: m.conv2d_forward(x, w, b, stride, pad)
                elif part == 1:
                    fn = lambda m=mod: m.conv2d_backward_input(
                        gy, w, stride, pad, xs[2], xs[3])
                else:
                    fn = lambda m=mod: m.conv2d_backward_weight(
                        gy, x, stride, pad, ws[2], ws[3])
                times[name] = _time(fn, repeats)
                totals[(name, part)] += times[name]
            cells.append(
                f"{times['numpy']:>9.3f} /{times['numba']:>7.3f} "
                f"{times['numpy'] / times['numba']:>6.1f}x"
            )
        print(f"{label:<18}" + "".join(f"{c:>28}" for c in cells))
    cells = []
    for part in range(3):
        np_t, nb_t = totals[("numpy", part)], totals[("numba", part)]
        cells.append(f"{np_t:>9.3f} /{nb_t:>7.3f} {np_t / nb_t:>6.1f}x")
    print(f"{'TOTAL':<18}" + "".join(f"{c:>28}" for c in cells))


def bench_training_step(steps: int) -> None:
    scene = generate_scene(SceneConfig(seed=7), 0)
    print(f"\nfull optimizer step on a 64x64 scene, ms mean of {steps} steps")
    results = {}
    for name, mod in BACKENDS.items():
        kernels.conv2d_forward = mod.conv2d_forward
        kernels.conv2d_backward_input = mod.conv2d_backward_input
        kernels.conv2d_backward_weight = mod.conv2d_backward_weight
        net = PointerSegNet(ArchConfig(), seed=0)
        opt = SGD(net.params, lr=0.01, momentum=0.9)
        rng = rng_for(0, "bench")

        def one_step():
            sample = make_sample(scene, rng)
            loss = _loss_for_sample(net, sample)
            backward(loss, net.params)
            opt.step()

        one_step()  # warm
        start = time.perf_counter()
        for _ in range(steps):
            one_step()
        results[name] = (time.perf_counter() - start) / steps * 1e3
        print(f"  {name:<6} {results[name]:8.2f} ms/step")
    print(f"  speedup {results['numpy'] / results['numba']:.1f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50,
                        help="timed runs per kernel shape")
    parser.add_argument("--steps", type=int, default=30,
                        help="timed optimizer steps per backend")
    args = parser.parse_args()
    bench_kernels(args.repeats)
    bench_training_step(args.steps)


if __name__ == "__main__":
    main()
