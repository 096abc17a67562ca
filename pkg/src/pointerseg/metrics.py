"""Metric computation and report tables.

Two report shapes: single-segment evaluation (samples drawn exactly
like training samples, mean IOU binned by ROI-area fraction and by
target size, split familiar/unfamiliar and things/stuff) and full-image
evaluation (predicted label maps matched per-segment against ground
truth; IOU/precision/recall aggregated as pixel-area-weighted means,
weight |P| for IOU and precision, |G| for recall).

Matching is non-exclusive: every predicted segment is paired with the
ground-truth segment maximizing IOU (ties to the smaller gt id), and a
prediction overlapping nothing gets a null match that scores zero and
lands only in the "all" column, since it has no gt kind to attribute
it to.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .masks import LabelMap, coverage, iou as mask_iou
from .sampling import make_sample
from .seeds import rng_for

GROUPS = ("all", "familiar", "unfamiliar")
KINDS = ("all", "things", "stuff")


def roi_fraction_bin(fraction: float) -> int:
    """Decile bin 1..10; bin b covers fractions in ((b-1)/10, b/10]."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"roi fraction must lie in (0, 1], got {fraction}")
    return int(math.ceil(fraction * 10 - 1e-12))


def roi_bin_label(bin_index: int) -> str:
    return f"{bin_index * 10}%"


def size_bin_edges(total_area: int) -> list:
    """Geometric upper bounds 16, 32, 64, ... covering total_area."""
    edges = [16]
    while edges[-1] < total_area:
        edges.append(edges[-1] * 2)
    return edges


def size_bin(area: int, edges) -> int:
    for i, hi in enumerate(edges):
        if area <= hi:
            return i
    return len(edges) - 1


def size_bin_label(bin_index: int, edges) -> str:
    lo = 1 if bin_index == 0 else edges[bin_index - 1] + 1
    return f"{lo}-{edges[bin_index]}px"


class SingleSegReport:
    """Accumulated per-bin IOU means with sample counts."""

    def __init__(self, total_area: int):
        self.total_area = total_area
        self.size_edges = size_bin_edges(total_area)
        self._cells: dict = {}
        self.n_samples = 0

    def add(self, sample_iou: float, roi_fraction: float, target_area: int,
            familiar: bool, isthing: bool) -> None:
        self.n_samples += 1
        rbin = roi_fraction_bin(roi_fraction)
        sbin = size_bin(target_area, self.size_edges)
        groups = ("all", "familiar" if familiar else "unfamiliar")
        kinds = ("all", "things" if isthing else "stuff")
        for scheme, b in (("roi", rbin), ("size", sbin)):
            for g in groups:
                for k in kinds:
                    cell = self._cells.setdefault((scheme, b, g, k), [0.0, 0])
                    cell[0] += sample_iou
                    cell[1] += 1

    def count(self, scheme: str, bin_index: int, group: str = "all",
              kind: str = "all") -> int:
        return self._cells.get((scheme, bin_index, group, kind), (0.0, 0))[1]

    def mean_iou(self, scheme: str, bin_index: int, group: str = "all",
                 kind: str = "all") -> float:
        s, n = self._cells.get((scheme, bin_index, group, kind), (0.0, 0))
        if n == 0:
            raise ValueError(
                f"no samples in bin ({scheme}, {bin_index}, {group}, {kind})"
            )
        return s / n

    def bins(self, scheme: str) -> list:
        return sorted({b for (sc, b, _, _) in self._cells if sc == scheme})

    def _bin_label(self, scheme: str, b: int) -> str:
        return roi_bin_label(b) if scheme == "roi" else size_bin_label(b, self.size_edges)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["scheme", "bin", "group", "kind", "count", "mean_iou"])
        for scheme in ("roi", "size"):
            for b in self.bins(scheme):
                for g in GROUPS:
                    for k in KINDS:
                        n = self.count(scheme, b, g, k)
                        if n == 0:
                            continue
                        writer.writerow([
                            scheme, self._bin_label(scheme, b), g, k, n,
                            f"{self.mean_iou(scheme, b, g, k):.4f}",
                        ])
        return out.getvalue()

    def to_text(self) -> str:
        lines = []
        width = 14
        for scheme, title in (("roi", "ROI-area fraction"), ("size", "target size")):
            lines.append(f"mean IOU by {title} (cells: mean/count)")
            header = f"{'bin':>14} " + " ".join(
                f"{g + '/' + k:>{width}}" for g in GROUPS for k in KINDS
            )
            lines.append(header)
            for b in self.bins(scheme):
                row = [f"{self._bin_label(scheme, b):>14}"]
                for g in GROUPS:
                    for k in KINDS:
                        n = self.count(scheme, b, g, k)
                        cell = "-" if n == 0 else (
                            f"{self.mean_iou(scheme, b, g, k):.3f}/{n}")
                        row.append(f"{cell:>{width}}")
                lines.append(" ".join(row))
            lines.append("")
        return "\n".join(lines)


def eval_single(predict, stream, n_samples: int, seed: int = 0,
                roi_mode_fraction: float = 0.8, connectivity: int = 4,
                min_segment_area: int = 4) -> SingleSegReport:
    """Draw samples with the training protocol and score predict(sample).

    predict(sample) -> (H, W) bool mask.  Scenes are taken round-robin
    from the stream; the sample RNG derives from seed alone.
    """
    if len(stream) < 1:
        raise ValueError("eval stream is empty")
    if n_samples < 1:
        raise ValueError("need at least one eval sample")
    rng = rng_for(seed, "eval-single")
    first = stream[0]
    total_area = first.image.shape[1] * first.image.shape[2]
    report = SingleSegReport(total_area)
    for i in range(n_samples):
        scene = stream[i % len(stream)]
        sample = make_sample(
            scene, rng, roi_mode_fraction=roi_mode_fraction,
            connectivity=connectivity, min_segment_area=min_segment_area,
        )
        pred = np.asarray(predict(sample), dtype=bool)
        v = mask_iou(pred, sample.target)
        report.add(
            v,
            roi_fraction=float(sample.roi.sum()) / total_area,
            target_area=int(sample.target.sum()),
            familiar=sample.meta.familiar,
            isthing=sample.meta.isthing,
        )
    return report


def _confusion(pred: LabelMap, gt: LabelMap) -> np.ndarray:
    """counts[pid, gid] = number of cells carrying that id pair."""
    if pred.shape != gt.shape:
        raise ValueError(f"label map dimensions differ: {pred.shape} vs {gt.shape}")
    pmax = int(pred.ids.max(initial=0))
    gmax = int(gt.ids.max(initial=0))
    key = pred.ids.astype(np.int64).ravel() * (gmax + 1) + gt.ids.astype(np.int64).ravel()
    counts = np.bincount(key, minlength=(pmax + 1) * (gmax + 1))
    return counts.reshape(pmax + 1, gmax + 1)


def match_segments(pred: LabelMap, gt: LabelMap) -> list:
    """Best ground-truth match per predicted segment.

    Returns (pred_id, gt_id, iou) triples, one per predicted segment in
    id order; gt_id is None with iou 0.0 when the prediction overlaps
    no ground-truth segment.
    """
    conf = _confusion(pred, gt)
    pred_areas = conf.sum(axis=1)
    gt_areas = conf.sum(axis=0)
    out = []
    for pid in pred.segment_ids():
        best_gid = None
        best_iou = 0.0
        for gid in gt.segment_ids():
            inter = int(conf[pid, gid])
            if inter == 0:
                continue
            union = int(pred_areas[pid]) + int(gt_areas[gid]) - inter
            v = inter / union
            if v > best_iou:
                best_iou = v
                best_gid = gid
        out.append((pid, best_gid, best_iou))
    return out


@dataclass
class _Weighted:
    total: float = 0.0
    weight: float = 0.0

    def add(self, value: float, weight: float) -> None:
        self.total += value * weight
        self.weight += weight

    def mean(self) -> float:
        if self.weight == 0:
            return 0.0
        return self.total / self.weight


class FullImageReport:
    def __init__(self):
        self._iou = {k: _Weighted() for k in KINDS}
        self._precision = {k: _Weighted() for k in KINDS}
        self._recall = {k: _Weighted() for k in KINDS}
        self.n_scenes = 0
        self.total_steps = 0
        self.fallback_steps = 0
        self._coverage_sum = 0.0

    def add_scene(self, pred: LabelMap, gt: LabelMap, trace=None) -> None:
        conf = _confusion(pred, gt)
        pred_areas = conf.sum(axis=1)
        gt_areas = conf.sum(axis=0)
        for pid, gid, pair_iou in match_segments(pred, gt):
            p_area = float(pred_areas[pid])
            if gid is None:
                self._iou["all"].add(0.0, p_area)
                self._precision["all"].add(0.0, p_area)
                continue
            inter = float(conf[pid, gid])
            g_area = float(gt_areas[gid])
            kind = "things" if gt.segments[gid].isthing else "stuff"
            for k in ("all", kind):
                self._iou[k].add(pair_iou, p_area)
                self._precision[k].add(inter / p_area, p_area)
                self._recall[k].add(inter / g_area, g_area)
        self.n_scenes += 1
        self._coverage_sum += coverage(pred)
        if trace is not None:
            self.total_steps += len(trace.steps)
            self.fallback_steps += sum(s["fallback"] for s in trace.steps)

    def iou(self, kind: str = "all") -> float:
        return self._iou[kind].mean()

    def precision(self, kind: str = "all") -> float:
        return self._precision[kind].mean()

    def recall(self, kind: str = "all") -> float:
        return self._recall[kind].mean()

    def fallback_rate(self) -> float:
        return self.fallback_steps / self.total_steps if self.total_steps else 0.0

    def mean_steps(self) -> float:
        return self.total_steps / self.n_scenes if self.n_scenes else 0.0

    def mean_coverage(self) -> float:
        return self._coverage_sum / self.n_scenes if self.n_scenes else 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["metric", "kind", "value"])
        for name, fn in (("iou", self.iou), ("precision", self.precision),
                         ("recall", self.recall)):
            for k in KINDS:
                writer.writerow([name, k, f"{fn(k):.4f}"])
        writer.writerow(["fallback_rate", "-", f"{self.fallback_rate():.4f}"])
        writer.writerow(["mean_steps", "-", f"{self.mean_steps():.2f}"])
        writer.writerow(["mean_coverage", "-", f"{self.mean_coverage():.4f}"])
        writer.writerow(["n_scenes", "-", str(self.n_scenes)])
        return out.getvalue()

    def to_text(self) -> str:
        lines = [f"{'':>10} {'all':>8} {'things':>8} {'stuff':>8}"]
        for name, fn in (("iou", self.iou), ("precision", self.precision),
                         ("recall", self.recall)):
            lines.append(
                f"{name:>10} " + " ".join(f"{fn(k):>8.4f}" for k in KINDS)
            )
        lines.append(
            f"scenes {self.n_scenes}, mean steps {self.mean_steps():.1f}, "
            f"fallback rate {self.fallback_rate():.3f}, "
            f"mean coverage {self.mean_coverage():.3f}"
        )
        return "\n".join(lines)


def eval_full(segment, stream, n_scenes: int) -> FullImageReport:
    """Score a full-image segmenter over the first n_scenes of a stream.

    segment(scene) -> (LabelMap, trace-or-None).
    """
    if len(stream) < 1:
        raise ValueError("eval stream is empty")
    if n_scenes < 1:
        raise ValueError("need at least one eval scene")
    report = FullImageReport()
    for i in range(n_scenes):
        scene = stream[i % len(stream)]
        pred, trace = segment(scene)
        report.add_scene(pred, scene.labels, trace)
    return report
