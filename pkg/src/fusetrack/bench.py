"""Dataset ingestion, synthetic sequences, one-pass evaluation and reports.

Sequences follow the common benchmark layout: an ``img/`` folder of numbered
frames next to a ``groundtruth_rect.txt`` with one corner-based, 1-indexed
``x, y, w, h`` rectangle per frame (comma, tab or space separated).  An
optional ``attributes.txt`` sidecar carries challenge tags.
"""

from __future__ import annotations

import csv
import json
import math
import re
import time
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .features import BoundingBox, extract_patch
from .tracker import Diagnostics, TrackerConfig, init_tracker, step

OTB_ATTRIBUTES = ("IV", "OPR", "SV", "OCC", "DEF", "MB", "FM", "IPR", "OV", "BC", "LR")
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


@dataclass
class Sequence:
    """Ordered frames with per-frame ground truth and optional tags."""

    name: str
    boxes: np.ndarray  # (n, 4) corner-based 1-indexed x, y, w, h
    frame_paths: list[Path] | None = None
    frames: list[np.ndarray] | None = None
    attributes: tuple[str, ...] = ()
    flagged: tuple[int, ...] = ()  # ground-truth rows with non-positive extents

    def __len__(self) -> int:
        return len(self.boxes)

    def frame(self, i: int) -> np.ndarray:
        if self.frames is not None:
            return self.frames[i]
        return np.asarray(Image.open(self.frame_paths[i]).convert("RGB"))


def _frame_sort_key(path: Path):
    digits = re.sub(r"\D", "", path.stem)
    return (int(digits) if digits else 0, path.stem)


def load_otb_sequence(seq_dir) -> Sequence:
    """Load one benchmark sequence directory.

    Rows whose extents are not positive are kept but recorded in
    ``flagged`` so downstream consumers can decide what to do with them.
    """
    seq_dir = Path(seq_dir)
    img_dir = seq_dir / "img"
    gt_path = seq_dir / "groundtruth_rect.txt"
    if not img_dir.is_dir():
        raise FileNotFoundError(f"{seq_dir}: missing img/ directory")
    if not gt_path.is_file():
        raise FileNotFoundError(f"{seq_dir}: missing groundtruth_rect.txt")

    frame_paths = sorted(
        (p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=_frame_sort_key,
    )
    if not frame_paths:
        raise FileNotFoundError(f"{img_dir}: no image files")

    boxes: list[list[float]] = []
    flagged: list[int] = []
    for ln, raw in enumerate(gt_path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = re.split(r"[,\t ]+", line)
        if len(parts) != 4:
            raise ValueError(f"{gt_path}: line {ln}: expected 4 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ValueError(f"{gt_path}: line {ln}: unparsable value") from None
        if vals[2] <= 0 or vals[3] <= 0:
            flagged.append(len(boxes))
        boxes.append(vals)
    if len(boxes) != len(frame_paths):
        raise ValueError(
            f"{seq_dir}: {len(boxes)} ground-truth rows but {len(frame_paths)} frames"
        )

    attributes: tuple[str, ...] = ()
    attr_path = seq_dir / "attributes.txt"
    if attr_path.is_file():
        attributes = tuple(t for t in re.split(r"[,\s]+", attr_path.read_text()) if t)

    return Sequence(
        seq_dir.name,
        np.asarray(boxes, dtype=np.float64),
        frame_paths=frame_paths,
        attributes=attributes,
        flagged=tuple(flagged),
    )


def save_sequence(seq: Sequence, out_dir) -> Path:
    """Write a sequence to disk in the benchmark layout (PNG frames)."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for i in range(len(seq)):
        Image.fromarray(seq.frame(i).astype(np.uint8)).save(img_dir / f"{i + 1:04d}.png")
    lines = [",".join(f"{v:.10g}" for v in row) for row in seq.boxes]
    (out_dir / "groundtruth_rect.txt").write_text("\n".join(lines) + "\n")
    if seq.attributes:
        (out_dir / "attributes.txt").write_text(" ".join(seq.attributes) + "\n")
    return out_dir


# ---------------------------------------------------------------------------
# synthetic sequences


@dataclass
class SynthSpec:
    """Script for a deterministic synthetic sequence.

    Events (applied per frame ``t``, 0-based):
      ("translate", dx, dy, start, end)   velocity while start <= t < end
      ("scale", factor, start, end)       per-frame size factor in the range
      ("gain", g, start)                  intensity gain from frame start on
      ("occlude", fraction, start, dur)   cover the target while active
      ("clutter", count)                  textured distractors in the background
    """

    canvas_w: int = 320
    canvas_h: int = 240
    num_frames: int = 60
    target_w: int = 40
    target_h: int = 40
    start_x: float | None = None
    start_y: float | None = None
    seed: int = 0
    name: str = "synthetic"
    events: list[tuple] = field(default_factory=list)

    @classmethod
    def from_file(cls, path) -> "SynthSpec":
        spec = cls()
        ints = {"canvas_w", "canvas_h", "num_frames", "target_w", "target_h", "seed"}
        for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.+)$", line)
            if not m:
                raise ValueError(f"{path}: line {ln}: expected 'key = value'")
            key, val = m.group(1), m.group(2).strip()
            if key == "event":
                spec.events.append(_parse_event(val, f"{path}: line {ln}"))
            elif key in ints:
                setattr(spec, key, int(val))
            elif key in ("start_x", "start_y"):
                setattr(spec, key, float(val))
            elif key == "name":
                spec.name = val
            else:
                raise ValueError(f"{path}: line {ln}: unknown key '{key}'")
        return spec


def _parse_event(text: str, where: str) -> tuple:
    parts = text.split()
    kind, args = parts[0], parts[1:]
    try:
        if kind == "translate":
            dx, dy = float(args[0]), float(args[1])
            start = int(args[2]) if len(args) > 2 else 1
            end = int(args[3]) if len(args) > 3 else 10**9
            return ("translate", dx, dy, start, end)
        if kind == "scale":
            factor = float(args[0])
            start = int(args[1]) if len(args) > 1 else 1
            end = int(args[2]) if len(args) > 2 else 10**9
            return ("scale", factor, start, end)
        if kind == "gain":
            return ("gain", float(args[0]), int(args[1]))
        if kind == "occlude":
            return ("occlude", float(args[0]), int(args[1]), int(args[2]))
        if kind == "clutter":
            return ("clutter", int(args[0]))
    except (IndexError, ValueError):
        raise ValueError(f"{where}: bad arguments for event '{kind}'") from None
    raise ValueError(f"{where}: unknown event '{kind}'")


def _smooth_noise(rng, h, w, tint, spread, coarse=4) -> np.ndarray:
    ch = max(2, int(math.ceil(h / coarse)) + 1)
    cw = max(2, int(math.ceil(w / coarse)) + 1)
    noise = rng.uniform(-1.0, 1.0, size=(ch, cw, 3)) * spread + np.asarray(tint, dtype=np.float64)
    grid = BoundingBox((cw - 1) / 2.0, (ch - 1) / 2.0, cw, ch)
    return np.clip(extract_patch(noise, grid, w, h), 0.0, 255.0)


def _resize_texture(tex: np.ndarray, w: int, h: int) -> np.ndarray:
    th, tw = tex.shape[:2]
    grid = BoundingBox((tw - 1) / 2.0, (th - 1) / 2.0, tw, th)
    return extract_patch(tex, grid, w, h)


def synth_sequence(spec: SynthSpec) -> Sequence:
    """Render the scripted sequence; deterministic for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.canvas_h, spec.canvas_w
    background = _smooth_noise(rng, h, w, tint=(95, 110, 135), spread=55)
    target_tex = _smooth_noise(rng, spec.target_h, spec.target_w, tint=(185, 90, 60), spread=120, coarse=2)
    occ_tex = _smooth_noise(rng, spec.target_h * 2, spec.target_w * 2, tint=(60, 150, 80), spread=40, coarse=3)

    cx = spec.start_x if spec.start_x is not None else (w - 1) / 2.0
    cy = spec.start_y if spec.start_y is not None else (h - 1) / 2.0
    tw, th = float(spec.target_w), float(spec.target_h)

    for ev in spec.events:
        if ev[0] == "clutter":
            for _ in range(ev[1]):
                for _attempt in range(50):
                    dw = int(rng.integers(spec.target_w // 2, spec.target_w + 1))
                    dh = int(rng.integers(spec.target_h // 2, spec.target_h + 1))
                    dx = int(rng.integers(0, max(w - dw, 1)))
                    dy = int(rng.integers(0, max(h - dh, 1)))
                    # keep distractors off the initial target
                    if abs(dx + dw / 2 - cx) > tw or abs(dy + dh / 2 - cy) > th:
                        break
                tex = _smooth_noise(rng, dh, dw, tint=(170, 100, 70), spread=100, coarse=2)
                background[dy : dy + dh, dx : dx + dw] = tex

    frames: list[np.ndarray] = []
    boxes: list[list[float]] = []
    for t in range(spec.num_frames):
        if t > 0:
            for ev in spec.events:
                if ev[0] == "translate" and ev[3] <= t < ev[4]:
                    cx += ev[1]
                    cy += ev[2]
                elif ev[0] == "scale" and ev[2] <= t < ev[3]:
                    tw *= ev[1]
                    th *= ev[1]
        gain = 1.0
        for ev in spec.events:
            if ev[0] == "gain" and t >= ev[2]:
                gain *= ev[1]

        canvas = background * gain
        iw, ih = max(int(round(tw)), 1), max(int(round(th)), 1)
        tx = int(round(cx - (iw - 1) / 2.0))
        ty = int(round(cy - (ih - 1) / 2.0))
        if tx < 0 or ty < 0 or tx + iw > w or ty + ih > h:
            raise ValueError(f"target leaves the canvas at frame {t}")
        canvas[ty : ty + ih, tx : tx + iw] = _resize_texture(target_tex, iw, ih) * gain

        for ev in spec.events:
            if ev[0] == "occlude" and ev[2] <= t < ev[2] + ev[3]:
                frac = min(max(ev[1], 0.0), 1.0)
                ow = max(int(round(iw * math.sqrt(frac))), 1)
                oh = max(int(round(ih * math.sqrt(frac))), 1)
                ox = tx + (iw - ow) // 2
                oy = ty + (ih - oh) // 2
                canvas[oy : oy + oh, ox : ox + ow] = _resize_texture(occ_tex, ow, oh) * gain

        frames.append(np.clip(canvas, 0.0, 255.0).astype(np.uint8))
        boxes.append([tx + 1.0, ty + 1.0, float(iw), float(ih)])

    return Sequence(spec.name, np.asarray(boxes), frames=frames)


def scenario_specs(seed: int = 7) -> dict[str, SynthSpec]:
    """Canned desk-scale scenarios: static, motion, illumination, occlusion, zoom."""
    return {
        "static": SynthSpec(num_frames=100, seed=seed, name="static"),
        "velocity": SynthSpec(
            num_frames=50, start_x=60.0, seed=seed + 1, name="velocity",
            events=[("translate", 4.0, 0.0, 1, 50)],
        ),
        "illumination": SynthSpec(
            num_frames=100, seed=seed + 2, name="illumination",
            events=[("gain", 1.3, 50)],
        ),
        "occlusion": SynthSpec(
            num_frames=80, seed=seed + 3, name="occlusion",
            events=[("occlude", 1.0, 45, 5)],
        ),
        "zoom": SynthSpec(
            num_frames=60, seed=seed + 4, name="zoom",
            events=[("scale", 1.02, 1, 60)],
        ),
    }


# ---------------------------------------------------------------------------
# one-pass evaluation


@dataclass
class TrackRun:
    """Trajectory plus timing of one one-pass run."""

    boxes: np.ndarray  # (n, 4) corner-based 1-indexed, row 0 is the init box
    diagnostics: list[Diagnostics]
    fps: float
    seconds: float


def run_ope(config: TrackerConfig, seq: Sequence) -> TrackRun:
    """Initialize from ground truth frame 0 and track through the sequence.

    Wall-clock covers the per-frame update calls only, not image decode.
    """
    if len(seq) == 0:
        raise ValueError(f"sequence {seq.name} is empty")
    x, y, w, h = seq.boxes[0]
    if w <= 0 or h <= 0:
        raise ValueError(f"sequence {seq.name}: degenerate ground truth on frame 0")
    state = init_tracker(seq.frame(0), BoundingBox.from_xywh(x, y, w, h, one_based=True), config)

    out = [state.box().to_xywh(one_based=True)]
    diags: list[Diagnostics] = []
    elapsed = 0.0
    for i in range(1, len(seq)):
        frame = seq.frame(i)
        t0 = time.perf_counter()
        try:
            state, bb, diag = step(state, frame)
        except Exception as err:
            raise RuntimeError(f"sequence {seq.name}: step failed at frame {i}: {err}") from err
        elapsed += time.perf_counter() - t0
        out.append(bb.to_xywh(one_based=True))
        diags.append(diag)
    steps = len(seq) - 1
    fps = steps / elapsed if elapsed > 0 else 0.0
    return TrackRun(np.asarray(out), diags, fps, elapsed)


# ---------------------------------------------------------------------------
# metrics


def box_centers(boxes: np.ndarray) -> np.ndarray:
    b = np.asarray(boxes, dtype=np.float64)
    return np.stack([b[:, 0] + (b[:, 2] - 1) / 2.0, b[:, 1] + (b[:, 3] - 1) / 2.0], axis=1)


def iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection over union of corner-based boxes, row-wise."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    left = np.maximum(a[:, 0], b[:, 0])
    right = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2])
    top = np.maximum(a[:, 1], b[:, 1])
    bottom = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3])
    inter = np.maximum(0.0, right - left) * np.maximum(0.0, bottom - top)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    return np.clip(np.where(union > 0, inter / union, 0.0), 0.0, 1.0)


def precision_curve(traj: np.ndarray, gt: np.ndarray, max_thresh: int = 50):
    """Center-error curve: fraction of frames with CPE <= t for t in 0..max.

    Returns (thresholds, curve, precision@20, per-frame CPE).
    """
    traj = np.asarray(traj, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if traj.shape != gt.shape:
        raise ValueError(f"trajectory {traj.shape} vs ground truth {gt.shape}")
    cpe = np.sqrt(((box_centers(traj) - box_centers(gt)) ** 2).sum(axis=1))
    thresholds = np.arange(max_thresh + 1, dtype=np.float64)
    curve = (cpe[None, :] <= thresholds[:, None]).mean(axis=1)
    return thresholds, curve, float(curve[min(20, max_thresh)]), cpe


def success_curve(traj: np.ndarray, gt: np.ndarray):
    """Overlap curve over 51 thresholds in [0, 1] and its mean (the AUC).

    Returns (thresholds, curve, auc, per-frame IoU).
    """
    traj = np.asarray(traj, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if traj.shape != gt.shape:
        raise ValueError(f"trajectory {traj.shape} vs ground truth {gt.shape}")
    overlaps = iou(traj, gt)
    thresholds = np.linspace(0.0, 1.0, 51)
    curve = (overlaps[None, :] >= thresholds[:, None]).mean(axis=1)
    return thresholds, curve, float(curve.mean()), overlaps


@dataclass
class EvalReport:
    """Per-sequence metrics of one run."""

    name: str
    precision_thresholds: np.ndarray
    precision: np.ndarray
    precision_at_20: float
    success_thresholds: np.ndarray
    success: np.ndarray
    success_auc: float
    cpe: np.ndarray
    overlap: np.ndarray
    fps: float
    attributes: tuple[str, ...] = ()
    diagnostics: list[Diagnostics] = field(default_factory=list)
    flagged: tuple[int, ...] = ()
    boxes: np.ndarray | None = None


def evaluate(seq: Sequence, run: TrackRun) -> EvalReport:
    pt, pc, p20, cpe = precision_curve(run.boxes, seq.boxes)
    st, sc, auc, ov = success_curve(run.boxes, seq.boxes)
    return EvalReport(
        name=seq.name,
        precision_thresholds=pt,
        precision=pc,
        precision_at_20=p20,
        success_thresholds=st,
        success=sc,
        success_auc=auc,
        cpe=cpe,
        overlap=ov,
        fps=run.fps,
        attributes=seq.attributes,
        diagnostics=run.diagnostics,
        flagged=seq.flagged,
        boxes=run.boxes,
    )


# ---------------------------------------------------------------------------
# reports


def _write_curve(path: Path, thresholds: np.ndarray, values: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "value"])
        for t, v in zip(thresholds, values):
            writer.writerow([f"{t:.12g}", f"{v:.12g}"])


def load_curve(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.asarray([[float(a), float(b)] for a, b in rows[1:]])
    return data[:, 0], data[:, 1]


def emit_report(reports: list[EvalReport], out_dir) -> Path:
    """Write the JSON summary, curve tables and per-frame diagnostics.

    Aggregates are unweighted means over sequences; attribute slices average
    only the sequences carrying the tag.
    """
    if not reports:
        raise ValueError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    per_seq = {}
    for rep in reports:
        _write_curve(out_dir / f"{rep.name}_precision.csv", rep.precision_thresholds, rep.precision)
        _write_curve(out_dir / f"{rep.name}_success.csv", rep.success_thresholds, rep.success)
        with (out_dir / f"{rep.name}_diagnostics.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "cpe", "iou", "apce", "r_t", "alpha_t", "gate"])
            for i, diag in enumerate(rep.diagnostics, start=1):
                writer.writerow(
                    [
                        i,
                        f"{rep.cpe[i]:.6g}",
                        f"{rep.overlap[i]:.6g}",
                        f"{diag.apce:.6g}",
                        f"{diag.confidence:.6g}",
                        f"{diag.alpha:.6g}",
                        int(diag.gate),
                    ]
                )
        if rep.boxes is not None:
            lines = [",".join(f"{v:.10g}" for v in row) for row in rep.boxes]
            (out_dir / f"{rep.name}_trajectory.txt").write_text("\n".join(lines) + "\n")
        per_seq[rep.name] = {
            "precision_at_20": rep.precision_at_20,
            "success_auc": rep.success_auc,
            "fps": rep.fps,
            "frames": int(len(rep.cpe)),
            "attributes": list(rep.attributes),
            "flagged_rows": list(rep.flagged),
        }

    _write_curve(
        out_dir / "aggregate_precision.csv",
        reports[0].precision_thresholds,
        np.mean([r.precision for r in reports], axis=0),
    )
    _write_curve(
        out_dir / "aggregate_success.csv",
        reports[0].success_thresholds,
        np.mean([r.success for r in reports], axis=0),
    )

    aggregate = {
        "precision_at_20": float(np.mean([r.precision_at_20 for r in reports])),
        "success_auc": float(np.mean([r.success_auc for r in reports])),
        "fps": float(np.mean([r.fps for r in reports])),
        "sequences": len(reports),
    }
    by_attr = {}
    for tag in sorted({t for r in reports for t in r.attributes}):
        tagged = [r for r in reports if tag in r.attributes]
        by_attr[tag] = {
            "precision_at_20": float(np.mean([r.precision_at_20 for r in tagged])),
            "success_auc": float(np.mean([r.success_auc for r in tagged])),
            "sequences": len(tagged),
        }
    summary = {"sequences": per_seq, "aggregate": aggregate, "attributes": by_attr}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return out_dir


def summarize_results(results_dir) -> dict:
    """Re-aggregate the per-sequence curve tables found in a results directory."""
    results_dir = Path(results_dir)
    prec_files = sorted(
        p for p in results_dir.glob("*_precision.csv") if not p.name.startswith("aggregate")
    )
    if not prec_files:
        raise FileNotFoundError(f"{results_dir}: no per-sequence curve tables")
    summary = {"sequences": {}, "aggregate": {}}
    p20s, aucs = [], []
    for pfile in prec_files:
        name = pfile.name[: -len("_precision.csv")]
        _, pcurve = load_curve(pfile)
        _, scurve = load_curve(results_dir / f"{name}_success.csv")
        p20 = float(pcurve[min(20, len(pcurve) - 1)])
        auc = float(scurve.mean())
        summary["sequences"][name] = {"precision_at_20": p20, "success_auc": auc}
        p20s.append(p20)
        aucs.append(auc)
    summary["aggregate"] = {
        "precision_at_20": float(np.mean(p20s)),
        "success_auc": float(np.mean(aucs)),
        "sequences": len(p20s),
    }
    return summary


# ---------------------------------------------------------------------------
# flat key-value config files


def load_config(path) -> TrackerConfig:
    """Parse a flat ``key = value`` file into a TrackerConfig."""
    hints = typing.get_type_hints(TrackerConfig)
    known = {f.name for f in fields(TrackerConfig)}
    values = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.+)$", line)
        if not m:
            raise ValueError(f"{path}: line {ln}: expected 'key = value'")
        key, val = m.group(1), m.group(2).strip()
        if key not in known:
            raise ValueError(f"{path}: line {ln}: unknown key '{key}'")
        values[key] = _coerce(hints[key], val, f"{path}: line {ln}")
    return TrackerConfig(**values)


def _coerce(kind, text: str, where: str):
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ValueError(f"{where}: cannot parse '{text}' as {kind.__name__}") from None
