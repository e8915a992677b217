"""Command line front end: track, bench, synth and report subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import bench
from .tracker import TrackerConfig


def _config_from(args) -> TrackerConfig:
    if args.config:
        return bench.load_config(args.config)
    return TrackerConfig()


def _cmd_track(args) -> int:
    config = _config_from(args)
    seq = bench.load_otb_sequence(args.seq_dir)
    run = bench.run_ope(config, seq)
    report = bench.evaluate(seq, run)
    out = Path(args.out or f"results/{seq.name}")
    bench.emit_report([report], out)
    print(
        f"{seq.name}: precision@20 {report.precision_at_20:.3f}  "
        f"success AUC {report.success_auc:.3f}  {report.fps:.1f} fps -> {out}"
    )
    return 0


def _bench_one(seq_dir: str, config: TrackerConfig) -> bench.EvalReport:
    seq = bench.load_otb_sequence(seq_dir)
    return bench.evaluate(seq, bench.run_ope(config, seq))


def _cmd_bench(args) -> int:
    config = _config_from(args)
    root = Path(args.dataset_root)
    seq_dirs = sorted(p for p in root.iterdir() if (p / "groundtruth_rect.txt").is_file())
    if args.sequences:
        wanted = {s.strip() for s in args.sequences.split(",") if s.strip()}
        seq_dirs = [p for p in seq_dirs if p.name in wanted]
        missing = wanted - {p.name for p in seq_dirs}
        if missing:
            raise FileNotFoundError(f"sequences not found under {root}: {sorted(missing)}")
    if not seq_dirs:
        raise FileNotFoundError(f"no sequences under {root}")

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_bench_one, map(str, seq_dirs), [config] * len(seq_dirs)))
    else:
        reports = [_bench_one(str(p), config) for p in seq_dirs]

    out = Path(args.out or "results/bench")
    bench.emit_report(reports, out)
    agg = json.loads((out / "summary.json").read_text())["aggregate"]
    print(
        f"{len(reports)} sequences: precision@20 {agg['precision_at_20']:.3f}  "
        f"success AUC {agg['success_auc']:.3f}  {agg['fps']:.1f} fps -> {out}"
    )
    return 0


def _cmd_synth(args) -> int:
    spec = bench.SynthSpec.from_file(args.spec_file)
    seq = bench.synth_sequence(spec)
    out = bench.save_sequence(seq, args.out)
    print(f"wrote {len(seq)} frames to {out}")
    return 0


def _cmd_report(args) -> int:
    summary = bench.summarize_results(args.results_dir)
    print(json.dumps(summary, indent=2))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusetrack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run one sequence directory")
    p.add_argument("seq_dir")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("bench", help="run every sequence under a dataset root")
    p.add_argument("dataset_root")
    p.add_argument("--sequences", help="comma-separated sequence names")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("synth", help="render a scripted synthetic sequence")
    p.add_argument("spec_file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="re-aggregate curve tables in a results directory")
    p.add_argument("results_dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # CLI boundary: report and signal failure
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
