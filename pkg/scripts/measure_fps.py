#!/usr/bin/env python3
"""Measure tracker throughput on synthetic sequences of increasing size."""

import argparse

from fusetrack.bench import SynthSpec, run_ope, synth_sequence
from fusetrack.tracker import TrackerConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    config = TrackerConfig()
    print(f"{'canvas':>10s} {'target':>8s} {'fps':>7s}")
    for cw, ch, tw in ((160, 120, 24), (320, 240, 40), (640, 480, 80)):
        spec = SynthSpec(
            canvas_w=cw, canvas_h=ch, target_w=tw, target_h=tw,
            num_frames=args.frames, seed=args.seed, name=f"{cw}x{ch}",
        )
        run = run_ope(config, synth_sequence(spec))
        print(f"{f'{cw}x{ch}':>10s} {f'{tw}px':>8s} {run.fps:7.1f}")


if __name__ == "__main__":
    main()
