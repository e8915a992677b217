#!/usr/bin/env python3
"""Compare confidence-adaptive blending against a fixed blend weight.

Runs every synthetic scenario twice (adaptive on/off) and prints the
per-scenario and mean deltas on precision@20 and success AUC.
"""

import argparse
import dataclasses

import numpy as np

from fusetrack.bench import evaluate, run_ope, scenario_specs, synth_sequence
from fusetrack.tracker import TrackerConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    adaptive = TrackerConfig()
    fixed = dataclasses.replace(adaptive, adaptive_fusion=False)

    rows = []
    for name, spec in scenario_specs(seed=args.seed).items():
        seq = synth_sequence(spec)
        rep_a = evaluate(seq, run_ope(adaptive, seq))
        rep_f = evaluate(seq, run_ope(fixed, seq))
        rows.append((name, rep_a, rep_f))

    print(f"{'scenario':14s} {'p@20 adpt':>10s} {'p@20 fixed':>11s} {'AUC adpt':>9s} {'AUC fixed':>10s}")
    for name, a, f in rows:
        print(
            f"{name:14s} {a.precision_at_20:10.3f} {f.precision_at_20:11.3f} "
            f"{a.success_auc:9.3f} {f.success_auc:10.3f}"
        )
    dp = np.mean([a.precision_at_20 - f.precision_at_20 for _, a, f in rows])
    ds = np.mean([a.success_auc - f.success_auc for _, a, f in rows])
    print(f"\nmean delta (adaptive - fixed): precision {dp:+.4f}, success {ds:+.4f}")


if __name__ == "__main__":
    main()
