"""Does mixup plus synthesized data help on held-out tasks?

Trains the predictor twice per seed on the same expert dataset, once plain
and once with demonstration mixup and self-paired free-space trajectories,
then runs both (and an untrained network) on the two held-out pick-and-place
tasks. Prints per-seed success and the pooled comparison.

Usage::

    python3 demos/ablation.py                 # full protocol, about 35 minutes
    python3 demos/ablation.py --quick         # one seed, short training
"""

import argparse
import json
import logging

from waypoint_imitation.infer.experiment import VARIANTS, AblationConfig, run_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--iterations", type=int)
    ap.add_argument("--json", help="write the summary here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = AblationConfig()
    if args.quick:
        cfg = AblationConfig(seeds=(0,), episodes_per_task=10, synth_count=100, iterations=1000)
    if args.iterations:
        cfg = AblationConfig(**{**cfg.__dict__, "iterations": args.iterations})

    result = run_ablation(cfg)
    s = result.summary()
    print(f"held-out tasks: {', '.join(s['heldout_tasks'])}")
    for v in VARIANTS:
        seeds = " ".join(f"{x:.2f}" for x in s[f"{v}_per_seed"].values())
        print(f"{v:>10}: {s[f'{v}_success']:.3f} +/- {s[f'{v}_se']:.3f}   per seed: {seeds}")
    print(f"full - ablation = {s['full_minus_ablation']:+.3f} (combined SE {s['combined_se']:.3f})")
    print(f"full - untrained = {s['full_minus_untrained']:+.3f}")
    print(f"wall time {s['wall_time'] / 60:.1f} min")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(s, fh, indent=2)


if __name__ == "__main__":
    main()
