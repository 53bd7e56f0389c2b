"""Classifier abilities and accuracies as test-label noise grows.

Prints one row per classifier and noise fraction, ready for plotting.

    python scripts/ability_noise_scan.py --fractions 0,0.1,0.2,0.3,0.4 --seed 0
"""
import argparse

from beta3irt.evaluation import ability_noise_scan
from beta3irt.synth import simulate_classifier_panel, simulate_train_test_panels
from beta3irt.vi import ViConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fractions", default="0,0.1,0.2,0.3,0.4")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--test", type=int, default=400)
    ap.add_argument("--train", type=int, default=400)
    args = ap.parse_args()

    if args.train:
        train, test = simulate_train_test_panels(args.train, args.test, seed=args.seed)
    else:
        train, test = None, simulate_classifier_panel(args.test, seed=args.seed)
    fractions = [float(f) for f in args.fractions.split(",")]
    rows = ability_noise_scan(test, fractions, ViConfig(seed=args.seed), noise_seed=args.seed + 1,
                              train=train)
    print("fraction,classifier,ability,accuracy")
    for r in rows:
        print(f"{r.fraction},{r.classifier},{r.ability:.4f},{r.accuracy:.4f}", flush=True)


if __name__ == "__main__":
    main()
