"""Run the desk-scale experiment and print per-arm error and accuracy curves.

    python3 scripts/desk_curves.py [--config configs/desk.cfg] [--output-dir DIR] [--plot out.png]
"""

import argparse
import sys
from pathlib import Path

from airfl.expcli import load_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(ROOT / "configs" / "desk.cfg"))
    parser.add_argument("--output-dir", default=None)
    parser.add_argument("--plot", default=None, help="write a two-panel PNG (needs matplotlib)")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    result = run_experiment(cfg, output_dir=args.output_dir)
    arms = [a for a in cfg.arms]
    nmse = {a: result.mean_curve(a, "nmse") for a in arms}
    acc = {a: result.mean_curve(a, "test_accuracy") for a in arms}

    print("round  " + "  ".join(f"{a + ' nmse':>14}" for a in arms) + "  " + "  ".join(f"{a + ' acc':>11}" for a in arms))
    for t in range(len(nmse[arms[0]])):
        row = "  ".join(f"{nmse[a][t]:14.4e}" for a in arms) + "  " + "  ".join(f"{acc[a][t]:11.4f}" for a in arms)
        print(f"{t + 1:5d}  {row}")
    print(f"traces and summary.csv in {result.output_dir}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        for a in arms:
            rounds = range(1, len(nmse[a]) + 1)
            ax1.semilogy(rounds, nmse[a], label=a)
            ax2.plot(rounds, acc[a], label=a)
        ax1.set(xlabel="round", ylabel="normalized gradient error")
        ax2.set(xlabel="round", ylabel="test accuracy")
        ax1.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        print(f"plot written to {args.plot}")
    return result.exit_status


if __name__ == "__main__":
    sys.exit(main())
