#!/usr/bin/env python3
"""Desk-scale smoke run: synthesize a corpus, train the full pipeline,
replay the saved models, and render the summary plot.

Everything goes through the public CLI, so this doubles as a living example
of the command sequence documented in the README.  With the default budget
the whole run takes well under a minute on a laptop.
"""

import argparse
import json
import sys
from pathlib import Path

from eegspeech.cli import main as cli


def run(argv) -> int:
    code = cli(argv)
    if code != 0:
        print(f"command failed (exit {code}): {' '.join(argv)}", file=sys.stderr)
    return code


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="smoke-run", help="output root")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--n-trials", type=int, default=60)
    parser.add_argument("--epochs", type=int, default=4, help="CNN/LSTM epochs")
    args = parser.parse_args()

    root = Path(args.workdir)
    root.mkdir(parents=True, exist_ok=True)
    data = root / "data"
    models = root / "models"
    replay = root / "replay"

    config = {
        "seed": args.seed,
        "tasks": ["uw", "nasal"],
        "output_dir": str(models),
        "covariance": {"input_size": 8},
        "cnn": {"epochs": args.epochs, "batch_size": 16},
        "lstm": {"epochs": args.epochs, "batch_size": 16},
        "dae": {"epochs": 8, "batch_size": 16},
        "gbt": {"n_estimators": 50, "max_depth": 4},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2))

    steps = [
        ["synth", "--out", str(data), "--n-trials", str(args.n_trials),
         "--n-channels", "8", "--n-subjects", "3", "--separability", "3.0",
         "--seed", str(args.seed)],
        ["featurize", "--config", str(cfg_path), "--container", str(data),
         "--out", str(root / "features")],
        ["train", "--config", str(cfg_path), "--container", str(data)],
        ["evaluate", "--config", str(cfg_path), "--container", str(data),
         "--models", str(models), "--out", str(replay)],
        ["plot", str(models / "uw" / "report.json"),
         str(models / "nasal" / "report.json"), "--out", str(root / "plots")],
    ]
    for step in steps:
        print(f"==> eegspeech {' '.join(step)}", flush=True)
        code = run(step)
        if code != 0:
            return code

    summary = json.loads((models / "summary.json").read_text())
    print(json.dumps(summary, indent=2))
    print(f"artifacts under {root}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
