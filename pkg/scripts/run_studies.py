"""Run the bundled sweeps one after another through the CLI.

    python scripts/run_studies.py            # synthetic studies
    python scripts/run_studies.py --fmnist   # also the Fashion-MNIST qubit sweep
"""
import argparse
import sys
from pathlib import Path

from qkbandwidth.cli import main as cli

HERE = Path(__file__).parent / "configs"

RUNS = [
    ("bandwidth-sweep", "bandwidth_iqp.cfg"),
    ("bandwidth-sweep", "bandwidth_iqp_trainscore.cfg"),
    ("noise-study", "noise_iqp.cfg"),
    ("precision-study", "precision_iqp.cfg"),
    ("qubit-sweep", "qubit_sweep_hamevo.cfg"),
]


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fmnist", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-root", default=None, help="prefix for every out_dir")
    args = ap.parse_args(argv)
    runs = RUNS + ([("qubit-sweep", "fmnist_hamevo.cfg")] if args.fmnist else [])
    worst = 0
    for study, cfg in runs:
        cmd = [study, "--config", str(HERE / cfg), "--threads", str(args.threads)]
        if args.out_root:
            cmd += ["--out", str(Path(args.out_root) / Path(cfg).stem)]
        print(f"== {study} {cfg}")
        worst = max(worst, cli(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())
