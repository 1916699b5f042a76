"""Print a results.csv as a scaling x qubits table of mean train/test accuracy.

    python scripts/summarize.py results/bandwidth_iqp/results.csv
"""
import sys
from collections import defaultdict

import numpy as np

from qkbandwidth.experiments import read_results


def summarize(path) -> str:
    rows = [r for r in read_results(path) if r["status"] == "ok"]
    cells = defaultdict(list)
    for r in rows:
        key = (int(r["n_qubits"]), float(r["scaling_factor"]), r["scaling_spec"], r["variant"], r["decimals"])
        cells[key].append((float(r["train_bacc"]), float(r["test_bacc"]), float(r["median_offdiag"])))
    lines = [f"{'qubits':>6} {'scaling':>8} {'variant':>7} {'dec':>4} {'train':>6} {'test':>6} {'median K':>9} {'n':>3}"]
    for (nq, _, s, variant, dec), vals in sorted(cells.items(), key=lambda kv: kv[0][:2]):
        tr, te, med = np.mean(vals, axis=0)
        lines.append(f"{nq:>6} {s:>8} {variant:>7} {dec or 'full':>4} {tr:6.3f} {te:6.3f} {med:9.2e} {len(vals):>3}")
    skipped = sum(1 for r in read_results(path) if r["status"] != "ok")
    if skipped:
        lines.append(f"({skipped} rows skipped or failed)")
    return "\n".join(lines)


if __name__ == "__main__":
    for p in sys.argv[1:]:
        print(p)
        print(summarize(p))
