#!/usr/bin/env python3
"""Convergence-in-N study: hydrodynamic sup distance and far-pair correlation
magnitude across N, written as one run directory per N for the convergence
plot. Roughly 5-10 minutes on one core at the default sizes."""

import json
import sys
import tempfile
from pathlib import Path

from ssep.cli import main

BASE = {"theta": 0.5, "r": 1.0, "rho_bar": 0.2, "b": 0.5, "c": 0.3,
        "r_prime": 1.0, "rho_bar_prime": 0.9, "b_prime": 0.5, "c_prime": 0.3}


def run(n_list, n_samples, out_root):
    out_root = Path(out_root)
    for N in n_list:
        cfg = {
            "params": {**BASE, "N": N},
            "profile": {"kind": "constant", "value": 0.8},
            "t": [0.1], "n_samples": n_samples, "seed": 100 + N,
        }
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(cfg, fh)
            path = fh.name
        code = main(["hydro", "--config", path, "--out", str(out_root / f"N{N}")])
        if code != 0:
            return code
    print(f"convergence runs in {out_root}")
    return 0


if __name__ == "__main__":
    sys.exit(run([50, 100, 200], 4000, sys.argv[1] if len(sys.argv) > 1 else "runs/convergence"))
