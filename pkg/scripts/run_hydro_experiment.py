#!/usr/bin/env python3
"""Full-scale hydrodynamic experiment (N=200, t=0.1, 2e4 replicas) with the
acceptance bands; writes runs/hydro-full. Expect roughly 5 minutes on one
core. Exit code 2 signals a band violation (see notes on the boundary
relaxation scale in the README)."""

import json
import sys
import tempfile
from pathlib import Path

from ssep.cli import main

CONFIG = {
    "params": {"N": 200, "theta": 0.5, "r": 1.0, "rho_bar": 0.2, "b": 0.5, "c": 0.3,
               "r_prime": 1.0, "rho_bar_prime": 0.9, "b_prime": 0.5, "c_prime": 0.3},
    "profile": {"kind": "constant", "value": 0.8},
    "t": [0.1],
    "n_samples": 20000,
    "seed": 606,
    "x_lo": 20, "x_hi": 180,
    "sup_band": 0.03, "weak_band": 0.01,
}

if __name__ == "__main__":
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(CONFIG, fh)
        path = fh.name
    sys.exit(main(["hydro", "--config", path, "--out", "runs/hydro-full"]))
