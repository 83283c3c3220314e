#!/usr/bin/env python3
"""Produce a small set of run directories with the full CSV/JSON contract,
used as golden inputs for the plotting package and as a quick end-to-end
exercise of the CLI.

Usage: python scripts/make_golden_run.py [OUT_DIR]
"""

import json
import sys
import tempfile
from pathlib import Path

from ssep.cli import main

PARAMS = {"N": 60, "theta": 0.5, "r": 1.0, "rho_bar": 0.2, "b": 0.5, "c": 0.3,
          "r_prime": 1.0, "rho_bar_prime": 0.9, "b_prime": 0.5, "c_prime": 0.3}


def write(path, payload):
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


def run(out_root: Path) -> None:
    out_root.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        cfg = write(td / "hydro.json", {
            "params": PARAMS, "profile": {"kind": "constant", "value": 0.8},
            "t": [0.05], "n_samples": 2000, "seed": 7,
        })
        assert main(["hydro", "--config", cfg, "--out", str(out_root / "hydro")]) == 0

        cfg = write(td / "corr.json", {
            "params": PARAMS, "profile": {"kind": "constant", "value": 0.8},
            "t": [0.05], "n_samples": 2000, "seed": 8, "min_distance": 12,
        })
        assert main(["corr", "--config", cfg, "--out", str(out_root / "corr")]) == 0

        cfg = write(td / "ds.json", {
            "params": PARAMS, "n_samples": 3000, "seed": 9,
            "N_list": [40, 60], "monotone_check": False,
        })
        assert main(["dual-stats", "--config", cfg, "--out", str(out_root / "dual")]) == 0

        cfg = write(td / "hs.json", {
            "params": {**PARAMS, "N": 40},
            "profile": {"kind": "constant", "value": 0.5},
            "seed": 10, "burn_in": 1.0, "t_end": 3.0, "n_traj": 24,
        })
        assert main(["hydrostatic", "--config", cfg,
                     "--out", str(out_root / "hydrostatic")]) == 0
    print(f"golden runs written to {out_root}")


if __name__ == "__main__":
    run(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/golden"))
