"""CSV/JSON artifact writers shared by the command-line experiments.

Every CSV starts with one comment line ``# {json}`` carrying the full
provenance (parameters, seed, sample counts, package version), then a header
row. Schemas are fixed: density files have columns (x, mean, stderr),
correlation files (x, y, cov, stderr), dual-statistics files
(seed, x, kappa, lifespan, max_position, failed, hit_horizon), and reference
files (x, rho_discrete, rho_continuum, rho_stationary).
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__


def version_string() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent).stdout.strip()
    except Exception:
        rev = ""
    return f"ssep-{__version__}" + (f"+g{rev}" if rev else "")


def provenance_line(meta: dict) -> str:
    meta = dict(meta)
    meta.setdefault("version", version_string())
    return "# " + json.dumps(meta, sort_keys=True)


def write_csv(path, meta: dict, header: list, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(provenance_line(meta) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_density_csv(path, field, meta: dict) -> None:
    rows = zip(field.sites.tolist(), field.values.tolist(), field.stderr.tolist())
    write_csv(path, {**meta, "n_samples": field.n_samples, "t": field.t},
              ["x", "mean", "stderr"], rows)


def write_corr_csv(path, field, meta: dict) -> None:
    rows = ((int(x), int(y), c, e) for (x, y), c, e in
            zip(field.pairs.tolist(), field.values.tolist(), field.stderr.tolist()))
    write_csv(path, {**meta, "n_samples": field.n_samples, "t": field.t},
              ["x", "y", "cov", "stderr"], rows)


def write_reference_csv(path, sites, rho_discrete, rho_continuum, rho_stationary,
                        meta: dict) -> None:
    rows = zip(np.asarray(sites).tolist(), np.asarray(rho_discrete).tolist(),
               np.asarray(rho_continuum).tolist(), np.asarray(rho_stationary).tolist())
    write_csv(path, meta, ["x", "rho_discrete", "rho_continuum", "rho_stationary"], rows)


def write_dual_stats_csv(path, batch, seed: int, meta: dict) -> None:
    rows = ((seed + i, batch.x, int(batch.kappa[i]), float(batch.lifespan[i]),
             int(batch.max_position[i]), int(batch.failed[i]), int(batch.hit_horizon[i]))
            for i in range(batch.n_runs))
    write_csv(path, {**meta, "n_runs": batch.n_runs},
              ["seed", "x", "kappa", "lifespan", "max_position", "failed", "hit_horizon"],
              rows)


def write_summary(path, summary: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = dict(summary)
    summary.setdefault("version", version_string())
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError(f"not JSON serializable: {type(v)}")
