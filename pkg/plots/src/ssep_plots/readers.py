"""Schema-validating readers for the experiment run-directory contract.

Every CSV starts with a ``# {json}`` provenance line followed by a header
row; the column sets are fixed per file kind. Readers raise SchemaError on
any deviation so the CLI can exit nonzero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMAS = {
    "density": ["x", "mean", "stderr"],
    "reference": ["x", "rho_discrete", "rho_continuum", "rho_stationary"],
    "corr": ["x", "y", "cov", "stderr"],
    "dual_stats": ["seed", "x", "kappa", "lifespan", "max_position", "failed",
                   "hit_horizon"],
}


class SchemaError(ValueError):
    pass


@dataclass
class Table:
    meta: dict
    columns: dict

    def __getitem__(self, name):
        return self.columns[name]


def read_table(path, kind: str) -> Table:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing file: {path}")
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# "):
            raise SchemaError(f"{path}: missing provenance header line")
        try:
            meta = json.loads(first[2:])
        except json.JSONDecodeError as err:
            raise SchemaError(f"{path}: bad provenance JSON: {err}") from err
        header = fh.readline().rstrip("\n").split(",")
        expected = SCHEMAS[kind]
        if header != expected:
            raise SchemaError(f"{path}: columns {header} != expected {expected}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as err:
            raise SchemaError(f"{path}: non-numeric rows: {err}") from err
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    if data.shape[1] != len(expected):
        raise SchemaError(f"{path}: row width {data.shape[1]} != {len(expected)}")
    return Table(meta, {name: data[:, i] for i, name in enumerate(expected)})


def read_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise SchemaError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: bad JSON: {err}") from err


def run_label(meta: dict) -> str:
    p = meta.get("params", {})
    bits = []
    if "N" in p:
        bits.append(f"N={p['N']}")
    if "theta" in p:
        bits.append(f"theta={p['theta']}")
    if meta.get("t") is not None:
        bits.append(f"t={meta['t']}")
    if meta.get("seed") is not None:
        bits.append(f"seed={meta['seed']}")
    return ", ".join(bits)
