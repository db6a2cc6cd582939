"""
Regression fixtures for the reference element allocations.

The rate targets, outage ceiling and reference power behind the reference
allocations are unknown, so each row ships with inputs that
were *calibrated* to reproduce it (see
:func:`starnoma.partition.calibrate_request`).  Matching these rows is a
calibration regression, not an independent check against ground truth.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import Partition, preset
from .partition import PartitionRequest, calibrate_request

FIXTURE_P_REF_DBM = 10.0
FIXTURE_SEED = 0
FIXTURE_REALIZATIONS = 10_000

# (case, N) -> per-user reference counts
REFERENCE_COUNTS = {
    (1, 64): (26, 38),
    (1, 128): (51, 77),
    (1, 256): (102, 154),
    (2, 60): (16, 20, 24),
    (2, 90): (24, 30, 36),
    (2, 120): (32, 40, 48),
    (2, 150): (36, 50, 64),
    (3, 60): (16, 20, 24),
    (3, 90): (19, 30, 41),
    (3, 120): (22, 40, 58),
    (3, 180): (35, 60, 85),
    (3, 390): (52, 130, 208),
}

_RESOURCE = "fixtures.yaml"


def build_fixtures() -> dict:
    """Calibrate every reference row; returns the YAML-ready document."""
    rows = []
    for (case, n), counts in REFERENCE_COUNTS.items():
        scenario = preset(case, n)
        req = calibrate_request(scenario, counts, FIXTURE_P_REF_DBM,
                                FIXTURE_REALIZATIONS, FIXTURE_SEED)
        part = Partition.for_scenario(scenario, counts)
        rows.append({
            "case": case,
            "n_total": n,
            "counts": list(counts),
            "n_t": part.n_t,
            "n_r": part.n_r,
            "request": {
                "epsilon": req.epsilon,
                "r_min": list(req.r_min),
                "p_ref_dbm": req.p_ref_dbm,
                "realizations": req.realizations,
                "seed": req.seed,
            },
        })
    return {
        "kind": "calibration-artifact",
        "note": ("epsilon, r_min and p_ref_dbm are calibrated so the partitioning "
                 "algorithms reproduce the reference counts; they are not measured values"),
        "rows": rows,
    }


def write_fixtures(path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(build_fixtures(), sort_keys=False))
    return path


def load_fixtures(path=None) -> list[dict]:
    if path is None:
        text = resources.files("starnoma.data").joinpath(_RESOURCE).read_text()
    else:
        text = Path(path).read_text()
    doc = yaml.safe_load(text)
    return doc["rows"]


def fixture(case: int, n_total: int, path=None) -> dict:
    for row in load_fixtures(path):
        if row["case"] == case and row["n_total"] == n_total:
            return row
    raise ConfigError(f"no fixture for case {case}, N = {n_total}; "
                      f"available: {sorted(REFERENCE_COUNTS)}")


def fixture_request(row: dict) -> PartitionRequest:
    r = row["request"]
    return PartitionRequest(epsilon=r["epsilon"], r_min=tuple(r["r_min"]),
                            p_ref_dbm=r["p_ref_dbm"], realizations=r["realizations"],
                            seed=r["seed"])


def fixture_partition(case: int, n_total: int) -> Partition:
    """Reference allocation for ``(case, N)`` as a :class:`Partition`."""
    row = fixture(case, n_total)
    return Partition.for_scenario(preset(case, n_total), row["counts"])
