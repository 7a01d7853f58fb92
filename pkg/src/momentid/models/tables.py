"""CSV storage for tabulated densities.

Two-dimensional tables round-trip as plain CSV matrices; higher-rank tables
are flattened along the leading axis with the original shape recorded in a
JSON sidecar next to the CSV file.
"""

from __future__ import annotations

import json

import numpy as np


def save_density_table(table: np.ndarray, basepath: str) -> None:
    table = np.asarray(table, dtype=float)
    flat = table.reshape(table.shape[0], -1)
    np.savetxt(basepath + ".csv", flat, delimiter=",")
    with open(basepath + ".json", "w") as fh:
        json.dump({"shape": list(table.shape)}, fh)


def load_density_table(basepath: str) -> np.ndarray:
    with open(basepath + ".json") as fh:
        shape = tuple(json.load(fh)["shape"])
    flat = np.atleast_2d(np.loadtxt(basepath + ".csv", delimiter=","))
    return flat.reshape(shape)
