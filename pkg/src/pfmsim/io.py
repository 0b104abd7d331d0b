"""Field serialization: legacy ASCII VTK and flat CSV."""
from __future__ import annotations

import os

import numpy as np


def write_vtk(path, shape, dx, origin, cell_data: dict, title: str = "pfmsim field") -> None:
    """Write cell-centred arrays on a STRUCTURED_POINTS lattice.

    ``cell_data`` maps names to arrays of ``shape`` (scalars) or
    ``shape + (k,)`` (vectors, padded to 3 components).
    """
    shape = tuple(int(n) for n in shape)
    d = len(shape)
    dims = [n + 1 for n in shape] + [1] * (3 - d)
    org = list(origin) + [0.0] * (3 - d)
    ncell = int(np.prod(shape))
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
             "DIMENSIONS " + " ".join(map(str, dims)),
             "ORIGIN " + " ".join(f"{o:.17g}" for o in org),
             "SPACING " + " ".join(f"{dx:.17g}" for _ in range(3)),
             f"CELL_DATA {ncell}"]
    for name, arr in cell_data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape == shape:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in arr.ravel(order="F")]
        elif arr.shape[:-1] == shape:
            k = arr.shape[-1]
            vec = np.zeros(shape + (3,))
            vec[..., :k] = arr
            flat = np.stack([vec[..., i].ravel(order="F") for i in range(3)], axis=1)
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(f"{v:.17g}" for v in row) for row in flat]
        else:
            raise ValueError(f"array {name!r} has shape {arr.shape}, grid is {shape}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_scalars(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk` (scalars only)."""
    with open(path) as fh:
        toks = fh.read().split("\n")
    dims = None
    out = {}
    i = 0
    while i < len(toks):
        line = toks[i].strip()
        if line.startswith("DIMENSIONS"):
            dims = [int(v) - 1 for v in line.split()[1:]]
            dims = [n for n in dims if n > 0]
        if line.startswith("SCALARS"):
            name = line.split()[1]
            n = int(np.prod(dims))
            vals = np.array([float(v) for v in toks[i + 2:i + 2 + n]])
            out[name] = vals.reshape(dims, order="F")
            i += 2 + n
            continue
        i += 1
    return out


def write_field_csv(path, arr: np.ndarray, dx: float, origin) -> None:
    """Flattened row-major values after one header line ``counts,dx,origin``.

    Vectors in the header are space separated, e.g. ``64 65,0.1,0 0``.
    """
    arr = np.asarray(arr, dtype=float)
    head = " ".join(map(str, arr.shape)) + f",{dx:.17g}," + " ".join(f"{o:.17g}" for o in origin)
    np.savetxt(path, arr.ravel(), header=head, comments="", fmt="%.17g")


def read_field_csv(path):
    with open(path) as fh:
        head = fh.readline().strip()
    counts, dx, origin = head.split(",")
    shape = tuple(int(v) for v in counts.split())
    vals = np.loadtxt(path, skiprows=1, ndmin=1)
    return vals.reshape(shape), float(dx), tuple(float(v) for v in origin.split())


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
