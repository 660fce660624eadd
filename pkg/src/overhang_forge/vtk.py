"""Legacy ASCII VTK writer for scalar fields on the grid."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import ScalarField


def vtk_text(field: ScalarField, name: str = "u", title: str = "overhang_forge field") -> str:
    g = field.grid
    dims = list(g.counts) + [1] * (3 - g.dim)
    origin = list(g.origin) + [0.0] * (3 - g.dim)
    spacing = list(g.spacing) + [1.0] * (3 - g.dim)
    # VTK wants x varying fastest, which is Fortran order for our (x, y, z) arrays
    vals = np.asarray(field.values).ravel(order="F")
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN " + " ".join(repr(float(o)) for o in origin),
        "SPACING " + " ".join(repr(float(s)) for s in spacing),
        f"POINT_DATA {vals.size}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    body = "\n".join(" ".join(f"{v:.9g}" for v in vals[i:i + 9]) for i in range(0, vals.size, 9))
    return "\n".join(lines) + "\n" + body + "\n"


def write_vtk(field: ScalarField, path: str | Path, name: str = "u") -> None:
    Path(path).write_text(vtk_text(field, name))


def read_vtk(path: str | Path) -> tuple[dict, np.ndarray]:
    """Header fields and values (in ``(x, y, z)`` index order) of a file from :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    header = {}
    for i, line in enumerate(tokens):
        key, _, rest = line.partition(" ")
        if key in ("DIMENSIONS", "ORIGIN", "SPACING"):
            header[key.lower()] = [float(x) for x in rest.split()]
        if line.startswith("LOOKUP_TABLE"):
            data = np.array(" ".join(tokens[i + 1:]).split(), dtype=float)
            break
    dims = [int(d) for d in header["dimensions"]]
    return header, data.reshape(dims, order="F")
