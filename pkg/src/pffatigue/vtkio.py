"""Legacy ASCII VTK output for unstructured 2D grids."""

from __future__ import annotations

import numpy as np

_CELL_TYPE = {"quad4": 9, "tri3": 5}


def write_vtk(path, mesh, point_data=None, cell_data=None, title="pffatigue fields"):
    """Write the mesh with nodal (point) and per-element (cell) data.

    Vector point data must be (n, 2); scalars (n,). Floats are written with
    full precision.
    """
    point_data = point_data or {}
    cell_data = cell_data or {}
    n = mesh.n_nodes
    m = mesh.n_elements
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    size = sum(len(c) + 1 for c in mesh.conn)
    lines.append(f"CELLS {m} {size}")
    for c in mesh.conn:
        lines.append(f"{len(c)} " + " ".join(str(int(i)) for i in c))
    lines.append(f"CELL_TYPES {m}")
    lines.extend(str(_CELL_TYPE[k]) for k in mesh.kinds)

    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                for vx, vy in arr:
                    lines.append(f"{float(vx)!r} {float(vy)!r} 0.0")
            else:
                lines.append(f"SCALARS {name} double")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{float(v)!r}" for v in arr)
    if cell_data:
        lines.append(f"CELL_DATA {m}")
        for name, arr in cell_data.items():
            lines.append(f"SCALARS {name} double")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{float(v)!r}" for v in np.asarray(arr))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
