"""Solution export: coefficient blocks (JSON/CSV) and uniform point samples."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from hpdg.functions import DGFunction
from hpdg.mesh import TensorMesh

BASIS_TAG = "legendre-tensor-orthonormal-L2K"


def solution_to_dict(u_n: DGFunction, **metadata) -> dict:
    mesh = u_n.mesh
    return {
        "dim": mesh.dim,
        "degree": u_n.degree,
        "basis": BASIS_TAG,
        "mesh": {"breakpoints": [b.tolist() for b in mesh.breakpoints]},
        "coefficients": u_n.coeffs.tolist(),
        "metadata": metadata,
    }


def solution_from_dict(data: dict) -> DGFunction:
    if data.get("basis", BASIS_TAG) != BASIS_TAG:
        raise ValueError(f"unsupported basis {data['basis']!r}")
    mesh = TensorMesh(tuple(np.array(b) for b in data["mesh"]["breakpoints"]))
    return DGFunction(mesh, int(data["degree"]), np.array(data["coefficients"]))


def write_solution_json(u_n: DGFunction, path, **metadata) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(solution_to_dict(u_n, **metadata)), encoding="utf-8")
    return path


def read_solution_json(path) -> DGFunction:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_solution_csv(u_n: DGFunction, path) -> Path:
    """One row per element: id, grid index, bounds, then the coefficient block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh = u_n.mesh
    d, nb = mesh.dim, u_n.coeffs.shape[1]
    header = (["element"] + [f"i{j}" for j in range(d)] + [f"lower{j}" for j in range(d)]
              + [f"upper{j}" for j in range(d)] + [f"c{k}" for k in range(nb)])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["# degree", u_n.degree, "basis", BASIS_TAG])
        w.writerow(header)
        for geom, block in zip(mesh.elements, u_n.coeffs):
            w.writerow([geom.id, *geom.grid_index, *map(repr, geom.lower), *map(repr, geom.upper),
                        *map(repr, block)])
    return path


def sample_on_grid(u_n: DGFunction, points_per_axis: int = 33) -> tuple[np.ndarray, np.ndarray]:
    """Values at a uniform tensor grid over the domain: points (N, d), values (N,)."""
    axes = [np.linspace(b[0], b[-1], points_per_axis) for b in u_n.mesh.breakpoints]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    return grid, u_n(grid)


def write_samples_csv(u_n: DGFunction, path, points_per_axis: int = 33) -> Path:
    pts, vals = sample_on_grid(u_n, points_per_axis)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(pts.shape[1])] + ["u"])
        for x, v in zip(pts, vals):
            w.writerow([*map(repr, x), repr(v)])
    return path
