"""Cartesian tensor-product meshes of box domains."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from hpdg.errors import InvalidArgument


@dataclass(frozen=True)
class BoxDomain:
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if not 1 <= len(bounds) <= 3:
            raise InvalidArgument(f"dimension must be 1, 2 or 3, got {len(bounds)}")
        for a, b in bounds:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise InvalidArgument(f"degenerate interval ({a}, {b})")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def unit(cls, dim: int) -> "BoxDomain":
        return cls(((0.0, 1.0),) * dim)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    id: int
    grid_index: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.upper + self.lower)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def jacobian(self) -> float:
        """Determinant of the affine map from the reference cube."""
        return float(np.prod(self.half_widths))

    @property
    def aspect_ratio(self) -> float:
        w = self.upper - self.lower
        return float(w.max() / w.min())

    def map(self, ref_points) -> np.ndarray:
        return element_map(self, ref_points)

    def inverse_map(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.center) / self.half_widths


@dataclass(frozen=True)
class Face:
    """A mesh face orthogonal to ``axis`` at ``coordinate``.

    ``elements`` lists the adjacent element ids and ``sides`` the matching
    side of each element the face lies on (-1 lower, +1 upper), so the
    outward normal of ``elements[k]`` is ``sides[k] * e_axis``.
    """

    id: int
    axis: int
    coordinate: float
    elements: tuple[int, ...]
    sides: tuple[int, ...]
    dim: int

    @property
    def is_boundary(self) -> bool:
        return len(self.elements) == 1

    def normal(self, element_id: int) -> np.ndarray:
        k = self.elements.index(element_id)
        n = np.zeros(self.dim)
        n[self.axis] = self.sides[k]
        return n

    @property
    def normals(self) -> tuple[np.ndarray, ...]:
        return tuple(self.normal(e) for e in self.elements)


@dataclass(frozen=True, eq=False)
class TensorMesh:
    breakpoints: tuple[np.ndarray, ...]
    elements: list[ElementGeometry] = field(init=False, repr=False, compare=False)
    faces: list[Face] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(np.asarray(b, dtype=float) for b in self.breakpoints)
        if not 1 <= len(bps) <= 3:
            raise InvalidArgument(f"dimension must be 1, 2 or 3, got {len(bps)}")
        for b in bps:
            if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
                raise InvalidArgument("breakpoints must be strictly increasing with at least 2 entries")
        object.__setattr__(self, "breakpoints", bps)
        shape = self.shape
        elements = []
        for eid in range(self.num_elements):
            idx = np.unravel_index(eid, shape, order="F")
            lo = np.array([bps[j][i] for j, i in enumerate(idx)])
            hi = np.array([bps[j][i + 1] for j, i in enumerate(idx)])
            elements.append(ElementGeometry(eid, tuple(int(i) for i in idx), lo, hi))
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "faces", _build_faces(self))
        # precomputed arrays for vectorized assembly
        object.__setattr__(self, "lower", np.array([e.lower for e in elements]))
        object.__setattr__(self, "upper", np.array([e.upper for e in elements]))

    @property
    def dim(self) -> int:
        return len(self.breakpoints)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(b) - 1 for b in self.breakpoints)

    @property
    def num_elements(self) -> int:
        return int(np.prod(self.shape))

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(tuple((b[0], b[-1]) for b in self.breakpoints))

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def jacobians(self) -> np.ndarray:
        return np.prod(self.half_widths, axis=1)

    @property
    def inv_sqrt_jacobians(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.jacobians)

    @property
    def h(self) -> float:
        return max(e.diameter for e in self.elements)

    def element_id(self, grid_index) -> int:
        return int(np.ravel_multi_index(tuple(grid_index), self.shape, order="F"))

    def map_points(self, ref_points) -> np.ndarray:
        """Map reference points (nq, d) into every element: (n_el, nq, d)."""
        ref = np.asarray(ref_points, dtype=float)
        return self.lower[:, None, :] + (ref[None, :, :] + 1.0) * self.half_widths[:, None, :]

    def locate(self, point) -> int:
        point = np.asarray(point, dtype=float)
        idx = []
        for j, b in enumerate(self.breakpoints):
            if not b[0] <= point[j] <= b[-1]:
                raise InvalidArgument(f"point {point} outside the mesh")
            idx.append(min(int(np.searchsorted(b, point[j], side="right")) - 1, len(b) - 2))
        return self.element_id(idx)

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "breakpoints": [b.tolist() for b in self.breakpoints]})

    @classmethod
    def from_json(cls, text: str) -> "TensorMesh":
        data = json.loads(text)
        mesh = cls(tuple(np.array(b) for b in data["breakpoints"]))
        if "dim" in data and data["dim"] != mesh.dim:
            raise InvalidArgument("dim does not match breakpoint arrays")
        return mesh


def _build_faces(mesh: TensorMesh) -> list[Face]:
    faces = []
    shape = mesh.shape
    d = mesh.dim
    for axis in range(d):
        # face planes along `axis`: index k = 0..shape[axis]
        other = [range(n) for j, n in enumerate(shape) if j != axis]
        for k in range(shape[axis] + 1):
            for rest in (np.ndindex(*[len(r) for r in other]) if other else [()]):
                elems, sides = [], []
                for i, side in ((k - 1, 1), (k, -1)):
                    if 0 <= i < shape[axis]:
                        idx = list(rest)
                        idx.insert(axis, i)
                        elems.append(mesh.element_id(idx))
                        sides.append(side)
                faces.append(Face(len(faces), axis, float(mesh.breakpoints[axis][k]),
                                  tuple(elems), tuple(sides), d))
    return faces


def build_mesh(domain: BoxDomain, cells_per_axis) -> TensorMesh:
    """Uniform Cartesian mesh with ``cells_per_axis[j]`` elements along axis j."""
    if np.isscalar(cells_per_axis):
        cells_per_axis = (int(cells_per_axis),) * domain.dim
    cells = tuple(int(n) for n in cells_per_axis)
    if len(cells) != domain.dim:
        raise InvalidArgument(f"need {domain.dim} cell counts, got {len(cells)}")
    if min(cells) < 1:
        raise InvalidArgument("cell counts must be positive")
    return TensorMesh(tuple(np.linspace(a, b, n + 1) for (a, b), n in zip(domain.bounds, cells)))


def element_map(geom: ElementGeometry, ref_point) -> np.ndarray:
    """Affine map from (-1, 1)^d onto the element box."""
    ref = np.asarray(ref_point, dtype=float)
    return geom.lower + (ref + 1.0) * geom.half_widths


def enumerate_faces(mesh: TensorMesh) -> list[Face]:
    return list(mesh.faces)
