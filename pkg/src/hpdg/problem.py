"""Convection fields, reaction/source data and inflow/outflow classification.

All field callables are vectorized: points are arrays of shape ``(..., d)``.
Convection fields return ``(..., d)``, scalar fields ``(...)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from hpdg.errors import InvalidArgument
from hpdg.mesh import Face, TensorMesh
from hpdg.quadrature import gauss_legendre, tensor_rule

FIELD_CLASSES = ("constant", "multilinear", "separable", "general")
FD_STEP = 1e-5

ScalarField = Callable[[np.ndarray], np.ndarray]
AxisFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ConvectionField:
    """A convection field b with its structure class.

    For the ``separable`` class ``components[j] = (b_j, b_j', b_j'')``, each a
    function of the single coordinate x_j. Jacobians fall back to central
    differences when no analytic form is supplied.
    """

    kind: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    components: tuple[tuple[AxisFunction, AxisFunction, AxisFunction], ...] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in FIELD_CLASSES:
            raise InvalidArgument(f"unknown field class {self.kind!r}")
        if self.components is not None and len(self.components) != self.dim:
            raise InvalidArgument("need one component triple per axis")

    @classmethod
    def constant(cls, vector, name: str = "constant") -> "ConvectionField":
        vec = np.asarray(vector, dtype=float)
        d = vec.size

        def func(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(vec, x.shape).copy()

        def jac(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape + (d,))

        return cls("constant", d, func, jac, name=name)

    @classmethod
    def separable(cls, components: Sequence[tuple[AxisFunction, AxisFunction, AxisFunction]],
                  kind: str = "separable", name: str = "") -> "ConvectionField":
        comps = tuple(tuple(c) for c in components)
        d = len(comps)

        def func(x):
            x = np.asarray(x, dtype=float)
            return np.stack([comps[j][0](x[..., j]) for j in range(d)], axis=-1)

        def jac(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape + (d,))
            for j in range(d):
                out[..., j, j] = comps[j][1](x[..., j])
            return out

        return cls(kind, d, func, jac, components=comps, name=name)

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float))

    def jacobian(self, x) -> np.ndarray:
        """d b_i / d x_k as (..., i, k)."""
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return self.jac(x)
        out = np.empty(x.shape + (self.dim,))
        for k in range(self.dim):
            step = np.zeros(self.dim)
            step[k] = FD_STEP
            out[..., :, k] = (self.func(x + step) - self.func(x - step)) / (2 * FD_STEP)
        return out

    def divergence(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.components is not None:
            return sum(self.components[j][1](x[..., j]) for j in range(self.dim))
        return np.trace(self.jacobian(x), axis1=-2, axis2=-1)

    def element_average(self, geom, npoints: int = 8) -> np.ndarray:
        """Vector average b_0 of b over one element."""
        pts, w = tensor_rule(gauss_legendre(npoints), self.dim)
        vals = self(geom.map(pts))
        return (w @ vals) / w.sum()


@dataclass(frozen=True, eq=False)
class ReactionData:
    c: ScalarField
    f: ScalarField
    g_D: ScalarField
    c_s: float = 1.0

    def __post_init__(self):
        if not self.c_s > 0:
            raise InvalidArgument(f"c_s must be positive, got {self.c_s}")


@dataclass(frozen=True)
class WellPosednessReport:
    min_value: float
    sample_count: int
    c_s: float

    @property
    def passed(self) -> bool:
        return self.min_value >= self.c_s


def fichera(b: ConvectionField, x, n) -> np.ndarray | float:
    """b(x) . n."""
    val = np.sum(b(x) * np.asarray(n, dtype=float), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def inflow_mask(b: ConvectionField, points, normal) -> np.ndarray:
    """True where b.n < 0; characteristic points (b.n == 0) count as outflow."""
    return np.asarray(fichera(b, points, normal)) < 0


def classify_face_points(b: ConvectionField, face: Face, element_id: int, points) -> np.ndarray:
    if element_id not in face.elements:
        raise InvalidArgument(f"element {element_id} is not adjacent to face {face.id}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mask = inflow_mask(b, pts, face.normal(element_id))
    return np.where(mask, "inflow", "outflow")


def divergence(b: ConvectionField, x) -> np.ndarray | float:
    val = b.divergence(np.asarray(x, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def check_well_posedness(data: ReactionData, b: ConvectionField, mesh: TensorMesh,
                         samples_per_axis: int = 6) -> WellPosednessReport:
    """Sample c - div(b)/2 at tensor Gauss points of every element."""
    pts, _ = tensor_rule(gauss_legendre(samples_per_axis), mesh.dim)
    x = mesh.map_points(pts)
    c0sq = np.asarray(data.c(x)) - 0.5 * np.asarray(b.divergence(x))
    c0sq = np.broadcast_to(c0sq, x.shape[:-1])
    return WellPosednessReport(float(c0sq.min()), int(c0sq.size), float(data.c_s))


def seminorm_w1inf(b: ConvectionField, mesh: TensorMesh, samples_per_axis: int = 8) -> float:
    """Sampled |b|_{W^{1,inf}}: max entry of the Jacobian over the mesh."""
    pts, _ = tensor_rule(gauss_legendre(samples_per_axis), mesh.dim)
    return float(np.abs(b.jacobian(mesh.map_points(pts))).max())


# ---------------------------------------------------------------------------
# field catalog

@dataclass(frozen=True, eq=False)
class FieldEntry:
    field: ConvectionField
    c: ScalarField
    c_s: float


def _const(value):
    return lambda x: np.full(np.shape(x)[:-1], float(value))


def _constant_entry(d):
    return FieldEntry(ConvectionField.constant(np.ones(d), name="constant"), _const(1.0), 1.0)


def _multilinear_entry(d):
    if d == 1:
        func = lambda x: 1.0 + 0.5 * x                              # noqa: E731
        jac = lambda x: np.full(x.shape + (1,), 0.5)                # noqa: E731
        return FieldEntry(ConvectionField("multilinear", 1, func, jac, name="multilinear"),
                          _const(1.25), 1.0)
    # b_j = 1 + x_{j+1}/2 (cyclic), divergence free
    shift = [(j + 1) % d for j in range(d)]

    def func(x):
        return 1.0 + 0.5 * x[..., shift]

    def jac(x):
        out = np.zeros(x.shape + (d,))
        for j in range(d):
            out[..., j, shift[j]] = 0.5
        return out

    return FieldEntry(ConvectionField("multilinear", d, func, jac, name="multilinear"),
                      _const(1.0), 1.0)


def _separable_tanh_entry(d):
    comp = (lambda t: 2.0 + np.tanh(t),
            lambda t: 1.0 / np.cosh(t) ** 2,
            lambda t: -2.0 * np.tanh(t) / np.cosh(t) ** 2)
    field = ConvectionField.separable([comp] * d, name="separable-tanh")
    # sech^2 <= 1 per axis
    return FieldEntry(field, _const(1.0 + 0.5 * d), 1.0)


def _general_swirl_entry(d):
    if d == 1:
        func = lambda x: 2.0 + np.sin(3.0 * x)                      # noqa: E731
        jac = lambda x: (3.0 * np.cos(3.0 * x))[..., None]          # noqa: E731
        return FieldEntry(ConvectionField("general", 1, func, jac, name="general-swirl"),
                          _const(2.5), 1.0)
    shift = [(j + 1) % d for j in range(d)]
    trig = [np.sin if j % 2 == 0 else np.cos for j in range(d)]
    dtrig = [np.cos if j % 2 == 0 else (lambda t: -np.sin(t)) for j in range(d)]

    def func(x):
        return np.stack([2.0 + trig[j](x[..., shift[j]]) for j in range(d)], axis=-1)

    def jac(x):
        out = np.zeros(x.shape + (d,))
        for j in range(d):
            out[..., j, shift[j]] = dtrig[j](x[..., shift[j]])
        return out

    return FieldEntry(ConvectionField("general", d, func, jac, name="general-swirl"),
                      _const(1.0), 1.0)


def _rotation_entry(d):
    if d != 2:
        raise InvalidArgument("rotation field is only defined in 2D")

    def func(x):
        return np.stack([x[..., 1] - 0.5, 0.5 - x[..., 0]], axis=-1)

    def jac(x):
        out = np.zeros(x.shape + (2,))
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = -1.0
        return out

    return FieldEntry(ConvectionField("multilinear", 2, func, jac, name="rotation"), _const(1.0), 1.0)


FIELD_CATALOG: dict[str, Callable[[int], FieldEntry]] = {
    "constant": _constant_entry,
    "multilinear": _multilinear_entry,
    "separable-tanh": _separable_tanh_entry,
    "general-swirl": _general_swirl_entry,
    "rotation": _rotation_entry,
    "swirl": _rotation_entry,
}


def catalog_field(name: str, dim: int) -> FieldEntry:
    try:
        builder = FIELD_CATALOG[name]
    except KeyError:
        raise InvalidArgument(f"unknown field {name!r}; choose from {sorted(FIELD_CATALOG)}") from None
    if not 1 <= dim <= 3:
        raise InvalidArgument(f"dimension must be 1, 2 or 3, got {dim}")
    return builder(dim)
