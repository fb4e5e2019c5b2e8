"""Element L2 projection and the inequality toolkit used in the error analysis.

Besides the projector itself this module measures the constants that enter
the convergence argument: the H^1 inverse constant on Q_p, the bubble
weighted inverse constant, and the interpolation deficit of a convection
component relative to the quadratic bubble.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from hpdg.errors import InvalidArgument, NumericalError
from hpdg.functions import DGFunction
from hpdg.mesh import ElementGeometry, TensorMesh
from hpdg.quadrature import QuadratureRule1D, TensorBasis, gauss_legendre, legendre_table, tensor_rule

DEFAULT_SUP_SAMPLES = 4097


@dataclass(frozen=True, eq=False)
class ProjectionCoeffs:
    element_id: int
    degree: int
    coeffs: np.ndarray

    def __call__(self, geom: ElementGeometry, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        basis = TensorBasis(pts.shape[1], self.degree)
        vals, _ = basis.tabulate(geom.inverse_map(pts))
        return vals @ self.coeffs / np.sqrt(geom.jacobian)


def l2_project(f, geom: ElementGeometry, p: int, quad: QuadratureRule1D | int | None = None) -> ProjectionCoeffs:
    """Coefficients of Pi_p f on one element.

    The element basis is L2(K)-orthonormal, so each coefficient is just
    ``(f, phi_i)_K`` evaluated by quadrature.
    """
    if quad is None:
        quad = gauss_legendre(p + 1)
    elif isinstance(quad, int):
        quad = gauss_legendre(quad)
    if quad.npoints < p + 1:
        raise InvalidArgument(f"{quad.npoints}-point rule cannot resolve Q_{p}; need at least {p + 1}")
    d = geom.dim
    pts, w = tensor_rule(quad, d)
    vals, _ = TensorBasis(d, p).tabulate(pts)
    fx = np.broadcast_to(f(geom.map(pts)), w.shape)
    return ProjectionCoeffs(geom.id, p, np.sqrt(geom.jacobian) * (vals.T @ (w * fx)))


def project(f, mesh: TensorMesh, p: int, npoints: int | None = None) -> DGFunction:
    """Pi_p f on every element at once."""
    npoints = p + 1 if npoints is None else npoints
    if npoints < p + 1:
        raise InvalidArgument(f"{npoints}-point rule cannot resolve Q_{p}")
    pts, w = tensor_rule(gauss_legendre(npoints), mesh.dim)
    vals, _ = TensorBasis(mesh.dim, p).tabulate(pts)
    x = mesh.map_points(pts)
    fx = np.broadcast_to(f(x), x.shape[:-1])
    return DGFunction(mesh, p, np.sqrt(mesh.jacobians)[:, None] * ((fx * w) @ vals))


def _face_rule(d: int, axis: int, side: int, rule: QuadratureRule1D):
    pts, w = tensor_rule(rule, d - 1)
    full = np.insert(pts, axis, float(side), axis=1)
    return full, w


def projection_error(f, coeffs: ProjectionCoeffs, geom: ElementGeometry,
                     npoints: int | None = None) -> tuple[float, np.ndarray]:
    """||f - Pi_p f||_{0,K} and the L2 error on each of the 2d faces of K.

    Faces are ordered (axis 0 lower, axis 0 upper, axis 1 lower, ...).
    """
    p = coeffs.degree
    rule = gauss_legendre(p + 5 if npoints is None else npoints)
    d = geom.dim
    basis = TensorBasis(d, p)
    hw = geom.half_widths

    pts, w = tensor_rule(rule, d)
    c = coeffs.coeffs / np.sqrt(geom.jacobian)
    vals, _ = basis.tabulate(pts)
    err = np.broadcast_to(f(geom.map(pts)), w.shape) - vals @ c
    vol = np.sqrt(geom.jacobian * np.dot(w, err**2))

    faces = []
    for axis in range(d):
        jf = np.prod(np.delete(hw, axis))
        for side in (-1, 1):
            fpts, fw = _face_rule(d, axis, side, rule)
            fvals, _ = basis.tabulate(fpts)
            ferr = np.broadcast_to(f(geom.map(fpts)), fw.shape) - fvals @ c
            faces.append(np.sqrt(jf * np.dot(fw, ferr**2)))
    return float(vol), np.array(faces)


# ---------------------------------------------------------------------------
# 1D interpolant / bubble toolkit

@dataclass(frozen=True)
class AffineInterpolant:
    alpha: float
    beta: float
    value_alpha: float
    value_beta: float

    @property
    def slope(self) -> float:
        return (self.value_beta - self.value_alpha) / (self.beta - self.alpha)

    @property
    def intercept(self) -> float:
        return self.value_alpha - self.slope * self.alpha

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        # endpoint form keeps both endpoint values exact
        t = (x - self.alpha) / (self.beta - self.alpha)
        return (1.0 - t) * self.value_alpha + t * self.value_beta


def _check_interval(interval):
    a, b = (float(v) for v in interval)
    if not a < b:
        raise InvalidArgument(f"degenerate interval ({a}, {b})")
    return a, b


def linear_interpolant(fn, interval) -> AffineInterpolant:
    a, b = _check_interval(interval)
    return AffineInterpolant(a, b, float(fn(np.float64(a))), float(fn(np.float64(b))))


def bubble_weight(interval):
    """Quadratic bubble w(x) = -(x - alpha)(x - beta)."""
    a, b = _check_interval(interval)
    return lambda x: -(np.asarray(x, dtype=float) - a) * (np.asarray(x, dtype=float) - b)


def weighted_interpolant_deficit(fn, interval, samples: int = DEFAULT_SUP_SAMPLES) -> float:
    """Sampled sup over the open interval of |(fn - I fn) / sqrt(w)|."""
    if samples < 1000:
        raise InvalidArgument("use at least 1000 samples for the sup estimate")
    a, b = _check_interval(interval)
    interp = linear_interpolant(fn, (a, b))
    w = bubble_weight((a, b))
    # odd sample count so the midpoint is included
    x = np.linspace(a, b, samples + 2 + (samples % 2 == 0))[1:-1]
    return float(np.max(np.abs(fn(x) - interp(x)) / np.sqrt(w(x))))


def mesh_projection_error(f, mesh: TensorMesh, p: int, npoints: int | None = None) -> tuple[float, float]:
    """Global (volume, face) L2 errors of the elementwise projection of f.

    The face error sums every element's own boundary trace, so interior faces count twice.
    """
    vol = face = 0.0
    for geom in mesh.elements:
        coeffs = l2_project(f, geom, p, npoints if npoints is not None else p + 5)
        v, fe = projection_error(f, coeffs, geom)
        vol += v**2
        face += float(np.sum(np.square(fe)))
    return float(np.sqrt(vol)), float(np.sqrt(face))


# ---------------------------------------------------------------------------
# inverse constants on the reference interval

def _reference_matrix(p: int, weight=None) -> np.ndarray:
    """Gram matrix of derivatives of orthonormal Legendre polynomials,
    optionally weighted, integrated exactly."""
    rule = gauss_legendre(p + 2)
    _, ders = legendre_table(p, rule.nodes)
    wq = rule.weights if weight is None else rule.weights * weight(rule.nodes)
    return ders.T @ (wq[:, None] * ders)


def _max_rayleigh(mat: np.ndarray) -> float:
    try:
        # mass matrix is the identity in the orthonormal basis
        top = linalg.eigvalsh(mat)[-1]
    except linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    return float(np.sqrt(max(top, 0.0)))


def measure_h1_inverse_constant(p: int) -> float:
    """max over P_p(-1, 1) of |xi|_1 / ||xi||_0."""
    if p < 0:
        raise InvalidArgument("degree must be nonnegative")
    if p == 0:
        return 0.0
    return _max_rayleigh(_reference_matrix(p))


def measure_bubble_inverse_constant(p: int) -> float:
    """max over P_p(-1, 1) of ||sqrt(1 - x^2) xi'||_0 / ||xi||_0."""
    if p < 0:
        raise InvalidArgument("degree must be nonnegative")
    if p == 0:
        return 0.0
    return _max_rayleigh(_reference_matrix(p, lambda x: 1.0 - x**2))


def fit_loglog_slope(x, y) -> float:
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def deficit_rate(fn, widths, base: float = 0.5, samples: int = DEFAULT_SUP_SAMPLES) -> float:
    """Fitted log-log slope of the deficit on (base, base + h) against h.

    The base point should avoid zeros of fn''; there the deficit superconverges.
    """
    widths = [float(h) for h in widths]
    return fit_loglog_slope(widths, [weighted_interpolant_deficit(fn, (base, base + h), samples) for h in widths])


@dataclass(frozen=True)
class InverseConstantReport:
    kind: str
    degrees: tuple[int, ...]
    ratios: tuple[float, ...]
    slope: float | None
    reference: tuple[float, ...]
    reference_slope: float


def inverse_constant_report(kind: str, degrees) -> InverseConstantReport:
    degrees = tuple(int(p) for p in degrees)
    if kind == "h1":
        measure, ref, ref_slope = measure_h1_inverse_constant, (lambda p: float(p * p)), 2.0
    elif kind == "bubble":
        measure, ref, ref_slope = measure_bubble_inverse_constant, (lambda p: float(np.sqrt(p * (p + 1)))), 1.0
    else:
        raise InvalidArgument(f"unknown inverse constant {kind!r}")
    ratios = tuple(measure(p) for p in degrees)
    positive = [(p, r) for p, r in zip(degrees, ratios) if p > 0]
    slope = fit_loglog_slope(*zip(*positive)) if len(positive) >= 2 else None
    return InverseConstantReport(kind, degrees, ratios, slope, tuple(ref(p) for p in degrees), ref_slope)
