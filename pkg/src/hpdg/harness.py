"""Convergence studies, EOC bookkeeping and the error-splitting diagnostic."""
from __future__ import annotations

import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy

from hpdg.assembly import (
    ErrorReport,
    MeshQuadrature,
    NormReport,
    assemble_system,
    bilinear_value,
    compute_error,
    dg_norm,
    solve,
)
from hpdg.errors import InvalidArgument
from hpdg.functions import AnalyticFunction, BrokenFunction, DGFunction
from hpdg.mesh import BoxDomain, TensorMesh, build_mesh
from hpdg.problem import FIELD_CATALOG, ConvectionField, ReactionData, catalog_field
from hpdg.projection import fit_loglog_slope, project
from hpdg.solutions import SOLUTION_CATALOG, ManufacturedSolution, catalog_solution

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-8


def eoc(errors, params) -> list[float]:
    """Pairwise rates log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    errors = np.asarray(errors, dtype=float)
    params = np.asarray(params, dtype=float)
    if errors.shape != params.shape or errors.size < 2:
        raise InvalidArgument("need equally many errors and parameters, at least two")
    if np.any(errors <= 0) or np.any(params <= 0):
        raise InvalidArgument("errors and parameters must be positive")
    return list(np.log(errors[:-1] / errors[1:]) / np.log(params[:-1] / params[1:]))


@dataclass
class StudyConfig:
    dim: int = 1
    field: str = "constant"
    solution: str = "smooth-sine"
    refine: str = "h"
    degrees: tuple[int, ...] = (1,)
    meshes: tuple[int, ...] = (4, 8, 16, 32)
    gamma: float = 2.5
    x0: float = 0.5
    wavenumber: float = 1.0
    quad_offset: int = 2
    domain: tuple[tuple[float, float], ...] | None = None
    out: str | None = None

    def __post_init__(self):
        self.degrees = tuple(int(p) for p in np.atleast_1d(self.degrees))
        self.meshes = tuple(int(n) for n in np.atleast_1d(self.meshes))
        if self.domain is not None:
            self.domain = tuple(tuple(float(v) for v in iv) for iv in self.domain)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "StudyConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "StudyConfig":
        if self.refine not in ("h", "p"):
            raise InvalidArgument(f"refine must be 'h' or 'p', got {self.refine!r}")
        if self.refine == "h" and len(self.degrees) != 1:
            raise InvalidArgument("an h-study uses exactly one degree")
        if self.refine == "p" and len(self.meshes) != 1:
            raise InvalidArgument("a p-study uses exactly one mesh")
        if self.field not in FIELD_CATALOG:
            raise InvalidArgument(f"unknown field {self.field!r}")
        if self.solution not in SOLUTION_CATALOG:
            raise InvalidArgument(f"unknown solution {self.solution!r}")
        if not self.degrees or min(self.degrees) < 0:
            raise InvalidArgument("degrees must be nonnegative")
        if not self.meshes or min(self.meshes) < 1:
            raise InvalidArgument("mesh sizes must be positive")
        if not 1 <= self.dim <= 3:
            raise InvalidArgument("dim must be 1, 2 or 3")
        if self.quad_offset < 0:
            raise InvalidArgument("quad_offset must be nonnegative")
        return self

    @property
    def box(self) -> BoxDomain:
        return BoxDomain(self.domain) if self.domain else BoxDomain.unit(self.dim)

    def manufactured(self, p: int) -> ManufacturedSolution:
        return catalog_solution(self.solution, self.dim, degree=p, gamma=self.gamma,
                                x0=self.x0, wavenumber=self.wavenumber)


@dataclass
class StudyRow:
    param: float
    degree: int
    h: float
    n_elements: int
    dofs: int
    dg_error: float
    l2_error: float
    parts: NormReport
    rate: float | str | None = None


@dataclass
class StudyReport:
    config: StudyConfig
    rows: list[StudyRow]
    slope: float | None = None
    predictions: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failure: str | None = None

    @property
    def errors(self) -> list[float]:
        return [r.dg_error for r in self.rows]

    @property
    def rates(self) -> list:
        return [r.rate for r in self.rows]

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "refine": self.config.refine,
            "rows": len(self.rows),
            "dg_errors": self.errors,
            "l2_errors": [r.l2_error for r in self.rows],
            "rates": self.rates,
            "fitted_slope": self.slope,
            "predictions": self.predictions,
            "failure": self.failure,
            "environment": self.metadata,
        }


def _environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


def run_single(config: StudyConfig, p: int, cells) -> tuple[DGFunction, ErrorReport, ManufacturedSolution]:
    entry = catalog_field(config.field, config.dim)
    sol = config.manufactured(p)
    data = sol.data_for(entry)
    mesh = build_mesh(config.box, cells)
    system = assemble_system(entry.field, data, mesh, p, config.quad_offset)
    u_n = solve(system)
    err = compute_error(sol.function, u_n, entry.field, data)
    return u_n, err, sol


def _row(config, p, cells, param) -> StudyRow:
    u_n, err, _ = run_single(config, p, cells)
    mesh = u_n.mesh
    return StudyRow(param, p, mesh.h, mesh.num_elements, u_n.coeffs.size,
                    err.dg_error, err.l2, err.dg)


def _run_rows(config, plan) -> tuple[list[StudyRow], str | None]:
    rows = []
    for p, cells, param in plan:
        try:
            rows.append(_row(config, p, cells, param))
        except Exception as exc:  # record the failing row and stop
            logger.error("study row p=%s cells=%s failed: %s", p, cells, exc)
            return rows, f"p={p} cells={cells}: {type(exc).__name__}: {exc}"
        logger.info("p=%d cells=%s dg=%.3e l2=%.3e", p, cells, rows[-1].dg_error, rows[-1].l2_error)
    return rows, None


def _pairwise_rates(rows: list[StudyRow], params) -> None:
    for i in range(1, len(rows)):
        e0, e1 = rows[i - 1].dg_error, rows[i].dg_error
        if e0 <= EXACT_TOL and e1 <= EXACT_TOL:
            rows[i].rate = "exact"
        else:
            rows[i].rate = eoc([e0, e1], [params[i - 1], params[i]])[0]


def run_h_study(config: StudyConfig) -> StudyReport:
    config.validate()
    if config.refine != "h":
        raise InvalidArgument("config is not an h-study")
    p = config.degrees[0]
    plan = [(p, n, None) for n in config.meshes]
    rows, failure = _run_rows(config, plan)
    for r in rows:
        r.param = r.h
    _pairwise_rates(rows, [r.h for r in rows])
    sol = config.manufactured(p)
    s = min(p + 1, sol.regularity)
    report = StudyReport(config, rows, predictions={"dg_h_rate": s - 0.5, "l2_h_rate": s},
                         metadata=_environment(), failure=failure)
    return report


def p_rate_predictions(regularity: float) -> dict:
    """Asymptotic dG-error exponents in (p + 1) for solution regularity l."""
    if not math.isfinite(regularity):
        return {}
    ell = regularity
    return {"optimal": -(ell - 0.5), "separable_bound": -(ell - 1.0), "general_bound": -(ell - 2.0),
            "regularity": ell}


def run_p_study(config: StudyConfig) -> StudyReport:
    config.validate()
    if config.refine != "p":
        raise InvalidArgument("config is not a p-study")
    n = config.meshes[0]
    plan = [(p, n, float(p)) for p in config.degrees]
    rows, failure = _run_rows(config, plan)
    # local slopes against p + 1
    for i in range(1, len(rows)):
        e0, e1 = rows[i - 1].dg_error, rows[i].dg_error
        if e0 <= EXACT_TOL and e1 <= EXACT_TOL:
            rows[i].rate = "exact"
        else:
            rows[i].rate = eoc([e0, e1], [rows[i - 1].degree + 1, rows[i].degree + 1])[0]
    fit = [(r.degree + 1, r.dg_error) for r in rows if r.degree >= 1 and r.dg_error > 0]
    slope = fit_loglog_slope(*zip(*fit)) if len(fit) >= 2 else None
    sol = config.manufactured(max(config.degrees))
    return StudyReport(config, rows, slope=slope, predictions=p_rate_predictions(sol.regularity),
                       metadata=_environment(), failure=failure)


def run_study(config: StudyConfig) -> StudyReport:
    return run_h_study(config) if config.validate().refine == "h" else run_p_study(config)


# ---------------------------------------------------------------------------
# error splitting

@dataclass(frozen=True)
class TTermReport:
    t1: float
    t2: float
    t3: float
    t4: float
    bilinear: float
    xi_norm_sq: float
    t2_centered: float
    eta_l2: float
    xi_l2: float
    max_c_minus_div: float

    @property
    def total(self) -> float:
        return self.t1 + self.t2 + self.t3 + self.t4

    @property
    def scale(self) -> float:
        return max(abs(self.t1), abs(self.t2), abs(self.t3), abs(self.t4), abs(self.bilinear),
                   self.xi_norm_sq, np.finfo(float).tiny)

    @property
    def residual(self) -> float:
        """|T1 + T2 + T3 + T4 - B(eta, xi)|."""
        return abs(self.total - self.bilinear)

    @property
    def error_equation_residual(self) -> float:
        """| |||xi|||^2 + B(eta, xi) |."""
        return abs(self.xi_norm_sq + self.bilinear)

    @property
    def t1_bound(self) -> float:
        return self.max_c_minus_div * self.eta_l2 * self.xi_l2


def compute_T_terms(u: AnalyticFunction, u_n: DGFunction, b: ConvectionField, data: ReactionData,
                    npoints: int | None = None) -> TTermReport:
    """Split B(eta, xi) into its four terms, eta = u - Pi_p u, xi = Pi_p u - u_n.

    The projection and every integral share one tensor Gauss rule, so eta is
    orthogonal to Q_p up to rounding. For the error equation to hold to the
    same accuracy ``u_n`` should come from a solve with that rule.
    """
    mesh = u_n.mesh
    p = u_n.degree
    npoints = p + 4 if npoints is None else npoints
    pi_u = project(u, mesh, p, npoints)
    eta: BrokenFunction = u - pi_u
    xi: BrokenFunction = pi_u - u_n

    quad = MeshQuadrature(mesh, npoints)
    ref = quad.vol_ref
    x = quad.vol_x
    eta_v, xi_v = eta.values(mesh, ref), xi.values(mesh, ref)
    c_minus_div = np.broadcast_to(data.c(x), x.shape[:-1]) - b.divergence(x)
    bx = b(x)
    b_grad_xi = np.sum(bx * xi.gradients(mesh, ref), axis=-1)
    t1 = quad.integrate(c_minus_div * eta_v * xi_v)
    t2 = -quad.integrate(b_grad_xi * eta_v)
    # same term with the elementwise average b_0 removed
    b0 = np.einsum("eq,eqk->ek", quad.vol_wj, bx) / quad.vol_wj.sum(axis=1)[:, None]
    centered = np.sum((bx - b0[:, None, :]) * xi.gradients(mesh, ref), axis=-1)
    t2c = -quad.integrate(centered * eta_v)

    t3 = 0.0
    for g in quad.interior:
        bn_l = b(g.x)[..., g.axis]
        xi_l, xi_r = xi.values(mesh, g.ref_left)[g.left], xi.values(mesh, g.ref_right)[g.right]
        eta_l, eta_r = eta.values(mesh, g.ref_left)[g.left], eta.values(mesh, g.ref_right)[g.right]
        for bn, xi_own, xi_oth, eta_oth in ((bn_l, xi_l, xi_r, eta_r), (-bn_l, xi_r, xi_l, eta_l)):
            t3 += float(np.sum(np.where(bn < 0, g.wj * bn * (xi_own - xi_oth) * eta_oth, 0.0)))
    t4 = 0.0
    for g in quad.boundary:
        bn = g.side * b(g.x)[..., g.axis]
        xi_b, eta_b = xi.values(mesh, g.ref)[g.elems], eta.values(mesh, g.ref)[g.elems]
        t4 += float(np.sum(np.where(bn >= 0, g.wj * bn * xi_b * eta_b, 0.0)))

    return TTermReport(
        t1=t1, t2=t2, t3=t3, t4=t4,
        bilinear=bilinear_value(eta, xi, b, data, mesh, npoints),
        xi_norm_sq=dg_norm(xi, b, data, mesh, npoints).squared,
        t2_centered=t2c,
        eta_l2=float(np.sqrt(quad.integrate(eta_v**2))),
        xi_l2=float(np.sqrt(quad.integrate(xi_v**2))),
        max_c_minus_div=float(np.abs(c_minus_div).max()),
    )


def t_terms_for(config: StudyConfig, p: int, cells, quad_offset: int = 3) -> TTermReport:
    """Solve the configured problem and split its error; one rule for everything."""
    entry = catalog_field(config.field, config.dim)
    sol = config.manufactured(p)
    data = sol.data_for(entry)
    mesh: TensorMesh = build_mesh(config.box, cells)
    u_n = solve(assemble_system(entry.field, data, mesh, p, quad_offset))
    return compute_T_terms(sol.function, u_n, entry.field, data, p + 1 + quad_offset)
