"""Upwind dG operator and load assembly, solvers, dG norm and errors.

Element-level work is vectorized over all elements of the mesh: every
element is an axis-aligned box, so one set of reference tables serves the
whole mesh and only the physical points, Jacobians and coefficient fields
differ per element.
"""
from __future__ import annotations

import graphlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hpdg.errors import InvalidArgument, NotApplicable, NumericalError, RejectedProblem
from hpdg.functions import AnalyticFunction, BrokenFunction, DGFunction
from hpdg.mesh import TensorMesh
from hpdg.problem import ConvectionField, ReactionData, check_well_posedness
from hpdg.quadrature import TensorBasis, gauss_legendre, tensor_rule

logger = logging.getLogger(__name__)

DEFAULT_QUAD_OFFSET = 2


@dataclass(frozen=True, eq=False)
class InteriorFaces:
    """Interior faces orthogonal to ``axis``; ``left`` has the face on its upper side."""

    axis: int
    left: np.ndarray
    right: np.ndarray
    ref_left: np.ndarray
    ref_right: np.ndarray
    x: np.ndarray
    wj: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryFaces:
    axis: int
    side: int
    elems: np.ndarray
    ref: np.ndarray
    x: np.ndarray
    wj: np.ndarray


@lru_cache(maxsize=64)
def _rules(dim: int, npoints: int):
    rule = gauss_legendre(npoints)
    vol = tensor_rule(rule, dim)
    fpts, fw = tensor_rule(rule, dim - 1)
    faces = {(a, s): np.insert(fpts, a, float(s), axis=1) for a in range(dim) for s in (-1, 1)}
    return vol, fw, faces


class MeshQuadrature:
    """Tensor Gauss points on every element and face of a mesh."""

    def __init__(self, mesh: TensorMesh, npoints: int):
        if npoints < 1:
            raise InvalidArgument("need at least one quadrature point per axis")
        self.mesh = mesh
        self.npoints = npoints
        d = mesh.dim
        (vol_ref, vol_w), fw, face_ref = _rules(d, npoints)
        self.vol_ref = vol_ref
        self.vol_x = mesh.map_points(vol_ref)
        self.vol_wj = vol_w[None, :] * mesh.jacobians[:, None]

        hw = mesh.half_widths
        self.interior: list[InteriorFaces] = []
        self.boundary: list[BoundaryFaces] = []
        for axis in range(d):
            jf_all = np.prod(np.delete(hw, axis, axis=1), axis=1)
            pairs = [f.elements for f in mesh.faces if f.axis == axis and not f.is_boundary]
            if pairs:
                # faces list (upper-side element, lower-side element)
                left = np.array([p[0] for p in pairs])
                right = np.array([p[1] for p in pairs])
                ref_l, ref_r = face_ref[(axis, 1)], face_ref[(axis, -1)]
                x = mesh.map_points(ref_l)[left]
                self.interior.append(InteriorFaces(axis, left, right, ref_l, ref_r, x,
                                                   fw[None, :] * jf_all[left, None]))
            for side in (-1, 1):
                elems = np.array([f.elements[0] for f in mesh.faces
                                  if f.axis == axis and f.is_boundary and f.sides[0] == side])
                if elems.size == 0:
                    continue
                ref = face_ref[(axis, side)]
                x = mesh.map_points(ref)[elems]
                self.boundary.append(BoundaryFaces(axis, side, elems, ref, x,
                                                   fw[None, :] * jf_all[elems, None]))

    def integrate(self, values) -> float:
        return float(np.sum(self.vol_wj * values))


def _npoints(p: int, quad_offset: int) -> int:
    if quad_offset < 0:
        raise InvalidArgument("quadrature offset must be nonnegative")
    return p + 1 + quad_offset


def _scalar(fn, x):
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape[:-1])


@dataclass(eq=False)
class DGSystem:
    """Block-sparse realization of the upwind bilinear form and its load.

    Row blocks are test functions, column blocks trial functions, so
    ``w @ matrix @ v`` equals ``B(v, w)``. ``couplings`` holds the pairs
    ``(K, N)`` for which element K reads upwind data from neighbour N.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    mesh: TensorMesh
    degree: int
    npoints: int
    couplings: frozenset[tuple[int, int]]
    convection: ConvectionField | None = None
    data: ReactionData | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def block_size(self) -> int:
        return (self.degree + 1) ** self.mesh.dim

    def block(self, row: int, col: int) -> np.ndarray:
        nb = self.block_size
        return self.matrix[row * nb:(row + 1) * nb, col * nb:(col + 1) * nb].toarray()

    def bilinear(self, v: DGFunction, w: DGFunction) -> float:
        return float(w.vector @ (self.matrix @ v.vector))


def assemble_operator(b: ConvectionField, data: ReactionData, mesh: TensorMesh, p: int,
                      quad_offset: int = DEFAULT_QUAD_OFFSET, check: bool = True) -> DGSystem:
    """Matrix of the upwind dG bilinear form (``rhs`` left at zero)."""
    if p < 0:
        raise InvalidArgument("degree must be nonnegative")
    if b.dim != mesh.dim:
        raise InvalidArgument(f"{b.dim}D field on a {mesh.dim}D mesh")
    npoints = _npoints(p, quad_offset)
    if check:
        report = check_well_posedness(data, b, mesh, max(npoints, p + 2))
        if not report.passed:
            raise RejectedProblem(
                f"min of c - div(b)/2 is {report.min_value:.3g} < c_s = {report.c_s:.3g}")
    quad = MeshQuadrature(mesh, npoints)
    basis = TensorBasis(mesh.dim, p)
    nb = basis.size
    ne = mesh.num_elements

    rows, cols, blocks = [], [], []

    vals, grads = basis.tabulate(quad.vol_ref)
    bx = b(quad.vol_x)
    cx = _scalar(data.c, quad.vol_x)
    # trial side: b . grad(phi_j) + c phi_j, physical gradient = ref / half-width
    trial = np.einsum("eqk,qjk->eqj", bx / mesh.half_widths[:, None, :], grads) + cx[..., None] * vals
    vol_blocks = np.einsum("eq,qi,eqj->eij", quad.vol_wj, vals, trial)
    ids = np.arange(ne)
    rows.append(ids), cols.append(ids), blocks.append(vol_blocks)

    couplings = set()
    for g in quad.interior:
        v_l, _ = basis.tabulate(g.ref_left)
        v_r, _ = basis.tabulate(g.ref_right)
        bn_l = b(g.x)[..., g.axis]
        for own, other, v_own, v_other, bn in ((g.left, g.right, v_l, v_r, bn_l),
                                               (g.right, g.left, v_r, v_l, -bn_l)):
            inflow = bn < 0
            # -(b.n)(u_own - u_other) v_own on inflow points
            k = np.where(inflow, -bn, 0.0) * g.wj
            rows.append(own), cols.append(own)
            blocks.append(np.einsum("fq,qi,qj->fij", k, v_own, v_own))
            rows.append(own), cols.append(other)
            blocks.append(-np.einsum("fq,qi,qj->fij", k, v_own, v_other))
            hit = inflow.any(axis=1)
            couplings.update(zip(own[hit].tolist(), other[hit].tolist()))

    for g in quad.boundary:
        v_b, _ = basis.tabulate(g.ref)
        bn = g.side * b(g.x)[..., g.axis]
        k = np.where(bn < 0, -bn, 0.0) * g.wj
        rows.append(g.elems), cols.append(g.elems)
        blocks.append(np.einsum("fq,qi,qj->fij", k, v_b, v_b))

    matrix = _blocks_to_csr(rows, cols, blocks, mesh.inv_sqrt_jacobians, nb)
    return DGSystem(matrix, np.zeros(ne * nb), mesh, p, npoints, frozenset(couplings), b, data,
                    {"quad_offset": quad_offset})


def _blocks_to_csr(rows, cols, blocks, scale, nb) -> sp.csr_matrix:
    """Scatter element blocks; ``scale`` converts reference-basis blocks to the
    L2(K)-orthonormal basis (1/sqrt(J) per row and column element)."""
    local = np.arange(nb)
    ne = len(scale)
    r_all, c_all, v_all = [], [], []
    for r, c, blk in zip(rows, cols, blocks):
        r_all.append(np.broadcast_to((r[:, None] * nb + local)[:, :, None], blk.shape).ravel())
        c_all.append(np.broadcast_to((c[:, None] * nb + local)[:, None, :], blk.shape).ravel())
        v_all.append((blk * (scale[r] * scale[c])[:, None, None]).ravel())
    n = ne * nb
    mat = sp.coo_matrix((np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
                        shape=(n, n)).tocsr()
    mat.eliminate_zeros()
    return mat


def assemble_rhs(b: ConvectionField, data: ReactionData, mesh: TensorMesh, p: int,
                 quad_offset: int = DEFAULT_QUAD_OFFSET) -> np.ndarray:
    """Load vector: (f, v)_K plus -(b.n) g_D v on inflow boundary points."""
    quad = MeshQuadrature(mesh, _npoints(p, quad_offset))
    basis = TensorBasis(mesh.dim, p)
    vals, _ = basis.tabulate(quad.vol_ref)
    load = (quad.vol_wj * _scalar(data.f, quad.vol_x)) @ vals
    for g in quad.boundary:
        v_b, _ = basis.tabulate(g.ref)
        bn = g.side * b(g.x)[..., g.axis]
        k = np.where(bn < 0, -bn, 0.0) * g.wj
        np.add.at(load, g.elems, (k * _scalar(data.g_D, g.x)) @ v_b)
    return (load * mesh.inv_sqrt_jacobians[:, None]).ravel()


def assemble_system(b, data, mesh, p, quad_offset: int = DEFAULT_QUAD_OFFSET, check: bool = True) -> DGSystem:
    system = assemble_operator(b, data, mesh, p, quad_offset, check=check)
    system.rhs = assemble_rhs(b, data, mesh, p, quad_offset)
    return system


def _check_residual(system: DGSystem, x: np.ndarray) -> None:
    res = np.linalg.norm(system.matrix @ x - system.rhs)
    scale = spla.norm(system.matrix) * np.linalg.norm(x) + np.linalg.norm(system.rhs)
    if not np.all(np.isfinite(x)) or res > 1e-10 * max(scale, np.finfo(float).tiny):
        raise NumericalError(f"linear solve failed: residual {res:.3e} vs scale {scale:.3e}")


def solve(system: DGSystem) -> DGFunction:
    """Direct sparse LU solve of the global system."""
    try:
        x = spla.spsolve(system.matrix.tocsc(), system.rhs)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise NumericalError(str(exc)) from exc
    x = np.atleast_1d(x)
    _check_residual(system, x)
    return DGFunction.from_vector(system.mesh, system.degree, x)


def upwind_order(system: DGSystem) -> list[int]:
    """Elements ordered so every upwind neighbour precedes its dependents."""
    graph = {e: set() for e in range(system.mesh.num_elements)}
    for own, other in system.couplings:
        graph[own].add(other)
    try:
        return list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        raise NotApplicable(f"upwind dependency graph has a cycle through elements {exc.args[1]}") from None


def downwind_sweep_solve(system: DGSystem) -> DGFunction:
    """Block forward substitution in upwind order; requires an acyclic inflow graph."""
    order = upwind_order(system)
    nb = system.block_size
    bsr = sp.bsr_matrix(system.matrix, blocksize=(nb, nb))
    bsr.sort_indices()
    u = np.zeros((system.mesh.num_elements, nb))
    rhs = system.rhs.reshape(-1, nb)
    for e in order:
        start, stop = bsr.indptr[e], bsr.indptr[e + 1]
        local = rhs[e].copy()
        diag = None
        for col, blk in zip(bsr.indices[start:stop], bsr.data[start:stop]):
            if col == e:
                diag = blk
            else:
                local -= blk @ u[col]
        if diag is None:
            raise NumericalError(f"element {e} has no diagonal block")
        try:
            u[e] = np.linalg.solve(diag, local)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular diagonal block on element {e}") from exc
    return DGFunction(system.mesh, system.degree, u)


# ---------------------------------------------------------------------------
# direct-quadrature forms on broken functions

@dataclass(frozen=True)
class NormReport:
    volume: float
    inflow: float
    outflow: float
    jump: float

    @property
    def squared(self) -> float:
        return self.volume + self.inflow + self.outflow + self.jump

    @property
    def total(self) -> float:
        return float(np.sqrt(self.squared))


def dg_norm(v: BrokenFunction, b: ConvectionField, data: ReactionData, mesh: TensorMesh,
            npoints: int) -> NormReport:
    """Squared constituents of the dG norm of ``v``."""
    quad = MeshQuadrature(mesh, npoints)
    c0sq = _scalar(data.c, quad.vol_x) - 0.5 * np.asarray(b.divergence(quad.vol_x))
    if np.min(c0sq) < 0:
        raise RejectedProblem(f"c - div(b)/2 is negative ({np.min(c0sq):.3g}) at a quadrature point")
    vol = quad.integrate(c0sq * v.values(mesh, quad.vol_ref) ** 2)

    inflow = outflow = 0.0
    for g in quad.boundary:
        bn = g.side * b(g.x)[..., g.axis]
        vv = v.values(mesh, g.ref)[g.elems]
        weighted = 0.5 * g.wj * np.abs(bn) * vv**2
        inflow += float(np.sum(weighted[bn < 0]))
        outflow += float(np.sum(weighted[bn >= 0]))

    jump = 0.0
    for g in quad.interior:
        bn = b(g.x)[..., g.axis]
        diff = v.values(mesh, g.ref_left)[g.left] - v.values(mesh, g.ref_right)[g.right]
        # every point with b.n != 0 is inflow for exactly one side
        jump += float(np.sum(0.5 * g.wj * np.abs(bn) * diff**2))
    return NormReport(vol, inflow, outflow, jump)


def bilinear_value(v: BrokenFunction, w: BrokenFunction, b: ConvectionField, data: ReactionData,
                   mesh: TensorMesh, npoints: int) -> float:
    """B(v, w) by direct quadrature, for any broken functions."""
    quad = MeshQuadrature(mesh, npoints)
    bx = b(quad.vol_x)
    conv = np.sum(bx * v.gradients(mesh, quad.vol_ref), axis=-1)
    react = _scalar(data.c, quad.vol_x) * v.values(mesh, quad.vol_ref)
    total = quad.integrate((conv + react) * w.values(mesh, quad.vol_ref))

    for g in quad.interior:
        bn_l = b(g.x)[..., g.axis]
        v_l, v_r = v.values(mesh, g.ref_left)[g.left], v.values(mesh, g.ref_right)[g.right]
        w_l, w_r = w.values(mesh, g.ref_left)[g.left], w.values(mesh, g.ref_right)[g.right]
        for bn, v_own, v_oth, w_own in ((bn_l, v_l, v_r, w_l), (-bn_l, v_r, v_l, w_r)):
            total -= float(np.sum(np.where(bn < 0, g.wj * bn * (v_own - v_oth) * w_own, 0.0)))
    for g in quad.boundary:
        bn = g.side * b(g.x)[..., g.axis]
        vv, ww = v.values(mesh, g.ref)[g.elems], w.values(mesh, g.ref)[g.elems]
        total -= float(np.sum(np.where(bn < 0, g.wj * bn * vv * ww, 0.0)))
    return total


def load_value(w: BrokenFunction, b: ConvectionField, data: ReactionData, mesh: TensorMesh,
               npoints: int) -> float:
    """F(w) by direct quadrature."""
    quad = MeshQuadrature(mesh, npoints)
    total = quad.integrate(_scalar(data.f, quad.vol_x) * w.values(mesh, quad.vol_ref))
    for g in quad.boundary:
        bn = g.side * b(g.x)[..., g.axis]
        ww = w.values(mesh, g.ref)[g.elems]
        total -= float(np.sum(np.where(bn < 0, g.wj * bn * _scalar(data.g_D, g.x) * ww, 0.0)))
    return total


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    dg: NormReport

    @property
    def dg_error(self) -> float:
        return self.dg.total


def compute_error(u: AnalyticFunction, u_n: DGFunction, b: ConvectionField, data: ReactionData,
                  npoints: int | None = None) -> ErrorReport:
    """L2 and dG-norm errors of ``u_n`` against the exact ``u`` (overintegrated)."""
    mesh = u_n.mesh
    npoints = u_n.degree + 5 if npoints is None else npoints
    err = u - u_n
    quad = MeshQuadrature(mesh, npoints)
    l2 = float(np.sqrt(quad.integrate(err.values(mesh, quad.vol_ref) ** 2)))
    return ErrorReport(l2, dg_norm(err, b, data, mesh, npoints))
