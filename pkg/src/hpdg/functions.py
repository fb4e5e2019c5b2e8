"""Broken (element-by-element) functions on a tensor mesh.

Anything that can report its values and physical gradients at reference
points of every element can enter the bilinear form, the dG norm and the
error diagnostics: discrete functions, exact solutions, and linear
combinations of both (e.g. ``u - u_n``).
"""
from __future__ import annotations

import numpy as np

from hpdg.errors import InvalidArgument
from hpdg.mesh import TensorMesh
from hpdg.quadrature import TensorBasis


class BrokenFunction:
    def values(self, mesh: TensorMesh, ref_points) -> np.ndarray:
        """Values at ``ref_points`` (nq, d) mapped into every element: (n_el, nq)."""
        raise NotImplementedError

    def gradients(self, mesh: TensorMesh, ref_points) -> np.ndarray:
        """Physical gradients, (n_el, nq, d)."""
        raise NotImplementedError

    def __add__(self, other):
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __neg__(self):
        return LinearCombination([(-1.0, self)])

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return LinearCombination([(float(alpha), self)])

    __rmul__ = __mul__


class LinearCombination(BrokenFunction):
    def __init__(self, terms):
        self.terms = list(terms)

    def values(self, mesh, ref_points):
        return sum(a * f.values(mesh, ref_points) for a, f in self.terms)

    def gradients(self, mesh, ref_points):
        return sum(a * f.gradients(mesh, ref_points) for a, f in self.terms)


class AnalyticFunction(BrokenFunction):
    def __init__(self, u, grad=None):
        self.u = u
        self.grad = grad

    def __call__(self, x):
        return self.u(x)

    def values(self, mesh, ref_points):
        x = mesh.map_points(np.atleast_2d(ref_points))
        return np.broadcast_to(self.u(x), x.shape[:-1])

    def gradients(self, mesh, ref_points):
        if self.grad is None:
            raise InvalidArgument("this function has no gradient")
        x = mesh.map_points(np.atleast_2d(ref_points))
        return np.broadcast_to(self.grad(x), x.shape)


class DGFunction(BrokenFunction):
    """Element-wise expansion in an L2(K)-orthonormal tensor Legendre basis.

    The basis on element K is the reference orthonormal basis pulled back
    through the affine map and divided by sqrt(J_K), so every element mass
    matrix is the identity.
    """

    def __init__(self, mesh: TensorMesh, degree: int, coeffs=None):
        self.mesh = mesh
        self.degree = degree
        self.basis = TensorBasis(mesh.dim, degree)
        shape = (mesh.num_elements, self.basis.size)
        if coeffs is None:
            coeffs = np.zeros(shape)
        coeffs = np.asarray(coeffs, dtype=float).reshape(shape)
        self.coeffs = coeffs

    @classmethod
    def from_vector(cls, mesh, degree, vector):
        return cls(mesh, degree, np.asarray(vector).reshape(mesh.num_elements, -1))

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.ravel()

    def _check_mesh(self, mesh):
        if mesh is not self.mesh and mesh.num_elements != self.mesh.num_elements:
            raise InvalidArgument("function lives on a different mesh")

    def values(self, mesh, ref_points):
        self._check_mesh(mesh)
        vals, _ = self.basis.tabulate(np.atleast_2d(ref_points))
        return (self.coeffs * self.mesh.inv_sqrt_jacobians[:, None]) @ vals.T

    def gradients(self, mesh, ref_points):
        self._check_mesh(mesh)
        _, grads = self.basis.tabulate(np.atleast_2d(ref_points))
        ref = np.einsum("ei,qik->eqk", self.coeffs * self.mesh.inv_sqrt_jacobians[:, None], grads)
        return ref / self.mesh.half_widths[:, None, :]

    def evaluate_element(self, element_id: int, ref_points) -> np.ndarray:
        vals, _ = self.basis.tabulate(np.atleast_2d(ref_points))
        return vals @ self.coeffs[element_id] * self.mesh.inv_sqrt_jacobians[element_id]

    def __call__(self, points) -> np.ndarray:
        """Evaluate at physical points (owning element chosen by ``mesh.locate``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        for k, x in enumerate(pts):
            eid = self.mesh.locate(x)
            ref = self.mesh.elements[eid].inverse_map(x)
            out[k] = self.evaluate_element(eid, ref[None, :])[0]
        return out

    def copy(self) -> "DGFunction":
        return DGFunction(self.mesh, self.degree, self.coeffs.copy())
