"""Manufactured solutions with matching source and inflow data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hpdg.errors import InvalidArgument
from hpdg.functions import AnalyticFunction
from hpdg.problem import ConvectionField, FieldEntry, ReactionData


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    """Exact solution u with gradient.

    ``regularity`` is the nominal Sobolev index l (inf for analytic data);
    ``degree`` is the per-axis polynomial degree when u is a polynomial.
    """

    name: str
    dim: int
    u: callable
    grad: callable
    regularity: float = math.inf
    degree: int | None = None

    @property
    def function(self) -> AnalyticFunction:
        return AnalyticFunction(self.u, self.grad)

    def reaction_data(self, b: ConvectionField, c, c_s: float = 1.0) -> ReactionData:
        """f = b.grad(u) + c u and g_D = u."""
        u, grad = self.u, self.grad

        def f(x):
            return np.sum(b(x) * grad(x), axis=-1) + np.asarray(c(x)) * u(x)

        return ReactionData(c, f, u, c_s)

    def data_for(self, entry: FieldEntry) -> ReactionData:
        return self.reaction_data(entry.field, entry.c, entry.c_s)


def smooth_sine(dim: int, wavenumber: float = 1.0) -> ManufacturedSolution:
    k = math.pi * wavenumber

    def u(x):
        return np.prod(np.sin(k * x), axis=-1)

    def grad(x):
        s, c = np.sin(k * x), np.cos(k * x)
        out = np.empty(x.shape)
        for j in range(dim):
            out[..., j] = k * c[..., j] * np.prod(np.delete(s, j, axis=-1), axis=-1)
        return out

    return ManufacturedSolution("smooth-sine", dim, u, grad)


def poly_exact(dim: int, degree: int) -> ManufacturedSolution:
    """Product of sum_k t^k / (k + 1) over the axes, degree ``degree`` per axis."""
    if degree < 0:
        raise InvalidArgument("degree must be nonnegative")
    coef = np.array([1.0 / (k + 1) for k in range(degree + 1)])
    q = np.polynomial.Polynomial(coef)
    dq = q.deriv()

    def u(x):
        return np.prod(q(x), axis=-1)

    def grad(x):
        vals = q(x)
        out = np.empty(x.shape)
        for j in range(dim):
            out[..., j] = dq(x[..., j]) * np.prod(np.delete(vals, j, axis=-1), axis=-1)
        return out

    return ManufacturedSolution("poly-exact", dim, u, grad, degree=degree)


def singular_gamma(dim: int, gamma: float = 2.5, x0: float = 0.5) -> ManufacturedSolution:
    """|x_1 - x0|^gamma times exp(x_2 + ... + x_d).

    With x0 on a mesh line each element sees the singularity only at a face;
    the nominal elementwise regularity is l = gamma + 1/2.
    """
    if gamma <= 0.5:
        raise InvalidArgument("gamma must exceed 1/2 for an H^1 solution")

    def u(x):
        r = np.abs(x[..., 0] - x0) ** gamma
        return r * np.exp(np.sum(x[..., 1:], axis=-1))

    def grad(x):
        t = x[..., 0] - x0
        e = np.exp(np.sum(x[..., 1:], axis=-1))
        out = np.empty(x.shape)
        out[..., 0] = gamma * np.sign(t) * np.abs(t) ** (gamma - 1) * e
        out[..., 1:] = (np.abs(t) ** gamma * e)[..., None]
        return out

    return ManufacturedSolution("singular-gamma", dim, u, grad, regularity=gamma + 0.5)


SOLUTION_CATALOG = ("smooth-sine", "poly-exact", "singular-gamma")


def catalog_solution(name: str, dim: int, *, degree: int = 1, gamma: float = 2.5,
                     x0: float = 0.5, wavenumber: float = 1.0) -> ManufacturedSolution:
    if name == "smooth-sine":
        return smooth_sine(dim, wavenumber)
    if name == "poly-exact":
        return poly_exact(dim, degree)
    if name in ("singular-gamma", "singular-γ"):
        return singular_gamma(dim, gamma, x0)
    raise InvalidArgument(f"unknown solution {name!r}; choose from {list(SOLUTION_CATALOG)}")
