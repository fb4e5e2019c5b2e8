"""Gauss-Legendre rules and orthonormal Legendre tensor bases on (-1, 1)^d."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from hpdg.errors import InvalidArgument, NumericalError


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.nodes)

    def integrate(self, fn) -> float:
        return float(np.dot(self.weights, fn(self.nodes)))


def _legendre_with_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Classical (non-normalized) P_n and P_n' by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    dp_prev = np.zeros_like(x)
    if n == 0:
        return p_prev, dp_prev
    p = x.copy()
    dp = np.ones_like(x)
    for k in range(2, n + 1):
        p_next = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        # P_k' = P_{k-2}' + (2k-1) P_{k-1}
        dp_next = dp_prev + (2 * k - 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


@lru_cache(maxsize=None)
def _gauss_legendre_cached(n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    k = np.arange(n)
    x = -np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        if np.max(np.abs(dx)) > 1e-12:
            raise NumericalError(f"Newton iteration for {n}-point Gauss rule did not converge")
    # symmetrize to kill the last-ulp drift
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    w = 0.5 * (w + w[::-1])
    return tuple(x), tuple(w)


def gauss_legendre(n: int) -> QuadratureRule1D:
    """n-point Gauss-Legendre rule on (-1, 1); exact through degree 2n - 1."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"number of Gauss points must be a positive integer, got {n!r}")
    nodes, weights = _gauss_legendre_cached(int(n))
    return QuadratureRule1D(np.array(nodes), np.array(weights))


def legendre_eval(k: int, x):
    """Value and derivative of the orthonormal Legendre polynomial sqrt((2k+1)/2) P_k."""
    if k < 0:
        raise InvalidArgument("Legendre index must be nonnegative")
    scale = math.sqrt((2 * k + 1) / 2)
    p, dp = _legendre_with_derivative(k, np.asarray(x, dtype=float))
    if np.ndim(x) == 0:
        return float(scale * p), float(scale * dp)
    return scale * p, scale * dp


def legendre_table(p: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Legendre values and derivatives, shape (len(x), p + 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = np.empty((x.size, p + 1))
    ders = np.empty((x.size, p + 1))
    for k in range(p + 1):
        vals[:, k], ders[:, k] = legendre_eval(k, x)
    return vals, ders


def tensor_rule(rule: QuadratureRule1D, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product points (n^d, d) and weights (n^d,); axis 0 varies fastest."""
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([rule.nodes] * d), indexing="ij")
    wgrids = np.meshgrid(*([rule.weights] * d), indexing="ij")
    points = np.stack([g.ravel(order="F") for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel(order="F") for g in wgrids], axis=-1), axis=-1)
    return points, weights


@dataclass(frozen=True)
class TensorBasis:
    """Products of 1D orthonormal Legendre polynomials spanning Q_p on (-1, 1)^d.

    Basis index ``i`` maps to the multi-index ``multi_indices[i]``; the first
    coordinate's degree varies fastest.
    """

    dim: int
    degree: int
    multi_indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgument("dimension must be positive")
        if self.degree < 0:
            raise InvalidArgument("degree must be nonnegative")
        idx = [m[::-1] for m in itertools.product(range(self.degree + 1), repeat=self.dim)]
        object.__setattr__(self, "multi_indices", np.array(idx, dtype=int).reshape(-1, self.dim))

    @property
    def size(self) -> int:
        return (self.degree + 1) ** self.dim

    def index_of(self, multi_index) -> int:
        m = tuple(int(k) for k in multi_index)
        if len(m) != self.dim or min(m) < 0 or max(m) > self.degree:
            raise InvalidArgument(f"multi-index {m} outside Q_{self.degree} in {self.dim}D")
        return sum(k * (self.degree + 1) ** j for j, k in enumerate(m))

    def tabulate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Values (nq, nb) and reference gradients (nq, nb, d) at ``points`` (nq, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        nq = points.shape[0]
        tables = [legendre_table(self.degree, points[:, j]) for j in range(self.dim)]
        vals = np.ones((nq, self.size))
        grads = np.ones((nq, self.size, self.dim))
        for j, (v1, d1) in enumerate(tables):
            fv = v1[:, self.multi_indices[:, j]]
            fd = d1[:, self.multi_indices[:, j]]
            vals *= fv
            for k in range(self.dim):
                grads[:, :, k] *= fd if k == j else fv
        return vals, grads

    def evaluate(self, index: int, point) -> tuple[float, np.ndarray]:
        if not 0 <= index < self.size:
            raise InvalidArgument(f"basis index {index} out of range for {self.size} functions")
        point = np.asarray(point, dtype=float).reshape(1, self.dim)
        vals, grads = self.tabulate(point)
        return float(vals[0, index]), grads[0, index].copy()


def tensor_basis_eval(basis: TensorBasis, index, point) -> tuple[float, np.ndarray]:
    """Value and reference gradient of one tensor basis function.

    ``index`` is either a flat basis index or a multi-index tuple.
    """
    if not np.isscalar(index):
        index = basis.index_of(index)
    return basis.evaluate(int(index), point)
