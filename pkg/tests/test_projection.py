import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpdg.errors import InvalidArgument
from hpdg.harness import eoc
from hpdg.mesh import BoxDomain, build_mesh
from hpdg.projection import (
    bubble_weight,
    deficit_rate,
    fit_loglog_slope,
    inverse_constant_report,
    l2_project,
    linear_interpolant,
    measure_bubble_inverse_constant,
    measure_h1_inverse_constant,
    mesh_projection_error,
    project,
    projection_error,
    weighted_interpolant_deficit,
)
from hpdg.solutions import smooth_sine

# high-precision generalized eigenvalues in the monomial basis (mpmath, 60 digits)
H1_ORACLE = {2: 3.8729833462074169, 3: 6.5215968615064002, 8: 28.893970003167318, 16: 97.660445267967154}


def _elem(bounds):
    return build_mesh(BoxDomain(bounds), 1).elements[0]


def test_project_quadratic_onto_linears():
    geom = _elem([(-1.0, 1.0)])
    coeffs = l2_project(lambda x: x[..., 0] ** 2, geom, 1, 4)
    x = np.linspace(-1, 1, 5)[:, None]
    assert coeffs(geom, x) == pytest.approx(np.full(5, 1 / 3), abs=1e-14)


def test_project_sine_onto_constants():
    geom = _elem([(0.0, 1.0)])
    coeffs = l2_project(lambda x: np.sin(np.pi * x[..., 0]), geom, 0, 12)
    assert coeffs(geom, [[0.3]])[0] == pytest.approx(2 / np.pi, abs=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_projection_reproduces_polynomials(d):
    rng = np.random.default_rng(d)
    p = 2
    geom = build_mesh(BoxDomain([(0.0, 0.5)] * d), 2).elements[-1]
    a = rng.standard_normal((3,) * d)

    def f(x):
        out = np.zeros(x.shape[:-1])
        for idx in np.ndindex(*a.shape):
            out = out + a[idx] * np.prod([x[..., j] ** idx[j] for j in range(d)], axis=0)
        return out

    coeffs = l2_project(f, geom, p, p + 1)
    x = geom.map(rng.uniform(-1, 1, (20, d)))
    assert np.abs(coeffs(geom, x) - f(x)).max() <= 1e-12
    vol, faces = projection_error(f, coeffs, geom)
    assert vol <= 1e-11 and faces.max() <= 1e-11


def test_insufficient_quadrature_rejected():
    geom = _elem([(0.0, 1.0)])
    with pytest.raises(InvalidArgument):
        l2_project(np.sin, geom, 3, 3)


def test_project_matches_elementwise():
    mesh = build_mesh(BoxDomain.unit(2), (3, 2))
    f = smooth_sine(2).u
    u = project(f, mesh, 2, 7)
    for g in mesh.elements:
        assert np.abs(u.coeffs[g.id] - l2_project(f, g, 2, 7).coeffs).max() <= 1e-14


def test_idempotence_and_orthogonality():
    geom = _elem([(0.2, 0.7), (0.1, 0.3)])
    f = smooth_sine(2, 1.5).u
    c1 = l2_project(f, geom, 3, 8)
    c2 = l2_project(lambda x: c1(geom, x.reshape(-1, 2)).reshape(x.shape[:-1]), geom, 3, 8)
    assert np.abs(c1.coeffs - c2.coeffs).max() <= 1e-12
    # residual against each basis function with a much finer rule
    fine = l2_project(lambda x: f(x) - c1(geom, x.reshape(-1, 2)).reshape(x.shape[:-1]), geom, 3, 20)
    assert np.abs(fine.coeffs).max() <= 1e-11 * math.sqrt(geom.volume)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_monomial_projection_error_scaling(p):
    errs = []
    hs = [1.0, 0.5, 0.25]
    for h in hs:
        geom = _elem([(0.0, h)])
        f = lambda x: x[..., 0] ** (p + 1)  # noqa: E731
        errs.append(projection_error(f, l2_project(f, geom, p, p + 5), geom)[0])
    # exact scaling h^(p + 3/2) of the absolute norm
    assert eoc(errs, hs) == pytest.approx([p + 1.5, p + 1.5], abs=1e-10)


def test_projection_error_face_order():
    geom = _elem([(0.0, 1.0), (0.0, 1.0)])
    f = lambda x: x[..., 0] ** 3  # noqa: E731
    coeffs = l2_project(f, geom, 1, 6)
    vol, faces = projection_error(f, coeffs, geom)
    err = lambda t: t**3 - coeffs(geom, [[t, 0.5]])[0]  # noqa: E731
    # axis-0 faces see point values of the x1 profile, axis-1 faces the whole profile
    assert faces[0] == pytest.approx(abs(err(0.0)), rel=1e-12)
    assert faces[1] == pytest.approx(abs(err(1.0)), rel=1e-12)
    assert faces[2] == pytest.approx(vol, rel=1e-12) and faces[3] == pytest.approx(vol, rel=1e-12)


@pytest.mark.parametrize("d,ns", [(1, (8, 16, 32)), (2, (4, 8, 16))])
def test_projection_rates(d, ns):
    f = smooth_sine(d).u
    for p in (1, 2, 3):
        vol, face = zip(*(mesh_projection_error(f, build_mesh(BoxDomain.unit(d), n), p) for n in ns))
        hs = [1.0 / n for n in ns]
        assert eoc(vol, hs)[-1] == pytest.approx(p + 1, abs=0.1)
        assert eoc(face, hs)[-1] == pytest.approx(p + 0.5, abs=0.1)


def test_linear_interpolant_examples():
    ia = linear_interpolant(lambda x: 3 * x - 1, (0.2, 2.0))
    assert ia.slope == pytest.approx(3.0) and ia.intercept == pytest.approx(-1.0)
    iq = linear_interpolant(lambda x: x**2, (0.0, 1.0))
    assert iq(np.array([0.0, 0.3, 1.0])) == pytest.approx([0.0, 0.3, 1.0], abs=1e-15)
    ic = linear_interpolant(np.cos, (0.0, np.pi / 2))
    x = np.linspace(0, np.pi / 2, 7)
    assert ic(x) == pytest.approx(1 - 2 * x / np.pi, abs=1e-15)


@given(st.floats(-5, 5), st.floats(0.01, 3))
@settings(max_examples=50, deadline=None)
def test_interpolant_matches_endpoints(a, h):
    fn = np.exp
    ip = linear_interpolant(fn, (a, a + h))
    assert ip(a) == float(fn(a))
    assert ip(a + h) == float(fn(a + h))


def test_bubble_examples():
    h = 0.4
    w = bubble_weight((0.0, h))
    assert w(h / 2) == pytest.approx(h**2 / 4, abs=1e-16)
    assert w(0.0) == 0.0 and w(h) == 0.0
    assert bubble_weight((-1.0, 1.0))(0.0) == 1.0
    assert np.all(w(np.linspace(0, h, 11)) >= 0)
    with pytest.raises(InvalidArgument):
        bubble_weight((1.0, 1.0))


def test_deficit_examples():
    assert weighted_interpolant_deficit(lambda x: 2 * x + 1, (0.0, 1.0)) <= 1e-13
    assert weighted_interpolant_deficit(lambda x: x**2, (0.0, 1.0)) == pytest.approx(0.5, abs=1e-15)
    for h in (1.0, 0.5, 2.0**-6):
        assert abs(weighted_interpolant_deficit(lambda x: x**2, (0.0, h)) - h / 2) <= 1e-12
    with pytest.raises(InvalidArgument):
        weighted_interpolant_deficit(np.cos, (0.0, 1.0), samples=999)


def test_deficit_rate_near_one():
    hs = [2.0**-k for k in range(1, 7)]
    for fn in (np.tanh, np.cos, np.exp):
        assert deficit_rate(fn, hs) == pytest.approx(1.0, abs=0.1)


def test_h1_inverse_constant():
    assert measure_h1_inverse_constant(0) == 0.0
    assert abs(measure_h1_inverse_constant(1) - math.sqrt(3)) <= 1e-10
    assert measure_h1_inverse_constant(2) == pytest.approx(math.sqrt(15), rel=1e-13)
    for p, ref in H1_ORACLE.items():
        assert measure_h1_inverse_constant(p) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("p", range(0, 21))
def test_bubble_inverse_constant(p):
    assert abs(measure_bubble_inverse_constant(p) - math.sqrt(p * (p + 1))) <= 1e-8


def test_bubble_p1():
    assert measure_bubble_inverse_constant(1) == pytest.approx(math.sqrt(2), abs=1e-14)


@pytest.mark.parametrize("kind", ["h1", "bubble"])
def test_inverse_report_monotone(kind):
    rep = inverse_constant_report(kind, range(0, 12))
    assert all(r >= 0 for r in rep.ratios)
    assert all(b >= a for a, b in zip(rep.ratios, rep.ratios[1:]))
    with pytest.raises(InvalidArgument):
        inverse_constant_report("nope", [1])


def test_fit_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert fit_loglog_slope(x, 3 * x**-2.5) == pytest.approx(-2.5, abs=1e-12)
