import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad, quad

from bieinv import kernels
from bieinv.errors import SingularityError


def test_free_space_kernel_2d():
    x = np.array([0.0, 0.0])
    assert kernels.fundamental_solution(x, np.array([0.5, 0.0])) == pytest.approx(
        np.log(2.0) / (2 * np.pi))
    # unit separation is the kernel's zero crossing
    assert kernels.fundamental_solution(x, np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-15)


def test_free_space_kernel_3d():
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([0.0, 0.25, 0.0])
    assert kernels.fundamental_solution(x, y) == pytest.approx(1.0 / np.pi, rel=1e-12)


def test_normal_derivative_2d():
    x = np.array([0.0, 0.0])
    y = np.array([1.0, 0.0])
    assert kernels.normal_derivative(x, y, np.array([1.0, 0.0])) == pytest.approx(
        -1.0 / (2 * np.pi))
    # normal orthogonal to the separation: no flux
    assert kernels.normal_derivative(x, y, np.array([0.0, 1.0])) == 0.0


def test_normal_derivative_3d():
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([1.0, 0.0, 0.0])
    n = np.array([1.0, 0.0, 0.0])
    assert kernels.normal_derivative(x, y, n) == pytest.approx(-1.0 / (4 * np.pi))


def test_kernel_matrix_symmetry():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, size=(5, 2))
    Y = rng.uniform(2, 3, size=(7, 2))
    assert np.allclose(kernels.kernel_matrix(X, Y), kernels.kernel_matrix(Y, X).T)


def test_coincident_points_raise_and_name_the_pair():
    X = np.array([[0.25, 0.75]])
    with pytest.raises(SingularityError) as err:
        kernels.kernel_matrix(X, X)
    assert "0.25" in str(err.value) and "0.75" in str(err.value)


def test_near_coincident_points_raise():
    X = np.array([[0.5, 0.5]])
    Y = X + 1e-14
    with pytest.raises(SingularityError):
        kernels.fundamental_solution(X, Y)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.01, 0.99), L=st.floats(0.5, 2.0))
def test_edge_moment_matches_adaptive_quadrature(c, L):
    if c >= L:
        return
    exact, _ = quad(lambda t: -np.log(abs(t - c)) / (2 * np.pi), 0.0, L,
                    points=[c], limit=200)
    assert kernels.single_layer_edge_moment(c, L) == pytest.approx(exact, abs=1e-10)


def test_edge_moment_endpoint():
    exact, _ = quad(lambda t: -np.log(t) / (2 * np.pi), 0.0, 1.0)
    assert kernels.single_layer_edge_moment(0.0, 1.0) == pytest.approx(exact, abs=1e-12)


def test_face_moment_matches_adaptive_quadrature():
    s0, t0, ulen, vlen = 0.3, 0.6, 1.0, 1.0
    exact, err = dblquad(
        lambda t, s: 1.0 / (4 * np.pi * np.hypot(s - s0, t - t0)),
        0.0, ulen, 0.0, vlen, epsabs=1e-11)
    assert kernels.single_layer_face_moment(s0, t0, ulen, vlen) == pytest.approx(exact, abs=1e-8)


def test_face_moment_center_symmetry():
    m = kernels.single_layer_face_moment
    assert m(0.5, 0.5, 1.0, 1.0) == pytest.approx(m(0.5, 0.5, 1.0, 1.0))
    assert m(0.2, 0.5, 1.0, 1.0) == pytest.approx(m(0.8, 0.5, 1.0, 1.0), rel=1e-12)
