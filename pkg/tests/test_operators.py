import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_hermitian, taylor_expm
from pathboltz.operators import (
    EvolutionParameter,
    ExponentialOverflow,
    HermitianOperator,
    MatrixFormatError,
    check_hermitian,
    check_unitary,
    frobenius_distance,
    matrix_exponential,
    read_matrix_csv,
    write_matrix_csv,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])


def test_check_hermitian_examples():
    assert check_hermitian(np.eye(2), 1e-12)
    assert not check_hermitian([[0, 1], [0, 0]], 1e-12)
    assert check_hermitian(SY, 1e-12)


def test_check_hermitian_rejects_non_square():
    with pytest.raises(ValueError):
        check_hermitian(np.ones((2, 3)))


def test_hermitian_operator_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        HermitianOperator([[0, 1], [0, 0]])


def test_exponential_of_zero_is_identity():
    for beta in (0.3, 1j, 2 - 1j):
        np.testing.assert_array_equal(matrix_exponential(np.zeros((2, 2)), beta), np.eye(2))


def test_exponential_diagonal_ln2():
    u = matrix_exponential(np.diag([0.0, 1.0]), EvolutionParameter.thermal(math.log(2)))
    np.testing.assert_allclose(u, np.diag([1.0, 0.5]), atol=1e-15)


def test_exponential_overflow_is_reported():
    with pytest.raises(ExponentialOverflow):
        matrix_exponential(np.diag([-1000.0, 0.0]), 1.0)
    assert isinstance(ExponentialOverflow("x"), ArithmeticError)


def test_exponential_matches_taylor_oracle():
    rng = np.random.default_rng(0)
    h = random_hermitian(rng, 6)
    u = matrix_exponential(h, 0.37)
    assert np.max(np.abs(u - taylor_expm(-0.37 * h))) <= 1e-10


def test_unitarity_examples():
    assert check_unitary(matrix_exponential(SX, EvolutionParameter.real_time(1.3)), 1e-10)
    thermal = matrix_exponential(SX, EvolutionParameter.thermal(1.0))
    # oracle: exp(-sx) = cosh(1) I - sinh(1) sx, so U^H U = cosh(2) I - sinh(2) sx
    oracle = math.cosh(1) * np.eye(2) - math.sinh(1) * SX
    np.testing.assert_allclose(thermal, oracle, atol=1e-14)
    assert np.max(np.abs(oracle.conj().T @ oracle - np.eye(2))) > 1e-3
    assert not check_unitary(thermal, 1e-3)
    assert check_unitary(np.eye(3))


def test_frobenius_distance():
    a = np.array([[1, 2j], [3, 4]])
    assert frobenius_distance(a, a) == 0
    assert frobenius_distance(np.eye(2), np.zeros((2, 2))) == pytest.approx(math.sqrt(2), abs=1e-15)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    y = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    direct = math.sqrt(sum(abs(x[i, j] - y[i, j]) ** 2 for i in range(4) for j in range(5)))
    assert abs(frobenius_distance(x, y) - direct) <= 1e-14
    with pytest.raises(ValueError):
        frobenius_distance(np.eye(2), np.eye(3))


def test_evolution_parameter_tags():
    with pytest.raises(ValueError):
        EvolutionParameter.thermal(-1.0)
    with pytest.raises(ValueError):
        EvolutionParameter(1 + 1j, kind=EvolutionParameter.real_time(1).kind)
    assert EvolutionParameter.real_time(2.0).beta == 2j


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1),
       st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.5))
def test_exponential_composition(d, seed, b1, b2):
    h = random_hermitian(np.random.default_rng(seed), d)
    lhs = matrix_exponential(h, b1) @ matrix_exponential(h, b2)
    np.testing.assert_allclose(lhs, matrix_exponential(h, b1 + b2), atol=1e-10 * max(1, np.abs(lhs).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_trace_invariance(d, seed, beta):
    h = random_hermitian(np.random.default_rng(seed), d)
    lam = np.linalg.eigvalsh(h)
    assert abs(np.trace(matrix_exponential(h, beta)) - np.exp(-beta * lam).sum()) <= 1e-10 * max(1, np.exp(-beta * lam).sum())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=2))
def test_wick_conjugation(d, seed, beta):
    h = random_hermitian(np.random.default_rng(seed), d)
    a = matrix_exponential(h, beta)
    b = matrix_exponential(h, beta.conjugate())
    np.testing.assert_allclose(a, b.conj().T, atol=1e-12 * max(1, np.abs(a).max()))


def test_matrix_csv_round_trip_is_exact():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    text = write_matrix_csv(m)
    assert text.splitlines()[:3] == ["rows,cols", "3,4", "re,im"]
    np.testing.assert_array_equal(read_matrix_csv(text), m)


def test_matrix_csv_errors_name_the_line():
    with pytest.raises(MatrixFormatError, match="line 1"):
        read_matrix_csv("a,b\n1,1\n")
    with pytest.raises(MatrixFormatError, match="line 5"):
        read_matrix_csv("rows,cols\n1,2\nre,im\n1,0\nx,0\n")
    with pytest.raises(MatrixFormatError, match="expected 4 entries"):
        read_matrix_csv("rows,cols\n2,2\n1,0\n")
