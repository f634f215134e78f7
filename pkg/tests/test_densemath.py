import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from qudit_agi.densemath import (
    SpectralDecomposition,
    as_matrix,
    dagger,
    expm,
    is_normal,
    is_unitary,
    matrix_power_unitary,
    spectral_decompose_normal,
    unitary_log,
    unitary_phases,
    unvec,
    vec,
)
from qudit_agi.errors import NumericRangeError
from qudit_agi.qudit import haar_random_unitary

seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 6)


def _rand(n, seed, scale=1.0):
    r = np.random.default_rng(seed)
    return scale * (r.standard_normal((n, n)) + 1j * r.standard_normal((n, n)))


@given(dims, seeds)
def test_vec_kron_identity(n, seed):
    a, b, rho = _rand(n, seed), _rand(n, seed + 1), _rand(n, seed + 2)
    assert np.allclose(vec(a @ rho @ b), np.kron(b.T, a) @ vec(rho))


@given(dims, seeds)
def test_unvec_inverts_vec_batched(n, seed):
    stack = np.stack([_rand(n, seed), _rand(n, seed + 1)])
    assert np.array_equal(unvec(vec(stack), n), stack)
    assert np.array_equal(vec(stack)[1], vec(stack[1]))


def test_unvec_rejects_non_square_length():
    with pytest.raises(ValueError):
        unvec(np.zeros(5))


@given(dims, seeds, st.sampled_from([1e-3, 1.0, 30.0]))
def test_expm_matches_scipy(n, seed, scale):
    a = _rand(n, seed, scale)
    ref = scipy.linalg.expm(a)
    # error is measured against max(1, |exp(a)|), see the expm notes
    assert np.allclose(expm(a), ref, rtol=1e-10, atol=1e-13 * max(1.0, np.abs(ref).max()))


def test_expm_batch_equals_loop():
    mats = np.stack([_rand(4, s, 10.0 ** (s - 2)) for s in range(5)])
    batch = expm(mats)
    for m, e in zip(mats, batch):
        assert np.allclose(e, expm(m), rtol=1e-13, atol=0)


def test_expm_trivial_cases():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    w = np.array([0.3, -2.0, 1e-9])
    assert np.allclose(expm(np.diag(w)), np.diag(np.exp(w)), rtol=1e-15)


def test_expm_keeps_conserved_mode_exact_at_huge_scale():
    # a zero eigenvalue must give exactly 1 even when the other is -1e12
    e = expm(np.diag([0.0, -1e12]))
    assert e[0, 0] == 1.0
    assert e[1, 1] == 0.0


@given(st.integers(2, 5), seeds)
def test_expm_of_antihermitian_is_unitary(n, seed):
    a = _rand(n, seed, 3.0)
    assert is_unitary(expm(a - a.conj().T), 1e-12)


def test_expm_errors():
    with pytest.raises(ValueError):
        expm(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))
    with pytest.raises(NumericRangeError):
        expm(np.array([[1e306, 0], [0, 0]]))
    with np.errstate(over="ignore"), pytest.raises(NumericRangeError):
        expm(np.array([[800.0]]))


def test_as_matrix_validation():
    with pytest.raises(ValueError):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        as_matrix(np.zeros((0, 0)))
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])
    assert as_matrix([[1]]).dtype == complex


def test_dagger_batched():
    a = _rand(3, 1)
    assert np.array_equal(dagger(np.stack([a, a]))[1], a.conj().T)


def test_unitary_and_normal_predicates():
    u = haar_random_unitary(4, 3)
    assert is_unitary(u)
    assert not is_unitary(2 * u)
    assert is_normal(u)
    assert not is_normal(np.array([[0, 1], [0, 0]]))


@given(st.integers(1, 6), seeds)
def test_spectral_decomposition_reconstructs(n, seed):
    u = haar_random_unitary(n, seed)
    dec = spectral_decompose_normal(u)
    assert isinstance(dec, SpectralDecomposition)
    assert np.allclose(dec.reconstruct(), u, atol=1e-12)
    assert is_unitary(dec.eigenvectors, 1e-12)


def test_spectral_decomposition_degenerate_eigenspace_stays_orthonormal():
    x = np.roll(np.eye(4), 1, axis=0)
    p = x @ x  # eigenvalues +-1, each twice
    dec = spectral_decompose_normal(p)
    assert is_unitary(dec.eigenvectors, 1e-12)
    assert np.allclose(dec.reconstruct(), p, atol=1e-12)


def test_spectral_decomposition_rejects_non_normal():
    with pytest.raises(ValueError):
        spectral_decompose_normal(np.array([[1.0, 1.0], [0.0, 2.0]]))


def test_principal_branch_tie_goes_to_plus_pi():
    theta, _ = unitary_phases(np.diag([1.0, -1.0]))
    assert np.allclose(np.sort(theta), [0.0, np.pi])
    # tiny perturbation below -pi is still mapped to +pi
    theta, _ = unitary_phases(np.diag([np.exp(-1j * (np.pi - 1e-12)), 1.0]))
    assert np.all(theta > -np.pi + 1e-6)


@given(st.integers(1, 6), seeds)
def test_unitary_log_inverts_exponential(n, seed):
    u = haar_random_unitary(n, seed)
    h = unitary_log(u)
    assert np.allclose(h, h.conj().T)
    assert np.allclose(scipy.linalg.expm(-1j * h), u, atol=1e-11)
    assert np.all(np.abs(np.linalg.eigvalsh(h)) <= np.pi + 1e-12)


def test_unitary_log_rejects_non_unitary():
    with pytest.raises(ValueError):
        unitary_log(np.diag([1.0, 2.0]))


@given(st.integers(1, 5), seeds, st.floats(0.0, 1.0))
def test_fractional_power_composes(n, seed, eta):
    u = haar_random_unitary(n, seed)
    half = matrix_power_unitary(u, 0.5)
    assert np.allclose(half @ half, u, atol=1e-11)
    p = matrix_power_unitary(u, eta)
    q = matrix_power_unitary(u, 1.0 - eta) if eta not in (0.0, 1.0) else None
    assert is_unitary(p, 1e-11)
    if q is not None:
        assert np.allclose(p @ q, u, atol=1e-10)


def test_fractional_power_endpoints_and_qubit_value():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.array_equal(matrix_power_unitary(x, 0.0), np.eye(2))
    assert np.array_equal(matrix_power_unitary(x, 1.0), x)
    ref = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    assert np.allclose(matrix_power_unitary(x, 0.5), ref)
    with pytest.raises(ValueError):
        matrix_power_unitary(x, 1.5)
    with pytest.raises(ValueError):
        matrix_power_unitary(2 * x, 0.0)


@given(st.sampled_from([2, 3]), seeds)
def test_kron_mixed_product(n, seed):
    a, b, c, e = (_rand(n, seed + k) for k in range(4))
    lhs = np.kron(a, b) @ np.kron(c, e)
    assert np.allclose(lhs, np.kron(a @ c, b @ e), atol=1e-12 * np.abs(lhs).max())


@given(st.integers(1, 8), seeds)
def test_expm_of_normal_matrix_matches_spectral_exponential(n, seed):
    r = np.random.default_rng(seed)
    q = haar_random_unitary(n, seed)
    w = r.standard_normal(n) * 3 + 1j * r.standard_normal(n) * 3
    a = (q * w) @ q.conj().T
    ref = (q * np.exp(w)) @ q.conj().T
    assert np.linalg.norm(expm(a) - ref) <= 1e-10 * np.linalg.norm(ref)


@given(st.integers(1, 6), seeds)
def test_expm_additive_on_commuting_inputs(n, seed):
    a = _rand(n, seed)
    b = 0.3 * a @ a - 1.7 * a  # a polynomial in a commutes with a
    lhs = expm(a) @ expm(b)
    assert np.allclose(lhs, expm(a + b), atol=1e-10 * max(1.0, np.abs(lhs).max()), rtol=1e-10)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_unitary_log_round_trip_many(d):
    worst = 0.0
    for i in range(100):
        u = haar_random_unitary(d, (2024, d, i))
        worst = max(worst, np.abs(scipy.linalg.expm(-1j * unitary_log(u)) - u).max())
    assert worst < 1e-9


@given(st.integers(1, 5), seeds, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_fractional_power_semigroup(n, seed, e1, frac):
    e2 = (1.0 - e1) * frac  # so that e1 + e2 <= 1
    u = haar_random_unitary(n, seed)
    lhs = matrix_power_unitary(u, e1) @ matrix_power_unitary(u, e2)
    assert np.allclose(lhs, matrix_power_unitary(u, min(e1 + e2, 1.0)), atol=1e-10)
