import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import (
    first_order_quadrature,
    identity_jz_agi,
    jz_first_order,
    jz_trace_l2,
    liouvillian_scipy,
    taylor_coefficient,
    vanloan_order,
)

from qudit_agi.channel import agi_exact
from qudit_agi.errors import ConvergenceError, TruncationError
from qudit_agi.perturbation import (
    ConvergenceReport,
    PerturbationSeries,
    agi_first_order,
    agi_second_order,
    agi_second_order_operator_form,
    agi_series,
    commutator_traces,
    convergence_cutoff,
    gate_independent_agi,
    iterated_commutator,
    m_order_superop,
    series_traces,
    trace_lindblad_power,
)
from qudit_agi.qudit import GateSpec, NoiseSpec

seeds = st.integers(0, 2**31 - 1)
noises = st.sampled_from(["jz", "jx", "jm"])


def _rand(n, seed):
    r = np.random.default_rng(seed)
    return r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))


# --- iterated commutators ------------------------------------------------


@given(st.integers(1, 5), st.integers(0, 7), seeds)
def test_iterated_commutator_routes_agree(n, k, seed):
    x, y = _rand(n, seed), _rand(n, seed + 1)
    a = iterated_commutator(x, y, k)
    b = iterated_commutator(x, y, k, method="binomial")
    assert np.allclose(a, b, atol=1e-9 * max(1.0, np.abs(a).max()))


def test_iterated_commutator_small_cases():
    x, y = _rand(3, 0), _rand(3, 1)
    assert np.array_equal(iterated_commutator(x, y, 0), y)
    assert np.allclose(iterated_commutator(x, y, 1), x @ y - y @ x)
    assert np.allclose(iterated_commutator(x, x, 3), 0)
    with pytest.raises(ValueError):
        iterated_commutator(x, y, -1)
    with pytest.raises(ValueError):
        iterated_commutator(x, y[:2, :2], 1)
    with pytest.raises(ValueError):
        iterated_commutator(x, y, 2, method="nope")


# --- gate independent parts ---------------------------------------------


@pytest.mark.parametrize("d", range(2, 9))
def test_trace_l2_closed_form_both_routes(d):
    n = NoiseSpec("jz", d)
    ref = jz_trace_l2(d)
    assert abs(trace_lindblad_power(n, 2) - ref) < 1e-9 * ref
    assert abs(trace_lindblad_power(n, 2, route="multinomial") - ref) < 1e-9 * ref


@pytest.mark.parametrize("noise", ["jz", "jx"])
@pytest.mark.parametrize("m", range(6))
@pytest.mark.parametrize("d", range(2, 9))
def test_trace_power_routes_agree(noise, m, d):
    n = NoiseSpec(noise, d)
    a = trace_lindblad_power(n, m)
    b = trace_lindblad_power(n, m, route="multinomial")
    assert abs(a - b) < 1e-9 * max(1.0, abs(a))


def test_trace_power_route_errors():
    with pytest.raises(ValueError):
        trace_lindblad_power(NoiseSpec("jm", 3), 2, route="multinomial")
    with pytest.raises(ValueError):
        trace_lindblad_power(NoiseSpec("jz", 3), 2, route="other")
    with pytest.raises(ValueError):
        trace_lindblad_power(NoiseSpec("jz", 3), -1)


@pytest.mark.parametrize("d", range(2, 11))
def test_first_order_law(d):
    n = NoiseSpec("jz", d)
    assert abs(agi_first_order(n, 0.37) - jz_first_order(d, 0.37)) < 1e-12
    assert agi_first_order(n, 0.0) == 0.0


def test_first_order_independent_of_gate_and_matches_quadrature():
    for name, noise, d in [("qft", "jz", 3), ("haar:6", "jm", 3), ("x", "jx", 4)]:
        g, n = GateSpec.parse(name, d), NoiseSpec(noise, d)
        tr = first_order_quadrature(g, n)
        assert abs(-tr.real / (d * (d + 1)) - agi_first_order(n, 1.0)) < 1e-10


def test_first_order_argument_checks():
    with pytest.raises(ValueError):
        agi_first_order(NoiseSpec("jz", 3), 1.0, d=4)
    with pytest.raises(ValueError):
        agi_first_order(NoiseSpec("jz", 3), -1.0)


@pytest.mark.parametrize("d", [2, 3, 6])
def test_gate_independent_part_is_exact_for_identity(d):
    for gt in [0.0, 0.01, 1.0, 30.0]:
        assert abs(gate_independent_agi(NoiseSpec("jz", d), gt) - identity_jz_agi(d, gt)) < 1e-14
    for noise in ["jx", "jm"]:
        n = NoiseSpec(noise, d)
        assert abs(gate_independent_agi(n, 0.8) - agi_exact(GateSpec("identity", d), n, 0.8)) < 1e-13


@pytest.mark.parametrize("d", [2, 5])
def test_gate_independent_series_expansion(d):
    # Tr(1 - e^{gL}) = -sum_m g^m Tr(L^m) / m!
    n = NoiseSpec("jz", d)
    g = 1e-2
    series = -sum(g**m * trace_lindblad_power(n, m) / math.factorial(m) for m in range(1, 8))
    # d^2 - Tr(e^{gL}) cancels about two digits, hence the relative tolerance
    assert abs(gate_independent_agi(n, g) - series / (d * (d + 1))) < 1e-12 * series / (d * (d + 1))


# --- second order -------------------------------------------------------


@given(st.integers(2, 4), seeds, noises)
def test_odd_commutator_traces_vanish(d, seed, noise):
    g, n = GateSpec("haar", d, seed=seed), NoiseSpec(noise, d)
    tr = commutator_traces(g, n, [0, 1, 3, 5])
    assert np.all(np.abs(tr[1:]) < 1e-10 * max(1.0, abs(tr[0])))


def test_commutator_traces_match_direct_superoperators():
    g, n = GateSpec("qft", 3), NoiseSpec("jm", 3)
    _, s, l = liouvillian_scipy(g, n)
    direct = [np.trace(l @ iterated_commutator(s, l, k)).real for k in range(5)]
    assert np.allclose(commutator_traces(g, n, range(5)), direct, atol=1e-10)


@pytest.mark.parametrize("name,noise,d", [("qft", "jz", 4), ("x", "jx", 2), ("haar:5", "jm", 3),
                                          ("xpow:0.5", "jz", 4)])
def test_second_order_three_ways(name, noise, d):
    g, n = GateSpec.parse(name, d), NoiseSpec(noise, d)
    via_cut, rep = agi_second_order(g, n, 0.1)
    via_op = agi_second_order_operator_form(g, n, 0.1)
    via_series = agi_series(g, n, 0.1, 2, cutoff=None).terms[1]
    via_vanloan = -0.01 * np.trace(vanloan_order(g, n, 2)).real / (d * (d + 1))
    assert abs(via_series - via_vanloan) < 1e-13
    assert abs(via_op - via_series) < 1e-12
    # the s_epsilon-truncated sum differs by at most ~ epsilon * gamma_t^2
    assert abs(via_cut - via_series) < 1e-9 * 0.01
    assert isinstance(rep, ConvergenceReport)


def test_convergence_cutoff_identity_is_two():
    for d in [2, 3, 7]:
        rep = convergence_cutoff(GateSpec("identity", d), NoiseSpec("jz", d))
        assert rep.s_epsilon == 2
        assert list(rep.orders) == [2]


def test_convergence_report_fields_and_monotone_in_epsilon():
    g, n = GateSpec("x", 4), NoiseSpec("jz", 4)
    loose = convergence_cutoff(g, n, epsilon=1e-4)
    tight = convergence_cutoff(g, n, epsilon=1e-10)
    assert loose.s_epsilon <= tight.s_epsilon
    assert tight.s_epsilon % 2 == 0
    assert tight.orders[-1] == tight.s_epsilon
    assert len(tight.term_values) == len(tight.orders)
    assert abs(tight.term_values[-1] - tight.term_values[-2]) < 1e-10
    assert tight.gate == g


def test_convergence_cutoff_errors():
    g, n = GateSpec("x", 8), NoiseSpec("jz", 8)
    with pytest.raises(ConvergenceError):
        convergence_cutoff(g, n, epsilon=1e-12, max_iter=3)
    with pytest.raises(ValueError):
        convergence_cutoff(g, n, t=0.0)
    with pytest.raises(ValueError):
        convergence_cutoff(g, n, epsilon=0.0)


def test_rescaled_control_makes_cutoff_t_independent():
    g, n = GateSpec("x", 4), NoiseSpec("jz", 4)
    vals = {convergence_cutoff(g, n, t=t).s_epsilon for t in [0.5, 1.0, 3.0]}
    assert len(vals) == 1
    fixed = [convergence_cutoff(g, n, t=t, rescale_control=False).s_epsilon for t in [0.5, 1.0, 3.0]]
    assert fixed == sorted(fixed) and fixed[0] < fixed[-1]


# --- arbitrary order ----------------------------------------------------


@pytest.mark.parametrize("name,noise,d", [("qft", "jz", 3), ("haar:9", "jm", 2), ("x", "jx", 3)])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_m_order_matches_block_exponential(name, noise, d, m):
    g, n = GateSpec.parse(name, d), NoiseSpec(noise, d)
    ours = m_order_superop(g, n, 1.0, m, cutoff=None)
    ref = vanloan_order(g, n, m)
    assert np.allclose(ours, ref, atol=1e-12 * np.abs(ref).max())


def test_partial_sums_match_taylor_coefficients():
    g, n = GateSpec("qft", 4), NoiseSpec("jz", 4)
    series = agi_series(g, n, 1.0, 4, cutoff=None)
    for m in range(1, 5):
        fd = taylor_coefficient(lambda x: agi_exact(g, n, x), m)
        assert abs(fd - series.terms[m - 1]) < 1e-5 * max(1.0, abs(fd))


def test_series_residual_shrinks_with_order():
    g, n = GateSpec("qft", 4), NoiseSpec("jz", 4)
    gt = 0.05
    series = agi_series(g, n, gt, 5, cutoff=None)
    res = np.abs(agi_exact(g, n, gt) - series.partial_sums)
    assert np.all(np.diff(res) < 0)
    assert isinstance(series, PerturbationSeries)
    assert series.converged.all()
    assert np.allclose(np.cumsum(series.terms), series.partial_sums)


def test_series_traces_scale_with_coupling():
    g, n = GateSpec("x", 3), NoiseSpec("jz", 3)
    traces, cut, bound = series_traces(g, n, 3, cutoff=None)
    for gt in [0.01, 0.2]:
        s = agi_series(g, n, gt, 3, cutoff=None)
        assert np.allclose(s.terms, -(gt ** np.arange(1, 4)) * traces / 12)
    assert bound <= 1e-8 and cut >= 40


def test_truncation_error_when_cutoff_too_small():
    g, n = GateSpec("qft", 4), NoiseSpec("jz", 4)
    with pytest.raises(TruncationError):
        agi_series(g, n, 0.1, 2, cutoff=5)
    with pytest.raises(TruncationError):
        m_order_superop(g, n, 1.0, 2, cutoff=5)


def test_series_argument_checks():
    g, n = GateSpec("x", 2), NoiseSpec("jz", 2)
    with pytest.raises(ValueError):
        agi_series(g, n, 0.1, 0)
    with pytest.raises(ValueError):
        agi_series(g, n, -0.1, 2)
    with pytest.raises(ValueError):
        m_order_superop(g, n, 1.0, 0)


@given(st.integers(2, 4), st.integers(1, 6), seeds)
def test_binomial_commutator_lemma(n, j, seed):
    a, b = _rand(n, seed), _rand(n, seed + 1)
    terms = [math.comb(j + 1, k) * np.trace(iterated_commutator(a, b, k) @ iterated_commutator(a, b, j - k))
             for k in range(1, j + 1)]
    scale = sum(abs(t) for t in terms)
    assert abs(sum(terms)) < 1e-9 * max(scale, 1.0)


def test_low_orders_do_not_depend_on_the_gate():
    n = NoiseSpec("jz", 3)
    first = [agi_series(GateSpec("haar", 3, seed=(1, i)), n, 0.2, 1, cutoff=None).terms[0] for i in range(10)]
    assert np.ptp(first) < 1e-10
    zeroth = [commutator_traces(GateSpec("haar", 3, seed=(1, i)), n, [0])[0] for i in range(10)]
    assert np.ptp(zeroth) < 1e-10
    assert abs(zeroth[0] - trace_lindblad_power(n, 2)) < 1e-10


@pytest.mark.parametrize("d,lo,hi", [(2, 1e-5, 1e-3), (4, 1e-3, 1e-1)])
def test_second_order_residual_size_and_sign(d, lo, hi):
    for name in ["x", "qft", "xpow:0.5"]:
        g, n = GateSpec.parse(name, d), NoiseSpec("jz", d)
        exact = agi_exact(g, n, 0.1)
        rel = (exact - agi_series(g, n, 0.1, 2, cutoff=None).partial_sums[1]) / exact
        assert lo < rel < hi


@pytest.mark.parametrize("name,noise,d", [("qft", "jz", 3), ("haar:2", "jm", 2), ("x", "jx", 4)])
def test_low_orders_match_derivatives_of_exact_curve(name, noise, d):
    g, n = GateSpec.parse(name, d), NoiseSpec(noise, d)
    terms = agi_series(g, n, 1.0, 2, cutoff=None).terms
    for m in (1, 2):
        fd = taylor_coefficient(lambda x: agi_exact(g, n, x), m)
        assert abs(fd - terms[m - 1]) < 1e-6 * abs(terms[m - 1])


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_gate_independent_terms_grow_like_d_to_2m(m):
    # empirical growth rate only: slope of log|Tr(L^m)| / (d (d + 1)) against log d
    dims = np.arange(8, 33, 4)
    mags = [abs(trace_lindblad_power(NoiseSpec("jz", int(d)), m)) / (d * (d + 1)) for d in dims]
    slope = np.polyfit(np.log(dims), np.log(mags), 1)[0]
    assert abs(slope - 2 * m) < 0.15
