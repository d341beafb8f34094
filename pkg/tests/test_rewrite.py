import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import majority_probability, random_unitary
from postsim.circuit import U2, CircuitBuilder, H, X
from postsim.dense import conditional_accept_prob, evolve, run_circuit
from postsim.errors import ValidationError, ZeroProbability
from postsim.rewrite import (
    amplify,
    complement,
    compose_intersection,
    compose_union,
    nonadaptive_query_error,
    normalize_postselections,
    repetitions_for,
)


def _intermediate_circuit(seed, n=3, layers=4, posts=2):
    """Generic unitary layers with postselections after randomly chosen layers."""
    rng = np.random.default_rng(seed)
    b = CircuitBuilder(n, accept_qubit=1, flag_qubit=0)
    spots = set(rng.choice(layers, size=posts, replace=False).tolist())
    for layer in range(layers):
        q1, q2 = (int(q) for q in rng.choice(n, size=2, replace=False))
        b.add(U2(q1, q2, random_unitary(rng, 4)))
        if layer in spots:
            b.post(int(rng.integers(n)), int(rng.integers(2)))
    return b.build()


def _conditional_marginal(c, keep):
    """Distribution of the first ``keep`` qubits given the flag reads 1, from the pre-postselection state."""
    amps = evolve(c, skip_terminal=True)
    n = c.num_qubits
    t = amps.reshape((2,) * n)
    t = np.take(t, 1, axis=c.flag_qubit)
    probs = np.abs(t) ** 2
    # the flag axis is gone; every remaining axis past keep is an ancilla
    rest = tuple(range(keep, n - 1))
    probs = probs.sum(axis=rest) if rest else probs
    probs = probs.ravel()
    return probs / probs.sum()


def test_no_postselection_gets_trivial_flag():
    c = CircuitBuilder(2, accept_qubit=1).add(H(1)).build()
    out = normalize_postselections(c)
    assert out.is_normal_form and out.num_qubits == 3 and out.flag_qubit == 2
    assert conditional_accept_prob(out) == pytest.approx(0.5)


def test_normal_form_unchanged():
    c = CircuitBuilder(2, accept_qubit=1, flag_qubit=0).add(H(0), H(1)).post(0, 1).build()
    assert normalize_postselections(c) is c


def test_two_intermediate_postselections():
    c = _intermediate_circuit(7)
    assert len(c.postselections) == 2 and not c.is_normal_form
    out = normalize_postselections(c)
    assert out.is_normal_form
    expected = np.abs(run_circuit(c).amps) ** 2
    assert np.allclose(_conditional_marginal(out, c.num_qubits), expected, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), posts=st.integers(1, 4))
def test_deferred_postselection_equivalence(seed, posts):
    c = _intermediate_circuit(seed, n=3, layers=5, posts=posts)
    assume(not c.is_normal_form)
    try:
        expected = np.abs(run_circuit(c).amps) ** 2
    except ZeroProbability:
        # two back-to-back contradictory postselections
        assume(False)
    out = normalize_postselections(c)
    assert np.allclose(_conditional_marginal(out, 3), expected, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), posts=st.integers(0, 3))
def test_normalize_is_idempotent(seed, posts):
    out = normalize_postselections(_intermediate_circuit(seed, posts=posts))
    assert normalize_postselections(out) == out


def _fixed_prob_circuit(p_accept):
    """One postselected qubit pair with conditional acceptance p_accept."""
    theta = 2 * math.acos(math.sqrt(1 - p_accept))
    rot = np.array([[math.cos(theta / 2), -math.sin(theta / 2)], [math.sin(theta / 2), math.cos(theta / 2)]])
    b = CircuitBuilder(2, accept_qubit=1, flag_qubit=0)
    b.add(H(0), U2(0, 1, np.kron(np.eye(2), rot)))
    return b.post(0, 1).build()


@pytest.mark.parametrize("p1, p2", [(1.0, 1.0), (1.0, 0.0), (0.3, 0.8)])
def test_intersection_multiplies(p1, p2):
    c = compose_intersection(_fixed_prob_circuit(p1), _fixed_prob_circuit(p2))
    assert conditional_accept_prob(c) == pytest.approx(p1 * p2, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_intersection_of_random_circuits(seed):
    c1 = normalize_postselections(_intermediate_circuit(seed, n=2, layers=3, posts=1))
    c2 = normalize_postselections(_intermediate_circuit(seed + 100, n=2, layers=3, posts=1))
    p1, p2 = conditional_accept_prob(c1), conditional_accept_prob(c2)
    assert conditional_accept_prob(compose_intersection(c1, c2)) == pytest.approx(p1 * p2, abs=1e-9)
    union = conditional_accept_prob(compose_union(c1, c2))
    assert union == pytest.approx(1 - (1 - p1) * (1 - p2), abs=1e-9)


def test_complement_flips_acceptance():
    c = _fixed_prob_circuit(0.3)
    assert conditional_accept_prob(complement(c)) == pytest.approx(0.7, abs=1e-9)


def test_compose_requires_normal_form():
    bad = CircuitBuilder(2, flag_qubit=0).add(H(0)).post(1, 0).add(X(1)).build()
    with pytest.raises(ValidationError):
        compose_intersection(bad, bad)


def test_amplify_identity_and_symmetry():
    assert amplify(2 / 3, 1) == pytest.approx(2 / 3)
    for k in (1, 3, 7, 21):
        assert amplify(0.5, k) == pytest.approx(0.5, abs=1e-12)


def test_amplify_matches_enumeration_k15():
    assert abs(amplify(2 / 3, 15) - majority_probability(2 / 3, 15)) < 1e-12


@pytest.mark.parametrize("args", [(1.2, 3), (-0.1, 3), (0.6, 2), (0.6, 0)])
def test_amplify_domain(args):
    with pytest.raises(ValueError):
        amplify(*args)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0, 1), k=st.integers(0, 40).map(lambda j: 2 * j + 1))
def test_amplify_complement_symmetry(p, k):
    assert amplify(p, k) + amplify(1 - p, k) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.5, 1), k=st.integers(0, 40).map(lambda j: 2 * j + 1))
def test_amplify_monotone_in_k(p, k):
    assert amplify(p, k + 2) >= amplify(p, k) - 1e-12


def test_repetitions_for():
    k = repetitions_for(2 / 3, 1e-3)
    assert 1 - amplify(2 / 3, k) <= 1e-3 < 1 - amplify(2 / 3, k - 2)


def test_nonadaptive_union_bound():
    assert nonadaptive_query_error(0.1, 0.01, 5) == pytest.approx(0.15)
    assert nonadaptive_query_error(0.5, 0.5, 5) == 1.0
