import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_circuit, random_state, random_unitary
from postsim.circuit import U2, CircuitBuilder, H, MajorityInstance
from postsim.dense import apply_gate, evolve, postselect
from postsim.errors import PreconditionViolated, ValidationError
from postsim.fantasy import (
    boost_ancilla_count,
    boosted_mass_distribution,
    boosted_plus_probability,
    bqp_p_distribution,
    majority_via_bqp_p,
    majority_via_nonunitary,
    mass_boost_gadget,
    mass_scale,
    nonunitary_plus_probability,
    nonunitary_postselect_gadget,
    replace_postselections_with_boost,
    run_bqp_p,
    sample_bqp_p,
    total_variation,
)
from postsim.majority import analytic_overlaps, plus_probability
from postsim.state import STANDARD, FantasyRule, StateVector, mass_vector


def gadget_masses(v, n, subset, p, k):
    """Apply the gadget's gates to v (x) |0...0> and sum the p-mass over ancilla strings."""
    gadget = mass_boost_gadget(CircuitBuilder(n).build(), subset, FantasyRule(p), ancillas=k)
    w = np.kron(v, np.eye(1 << k)[0])
    for g in gadget.gates:
        w = apply_gate(w, n + k, g)
    return (np.abs(w.reshape(1 << n, 1 << k)) ** p).sum(axis=1)


def test_gadget_is_a_damping_u1():
    g = nonunitary_postselect_gadget(3)
    assert g.kind == "U1" and np.allclose(g.local_matrix(), np.diag([0.125, 1]))
    assert np.allclose(nonunitary_postselect_gadget(3, bit=0).local_matrix(), np.diag([1, 0.125]))


@pytest.mark.parametrize("q", [0, 1075, 2.5])
def test_gadget_rejects_bad_q(q):
    with pytest.raises(PreconditionViolated):
        nonunitary_postselect_gadget(q)


def test_gadget_at_the_underflow_edge():
    assert nonunitary_postselect_gadget(1074).local_matrix()[0, 0] == 5e-324


def test_gadget_on_plus_state():
    v = apply_gate(np.array([math.sqrt(0.5), math.sqrt(0.5)], dtype=complex), 1, nonunitary_postselect_gadget(10))
    v = v / np.linalg.norm(v)
    assert abs(v[1]) == pytest.approx(1 / math.sqrt(1 + 2**-20), abs=1e-15)


def _gadget_tv(v, q, qubit=1, bit=1):
    damped = apply_gate(v, 3, nonunitary_postselect_gadget(q, qubit, bit))
    damped = damped / np.linalg.norm(damped)
    exact = postselect(StateVector(3, v), qubit, bit).amps
    return total_variation(np.abs(damped) ** 2, np.abs(exact) ** 2)


def test_gadget_close_to_postselection():
    rng = np.random.default_rng(17)
    for _ in range(20):
        assert _gadget_tv(random_state(rng, 3), 20) <= 1e-4


def test_gadget_convergence_rate():
    rng = np.random.default_rng(23)
    for _ in range(10):
        v = random_state(rng, 3)
        mask = np.array([(z >> 1) & 1 for z in range(8)], dtype=bool)
        ratio = np.sum(np.abs(v[~mask]) ** 2) / np.sum(np.abs(v[mask]) ** 2)
        tvs = {q: _gadget_tv(v, q) for q in (4, 8, 12, 16, 20)}
        for q in (4, 8, 12, 16):
            if ratio * 4.0**-q <= 1:
                # past the crossover each unit of q at least halves the distance
                assert tvs[q + 4] <= tvs[q] * 2.0**-4


def test_boost_count():
    assert boost_ancilla_count(1.0, 20) == 40
    assert boost_ancilla_count(4.0, 20) == 20
    assert boost_ancilla_count(0.5, 20) == 27
    with pytest.raises(ValidationError):
        boost_ancilla_count(2.0, 20)


def test_boost_rejects_p2():
    with pytest.raises(ValidationError):
        mass_boost_gadget(CircuitBuilder(1).build(), {1}, STANDARD)


def test_p4_single_ancilla_halves_complement():
    v = np.array([math.sqrt(0.5), math.sqrt(0.5)], dtype=complex)
    m = gadget_masses(v, 1, {1}, 4.0, 1)
    assert m[0] == pytest.approx(1 / 8, abs=1e-15)
    assert m[1] == pytest.approx(1 / 4, abs=1e-15)


def test_p1_four_ancillas_boosts_by_four():
    rng = np.random.default_rng(31)
    v = random_state(rng, 2)
    before = mass_vector(v, FantasyRule(1.0))
    after = gadget_masses(v, 2, {0, 3}, 1.0, 4)
    assert after[[0, 3]].sum() / before[[0, 3]].sum() == pytest.approx(4.0, abs=1e-9)
    assert np.allclose(after[[1, 2]], before[[1, 2]], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    p=st.sampled_from([0.5, 1.0, 1.5, 3.0, 4.0]),
    k=st.integers(1, 5),
    members=st.sets(st.integers(0, 7), min_size=1, max_size=7),
)
def test_mass_identity_holds_statewise(seed, p, k, members):
    v = random_state(np.random.default_rng(seed), 3)
    before = mass_vector(v, FantasyRule(p))
    after = gadget_masses(v, 3, members, p, k)
    targeted = np.array([(z in members) == (p < 2) for z in range(8)])
    assert np.allclose(after[targeted], mass_scale(p, k) * before[targeted], rtol=1e-9, atol=1e-15)
    assert np.allclose(after[~targeted], before[~targeted], rtol=1e-12, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from([0.5, 1.0, 3.0, 4.0]), q=st.integers(1, 3))
def test_compressed_branches_match_literal_simulation(seed, p, q):
    rng = np.random.default_rng(seed)
    b = CircuitBuilder(2, accept_qubit=1, flag_qubit=0)
    b.add(U2(0, 1, random_unitary(rng, 4))).post(0, int(rng.integers(2)))
    b.add(U2(1, 0, random_unitary(rng, 4))).post(1, int(rng.integers(2)))
    b.add(H(0))
    boosted = replace_postselections_with_boost(b.build(), FantasyRule(p), q)
    masses, main = boosted_mass_distribution(boosted, FantasyRule(p))
    assert main == [0, 1]
    k_total = boosted.num_qubits - 2
    assert k_total <= 12
    literal = mass_vector(evolve(boosted), FantasyRule(p)).reshape(4, 1 << k_total).sum(axis=1)
    assert np.allclose(masses, literal, rtol=1e-9, atol=1e-300)


def test_hadamard_under_p_rules():
    c = CircuitBuilder(1).add(H(0)).build()
    for p in (2.0, 4.0):
        out = sample_bqp_p(c, FantasyRule(p), 100_000, seed=3)
        assert abs(np.mean(out == 0) - 0.5) < 0.01


def test_random_circuit_p3_frequencies():
    rng = np.random.default_rng(8)
    c = random_circuit(rng, 3, 12, kinds=("H", "CNOT", "U1", "U2", "CH"))
    rule = FantasyRule(3.0)
    out = sample_bqp_p(c, rule, 100_000, seed=4)
    freq = np.bincount(out, minlength=8) / out.size
    assert total_variation(freq, bqp_p_distribution(c, rule)) <= 0.02


def test_p2_matches_dense_born_rule():
    rng = np.random.default_rng(12)
    c = random_circuit(rng, 3, 12, kinds=("H", "CNOT", "U2"))
    out = sample_bqp_p(c, STANDARD, 100_000, seed=6)
    freq = np.bincount(out, minlength=8) / out.size
    assert total_variation(freq, np.abs(evolve(c)) ** 2) <= 0.02


def test_run_bqp_p_single_shot_and_validation():
    c = CircuitBuilder(2).add(H(0)).build()
    assert run_bqp_p(c, FantasyRule(1.0), seed=0) in (0, 2)
    with pytest.raises(ValidationError):
        run_bqp_p(CircuitBuilder(1).add(H(0)).post(0, 1).build(), STANDARD, seed=0)
    damp = CircuitBuilder(1).add(H(0), nonunitary_postselect_gadget(2)).build()
    with pytest.raises(ValidationError):
        run_bqp_p(damp, STANDARD, seed=0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0.25, 6))
def test_p_rule_distributions_factor_over_tensor_products(seed, p):
    rng = np.random.default_rng(seed)
    c1 = random_circuit(rng, 2, 6, kinds=("H", "CNOT", "U1", "U2"))
    c2 = random_circuit(rng, 2, 6, kinds=("H", "CNOT", "U1", "U2"))
    joint = CircuitBuilder(4).extend(c1).extend(c2, offset=2).build()
    rule = FantasyRule(p)
    expected = np.kron(bqp_p_distribution(c1, rule), bqp_p_distribution(c2, rule))
    assert np.allclose(bqp_p_distribution(joint, rule), expected, atol=1e-9)


@pytest.mark.parametrize("p", [0.5, 1.0, 3.0, 4.0])
def test_boosted_plus_probability_tracks_p_rule(p):
    f = MajorityInstance.from_bits("0100")
    rule = FantasyRule(p)
    for i, ov in analytic_overlaps(2, 1).items():
        assert boosted_plus_probability(f, i, rule) == pytest.approx(plus_probability(ov, p), abs=1e-4)


def test_nonunitary_plus_probability_tracks_born_rule():
    f = MajorityInstance.from_bits("00110000")
    for i, ov in analytic_overlaps(3, 2).items():
        assert nonunitary_plus_probability(f, i) == pytest.approx(ov**2, abs=1e-4)


def test_bqp_p_boundary_rejects():
    rep = majority_via_bqp_p(MajorityInstance.from_bits("01"), FantasyRule(1.0), 100, seed=2)
    assert rep.verdict is False and rep.mode == "bqp_p"


def test_bqp_p_witness_accepts():
    rep = majority_via_bqp_p(MajorityInstance.from_bits("00110000"), FantasyRule(1.0), 100, seed=2, q_poly=20)
    assert rep.verdict is True
    assert rep.extra["ancillas_per_postselection"] == 40


def test_bqp_p_preconditions():
    with pytest.raises(ValidationError):
        majority_via_bqp_p(MajorityInstance.from_bits("0100"), STANDARD, 10, seed=0)
    with pytest.raises(PreconditionViolated):
        majority_via_bqp_p(MajorityInstance.from_bits("0000"), FantasyRule(1.0), 10, seed=0)


def test_nonunitary_pipeline_examples():
    assert majority_via_nonunitary(MajorityInstance.from_bits("00110000"), 60, seed=0).verdict
    assert not majority_via_nonunitary(MajorityInstance.from_bits("11101000"), 60, seed=0).verdict
