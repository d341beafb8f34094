"""Variant quantum mechanics: nonunitary gates and |amp|**p measurement rules.

Two ways to emulate postselection are provided:

* ``nonunitary_postselect_gadget`` damps the unwanted branch by 2**-q with an
  invertible diagonal gate; renormalizing before the final measurement then
  approximates exact postselection.
* ``mass_boost_gadget`` keeps every gate unitary but, under a p-rule with
  p != 2, applies Hadamards to K fresh ancillas conditioned on a subset of
  basis states.  A basis state whose amplitude is spread over 2**K ancilla
  strings has p-mass 2**K |2**(-K/2) a|**p = 2**((2-p)K/2) |a|**p.

Boost ancillas are only ever Hadamard targets, so a state carrying them is
stored compactly as a list of (multiplicity, main-register vector) branches:
all 2**K - 1 nonzero ancilla strings share one vector, the all-zero string
gets another.  ``boosted_mass_distribution`` uses this to handle circuits
with hundreds of ancillas exactly.
"""
from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np

from .circuit import TCH, U1, Circuit, CircuitBuilder, Gate, MajorityInstance, Postselection
from .dense import apply_gate, evolve, run_circuit
from .errors import PreconditionViolated, ValidationError, ZeroMass
from .majority import (
    CONTROL,
    DecisionReport,
    _require_support,
    build_majority_circuit,
    sampled_decision,
    with_plus_readout,
)
from .state import FantasyRule, mass_vector, qubit_mask, sample_measurement, sample_measurements, subset_mask

DEFAULT_Q_POLY = 20
# 2**-1074 is the smallest positive double
MAX_Q_POLY = 1074


def nonunitary_postselect_gadget(q_poly: int, qubit: int = 0, bit: int = 1) -> Gate:
    """diag(2**-q, 1) on ``qubit`` (mirrored when postselecting on 0)."""
    if int(q_poly) != q_poly or q_poly < 1:
        raise PreconditionViolated(f"q_poly must be a positive integer, got {q_poly!r}")
    if q_poly > MAX_Q_POLY:
        raise PreconditionViolated(f"2**-{q_poly} underflows double precision (q_poly <= {MAX_Q_POLY})")
    if bit not in (0, 1):
        raise PreconditionViolated(f"bit must be 0 or 1, got {bit!r}")
    damp = math.ldexp(1.0, -int(q_poly))
    diag = (damp, 1.0) if bit == 1 else (1.0, damp)
    return U1(qubit, [[diag[0], 0.0], [0.0, diag[1]]])


def replace_postselections_nonunitary(c: Circuit, q_poly: int = DEFAULT_Q_POLY) -> Circuit:
    """Swap every postselection point for the damping gadget on that qubit."""
    b = CircuitBuilder(c.num_qubits, accept_qubit=c.accept_qubit, flag_qubit=c.flag_qubit)
    for op in c.ops():
        if isinstance(op, Postselection):
            b.add(nonunitary_postselect_gadget(q_poly, op.qubit, op.bit))
        else:
            b.add(op)
    return b.build()


def boost_ancilla_count(p: float, q_poly: int) -> int:
    """K = ceil(2 q / |2 - p|)."""
    if p == 2:
        raise ValidationError("the mass-boost gadget is vacuous for p = 2")
    return math.ceil(2 * q_poly / abs(2.0 - p))


def mass_scale(p: float, k: int) -> float:
    """Factor 2**((2-p)K/2) applied to the p-mass of the targeted states."""
    return 2.0 ** ((2.0 - p) * k / 2.0)


def _boost_gates(controls, table, first_ancilla: int, k: int) -> list[Gate]:
    return [TCH(controls, first_ancilla + j, table) for j in range(k)]


def mass_boost_gadget(
    c: Circuit,
    subset,
    rule: FantasyRule,
    q_poly: int = DEFAULT_Q_POLY,
    ancillas: int | None = None,
) -> Circuit:
    """Append K fresh ancillas and subset-controlled Hadamards to ``c``.

    For p < 2 the Hadamards fire on basis states in ``subset`` (boosting
    their p-mass); for p > 2 they fire on the complement (suppressing it).
    ``subset`` is a predicate, index collection, or mask over the basis of
    ``c``.  ``ancillas`` overrides K.
    """
    p = rule.p
    if p == 2:
        raise ValidationError("the mass-boost gadget is vacuous for p = 2")
    k = boost_ancilla_count(p, q_poly) if ancillas is None else int(ancillas)
    if k < 1:
        raise ValidationError(f"need at least one ancilla, got {k}")
    n = c.num_qubits
    mask = subset_mask(subset, 1 << n)
    targeted = mask if p < 2 else ~mask
    b = CircuitBuilder(n + k, accept_qubit=c.accept_qubit, flag_qubit=c.flag_qubit)
    b.extend(c)
    b.add(*_boost_gates(tuple(range(n)), tuple(int(v) for v in targeted), n, k))
    return b.build()


def replace_postselections_with_boost(c: Circuit, rule: FantasyRule, q_poly: int = DEFAULT_Q_POLY) -> Circuit:
    """Swap each postselection point for a mass-boost block on fresh ancillas.

    The block for "qubit j reads b" is controlled on qubit j alone, so its
    table has two entries.
    """
    p = rule.p
    k = boost_ancilla_count(p, q_poly)
    m = len(c.postselections)
    n = c.num_qubits
    b = CircuitBuilder(n + m * k, accept_qubit=c.accept_qubit, flag_qubit=c.flag_qubit)
    j = 0
    for op in c.ops():
        if isinstance(op, Postselection):
            hit = [0, 0]
            hit[op.bit] = 1
            table = tuple(hit) if p < 2 else tuple(1 - v for v in hit)
            b.add(*_boost_gates((op.qubit,), table, n + j * k, k))
            j += 1
        else:
            b.add(op)
    return b.build()


def _boost_ancillas(c: Circuit) -> set[int]:
    """Qubits touched only as the target of a single TCH gate whose controls are not boost ancillas."""
    touched: dict[int, list[tuple[int, Gate]]] = {}
    for gi, g in enumerate(c.gates):
        for q in g.qubits:
            touched.setdefault(q, []).append((gi, g))
    posted = {ps.qubit for ps in c.postselections}
    anc = set()
    for q, uses in touched.items():
        if len(uses) == 1 and uses[0][1].kind == "TCH" and uses[0][1].target == q and q not in posted:
            anc.add(q)
    for q in list(anc):
        if q in (c.accept_qubit, c.flag_qubit):
            anc.discard(q)
    # a control that is itself a boost ancilla would break the branch picture
    changed = True
    while changed:
        changed = False
        for g in c.gates:
            if any(x in anc for x in g.controls) or (g.target in anc and g.kind != "TCH"):
                anc.difference_update(g.qubits)
                changed = True
    return anc


def _blocks(c: Circuit, anc: set[int]):
    """Yield gates, folding runs of boost TCH gates with one control table into (controls, table, K)."""
    run = None
    for g in c.gates:
        if g.kind == "TCH" and g.target in anc:
            key = (g.controls, g.table)
            if run is not None and run[0] == key:
                run[1] += 1
                continue
            if run is not None:
                yield ("boost", *run[0], run[1])
            run = [key, 1]
            continue
        if run is not None:
            yield ("boost", *run[0], run[1])
            run = None
        yield ("gate", g)
    if run is not None:
        yield ("boost", *run[0], run[1])


class BranchedState:
    """Main-register vectors with integer multiplicities standing in for boost ancillas."""

    def __init__(self, num_qubits: int, input_index: int = 0):
        self.num_qubits = num_qubits
        v = np.zeros(1 << num_qubits, dtype=np.complex128)
        v[input_index] = 1.0
        self.branches: list[tuple[int, np.ndarray]] = [(1, v)]

    def apply(self, gate: Gate) -> None:
        self.branches = [(m, apply_gate(v, self.num_qubits, gate)) for m, v in self.branches]

    def boost(self, controls, table, k: int) -> None:
        n = self.num_qubits
        mask = np.zeros(1 << n, dtype=bool)
        nc = len(controls)
        for x, bit in enumerate(table):
            if bit:
                sel = np.ones(1 << n, dtype=bool)
                for j, q in enumerate(controls):
                    sel &= qubit_mask(n, q, (x >> (nc - 1 - j)) & 1)
                mask |= sel
        spread = 2.0 ** (-k / 2.0)
        out = []
        for m, v in self.branches:
            hit = np.where(mask, v, 0.0) * spread
            miss = np.where(mask, 0.0, v)
            if np.any(hit):
                out.append((m * ((1 << k) - 1), hit))
            zero_string = hit + miss
            if np.any(zero_string):
                out.append((m, zero_string))
        self.branches = out

    def masses(self, rule: FantasyRule) -> np.ndarray:
        total = np.zeros(1 << self.num_qubits)
        for m, v in self.branches:
            total += float(m) * mass_vector(v, rule)
        return total

    def squared_norm(self) -> float:
        return sum(float(m) * float(np.vdot(v, v).real) for m, v in self.branches)


def boosted_mass_distribution(c: Circuit, rule: FantasyRule, input_index: int = 0) -> tuple[np.ndarray, list[int]]:
    """p-mass over the non-ancilla qubits of ``c``, summed over every boost-ancilla string.

    Returns (masses, main_qubits); masses is indexed by the basis of the
    main qubits in their original order.  The input must leave every boost
    ancilla at 0.
    """
    if c.postselections:
        raise ValidationError("p-rule circuits cannot contain postselections")
    anc = _boost_ancillas(c)
    main = [q for q in range(c.num_qubits) if q not in anc]
    index_of = {q: j for j, q in enumerate(main)}
    n = c.num_qubits
    main_input = 0
    for q in range(n):
        bit = (input_index >> (n - 1 - q)) & 1
        if q in anc and bit:
            raise ValidationError(f"boost ancilla {q} must start in |0>")
        if q not in anc:
            main_input = (main_input << 1) | bit
    state = BranchedState(len(main), main_input)
    for item in _blocks(c, anc):
        if item[0] == "gate":
            state.apply(item[1].relabeled(index_of))
        else:
            _, controls, table, k = item
            state.boost(tuple(index_of[q] for q in controls), table, k)
    return state.masses(rule), main


def _require_bqp_p_circuit(c: Circuit) -> None:
    if c.postselections:
        raise ValidationError("BQP_p circuits cannot contain postselections")
    bad = [g.kind for g in c.gates if not g.unitary]
    if bad:
        raise ValidationError(f"BQP_p circuits must be unitary; found nonunitary {bad[0]}")


def bqp_p_distribution(c: Circuit, rule: FantasyRule, input_index: int = 0) -> np.ndarray:
    """Outcome distribution |amp_z|**p / sum_y |amp_y|**p of a dense run."""
    _require_bqp_p_circuit(c)
    weights = mass_vector(evolve(c, input_index), rule)
    total = weights.sum()
    if not total > 0:
        raise ZeroMass("total p-mass is zero")
    return weights / total


def run_bqp_p(c: Circuit, rule: FantasyRule, seed, input_index: int = 0) -> int:
    """Run a unitary circuit densely and take one measurement under the p-rule."""
    _require_bqp_p_circuit(c)
    return sample_measurement(run_circuit(c, input_index), rule, seed)


def sample_bqp_p(c: Circuit, rule: FantasyRule, shots: int, seed, input_index: int = 0) -> np.ndarray:
    _require_bqp_p_circuit(c)
    return sample_measurements(run_circuit(c, input_index), rule, shots, seed)


def _marginal_one(masses: np.ndarray, width: int, qubit: int) -> float:
    total = float(masses.sum())
    if not total > 0:
        raise ZeroMass("total p-mass is zero")
    return float(masses[qubit_mask(width, qubit, 1)].sum()) / total


def boosted_plus_probability(inst: MajorityInstance, i: int, rule: FantasyRule, q_poly: int = DEFAULT_Q_POLY) -> float:
    """P(|+>) at sweep point i with postselections replaced by mass-boost blocks."""
    c = replace_postselections_with_boost(with_plus_readout(build_majority_circuit(inst, i)), rule, q_poly)
    masses, main = boosted_mass_distribution(c, rule)
    return _marginal_one(masses, len(main), main.index(CONTROL))


def nonunitary_plus_probability(inst: MajorityInstance, i: int, q_poly: int = DEFAULT_Q_POLY) -> float:
    """P(|+>) at sweep point i with postselections replaced by the damping gadget (p = 2)."""
    c = replace_postselections_nonunitary(with_plus_readout(build_majority_circuit(inst, i)), q_poly)
    state = run_circuit(c)
    return float(state.probabilities()[qubit_mask(c.num_qubits, CONTROL, 1)].sum())


def majority_via_bqp_p(
    inst: MajorityInstance,
    rule: FantasyRule,
    reps_per_i: int,
    seed: int,
    q_poly: int = DEFAULT_Q_POLY,
) -> DecisionReport:
    """Majority decision using only unitary gates and a final p-rule measurement."""
    _require_support(inst)
    if rule.p == 2:
        raise ValidationError("majority_via_bqp_p needs p != 2; use decide_majority_sampled for p = 2")
    report = sampled_decision(
        inst,
        lambda i: boosted_plus_probability(inst, i, rule, q_poly),
        reps_per_i,
        seed,
        p=rule.p,
        mode="bqp_p",
    )
    report.extra["q_poly"] = q_poly
    report.extra["ancillas_per_postselection"] = boost_ancilla_count(rule.p, q_poly)
    return report


def majority_via_nonunitary(inst: MajorityInstance, reps_per_i: int, seed: int, q_poly: int = DEFAULT_Q_POLY) -> DecisionReport:
    """Majority decision with invertible nonunitary gates in place of postselection, measured under p = 2."""
    _require_support(inst)
    report = sampled_decision(
        inst,
        lambda i: nonunitary_plus_probability(inst, i, q_poly),
        reps_per_i,
        seed,
        mode="nonunitary",
    )
    report.extra["q_poly"] = q_poly
    return report


def total_variation(p: Iterable[float], q: Iterable[float]) -> float:
    p = np.asarray(list(p), dtype=float)
    q = np.asarray(list(q), dtype=float)
    return 0.5 * float(np.abs(p - q).sum())
