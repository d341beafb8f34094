"""Circuit rewrites and composition, plus probability-level amplification."""
from __future__ import annotations

import math

from .circuit import CNOT, TOFFOLI, Circuit, CircuitBuilder, Postselection, X
from .errors import ValidationError


def normalize_postselections(c: Circuit) -> Circuit:
    """Defer every postselection to a single terminal one on a fresh flag qubit.

    Each postselection on qubit j is replaced by a CNOT from j into a fresh
    ancilla (followed by X on the ancilla when the required bit is 0), so the
    ancilla reads 1 exactly when the postselection would have succeeded.  A
    Toffoli cascade ANDs the ancillas into the new flag qubit, which is then
    postselected on 1.  The original qubits keep their indices; ancillas and
    cascade workspace are appended after them and never uncomputed.

    A circuit already in normal form is returned unchanged.
    """
    if c.is_normal_form and c.postselections:
        return c
    n = c.num_qubits
    m = len(c.postselections)
    if m == 0:
        b = CircuitBuilder(n + 1, accept_qubit=c.accept_qubit, flag_qubit=n)
        b.add(*c.gates, X(n))
        return b.post(n, 1).build()

    workspace = m - 1
    width = n + m + workspace
    flag = n if m == 1 else width - 1
    b = CircuitBuilder(width, accept_qubit=c.accept_qubit, flag_qubit=flag)
    j = 0
    for op in c.ops():
        if isinstance(op, Postselection):
            anc = n + j
            b.add(CNOT(op.qubit, anc))
            if op.bit == 0:
                b.add(X(anc))
            j += 1
        else:
            b.add(op)
    if m > 1:
        acc = n
        for k in range(1, m):
            out = n + m + k - 1
            b.add(TOFFOLI(acc, n + k, out))
            acc = out
    return b.post(flag, 1).build()


def _require_normal(c: Circuit, name: str) -> None:
    if not c.is_normal_form:
        raise ValidationError(f"{name} must be in normal form (single terminal postselection on its flag qubit)")


def _combine(c1: Circuit, c2: Circuit, union: bool) -> Circuit:
    _require_normal(c1, "first circuit")
    _require_normal(c2, "second circuit")
    n1, n2 = c1.num_qubits, c2.num_qubits
    flag, acc = n1 + n2, n1 + n2 + 1
    b = CircuitBuilder(n1 + n2 + 2, accept_qubit=acc, flag_qubit=flag)
    b.add(*c1.gates)
    b.add(*(g.shifted(n1) for g in c2.gates))
    f1, f2 = c1.flag_qubit, c2.flag_qubit + n1
    a1, a2 = c1.accept_qubit, c2.accept_qubit + n1
    b.add(TOFFOLI(f1, f2, flag))
    if union:
        # a1 OR a2 = NOT(NOT a1 AND NOT a2)
        b.add(X(a1), X(a2), TOFFOLI(a1, a2, acc), X(acc), X(a1), X(a2))
    else:
        b.add(TOFFOLI(a1, a2, acc))
    return b.post(flag, 1).build()


def compose_intersection(c1: Circuit, c2: Circuit) -> Circuit:
    """Run both circuits on disjoint registers; flag = f1 AND f2, accept = a1 AND a2.

    The two postselection events are independent, so the composed
    conditional acceptance probability is P1 * P2.
    """
    return _combine(c1, c2, union=False)


def compose_union(c1: Circuit, c2: Circuit) -> Circuit:
    """Like compose_intersection but accepting when either circuit accepts: 1 - (1-P1)(1-P2)."""
    return _combine(c1, c2, union=True)


def complement(c: Circuit) -> Circuit:
    """Negate the accept qubit at the end, mapping acceptance P to 1 - P."""
    _require_normal(c, "circuit")
    b = CircuitBuilder(c.num_qubits, accept_qubit=c.accept_qubit, flag_qubit=c.flag_qubit)
    b.add(*c.gates, X(c.accept_qubit))
    if c.postselections:
        b.post(c.flag_qubit, 1)
    return b.build()


def amplify(p_accept: float, k: int) -> float:
    """Probability that a strict majority of k independent Bernoulli(p) trials accept."""
    if not 0.0 <= p_accept <= 1.0 or math.isnan(p_accept):
        raise ValueError(f"acceptance probability must lie in [0, 1], got {p_accept!r}")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"repetition count must be a positive odd integer, got {k!r}")
    q = 1.0 - p_accept
    return math.fsum(math.comb(k, j) * p_accept**j * q ** (k - j) for j in range(k // 2 + 1, k + 1))


def repetitions_for(p_accept: float, target_error: float, k_max: int = 10_001) -> int:
    """Smallest odd k with 1 - amplify(p_accept, k) <= target_error."""
    if not p_accept > 0.5:
        raise ValueError("amplification needs p_accept > 1/2")
    for k in range(1, k_max + 1, 2):
        if 1.0 - amplify(p_accept, k) <= target_error:
            return k
    raise ValueError(f"no odd k <= {k_max} reaches error {target_error}")


def nonadaptive_query_error(machine_error: float, query_error: float, num_queries: int) -> float:
    """Union bound for a machine making num_queries nonadaptive postselected queries."""
    return min(1.0, machine_error + num_queries * query_error)
