"""Random circuit generators and independent oracles shared by the tests."""
import itertools
import math

import numpy as np

from postsim.circuit import (
    CH,
    CNOT,
    ORACLE,
    TCH,
    TOFFOLI,
    U1,
    U2,
    Circuit,
    CircuitBuilder,
    Gate,
    H,
    X,
)

H2 = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_invertible(rng, dim):
    while True:
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        if abs(np.linalg.det(m)) > 0.1:
            return m


def random_state(rng, n, real=False):
    v = rng.normal(size=1 << n)
    if not real:
        v = v + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def _distinct(rng, n, k):
    return [int(q) for q in rng.choice(n, size=k, replace=False)]


def random_gate(rng, n, kinds):
    kinds = [k for k in kinds if {"CNOT": 2, "CH": 2, "U2": 2, "TOFFOLI": 3, "ORACLE": 2, "TCH": 2}.get(k, 1) <= n]
    kind = kinds[rng.integers(len(kinds))]
    if kind == "H":
        return H(_distinct(rng, n, 1)[0])
    if kind == "X":
        return X(_distinct(rng, n, 1)[0])
    if kind == "CNOT":
        return CNOT(*_distinct(rng, n, 2))
    if kind == "TOFFOLI":
        return TOFFOLI(*_distinct(rng, n, 3))
    if kind == "CH":
        return CH(*_distinct(rng, n, 2))
    if kind == "U1":
        return U1(_distinct(rng, n, 1)[0], random_unitary(rng, 2))
    if kind == "U2":
        return U2(*_distinct(rng, n, 2), random_unitary(rng, 4))
    k = int(rng.integers(1, min(n - 1, 3) + 1))
    qs = _distinct(rng, n, k + 1)
    table = [int(b) for b in rng.integers(0, 2, size=1 << k)]
    if kind == "ORACLE":
        return ORACLE(qs[:-1], qs[-1], table)
    return TCH(qs[:-1], qs[-1], table)


UNITARY_KINDS = ("H", "X", "CNOT", "TOFFOLI", "CH", "U1", "U2", "ORACLE", "TCH")
RESTRICTED_KINDS = ("H", "X", "CNOT", "TOFFOLI")


def random_circuit(rng, n, num_gates, kinds=UNITARY_KINDS, accept=None, flag=0):
    b = CircuitBuilder(n, accept_qubit=min(1, n - 1) if accept is None else accept, flag_qubit=flag)
    for _ in range(num_gates):
        b.add(random_gate(rng, n, kinds))
    return b.build()


def random_restricted_circuit(rng, n, hadamards, classical, accept=1, flag=0, terminal_post=False):
    """Restricted-gate circuit with exactly ``hadamards`` H gates in random positions."""
    slots = ["H"] * hadamards + ["C"] * classical
    rng.shuffle(slots)
    b = CircuitBuilder(n, accept_qubit=accept, flag_qubit=flag)
    for slot in slots:
        if slot == "H":
            b.add(H(int(rng.integers(n))))
        else:
            b.add(random_gate(rng, n, ("X", "CNOT", "TOFFOLI")))
    if terminal_post:
        b.post(flag, 1)
    return b.build()


def local_matrix(gate: Gate) -> np.ndarray:
    """Matrix of ``gate`` on its own qubits, listed MSB first, built from first principles."""
    k = len(gate.qubits)
    if gate.kind == "H":
        return H2
    if gate.kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if gate.kind in ("U1", "U2"):
        return gate.local_matrix()
    dim = 1 << k
    m = np.zeros((dim, dim), dtype=complex)
    if gate.kind in ("CNOT", "TOFFOLI", "ORACLE"):
        for col in range(dim):
            ctrl, tgt = col >> 1, col & 1
            if gate.kind == "ORACLE":
                flip = gate.table[ctrl]
            else:
                flip = int(ctrl == (1 << (k - 1)) - 1)
            m[(ctrl << 1) | (tgt ^ flip), col] = 1
        return m
    # CH and TCH: block diagonal over control assignments
    for ctrl in range(dim >> 1):
        fire = gate.table[ctrl] if gate.kind == "TCH" else ctrl == 1
        block = H2 if fire else np.eye(2)
        m[2 * ctrl:2 * ctrl + 2, 2 * ctrl:2 * ctrl + 2] = block
    return m


def naive_full_matrix(gate: Gate, n: int) -> np.ndarray:
    """2**n x 2**n matrix by brute-force index bookkeeping (independent of the simulator kernels)."""
    loc = local_matrix(gate)
    qs = gate.qubits
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)

    def bit(z, q):
        return (z >> (n - 1 - q)) & 1

    others = [q for q in range(n) if q not in qs]
    for i in range(dim):
        for j in range(dim):
            if any(bit(i, q) != bit(j, q) for q in others):
                continue
            li = int("".join(str(bit(i, q)) for q in qs), 2)
            lj = int("".join(str(bit(j, q)) for q in qs), 2)
            full[i, j] = loc[li, lj]
    return full


class DegenerateEvent(Exception):
    """A postselection whose probability is zero up to roundoff."""


def naive_run(c: Circuit, input_index=0, min_mass=1e-12):
    """Dense oracle: full matrices and explicit projection, renormalizing at every postselection."""
    n = c.num_qubits
    v = np.zeros(1 << n, dtype=complex)
    v[input_index] = 1
    from postsim.circuit import Postselection

    for op in c.ops():
        if isinstance(op, Postselection):
            for z in range(1 << n):
                if ((z >> (n - 1 - op.qubit)) & 1) != op.bit:
                    v[z] = 0
            mass = np.linalg.norm(v) ** 2
            if mass < min_mass:
                raise DegenerateEvent(mass)
            v = v / np.sqrt(mass)
        else:
            v = naive_full_matrix(op, n) @ v
    return v / np.linalg.norm(v)


def majority_probability(p, k):
    """Brute force over all 2**k outcome strings."""
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=k):
        ones = sum(outcome)
        if 2 * ones > k:
            total += p**ones * (1 - p) ** (k - ones)
    return total


def popcount_minority(bits: str) -> bool:
    n = len(bits).bit_length() - 1
    return bits.count("1") < 2 ** (n - 1)
