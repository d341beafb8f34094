"""Gate and circuit data model.

Every gate stores its qubits with the target last, so ``CNOT(c, t)``,
``TOFFOLI(a, b, t)``, ``CH(c, t)``, ``ORACLE(inputs..., t)`` and
``TCH(controls..., t)`` all expose ``gate.target`` and ``gate.controls``.
Postselections are program points, not gates: ``Postselection.position``
counts how many gates run before it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

UNITARY_TOL = 1e-9
INVERTIBLE_TOL = 1e-12
MAX_TABLE_BITS = 20

H_MATRIX = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)

# kind -> number of qubits (None = variable)
GATE_ARITY = {
    "H": 1,
    "X": 1,
    "CNOT": 2,
    "TOFFOLI": 3,
    "CH": 2,
    "U1": 1,
    "U2": 2,
    "ORACLE": None,
    "TCH": None,
}
CLASSICAL_KINDS = frozenset({"X", "CNOT", "TOFFOLI", "ORACLE"})
PATHSUM_KINDS = frozenset({"H", "X", "CNOT", "TOFFOLI"})


def is_invertible(matrix: np.ndarray) -> bool:
    """Row-scale-invariant invertibility test.

    Each row is scaled to unit norm before taking the determinant, so the
    check measures linear dependence rather than overall magnitude; the
    postselection gadget diag(2**-q, 1) stays invertible for every
    representable q.
    """
    m = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(m)):
        return False
    peak = np.max(np.abs(m), axis=1)
    if np.any(peak == 0):
        return False
    # rescale each row by an exact power of two first so subnormal rows
    # neither square to zero nor overflow on division
    shift = -np.frexp(peak)[1][:, None]
    m = np.ldexp(m.real, shift) + 1j * np.ldexp(m.imag, shift)
    m = m / np.linalg.norm(m, axis=1)[:, None]
    return abs(np.linalg.det(m)) > INVERTIBLE_TOL


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix, dtype=np.complex128)
    return np.allclose(m @ m.conj().T, np.eye(m.shape[0]), rtol=0.0, atol=tol)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    matrix: tuple[complex, ...] | None = None
    table: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = GATE_ARITY[self.kind]
        if arity is not None and len(qubits) != arity:
            raise ValidationError(f"{self.kind} takes {arity} qubit(s), got {len(qubits)}")
        if any(q < 0 for q in qubits):
            raise ValidationError(f"{self.kind}: negative qubit index in {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValidationError(f"{self.kind}: repeated qubit in {qubits}")
        if self.kind in ("U1", "U2"):
            dim = 2 if self.kind == "U1" else 4
            if self.matrix is None or len(self.matrix) != dim * dim:
                raise ValidationError(f"{self.kind} needs a {dim}x{dim} matrix")
            object.__setattr__(self, "matrix", tuple(complex(v) for v in self.matrix))
            if not is_invertible(self.local_matrix()):
                raise ValidationError(f"{self.kind} matrix is not invertible")
        elif self.matrix is not None:
            raise ValidationError(f"{self.kind} does not take a matrix")
        if self.kind in ("ORACLE", "TCH"):
            if len(qubits) < 2:
                raise ValidationError(f"{self.kind} needs at least one input and a target")
            k = len(qubits) - 1
            if k > MAX_TABLE_BITS:
                raise ValidationError(f"{self.kind} table over {k} inputs exceeds the cap of {MAX_TABLE_BITS}")
            if self.table is None or len(self.table) != 1 << k:
                raise ValidationError(f"{self.kind} over {k} inputs needs a table of {1 << k} bits")
            table = tuple(int(b) for b in self.table)
            if any(b not in (0, 1) for b in table):
                raise ValidationError(f"{self.kind} table entries must be 0 or 1")
            object.__setattr__(self, "table", table)
        elif self.table is not None:
            raise ValidationError(f"{self.kind} does not take a table")

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def controls(self) -> tuple[int, ...]:
        return self.qubits[:-1]

    @property
    def is_classical(self) -> bool:
        return self.kind in CLASSICAL_KINDS

    @property
    def unitary(self) -> bool:
        if self.kind in ("U1", "U2"):
            return is_unitary(self.local_matrix())
        return True

    def local_matrix(self) -> np.ndarray | None:
        if self.matrix is None:
            return None
        dim = 2 if self.kind == "U1" else 4
        return np.array(self.matrix, dtype=np.complex128).reshape(dim, dim)

    def shifted(self, offset: int) -> Gate:
        return replace(self, qubits=tuple(q + offset for q in self.qubits))

    def relabeled(self, mapping) -> Gate:
        return replace(self, qubits=tuple(mapping[q] for q in self.qubits))


def H(q):
    return Gate("H", (q,))


def X(q):
    return Gate("X", (q,))


def CNOT(c, t):
    return Gate("CNOT", (c, t))


def TOFFOLI(a, b, t):
    return Gate("TOFFOLI", (a, b, t))


def CH(c, t):
    return Gate("CH", (c, t))


def U1(q, matrix):
    return Gate("U1", (q,), matrix=tuple(np.asarray(matrix, dtype=np.complex128).reshape(-1)))


def U2(q1, q2, matrix):
    return Gate("U2", (q1, q2), matrix=tuple(np.asarray(matrix, dtype=np.complex128).reshape(-1)))


def ORACLE(inputs, target, table):
    return Gate("ORACLE", (*inputs, target), table=tuple(table))


def TCH(controls, target, table):
    """Hadamard on ``target`` applied only where ``table[controls] == 1``."""
    return Gate("TCH", (*controls, target), table=tuple(table))


@dataclass(frozen=True)
class Postselection:
    qubit: int
    bit: int
    position: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValidationError(f"postselection bit must be 0 or 1, got {self.bit!r}")
        if self.qubit < 0 or self.position < 0:
            raise ValidationError("postselection qubit and position must be non-negative")


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    postselections: tuple[Postselection, ...] = ()
    accept_qubit: int = 0
    flag_qubit: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "postselections", tuple(self.postselections))
        self.validate()

    def validate(self) -> None:
        n = self.num_qubits
        if n < 1:
            raise ValidationError(f"circuit needs at least one qubit, got {n}")
        for i, g in enumerate(self.gates):
            bad = [q for q in g.qubits if q >= n]
            if bad:
                raise ValidationError(f"gate {i} ({g.kind}) references qubit {bad[0]} >= width {n}")
        last = 0
        for ps in self.postselections:
            if ps.qubit >= n:
                raise ValidationError(f"postselection on qubit {ps.qubit} >= width {n}")
            if ps.position > len(self.gates):
                raise ValidationError(f"postselection position {ps.position} beyond {len(self.gates)} gates")
            if ps.position < last:
                raise ValidationError("postselections must be ordered by position")
            last = ps.position
        for name in ("accept_qubit", "flag_qubit"):
            q = getattr(self, name)
            if not 0 <= q < n:
                raise ValidationError(f"{name} = {q} out of range for width {n}")

    def ops(self):
        """Yield gates and postselections in program order."""
        pi = 0
        posts = self.postselections
        for gi, g in enumerate(self.gates):
            while pi < len(posts) and posts[pi].position == gi:
                yield posts[pi]
                pi += 1
            yield g
        while pi < len(posts):
            yield posts[pi]
            pi += 1

    @property
    def hadamard_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "H")

    @property
    def is_unitary(self) -> bool:
        return all(g.unitary for g in self.gates)

    @property
    def is_normal_form(self) -> bool:
        if not self.postselections:
            return True
        if len(self.postselections) > 1:
            return False
        ps = self.postselections[0]
        return ps.qubit == self.flag_qubit and ps.bit == 1 and ps.position == len(self.gates)

    def kinds(self) -> set[str]:
        return {g.kind for g in self.gates}


class CircuitBuilder:
    """Mutable helper for assembling a Circuit gate by gate."""

    def __init__(self, num_qubits: int, accept_qubit: int = 0, flag_qubit: int = 0):
        self.num_qubits = num_qubits
        self.accept_qubit = accept_qubit
        self.flag_qubit = flag_qubit
        self.gates: list[Gate] = []
        self.posts: list[Postselection] = []

    def add(self, *gates: Gate) -> CircuitBuilder:
        self.gates.extend(gates)
        return self

    def post(self, qubit: int, bit: int = 1) -> CircuitBuilder:
        self.posts.append(Postselection(qubit, bit, len(self.gates)))
        return self

    def extend(self, circuit: Circuit, offset: int = 0) -> CircuitBuilder:
        for op in circuit.ops():
            if isinstance(op, Postselection):
                self.post(op.qubit + offset, op.bit)
            else:
                self.add(op.shifted(offset) if offset else op)
        return self

    def build(self) -> Circuit:
        return Circuit(self.num_qubits, tuple(self.gates), tuple(self.posts),
                       accept_qubit=self.accept_qubit, flag_qubit=self.flag_qubit)


def permute_qubits(c: Circuit, mapping) -> Circuit:
    """Relabel qubit q as ``mapping[q]``; ``mapping`` must be a permutation of range(width)."""
    mapping = list(mapping)
    if sorted(mapping) != list(range(c.num_qubits)):
        raise ValidationError("qubit mapping is not a permutation of the circuit width")
    posts = tuple(replace(ps, qubit=mapping[ps.qubit]) for ps in c.postselections)
    return Circuit(c.num_qubits, tuple(g.relabeled(mapping) for g in c.gates), posts,
                   accept_qubit=mapping[c.accept_qubit], flag_qubit=mapping[c.flag_qubit])


@dataclass(frozen=True)
class MajorityInstance:
    """Boolean function on n bits as an explicit truth table.

    ``table[x]`` is f(x) where x is read with its most significant bit first.
    ``s`` is recomputed from the table and cannot be supplied.
    """

    n: int
    table: tuple[int, ...]
    s: int = field(init=False)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_TABLE_BITS:
            raise ValidationError(f"truth tables support 1 <= n <= {MAX_TABLE_BITS}, got {self.n}")
        table = tuple(int(b) for b in self.table)
        if len(table) != 1 << self.n:
            raise ValidationError(f"table for n={self.n} needs {1 << self.n} bits, got {len(table)}")
        if any(b not in (0, 1) for b in table):
            raise ValidationError("truth table entries must be 0 or 1")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "s", sum(table))

    @classmethod
    def from_bits(cls, bits: str) -> MajorityInstance:
        n = len(bits).bit_length() - 1
        return cls(n, tuple(int(ch) for ch in bits))

    @classmethod
    def from_index(cls, n: int, code: int) -> MajorityInstance:
        """Table whose bit string, read MSB-first, is ``code`` written in 2**n binary digits."""
        size = 1 << n
        return cls(n, tuple((code >> (size - 1 - x)) & 1 for x in range(size)))

    @property
    def half(self) -> int:
        return 1 << (self.n - 1)

    @property
    def minority(self) -> bool:
        """True when s < 2**(n-1), the answer the deciders compute."""
        return self.s < self.half

    def bits(self) -> str:
        return "".join(str(b) for b in self.table)
