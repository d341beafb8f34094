"""Line-oriented text formats for circuits and truth tables.

Circuit format (``#`` starts a comment)::

    qubits 3
    H 0
    TOF 0 1 2
    U1 2 0.6,0 -0.8,0 0.8,0 0.6,0
    ORACLE 2 0 1 : 0110
    post 2 = 1
    flag 2
    accept 1

``ORACLE t q... : bits`` flips ``t`` by the table looked up on ``q...``
(first listed qubit is the most significant table bit).  ``TCH t q... : bits``
is the table-controlled Hadamard used by the mass-boost gadget.
"""
from __future__ import annotations

import re
from pathlib import Path

from .circuit import Circuit, Gate, MajorityInstance, Postselection
from .errors import CircuitSyntaxError, ValidationError

_FIXED = {"H": ("H", 1), "X": ("X", 1), "CNOT": ("CNOT", 2), "TOF": ("TOFFOLI", 3), "CH": ("CH", 2)}
_TOKEN = re.compile(r"=|[^\s=]+")
_TEXT_NAME = {"H": "H", "X": "X", "CNOT": "CNOT", "TOFFOLI": "TOF", "CH": "CH"}


class _Line:
    def __init__(self, lineno: int, raw: str):
        self.lineno = lineno
        self.raw = raw
        body = raw.split("#", 1)[0]
        self.tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(body)]

    def error(self, message, token_index=None):
        col = None
        if token_index is not None and token_index < len(self.tokens):
            col = self.tokens[token_index][1]
        elif token_index is not None:
            col = len(self.raw.rstrip()) + 1
        return CircuitSyntaxError(message, self.lineno, col)

    def int_at(self, i: int, what: str) -> int:
        if i >= len(self.tokens):
            raise self.error(f"missing {what}", i)
        tok = self.tokens[i][0]
        try:
            value = int(tok)
        except ValueError:
            raise self.error(f"expected integer {what}, got {tok!r}", i) from None
        if value < 0:
            raise self.error(f"{what} must be non-negative, got {value}", i)
        return value

    def complex_at(self, i: int) -> complex:
        if i >= len(self.tokens):
            raise self.error("missing matrix entry", i)
        tok = self.tokens[i][0]
        parts = tok.split(",")
        if len(parts) != 2:
            raise self.error(f"matrix entry must be 're,im', got {tok!r}", i)
        try:
            return complex(float(parts[0]), float(parts[1]))
        except ValueError:
            raise self.error(f"matrix entry must be 're,im' decimals, got {tok!r}", i) from None


def _parse_table_gate(line: _Line, kind: str) -> Gate:
    toks = [t for t, _ in line.tokens]
    if ":" not in toks:
        raise line.error(f"{kind} needs ': <bits>' after its qubits", len(toks))
    colon = toks.index(":")
    if colon < 3:
        raise line.error(f"{kind} needs a target and at least one input qubit", colon)
    if colon != len(toks) - 2:
        raise line.error(f"{kind} expects exactly one bit string after ':'", colon + 1)
    target = line.int_at(1, "target qubit")
    inputs = [line.int_at(i, "input qubit") for i in range(2, colon)]
    bits = toks[-1]
    if any(ch not in "01" for ch in bits):
        raise line.error("table must contain only 0 and 1", len(toks) - 1)
    try:
        return Gate(kind, (*inputs, target), table=tuple(int(ch) for ch in bits))
    except ValidationError as exc:
        raise ValidationError(f"line {line.lineno}: {exc}") from None


def parse_circuit(text: str) -> Circuit:
    """Parse the circuit text format into a validated Circuit.

    Raises CircuitSyntaxError for malformed lines (with line and column) and
    ValidationError for well-formed lines that break a circuit invariant.
    """
    num_qubits = None
    gates: list[Gate] = []
    posts: list[Postselection] = []
    markers: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _Line(lineno, raw)
        if not line.tokens:
            continue
        head = line.tokens[0][0]
        if num_qubits is None:
            if head != "qubits":
                raise line.error("first statement must be 'qubits <n>'", 0)
            if len(line.tokens) != 2:
                raise line.error("'qubits' takes exactly one integer", min(len(line.tokens), 2))
            num_qubits = line.int_at(1, "qubit count")
            if num_qubits < 1:
                raise line.error("qubit count must be at least 1", 1)
            continue
        if head == "qubits":
            raise line.error("duplicate 'qubits' header", 0)

        def check_range(qs):
            for q in qs:
                if q >= num_qubits:
                    raise ValidationError(f"line {lineno}: qubit {q} out of range for width {num_qubits}")

        if head in _FIXED:
            kind, arity = _FIXED[head]
            if len(line.tokens) != arity + 1:
                raise line.error(f"{head} takes {arity} qubit(s)", min(len(line.tokens), arity + 1))
            qs = [line.int_at(i, "qubit") for i in range(1, arity + 1)]
            check_range(qs)
            try:
                gates.append(Gate(kind, tuple(qs)))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        elif head in ("U1", "U2"):
            arity, entries = (1, 4) if head == "U1" else (2, 16)
            if len(line.tokens) != 1 + arity + entries:
                raise line.error(f"{head} takes {arity} qubit(s) and {entries} 're,im' entries",
                                 min(len(line.tokens), 1 + arity + entries))
            qs = [line.int_at(i, "qubit") for i in range(1, arity + 1)]
            mat = [line.complex_at(i) for i in range(1 + arity, 1 + arity + entries)]
            check_range(qs)
            try:
                gates.append(Gate(head, tuple(qs), matrix=tuple(mat)))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        elif head in ("ORACLE", "TCH"):
            gate = _parse_table_gate(line, head)
            check_range(gate.qubits)
            gates.append(gate)
        elif head == "post":
            toks = [t for t, _ in line.tokens]
            if len(toks) != 4 or toks[2] != "=":
                raise line.error("expected 'post <qubit> = <bit>'", min(len(toks), 3))
            q = line.int_at(1, "qubit")
            b = line.int_at(3, "bit")
            if b not in (0, 1):
                raise line.error("postselected bit must be 0 or 1", 3)
            check_range([q])
            posts.append(Postselection(q, b, len(gates)))
        elif head in ("flag", "accept"):
            if len(line.tokens) != 2:
                raise line.error(f"'{head}' takes exactly one qubit", min(len(line.tokens), 2))
            if head in markers:
                raise line.error(f"duplicate '{head}' marker", 0)
            q = line.int_at(1, "qubit")
            check_range([q])
            markers[head] = q
        else:
            raise line.error(f"unknown statement {head!r}", 0)

    if num_qubits is None:
        raise CircuitSyntaxError("missing 'qubits <n>' header")
    return Circuit(
        num_qubits,
        tuple(gates),
        tuple(posts),
        accept_qubit=markers.get("accept", min(1, num_qubits - 1)),
        flag_qubit=markers.get("flag", 0),
    )


def _fmt_complex(v: complex) -> str:
    return f"{v.real!r},{v.imag!r}"


def render_gate(g: Gate) -> str:
    if g.kind in _TEXT_NAME:
        return " ".join([_TEXT_NAME[g.kind], *map(str, g.qubits)])
    if g.kind in ("U1", "U2"):
        return " ".join([g.kind, *map(str, g.qubits), *map(_fmt_complex, g.matrix)])
    bits = "".join(map(str, g.table))
    return " ".join([g.kind, str(g.target), *map(str, g.controls), ":", bits])


def render_circuit(c: Circuit) -> str:
    lines = [f"qubits {c.num_qubits}"]
    for op in c.ops():
        if isinstance(op, Postselection):
            lines.append(f"post {op.qubit} = {op.bit}")
        else:
            lines.append(render_gate(op))
    lines.append(f"flag {c.flag_qubit}")
    lines.append(f"accept {c.accept_qubit}")
    return "\n".join(lines) + "\n"


def load_circuit(path) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


def parse_truth_table(text: str) -> MajorityInstance:
    """Parse ``n <n>`` followed by 2**n characters from {0,1}."""
    lines = [(i, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, ln) for i, ln in lines if ln]
    if len(lines) != 2:
        raise CircuitSyntaxError(f"truth table needs a header and one bit line, found {len(lines)} lines")
    (hl, header), (bl, bits) = lines
    parts = header.split()
    if len(parts) != 2 or parts[0] != "n":
        raise CircuitSyntaxError("expected header 'n <n>'", hl, 1)
    try:
        n = int(parts[1])
    except ValueError:
        raise CircuitSyntaxError(f"expected integer after 'n', got {parts[1]!r}", hl, header.index(parts[1]) + 1) from None
    for col, ch in enumerate(bits, start=1):
        if ch not in "01":
            raise CircuitSyntaxError(f"unexpected character {ch!r} in table", bl, col)
    if n < 1 or len(bits) != 1 << n:
        raise CircuitSyntaxError(f"n={n} needs {1 << max(n, 0)} table bits, got {len(bits)}", bl)
    return MajorityInstance(n, tuple(int(ch) for ch in bits))


def render_truth_table(inst: MajorityInstance) -> str:
    return f"n {inst.n}\n{inst.bits()}\n"


def load_truth_table(path) -> MajorityInstance:
    return parse_truth_table(Path(path).read_text(encoding="utf-8"))
