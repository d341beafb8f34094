"""Reference dense simulator.

Gates are applied to an amplitude array reshaped so the touched qubits are
their own axes; nothing ever builds a 2**n x 2**n matrix.  Postselection is
projection followed by renormalization.  Nonunitary U1/U2 gates act as raw
linear maps and the state is only renormalized at postselection points and
at the end of the circuit.
"""
from __future__ import annotations

import math

import numpy as np

from .circuit import H_MATRIX, Circuit, Gate, Postselection
from .errors import ValidationError, ZeroProbability
from .state import StateVector, qubit_mask

ZERO_MASS = 1e-300


def _axes_view(amps: np.ndarray, n: int) -> np.ndarray:
    return amps.reshape((2,) * n)


def _sl(n: int, fixed: dict[int, int]):
    idx = [slice(None)] * n
    for q, b in fixed.items():
        idx[q] = b
    return tuple(idx)


def _apply_local(t: np.ndarray, n: int, qubits, matrix: np.ndarray) -> np.ndarray:
    """Apply a 2**k x 2**k matrix to the listed qubit axes of tensor ``t``."""
    k = len(qubits)
    if k == 1:
        # one qubit: combine the two slices along that axis directly
        q = qubits[0]
        v = t.reshape(1 << q, 2, -1) if t.ndim else t
        a, b = v[:, 0, :], v[:, 1, :]
        out = np.empty_like(v)
        out[:, 0, :] = matrix[0, 0] * a + matrix[0, 1] * b
        out[:, 1, :] = matrix[1, 0] * a + matrix[1, 1] * b
        return out.reshape(t.shape)
    m = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot puts the k gate axes first; move them back into place.
    return np.moveaxis(out, list(range(k)), list(qubits))


def _swap_target(t: np.ndarray, n: int, fixed: dict[int, int], target: int) -> None:
    a = _sl(n, {**fixed, target: 0})
    b = _sl(n, {**fixed, target: 1})
    tmp = t[a].copy()
    t[a] = t[b]
    t[b] = tmp


def _table_rows(t: np.ndarray, gate: Gate):
    """Yield the control-qubit assignments whose table bit is 1."""
    controls = gate.controls
    k = len(controls)
    for x, bit in enumerate(gate.table):
        if bit:
            yield {q: (x >> (k - 1 - j)) & 1 for j, q in enumerate(controls)}


def apply_gate(amps: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    """Return the amplitudes after ``gate``; ``amps`` itself is left untouched."""
    t = _axes_view(np.array(amps, dtype=np.complex128, copy=True), n)
    kind = gate.kind
    if kind == "X":
        _swap_target(t, n, {}, gate.target)
    elif kind == "CNOT":
        _swap_target(t, n, {gate.controls[0]: 1}, gate.target)
    elif kind == "TOFFOLI":
        a, b = gate.controls
        _swap_target(t, n, {a: 1, b: 1}, gate.target)
    elif kind == "ORACLE":
        for fixed in _table_rows(t, gate):
            _swap_target(t, n, fixed, gate.target)
    elif kind == "H":
        t = _apply_local(t, n, gate.qubits, H_MATRIX)
    elif kind == "U1" or kind == "U2":
        t = _apply_local(t, n, gate.qubits, gate.local_matrix())
    elif kind == "CH":
        sl = _sl(n, {gate.controls[0]: 1})
        sub = t[sl]
        # dropping the control axis shifts later axes down by one
        tq = gate.target - (gate.target > gate.controls[0])
        t[sl] = _apply_local(sub, n - 1, (tq,), H_MATRIX)
    elif kind == "TCH":
        controls = gate.controls
        for fixed in _table_rows(t, gate):
            sl = _sl(n, fixed)
            tq = gate.target - sum(1 for c in controls if c < gate.target)
            t[sl] = _apply_local(t[sl], n - len(controls), (tq,), H_MATRIX)
    else:  # pragma: no cover - Gate validates kinds
        raise ValidationError(f"unknown gate kind {kind!r}")
    return t.reshape(-1)


def _mass(amps: np.ndarray) -> float:
    return float(np.vdot(amps, amps).real)


def _project(amps: np.ndarray, n: int, qubit: int, bit: int) -> tuple[np.ndarray, float]:
    out = np.where(qubit_mask(n, qubit, bit), amps, 0.0)
    return out, _mass(out)


def postselect(state: StateVector, qubit: int, bit: int) -> StateVector:
    """Condition ``state`` on ``qubit`` reading ``bit`` and renormalize."""
    if not 0 <= qubit < state.num_qubits:
        raise ValidationError(f"qubit {qubit} out of range for {state.num_qubits} qubits")
    if bit not in (0, 1):
        raise ValidationError(f"postselected bit must be 0 or 1, got {bit!r}")
    out, mass = _project(state.amps, state.num_qubits, qubit, bit)
    if mass < ZERO_MASS:
        raise ZeroProbability(f"postselecting qubit {qubit} = {bit} on a zero-probability event")
    return StateVector(state.num_qubits, out / math.sqrt(mass))


def evolve(c: Circuit, input_index: int = 0, *, skip_terminal: bool = False) -> np.ndarray:
    """Raw amplitudes after running ``c`` from basis state ``input_index``.

    Postselections renormalize; the final vector is not renormalized.  With
    ``skip_terminal`` the postselections that sit after the last gate are
    left out, which exposes the pre-postselection final state.
    """
    n = c.num_qubits
    if not 0 <= input_index < 1 << n:
        raise ValidationError(f"input {input_index} out of range for {n} qubits")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[input_index] = 1.0
    end = len(c.gates)
    for op in c.ops():
        if isinstance(op, Postselection):
            if skip_terminal and op.position == end:
                continue
            out, mass = _project(amps, n, op.qubit, op.bit)
            if mass < ZERO_MASS:
                raise ZeroProbability(f"postselecting qubit {op.qubit} = {op.bit} on a zero-probability event")
            amps = out / math.sqrt(mass)
        else:
            amps = apply_gate(amps, n, op)
    return amps


def run_circuit(c: Circuit, input_index: int = 0) -> StateVector:
    """Final 2-normalized state of ``c`` applied to ``|input_index>``."""
    amps = evolve(c, input_index)
    mass = _mass(amps)
    if mass < ZERO_MASS:
        raise ZeroProbability("final state has zero norm")
    return StateVector(c.num_qubits, amps / math.sqrt(mass))


def conditional_accept_prob(c: Circuit, input_index: int = 0) -> float:
    """P(accept qubit = 1 | flag qubit = 1), read off the pre-postselection final state."""
    if not c.is_normal_form:
        raise ValidationError("conditional_accept_prob needs a circuit in normal form; "
                              "apply normalize_postselections first")
    amps = evolve(c, input_index, skip_terminal=True)
    n = c.num_qubits
    probs = np.abs(amps) ** 2
    flag = qubit_mask(n, c.flag_qubit, 1)
    flag_mass = float(probs[flag].sum())
    if flag_mass < ZERO_MASS:
        raise ZeroProbability("flag qubit has zero probability of reading 1")
    acc = float(probs[flag & qubit_mask(n, c.accept_qubit, 1)].sum())
    return min(1.0, max(0.0, acc / flag_mass))


def qubit_state(state: StateVector, qubit: int, atol: float = 1e-9) -> StateVector:
    """Extract the one-qubit factor of a product state ``qubit (x) rest``.

    The global phase is fixed so the first non-negligible amplitude of the
    factor is real and positive.  Raises ValidationError when ``qubit`` is entangled.
    """
    n = state.num_qubits
    t = np.moveaxis(_axes_view(state.amps, n), qubit, 0).reshape(2, -1)
    col = int(np.argmax(np.sum(np.abs(t) ** 2, axis=0)))
    v = t[:, col]
    v = v / np.linalg.norm(v)
    # product check: every column must be parallel to v
    rest = v.conj() @ t
    if not np.allclose(np.outer(v, rest), t, rtol=0.0, atol=atol):
        raise ValidationError(f"qubit {qubit} is entangled with the rest of the register")
    lead = v[0] if abs(v[0]) > atol else v[1]
    v = v * (abs(lead) / lead)
    return StateVector(1, v)
