"""Exact Feynman path sums for circuits over H, X, CNOT and Toffoli.

Each Hadamard contributes a branch bit, so a circuit with h Hadamards has
2**h paths indexed by a bitmask.  Along a path the classical gates permute
the tracked basis state and each Hadamard contributes a factor +1 or -1
(-1 exactly when its input and output bits are both 1).  With the common
factor 2**(-h/2) pulled out, every amplitude is an integer sum

    amp_z = c_z * 2**(-h/2),    c_z = sum of the path signs ending in z,

and every probability comparison reduces to comparing integers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .circuit import PATHSUM_KINDS, Circuit, Postselection
from .errors import PathBudgetExceeded, UnsupportedGate, ValidationError, ZeroProbability
from .state import subset_mask

MAX_HADAMARDS = 24
CHUNK_BITS = 16
# basis indices are tracked in int64
MAX_QUBITS = 62


def worker_count() -> int:
    """Workers for path enumeration; ``POSTSIM_THREADS=0`` forces sequential."""
    raw = os.environ.get("POSTSIM_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        return max(0, int(raw))
    except ValueError:
        raise ValidationError(f"POSTSIM_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class PathLedger:
    num_qubits: int
    hadamard_count: int
    sums: dict[int, int]

    @property
    def scale(self) -> float:
        return 2.0 ** (-self.hadamard_count / 2)

    def coefficient(self, z: int) -> int:
        return self.sums.get(z, 0)

    def amplitude(self, z: int) -> float:
        return self.coefficient(z) * self.scale

    def amplitudes(self) -> np.ndarray:
        out = np.zeros(1 << self.num_qubits, dtype=np.float64)
        for z, c in self.sums.items():
            out[z] = c * self.scale
        return out

    def squared_sum(self) -> int:
        return sum(c * c for c in self.sums.values())

    def scaled(self, factor: int) -> PathLedger:
        """Multiply every coefficient by an integer (the scale itself is unchanged)."""
        return PathLedger(self.num_qubits, self.hadamard_count,
                          {z: c * factor for z, c in self.sums.items() if c * factor})


def _check_restricted(c: Circuit) -> None:
    bad = sorted(c.kinds() - PATHSUM_KINDS)
    if bad:
        raise UnsupportedGate(f"path-sum backend supports only H, X, CNOT, TOFFOLI; circuit uses {', '.join(bad)}")


def _compile(c: Circuit):
    """Lower the op stream to (opcode, bit positions...) tuples over basis indices."""
    n = c.num_qubits
    pos = lambda q: n - 1 - q  # noqa: E731
    prog = []
    k = 0
    for op in c.ops():
        if isinstance(op, Postselection):
            prog.append(("P", pos(op.qubit), op.bit))
        elif op.kind == "H":
            prog.append(("H", pos(op.target), k))
            k += 1
        elif op.kind == "X":
            prog.append(("X", pos(op.target)))
        elif op.kind == "CNOT":
            prog.append(("C", pos(op.controls[0]), pos(op.target)))
        else:
            a, b = op.controls
            prog.append(("T", pos(a), pos(b), pos(op.target)))
    return prog


def _run_chunk(prog, input_index: int, lo: int, hi: int) -> dict[int, int]:
    masks = np.arange(lo, hi, dtype=np.int64)
    states = np.full(hi - lo, input_index, dtype=np.int64)
    negative = np.zeros(hi - lo, dtype=bool)
    alive = np.ones(hi - lo, dtype=bool)
    one = np.int64(1)
    for step in prog:
        code = step[0]
        if code == "H":
            _, p, k = step
            b_in = (states >> p) & one
            b_out = (masks >> k) & one
            negative ^= (b_in & b_out).astype(bool)
            states = (states & ~(one << p)) | (b_out << p)
        elif code == "X":
            states = states ^ (one << step[1])
        elif code == "C":
            _, pc, pt = step
            states = states ^ (((states >> pc) & one) << pt)
        elif code == "T":
            _, pa, pb, pt = step
            states = states ^ ((((states >> pa) & (states >> pb)) & one) << pt)
        else:
            _, p, bit = step
            alive &= ((states >> p) & one) == bit
    states = states[alive]
    negative = negative[alive]
    uniq, inverse = np.unique(states, return_inverse=True)
    minus = np.bincount(inverse[negative], minlength=uniq.shape[0])
    plus = np.bincount(inverse[~negative], minlength=uniq.shape[0])
    return {int(z): int(a) - int(b) for z, a, b in zip(uniq, plus, minus) if a != b}


def enumerate_ledger(c: Circuit, input_index: int = 0, *, threads: int | None = None) -> PathLedger:
    """Sum the signed contributions of all 2**h Hadamard branch assignments.

    Postselections drop the paths that disagree with them, so the ledger of
    a postselected circuit holds the unnormalized projected amplitudes.
    """
    _check_restricted(c)
    h = c.hadamard_count
    if h > MAX_HADAMARDS:
        raise PathBudgetExceeded(f"{h} Hadamards exceed the path budget of {MAX_HADAMARDS}")
    if c.num_qubits > MAX_QUBITS:
        raise ValidationError(f"path-sum backend handles at most {MAX_QUBITS} qubits, got {c.num_qubits}")
    if not 0 <= input_index < 1 << c.num_qubits:
        raise ValidationError(f"input {input_index} out of range for {c.num_qubits} qubits")
    prog = _compile(c)
    total = 1 << h
    step = 1 << CHUNK_BITS
    ranges = [(lo, min(lo + step, total)) for lo in range(0, total, step)]
    workers = worker_count() if threads is None else threads
    if workers <= 1 or len(ranges) == 1:
        parts = [_run_chunk(prog, input_index, lo, hi) for lo, hi in ranges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: _run_chunk(prog, input_index, *r), ranges))
    sums: dict[int, int] = {}
    for part in parts:
        for z, v in part.items():
            sums[z] = sums.get(z, 0) + v
    return PathLedger(c.num_qubits, h, {z: v for z, v in sorted(sums.items()) if v})


@dataclass(frozen=True)
class LedgerComparison:
    """Exact integer comparison of accepting and rejecting mass."""

    accept: int
    reject: int

    @property
    def verdict(self) -> bool:
        return self.accept > self.reject

    @property
    def tie(self) -> bool:
        return self.accept == self.reject


def _bit(z: int, n: int, q: int) -> int:
    return (z >> (n - 1 - q)) & 1


def pp_compare(c: Circuit, input_index: int = 0) -> LedgerComparison:
    """S1 = sum c_z**2 over flag=1, accept=1 and S0 = the same over flag=1, accept=0."""
    if not c.is_normal_form:
        raise ValidationError("pp_decide needs a circuit in normal form")
    ledger = enumerate_ledger(c, input_index)
    n, f, a = c.num_qubits, c.flag_qubit, c.accept_qubit
    s0 = s1 = 0
    for z, v in ledger.sums.items():
        if _bit(z, n, f):
            if _bit(z, n, a):
                s1 += v * v
            else:
                s0 += v * v
    if s0 + s1 == 0:
        raise ZeroProbability("flag qubit has zero probability of reading 1")
    return LedgerComparison(s1, s0)


def pp_decide(c: Circuit, input_index: int = 0) -> bool:
    """True iff the conditional acceptance probability is strictly above 1/2; ties give False."""
    return pp_compare(c, input_index).verdict


def _member(accept_set, n: int):
    if callable(accept_set):
        return lambda z: bool(accept_set(z))
    if isinstance(accept_set, np.ndarray) and accept_set.dtype == bool:
        mask = subset_mask(accept_set, 1 << n)
        return lambda z: bool(mask[z])
    members = {int(z) for z in accept_set}
    return members.__contains__


def p_power_compare(c: Circuit, p: int, accept_set, input_index: int = 0) -> LedgerComparison:
    """Compare sum_{z in S} amp_z**p with sum_{z not in S} amp_z**p for even integer p.

    amp_z**p = c_z**p * 2**(-h p / 2); the common scale cancels, leaving a
    comparison of big-integer powers of the ledger sums.
    """
    if isinstance(p, bool) or int(p) != p or p < 2 or p % 2:
        raise ValidationError(f"p must be an even integer >= 2, got {p!r}")
    p = int(p)
    _check_restricted(c)
    if c.postselections:
        raise ValidationError("p-power comparison is defined for circuits without postselection")
    h = c.hadamard_count
    if h * p > MAX_HADAMARDS:
        raise PathBudgetExceeded(f"h*p = {h * p} exceeds the term budget of {MAX_HADAMARDS}")
    ledger = enumerate_ledger(c, input_index)
    inside = _member(accept_set, c.num_qubits)
    s_in = s_out = 0
    for z, v in ledger.sums.items():
        if inside(z):
            s_in += v**p
        else:
            s_out += v**p
    return LedgerComparison(s_in, s_out)


def p_power_decide(c: Circuit, p: int, accept_set, input_index: int = 0) -> bool:
    return p_power_compare(c, p, accept_set, input_index).verdict


def ledger_amplitude_error(ledger: PathLedger, amps: np.ndarray) -> float:
    """Max |c_z 2**(-h/2) - amps_z| over all basis states."""
    return float(np.max(np.abs(ledger.amplitudes() - np.asarray(amps))))


def norm_identity_holds(ledger: PathLedger) -> bool:
    """Sum of squared coefficients equals 2**h exactly."""
    return ledger.squared_sum() == 1 << ledger.hadamard_count
