"""Deciding s < 2**(n-1) for a Boolean function with postselection.

Register layout of the circuit built here (width n + 2)::

    qubit 0        control: prepared as alpha|0> + beta|1>, read out at the end
    qubit 1        function qubit: receives f(x), then is postselected on 1
    qubits 2..n+1  input register: H, oracle, H, postselected on all zeros

After both postselections the control qubit holds

    phi_r  ~  s|0> + r (2**n - 2s)/sqrt(2) |1>,      r = beta/alpha,

which comes within (1+sqrt2)/sqrt6 of |+> for some r = 2**i when
1 <= s < 2**(n-1), and never gets closer than 1/sqrt2 otherwise.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .circuit import CH, ORACLE, U1, Circuit, CircuitBuilder, H, MajorityInstance, X
from .dense import evolve, qubit_state, run_circuit
from .errors import PreconditionViolated
from .state import StateVector, qubit_mask

CONTROL = 0
FUNCTION = 1
INPUT_OFFSET = 2

WORST_WITNESS_OVERLAP = (1 + math.sqrt(2)) / math.sqrt(6)
NON_WITNESS_BOUND = 1 / math.sqrt(2)
DECISION_THRESHOLD = 0.85
SAMPLED_THRESHOLD = 0.75
_SQRT_HALF = math.sqrt(0.5)


@dataclass
class DecisionReport:
    n: int
    s_true: int
    overlaps: dict[int, float]
    verdict: bool
    mode: str
    threshold: float
    repetitions: int | None = None
    seed: int | None = None
    plus_fractions: dict[int, float] | None = None
    p: float = 2.0
    extra: dict[str, object] = field(default_factory=dict)

    @property
    def max_overlap(self) -> float:
        return max(self.overlaps.values())

    @property
    def best_i(self) -> int:
        return max(self.overlaps, key=lambda i: (self.overlaps[i], -abs(i)))

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "s_true": self.s_true,
            "mode": self.mode,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "max_overlap": self.max_overlap,
            "best_i": self.best_i,
            "p": self.p,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "overlaps": {str(i): v for i, v in sorted(self.overlaps.items())},
        }
        if self.plus_fractions is not None:
            d["plus_fractions"] = {str(i): v for i, v in sorted(self.plus_fractions.items())}
        d.update(self.extra)
        return d

    def to_text(self) -> str:
        """Flat ``key = value`` block, one entry per line."""
        lines = [
            f"mode = {self.mode}",
            f"n = {self.n}",
            f"s_true = {self.s_true}",
            f"threshold = {self.threshold:.6g}",
            f"p = {self.p:.6g}",
        ]
        if self.repetitions is not None:
            lines.append(f"repetitions = {self.repetitions}")
        if self.seed is not None:
            lines.append(f"seed = {self.seed}")
        for key, value in self.extra.items():
            lines.append(f"{key} = {value}")
        for i, v in sorted(self.overlaps.items()):
            lines.append(f"overlap[{i}] = {v:.6f}")
        if self.plus_fractions is not None:
            for i, v in sorted(self.plus_fractions.items()):
                lines.append(f"plus_fraction[{i}] = {v:.6f}")
        lines.append(f"max_overlap = {self.max_overlap:.6f}")
        lines.append(f"verdict = {'s < %d' % (1 << (self.n - 1))}: {str(self.verdict).lower()}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "overlap"])
        for i, v in sorted(self.overlaps.items()):
            w.writerow([i, f"{v:.6g}"])
        return buf.getvalue()

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def _require_support(inst: MajorityInstance) -> None:
    if inst.s < 1:
        raise PreconditionViolated("instance has s = 0; apply pad_instance first")


def pad_instance(inst: MajorityInstance) -> MajorityInstance:
    """Width n+1 instance g with g(0x) = f(x) and g(1x) = 1 iff x starts with 0.

    s_g = s + 2**(n-1) >= 1, and s_g < 2**n exactly when s < 2**(n-1).
    """
    half = inst.half
    return MajorityInstance(inst.n + 1, inst.table + (1,) * half + (0,) * half)


def psi_state(inst: MajorityInstance) -> StateVector:
    """((2**n - s)|0> + s|1>) / sqrt((2**n - s)**2 + s**2)."""
    a0, a1 = float((1 << inst.n) - inst.s), float(inst.s)
    norm = math.hypot(a0, a1)
    return StateVector(1, np.array([a0 / norm, a1 / norm]))


def _ratio_weights(ratio: float) -> tuple[float, float]:
    alpha = 1.0 / math.sqrt(1.0 + ratio * ratio)
    return alpha, ratio * alpha


def phi_amplitudes(n: int, s: int, ratio: float) -> tuple[float, float]:
    """Normalized real amplitudes of phi_ratio."""
    if not ratio > 0 or not math.isfinite(ratio):
        raise PreconditionViolated(f"ratio beta/alpha must be a positive finite number, got {ratio!r}")
    alpha, beta = _ratio_weights(ratio)
    a0 = alpha * s
    a1 = beta * _SQRT_HALF * ((1 << n) - 2 * s)
    norm = math.hypot(a0, a1)
    # s = 0 and 2**n = 2s cannot hold together for n >= 1
    assert norm > 0.0, "phi_ratio has zero norm"
    return a0 / norm, a1 / norm


def phi_state(inst: MajorityInstance, ratio: float) -> StateVector:
    a0, a1 = phi_amplitudes(inst.n, inst.s, ratio)
    return StateVector(1, np.array([a0, a1]))


def _overlap(a0: float, a1: float) -> float:
    return min(1.0, abs(a0 + a1) * _SQRT_HALF)


def i_range(n: int) -> range:
    return range(-n, n + 1)


def analytic_overlaps(n: int, s: int) -> dict[int, float]:
    return {i: _overlap(*phi_amplitudes(n, s, 2.0**i)) for i in i_range(n)}


def decide_majority_analytic(inst: MajorityInstance) -> DecisionReport:
    """Sweep r = 2**i for i in [-n, n] and test max |<+|phi_r>| against 0.85."""
    _require_support(inst)
    overlaps = analytic_overlaps(inst.n, inst.s)
    verdict = max(overlaps.values()) >= DECISION_THRESHOLD
    return DecisionReport(inst.n, inst.s, overlaps, verdict, "analytic", DECISION_THRESHOLD)


def fig1_rows(inst: MajorityInstance) -> list[tuple[int, float, float, float, float]]:
    """(i, ratio, amp0, amp1, overlap) for i in [-n, n]."""
    rows = []
    for i in i_range(inst.n):
        r = 2.0**i
        a0, a1 = phi_amplitudes(inst.n, inst.s, r)
        rows.append((i, r, a0, a1, _overlap(a0, a1)))
    return rows


def oracle_prefix(inst: MajorityInstance) -> CircuitBuilder:
    """Width n+2 builder holding H^n, the oracle onto the function qubit, and H^n again."""
    n = inst.n
    inputs = [INPUT_OFFSET + k for k in range(n)]
    b = CircuitBuilder(n + 2, accept_qubit=CONTROL, flag_qubit=FUNCTION)
    b.add(*(H(q) for q in inputs))
    b.add(ORACLE(inputs, FUNCTION, inst.table))
    b.add(*(H(q) for q in inputs))
    return b


def control_preparation(ratio: float):
    """U1 rotating |0> to alpha|0> + beta|1> with beta/alpha = ratio."""
    alpha, beta = _ratio_weights(ratio)
    return U1(CONTROL, [[alpha, -beta], [beta, alpha]])


def build_majority_circuit(inst: MajorityInstance, i: int) -> Circuit:
    """Circuit whose postselected control qubit ends in phi_state(inst, 2**i)."""
    _require_support(inst)
    if abs(i) > inst.n:
        raise PreconditionViolated(f"|i| must be at most n = {inst.n}, got {i}")
    b = oracle_prefix(inst)
    for k in range(inst.n):
        b.post(INPUT_OFFSET + k, 0)
    b.add(control_preparation(2.0**i), CH(CONTROL, FUNCTION))
    b.post(FUNCTION, 1)
    return b.build()


def with_plus_readout(c: Circuit, qubit: int = CONTROL) -> Circuit:
    """Append H then X on ``qubit`` so that reading 1 means the |+> outcome."""
    b = CircuitBuilder(c.num_qubits, accept_qubit=c.accept_qubit, flag_qubit=c.flag_qubit)
    b.extend(c)
    b.add(H(qubit), X(qubit))
    return b.build()


def simulated_control_state(inst: MajorityInstance, i: int) -> StateVector:
    return qubit_state(run_circuit(build_majority_circuit(inst, i)), CONTROL)


def decide_majority_circuit(inst: MajorityInstance) -> DecisionReport:
    """Same decision as the analytic mode, with every phi obtained by dense simulation."""
    _require_support(inst)
    overlaps = {}
    for i in i_range(inst.n):
        phi = simulated_control_state(inst, i)
        a0, a1 = phi.amps
        overlaps[i] = min(1.0, float(abs(a0 + a1)) * _SQRT_HALF)
    verdict = max(overlaps.values()) >= DECISION_THRESHOLD
    return DecisionReport(inst.n, inst.s, overlaps, verdict, "circuit", DECISION_THRESHOLD)


def first_register_zero_probability(inst: MajorityInstance) -> float:
    """Probability, without postselection, that the input register reads all zeros."""
    amps = evolve(oracle_prefix(inst).build())
    width = inst.n + 2
    mask = np.ones(1 << width, dtype=bool)
    for k in range(inst.n):
        mask &= qubit_mask(width, INPUT_OFFSET + k, 0)
    return float(np.sum(np.abs(amps[mask]) ** 2))


def first_register_zero_probabilities(n: int, codes=None) -> np.ndarray:
    """first_register_zero_probability for many width-n tables in one batched run.

    ``codes`` are table indices in the ``MajorityInstance.from_index``
    convention (default: all 2**(2**n) of them).  The shared H layer is
    simulated once, the oracle is applied per table as a basis permutation,
    and the second H layer is applied to the whole batch.
    """
    if not 1 <= n <= 4:
        raise PreconditionViolated(f"batched evaluation supports 1 <= n <= 4, got {n}")
    size = 1 << n
    codes = np.arange(1 << size, dtype=np.int64) if codes is None else np.asarray(codes, dtype=np.int64)
    width = n + 2
    # after H^n every table sees the same state
    b = CircuitBuilder(width)
    b.add(*(H(INPUT_OFFSET + k) for k in range(n)))
    start = evolve(b.build()).real
    z = np.arange(1 << width)
    x = z & (size - 1)  # inputs are the low n bits
    fbit = width - 1 - FUNCTION
    # table bit for input x: MSB-first, so entry x sits at bit size-1-x of the code
    fx = (codes[:, None] >> (size - 1 - x)[None, :]) & 1
    states = start[z[None, :] ^ (fx << fbit)]
    t = states.reshape((len(codes),) + (2,) * width)
    for k in range(n):
        ax = 1 + INPUT_OFFSET + k
        a = np.take(t, 0, axis=ax)
        c = np.take(t, 1, axis=ax)
        t = np.stack(((a + c) * _SQRT_HALF, (a - c) * _SQRT_HALF), axis=ax)
    zero_inputs = t.reshape(len(codes), 4, size)[:, :, 0]
    return np.sum(zero_inputs**2, axis=1)


def plus_probability(overlap: float, p: float = 2.0) -> float:
    """Chance of the |+> outcome for a real one-qubit state under the |amp|**p rule."""
    c = overlap
    s = math.sqrt(max(0.0, 1.0 - c * c))
    if p == 0:
        return 0.5 if s > 0 else 1.0
    cp, sp = c**p, s**p
    return cp / (cp + sp)


def witness_threshold(p: float = 2.0) -> float:
    """Frequency bar that declares an i a witness.

    0.75 whenever the worst-case witness |+> probability under the p-rule
    clears it by at least 0.05; otherwise the midpoint between 1/2 and that
    worst case.
    """
    w = plus_probability(WORST_WITNESS_OVERLAP, p)
    if w - SAMPLED_THRESHOLD >= 0.05:
        return SAMPLED_THRESHOLD
    return 0.5 * (0.5 + w)


def overlap_from_plus_fraction(f: float, p: float = 2.0) -> float:
    """Invert plus_probability: the overlap whose |+> probability under the p-rule is f."""
    if f <= 0.0:
        return 0.0
    if f >= 1.0 or p == 0:
        return 1.0 if f >= 1.0 else NON_WITNESS_BOUND
    t = (f / (1.0 - f)) ** (1.0 / p)
    return t / math.sqrt(1.0 + t * t)


def stream_seed(seed: int, n: int, i: int, rep: int) -> tuple[int, int, int]:
    """Independent PRNG stream key for repetition ``rep`` of sweep point ``i``."""
    return (seed, i + n, rep)


def sampled_decision(
    inst: MajorityInstance,
    plus_prob: Callable[[int], float],
    reps_per_i: int,
    seed: int,
    *,
    p: float = 2.0,
    mode: str = "sampled",
) -> DecisionReport:
    """Witness test shared by every sampled decider.

    ``plus_prob(i)`` is the exact chance that one end-to-end run at sweep
    point i reports |+>.  Each repetition draws from its own stream keyed by
    (seed, i, rep), so the result does not depend on evaluation order.
    """
    if reps_per_i < 1:
        raise PreconditionViolated(f"reps_per_i must be >= 1, got {reps_per_i}")
    threshold = witness_threshold(p)
    fractions = {}
    for i in i_range(inst.n):
        prob = plus_prob(i)
        hits = 0
        for rep in range(reps_per_i):
            if np.random.default_rng(stream_seed(seed, inst.n, i, rep)).random() < prob:
                hits += 1
        fractions[i] = hits / reps_per_i
    overlaps = {i: overlap_from_plus_fraction(f, p) for i, f in fractions.items()}
    verdict = any(f >= threshold for f in fractions.values())
    return DecisionReport(inst.n, inst.s, overlaps, verdict, mode, threshold,
                          repetitions=reps_per_i, seed=seed, plus_fractions=fractions, p=p)


def circuit_plus_probability(inst: MajorityInstance, i: int) -> float:
    """P(|+>) for one end-to-end dense run of the majority circuit at sweep point i."""
    state = run_circuit(with_plus_readout(build_majority_circuit(inst, i)))
    return float(np.sum(state.probabilities()[qubit_mask(state.num_qubits, CONTROL, 1)]))


def decide_majority_sampled(inst: MajorityInstance, reps_per_i: int, seed: int) -> DecisionReport:
    """Run the circuit reps_per_i times per i, measure the control in the +/- basis, look for a witness."""
    _require_support(inst)
    return sampled_decision(inst, lambda i: circuit_plus_probability(inst, i), reps_per_i, seed)
