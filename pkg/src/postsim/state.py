"""Dense state vectors, overlaps, and measurement under |amp|^p rules.

Basis convention: qubit 0 is the most significant bit of the basis index,
so on three qubits the index ``0b100`` has qubit 0 set.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, ZeroMass

NORM_TOL = 1e-9
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

Subset = Callable[[int], bool] | Iterable[int] | np.ndarray


@dataclass(frozen=True)
class FantasyRule:
    """Measurement exponent: outcome z is drawn with weight |amp_z|**p."""

    p: float = 2.0

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p < 0:
            raise ValidationError(f"measurement exponent must be finite and >= 0, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def is_standard(self) -> bool:
        return self.p == 2.0


STANDARD = FantasyRule(2.0)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Immutable vector of 2**num_qubits complex amplitudes.

    ``normalized`` records a claim that the 2-norm is 1; it is checked at
    construction against ``NORM_TOL``.
    """

    num_qubits: int
    amps: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self):
        n = int(self.num_qubits)
        if n < 1:
            raise ValidationError(f"num_qubits must be >= 1, got {n}")
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << n:
            raise ValidationError(f"expected {1 << n} amplitudes for {n} qubits, got {amps.shape[0]}")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes must be finite")
        if self.normalized:
            norm2 = float(np.vdot(amps, amps).real)
            if abs(norm2 - 1.0) > NORM_TOL:
                raise ValidationError(f"state flagged normalized but squared norm is {norm2!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "num_qubits", n)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> StateVector:
        if not 0 <= index < 1 << num_qubits:
            raise ValidationError(f"basis index {index} out of range for {num_qubits} qubits")
        amps = np.zeros(1 << num_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amps, *, normalize: bool = False) -> StateVector:
        """Build a state from raw amplitudes, inferring the qubit count.

        With ``normalize=True`` the amplitudes are rescaled to unit 2-norm;
        otherwise the result is flagged normalized only if it already is.
        """
        arr = np.asarray(amps, dtype=np.complex128).reshape(-1)
        n = int(arr.shape[0]).bit_length() - 1
        if n < 1 or arr.shape[0] != 1 << n:
            raise ValidationError(f"amplitude count {arr.shape[0]} is not a power of two >= 2")
        norm2 = float(np.vdot(arr, arr).real)
        if normalize:
            if norm2 == 0.0:
                raise ValidationError("cannot normalize the zero vector")
            return cls(n, arr / math.sqrt(norm2))
        return cls(n, arr, normalized=abs(norm2 - 1.0) <= NORM_TOL)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def norm(self) -> float:
        return math.sqrt(float(np.vdot(self.amps, self.amps).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def allclose(self, other: StateVector, atol: float = 1e-9) -> bool:
        return self.num_qubits == other.num_qubits and np.allclose(self.amps, other.amps, rtol=0.0, atol=atol)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.num_qubits == other.num_qubits and np.array_equal(self.amps, other.amps)

    __hash__ = None


def subset_mask(subset: Subset, dim: int) -> np.ndarray:
    """Turn a predicate, index collection, or boolean mask into a mask of length ``dim``."""
    if isinstance(subset, np.ndarray) and subset.dtype == bool:
        if subset.shape != (dim,):
            raise ValidationError(f"subset mask has shape {subset.shape}, expected ({dim},)")
        return subset
    if callable(subset):
        return np.fromiter((bool(subset(z)) for z in range(dim)), dtype=bool, count=dim)
    mask = np.zeros(dim, dtype=bool)
    for z in subset:
        z = int(z)
        if not 0 <= z < dim:
            raise ValidationError(f"subset index {z} out of range [0, {dim})")
        mask[z] = True
    return mask


def qubit_mask(num_qubits: int, qubit: int, bit: int) -> np.ndarray:
    """Mask of basis indices whose ``qubit`` equals ``bit``."""
    idx = np.arange(1 << num_qubits)
    return ((idx >> (num_qubits - 1 - qubit)) & 1) == bit


def mass_vector(amps: np.ndarray, rule: FantasyRule) -> np.ndarray:
    """Per-index |amp|**p; zero amplitudes carry zero mass for every p, including p = 0."""
    mags = np.abs(amps)
    if rule.p == 2.0:
        return mags * mags
    out = np.zeros_like(mags)
    nz = mags > 0
    out[nz] = mags[nz] ** rule.p
    return out


def p_mass(state: StateVector, rule: FantasyRule, subset: Subset) -> float:
    """Unnormalized mass sum_{z in subset} |amp_z|**p."""
    mask = subset_mask(subset, state.dim)
    return float(np.sum(mass_vector(state.amps, rule)[mask]))


def overlap_plus(state: StateVector) -> float:
    """|<+|phi>| for a normalized one-qubit state."""
    if state.num_qubits != 1:
        raise ValidationError(f"overlap_plus needs a 1-qubit state, got {state.num_qubits} qubits")
    if abs(state.norm() - 1.0) > NORM_TOL:
        raise ValidationError("overlap_plus needs a normalized state")
    a0, a1 = state.amps
    return min(1.0, abs(a0 + a1) * _INV_SQRT2)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def outcome_distribution(state: StateVector, rule: FantasyRule = STANDARD) -> np.ndarray:
    weights = mass_vector(state.amps, rule)
    total = float(weights.sum())
    if not total > 0.0:
        raise ZeroMass("total p-mass is zero")
    return weights / total


def sample_measurement(state: StateVector, rule: FantasyRule, seed) -> int:
    """Draw one basis index with probability |amp_z|**p / sum_y |amp_y|**p.

    ``seed`` is anything ``numpy.random.default_rng`` accepts (an int or a
    tuple of ints for derived streams) or an existing Generator.
    """
    probs = outcome_distribution(state, rule)
    return int(_rng(seed).choice(probs.shape[0], p=probs))


def sample_measurements(state: StateVector, rule: FantasyRule, shots: int, seed) -> np.ndarray:
    probs = outcome_distribution(state, rule)
    return _rng(seed).choice(probs.shape[0], size=shots, p=probs)
