"""Simulation suite for postselected quantum computation."""
from .circuit import Circuit, CircuitBuilder, Gate, MajorityInstance, Postselection
from .dense import conditional_accept_prob, postselect, run_circuit
from .errors import (
    CircuitSyntaxError,
    PathBudgetExceeded,
    PostsimError,
    PreconditionViolated,
    UnsupportedGate,
    ValidationError,
    ZeroMass,
    ZeroProbability,
)
from .majority import (
    DecisionReport,
    build_majority_circuit,
    decide_majority_analytic,
    decide_majority_circuit,
    decide_majority_sampled,
    pad_instance,
    phi_state,
    psi_state,
)
from .pathsum import PathLedger, enumerate_ledger, p_power_decide, pp_decide
from .rewrite import amplify, compose_intersection, normalize_postselections
from .state import FantasyRule, StateVector, overlap_plus, p_mass, sample_measurement
from .textio import parse_circuit, parse_truth_table, render_circuit

__version__ = "0.1.0"
