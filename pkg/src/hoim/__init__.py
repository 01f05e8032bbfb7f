"""Higher-order oscillator Ising machines for SAT and MaxSAT."""

from .cnf import (Clause, CnfFormula, DimacsError, Literal, ReductionMap, formula_stats, parse_dimacs,
                  read_dimacs, reduce_to_3sat, write_dimacs)
from .dynamics import OscillatorParams, hopf_rhs, schedule_q, shil_term, system_rhs
from .energy import (ClauseTerm, HigherOrderEnergy, MonomialPoly, ResourceReport, build_energy,
                     clause_term_from_clause, count_resources, expand, terms_from_truth_table)
from .integrator import IntegratorConfig, OscillatorState, integrate, integrate_batch
from .quadratize import QuadraticModel, quadratize_3sat, verify_gadget
from .solver import (BatchReport, TrialConfig, TrialResult, binarize, parameter_sweep, run_batch, run_trial,
                     tts_from_trace)

__version__ = "0.1.0"
