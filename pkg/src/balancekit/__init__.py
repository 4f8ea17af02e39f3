"""Diagonal balancing of sparse matrices by the Osborne-Parlett-Reinsch iteration."""

from .errors import (BalanceError, CapExhausted, DegenerateWeights, DimensionMismatch, EmptyMatrix,
                     InvalidCycle, InvariantViolation, NotBalanceable, Overflow, ParseError)
from .instances import random_problem
from .io import (JsonlTraceSink, read_diagonal, read_matrix_market, read_trace, write_diagonal,
                 write_matrix_market)
from .lp import LpResult, balance_lp
from .model import (BalanceState, BalancingProblem, CoordMatrix, TraceRecord, canonicalize, gradient,
                    imbalance, is_eps_balanced, objective, replay, scc_split)
from .queue import GainQueue
from .randomized import (Outcome, RandomizedState, classify, randomized_step, run_randomized,
                         sample_index)
from .schedulers import (RunReport, Step, TerminatedBy, balance_index, greedy_select, run_greedy,
                         run_round_robin)
from .verify import (CycleProductMonitor, LowerBoundInstance, OracleResult, StepAuditor,
                     check_cycle_products, check_gap_bound, lower_bound_instance, oracle_balance,
                     ratio_trajectory, sample_cycles)

__version__ = "0.1.0"
