"""Casper FFG finality gadget: protocol model, epoch simulator and analysis tools."""

__version__ = "0.1.0"

from .params import DEFAULT_PARAMS, ProtocolParams
from .errors import (CasperError, ConfigError, DomainError, DuplicateVote, NeverFinalized,
                     UnknownBlock, UnknownParent)
from .chain import Block, ChainView, fork_choice
from .finality import FinalityState, Validity, Vote, make_vote, process_vote
from .rewards import ValidatorState, epoch_transition
from .slashing import SlashEvidence, SlashLedger, apply_slash, violates
from .strategies import Kind, Strategy, worst_case_delta
from .analysis import (gas_overhead, incentive_tables, mu_breakeven, phi, phi_honest,
                       race_probability, worst_case_T)
from .scenario import (ScenarioConfig, ValidatorSpec, load_scenario, offline_scenario,
                       partition_scenario)
from .sim import SimTrace, first_finalization_time, run
