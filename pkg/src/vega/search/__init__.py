"""Search algorithms: random, ASHA, BOHB-lite and Pareto evolutionary search."""

from .asha import AshaSearch, AshaState, Finalize, Promote, SampleNew, asha_on_result, next_promotion
from .bohb import BohbConfig, BohbSearch, BracketState, bohb_propose, hyperband_brackets
from .ea import EvolutionSearch, ea_step
from .pareto import ParetoArchive, archive_insert, dominates, nondominated
from .random_search import RandomSearch, propose_random
from .trial import Objective, Trial, TrialResult, history_record

__all__ = [
    "AshaSearch",
    "AshaState",
    "BohbConfig",
    "BohbSearch",
    "BracketState",
    "EvolutionSearch",
    "Finalize",
    "Objective",
    "ParetoArchive",
    "Promote",
    "RandomSearch",
    "SampleNew",
    "Trial",
    "TrialResult",
    "archive_insert",
    "asha_on_result",
    "bohb_propose",
    "dominates",
    "ea_step",
    "history_record",
    "hyperband_brackets",
    "next_promotion",
    "nondominated",
    "propose_random",
]
