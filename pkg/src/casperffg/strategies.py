"""Validator behaviour policies."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .chain import ChainView, fork_choice
from .finality import FinalityState, Vote, make_vote
from .params import DEFAULT_PARAMS, ProtocolParams


class Kind(enum.Enum):
    HONEST = "honest"
    OFFLINE = "offline"
    WORST_CASE = "worst_case"
    EQUIVOCATOR = "equivocator"


@dataclass(frozen=True)
class Strategy:
    kind: Kind = Kind.HONEST
    from_epoch: int = 0
    # branches an equivocator votes on; empty means every branch it can see
    sides: tuple[str, ...] = ()

    @classmethod
    def honest(cls):
        return cls(Kind.HONEST)

    @classmethod
    def offline(cls, from_epoch: int = 0):
        return cls(Kind.OFFLINE, from_epoch)

    @classmethod
    def worst_case(cls, from_epoch: int = 0):
        return cls(Kind.WORST_CASE, from_epoch)

    @classmethod
    def equivocator(cls, sides: Iterable[str] = ()):
        return cls(Kind.EQUIVOCATOR, 0, tuple(sides))

    def active_kind(self, epoch: int) -> Kind:
        """Behaviour in ``epoch``; before ``from_epoch`` everyone behaves honestly."""
        if self.kind in (Kind.OFFLINE, Kind.WORST_CASE) and epoch < self.from_epoch:
            return Kind.HONEST
        return self.kind


@dataclass(frozen=True)
class WorstCaseState:
    alpha_i: float
    delta_i: float


def worst_case_delta(alpha_i: float, threshold: float = 2 / 3) -> float:
    """Largest adversary participation that keeps total votes at or below the threshold."""
    if alpha_i >= 1:
        return 0.0
    return min(1.0, max(0.0, (threshold - alpha_i) / (1 - alpha_i)))


def worst_case_selection(adversary: Mapping[object, float], honest_stake: float, total: float,
                         threshold: float = 2 / 3, quantum: float = 1e-9):
    """Choose which adversary validators vote this epoch.

    Largest deposits go first (ties by id) while total participation stays
    strictly below the threshold by at least ``quantum``. Returns the chosen
    ids and the realised ``WorstCaseState``.
    """
    if total <= 0:
        return set(), WorstCaseState(0.0, 0.0)
    alpha = honest_stake / total
    delta = worst_case_delta(alpha, threshold)
    adv_total = sum(adversary.values())
    chosen = set()
    if delta > 0 and adv_total > 0:
        budget = min(delta * adv_total, threshold * total - honest_stake - quantum)
        used = 0.0
        for vid, dep in sorted(adversary.items(), key=lambda kv: (-kv[1], str(kv[0]))):
            if used + dep <= budget:
                chosen.add(vid)
                used += dep
        realised = used / adv_total
    else:
        realised = 0.0
    return chosen, WorstCaseState(alpha, realised)


@dataclass
class BranchSnapshot:
    """What a validator sees of one branch when deciding its vote."""

    side: str
    view: ChainView
    finality: FinalityState
    tip: int


def branch_vote(validator, branch: BranchSnapshot, epoch: int, params: ProtocolParams,
                secret: bytes = b"") -> Optional[Vote]:
    view = branch.view
    l = params.epoch_length
    if view.height(branch.tip) < epoch * l or epoch == 0:
        return None
    target = view.ancestor_at(branch.tip, epoch * l)
    source = branch.finality.last_justified(target, below_epoch=epoch)
    return make_vote(validator, target, epoch, view.height(source) // l, secret)


def head_branch(branches: Mapping[str, BranchSnapshot], params: ProtocolParams) -> Optional[str]:
    """Branch holding the fork-choice head; views and finality may be shared."""
    if not branches:
        return None
    first = next(iter(branches.values()))
    finalities = {id(b.finality): b.finality for b in branches.values()}
    head = fork_choice(first.view, list(finalities.values()), params)
    for name in sorted(branches):
        b = branches[name]
        if b.view.is_ancestor(b.tip, head) or b.view.is_ancestor(head, b.tip):
            return name
    return None


def decide_votes(strategy: Strategy, validator, epoch: int,
                 branches: Mapping[str, BranchSnapshot],
                 params: ProtocolParams = DEFAULT_PARAMS, secret: bytes = b"",
                 selected: bool = True) -> list[Vote]:
    """Votes cast by ``validator`` in ``epoch``.

    ``branches`` holds the branches this validator can see. Protocol
    followers vote once, on the branch carrying their fork-choice head.
    Equivocators vote on every branch in their set. ``selected`` tells a
    worst-case validator whether the coalition picked it this epoch.
    """
    kind = strategy.active_kind(epoch)
    if kind is Kind.OFFLINE:
        return []
    if kind is Kind.EQUIVOCATOR:
        wanted = strategy.sides or tuple(branches)
        votes = []
        for name in sorted(branches):
            if name in wanted:
                vote = branch_vote(validator, branches[name], epoch, params, secret)
                if vote is not None:
                    votes.append(vote)
        return votes
    if kind is Kind.WORST_CASE and not selected:
        return []
    name = branches and (next(iter(branches)) if len(branches) == 1 else head_branch(branches, params))
    if not name:
        return []
    vote = branch_vote(validator, branches[name], epoch, params, secret)
    return [] if vote is None else [vote]
