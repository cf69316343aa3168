"""Slashing conditions, slash adjudication, and a brute-force safety oracle."""

from __future__ import annotations

import bisect
import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .chain import Block, ChainView
from .errors import AlreadySlashed, InvalidEvidence
from .finality import FinalityState, Vote, conflicting, make_vote, process_vote
from .rewards import ValidatorState

FINDER_FEE = 0.04
SEVERITY_MULTIPLIER = 3.0


class Condition(enum.Enum):
    I = "same_target_height"
    II = "surround"


def violates(a: Vote, b: Vote) -> Optional[Condition]:
    if a.validator != b.validator:
        return None
    if (a.target, a.target_height, a.source_height) == (b.target, b.target_height, b.source_height):
        return None
    if a.target_height == b.target_height:
        return Condition.I
    if a.source_height < b.source_height < b.target_height < a.target_height:
        return Condition.II
    if b.source_height < a.source_height < a.target_height < b.target_height:
        return Condition.II
    return None


@dataclass(frozen=True)
class SlashEvidence:
    vote_a: Vote
    vote_b: Vote
    reporter: object = None


@dataclass
class Offense:
    validator: object
    epoch: int
    gross: float
    lost: float
    fee: float


@dataclass
class SlashLedger:
    window_epochs: int = 1728
    offenses: list[Offense] = field(default_factory=list)
    burned_total: float = 0.0
    fees_paid: float = 0.0
    gross_slashed: float = 0.0
    current_epoch: int = 0

    def in_window(self, epoch: Optional[int] = None) -> list[Offense]:
        epoch = self.current_epoch if epoch is None else epoch
        return [o for o in self.offenses if o.epoch > epoch - self.window_epochs]

    @property
    def recent_slashed(self) -> float:
        return sum(o.gross for o in self.in_window())


def slash_fraction(recent_fraction: float) -> float:
    return min(1.0, max(FINDER_FEE, SEVERITY_MULTIPLIER * recent_fraction))


def apply_slash(validators: Mapping[object, ValidatorState], ledger: SlashLedger,
                evidence: SlashEvidence, total_deposit: float, epoch: int = 0):
    """Punish the author of two conflicting votes.

    ``total_deposit`` is the active total including the offender. The
    offender loses ``min(1, 3 * f)`` of its deposit (never less than the 4%
    finder's fee), where ``f`` is the share of stake slashed inside the
    window including this offense. Earlier offenders in the same window are
    topped up to the same fraction. Mutates ``validators`` and ``ledger``
    and returns both.
    """
    if violates(evidence.vote_a, evidence.vote_b) is None:
        raise InvalidEvidence("votes do not violate a slashing condition")
    offender = validators[evidence.vote_a.validator]
    if offender.slashed:
        raise AlreadySlashed(f"validator {offender.id} was already slashed")
    ledger.current_epoch = max(ledger.current_epoch, epoch)
    window = ledger.in_window(epoch)
    prev = sum(o.gross for o in window)
    gross = offender.deposit
    denom = total_deposit + prev
    frac = slash_fraction((prev + gross) / denom if denom > 0 else 1.0)

    fee = FINDER_FEE * gross
    lost = frac * gross
    offender.deposit = gross - lost
    offender.slashed = True
    offender.active = False
    ledger.gross_slashed += gross
    reporter = validators.get(evidence.reporter) if evidence.reporter is not None else None
    if reporter is not None and reporter is not offender and reporter.earning:
        reporter.deposit += fee
        ledger.fees_paid += fee
        ledger.burned_total += lost - fee
    else:
        # nobody to pay, so the fee is burned with the rest
        ledger.burned_total += lost
    for o in window:
        target = frac * o.gross
        if o.lost < target:
            prior = validators[o.validator]
            extra = min(target - o.lost, prior.deposit)
            prior.deposit -= extra
            ledger.burned_total += extra
            o.lost = target
    ledger.offenses.append(Offense(offender.id, epoch, gross, lost, fee))
    return validators, ledger


class VoteIndex:
    """Every vote seen so far, indexed per validator for fast conflict lookup."""

    def __init__(self):
        self._by_target: dict[object, dict[int, list[Vote]]] = {}
        self._by_source: dict[object, list[tuple[int, int, Vote]]] = {}
        self._max_target: dict[object, int] = {}

    def votes(self, validator) -> list[Vote]:
        return [v for _, _, v in self._by_source.get(validator, [])]

    def add(self, vote: Vote) -> Optional[Vote]:
        """Record ``vote`` and return an earlier vote it conflicts with, if any."""
        vid = vote.validator
        found = None
        for other in self._by_target.get(vid, {}).get(vote.target_height, ()):
            if violates(other, vote) is not None:
                found = other
                break
        spans = self._by_source.setdefault(vid, [])
        if found is None:
            # earlier votes nested inside the new one
            i = bisect.bisect_right(spans, (vote.source_height, float("inf")))
            for s, t, other in spans[i:]:
                if s >= vote.target_height:
                    break
                if t < vote.target_height:
                    found = other
                    break
        if found is None and self._max_target.get(vid, -1) > vote.target_height:
            # earlier votes wrapping around the new one
            for s, t, other in spans:
                if s >= vote.source_height:
                    break
                if t > vote.target_height:
                    found = other
                    break
        self._by_target.setdefault(vid, {}).setdefault(vote.target_height, []).append(vote)
        bisect.insort(spans, (vote.source_height, vote.target_height, vote), key=lambda x: x[:2])
        self._max_target[vid] = max(self._max_target.get(vid, -1), vote.target_height)
        return found

    def copy(self) -> "VoteIndex":
        other = VoteIndex()
        other._by_target = {k: {h: list(vs) for h, vs in d.items()} for k, d in self._by_target.items()}
        other._by_source = {k: list(v) for k, v in self._by_source.items()}
        other._max_target = dict(self._max_target)
        return other


def find_violations(votes: Iterable[Vote]) -> list[tuple[Vote, Vote, Condition]]:
    by_validator: dict[object, list[Vote]] = {}
    for v in votes:
        by_validator.setdefault(v.validator, []).append(v)
    out = []
    for vs in by_validator.values():
        for a, b in itertools.combinations(vs, 2):
            cond = violates(a, b)
            if cond is not None:
                out.append((a, b, cond))
    return out


def slashable_validators(votes: Iterable[Vote]) -> set:
    return {a.validator for a, _, _ in find_violations(votes)}


def min_slashable_for_conflict(votes: Iterable[Vote], deposits: Mapping[object, float]) -> float:
    """Deposit-weighted share of validators holding at least one violating vote pair."""
    total = sum(deposits.values())
    if total <= 0:
        return 0.0
    return sum(deposits[v] for v in slashable_validators(votes)) / total


def conflicting_finalized(state: FinalityState) -> list[tuple[int, int]]:
    fin = list(state.finalized)
    return [(a, b) for a, b in itertools.combinations(fin, 2) if conflicting(state.view, a, b)]


@dataclass
class SafetySearchResult:
    assignments: int = 0
    conflicts: int = 0
    counterexamples: list = field(default_factory=list)
    min_slashed_share: Optional[Fraction] = None


def two_branch_view(n_epochs: int, l: int = 1) -> tuple[ChainView, dict[str, list[int]]]:
    """Genesis plus two disjoint chains of ``n_epochs`` epochs each.

    Returns the view and, per branch, the checkpoint id of every epoch
    (index 0 is genesis).
    """
    view = ChainView()
    view.add(Block(0, None, 0))
    next_id = 1
    checkpoints = {}
    for name in ("A", "B"):
        parent = 0
        cps = [0]
        for h in range(1, n_epochs * l + 1):
            view.add(Block(next_id, parent, h, proposer=name))
            if h % l == 0:
                cps.append(next_id)
            parent = next_id
            next_id += 1
        checkpoints[name] = cps
    return view, checkpoints


def exhaustive_safety_search(weights: Sequence[int] = (1, 1, 1), n_epochs: int = 3,
                             l: int = 1, any_source: bool = False,
                             equivocate: bool = True) -> SafetySearchResult:
    """Enumerate every vote pattern on a two-branch tree and check the 1/3 bound.

    Each epoch every validator independently abstains or votes for that
    epoch's checkpoint on each branch, so a validator may vote on both
    (``equivocate=False`` allows at most one). The source is the last
    justified checkpoint on that branch, or with ``any_source`` every
    justified ancestor in turn. All votes share one view, so this is the
    unpartitioned setting.
    """
    view, cps = two_branch_view(n_epochs, l)
    total = sum(weights)
    ids = list(range(len(weights)))
    result = SafetySearchResult()
    root = FinalityState(view, l)

    def options(state: FinalityState, epoch: int):
        per_branch = []
        for branch in ("A", "B"):
            target = cps[branch][epoch]
            if any_source:
                sources = [e for e in range(epoch) if cps[branch][e] in state.justified]
            else:
                sources = [state.epoch(state.last_justified(target, below_epoch=epoch))]
            per_branch.append([None] + [(target, epoch, s) for s in sources])
        opts = [tuple(c for c in pair if c is not None) for pair in itertools.product(*per_branch)]
        return [o for o in opts if equivocate or len(o) <= 1]

    def check(state: FinalityState, votes: list[Vote]):
        result.assignments += 1
        if not conflicting_finalized(state):
            return
        result.conflicts += 1
        bad = slashable_validators(votes)
        share = Fraction(sum(weights[v] for v in bad), total)
        if result.min_slashed_share is None or share < result.min_slashed_share:
            result.min_slashed_share = share
        if share < Fraction(1, 3):
            result.counterexamples.append(list(votes))

    def descend(state: FinalityState, votes: list[Vote], epoch: int):
        if epoch > n_epochs:
            check(state, votes)
            return
        per_validator = [options(state, epoch) for _ in ids]
        for combo in itertools.product(*per_validator):
            s = state.copy()
            cast = []
            for v, choices in zip(ids, combo):
                for target, th, sh in choices:
                    vote = make_vote(v, target, th, sh)
                    verdict, _ = process_vote(s, vote, weights[v], total, epoch)
                    if verdict:
                        cast.append(vote)
            descend(s, votes + cast, epoch + 1)

    descend(root, [], 1)
    return result
