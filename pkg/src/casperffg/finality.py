"""Vote validity, deposit-weighted tallies, justification and finalization."""

from __future__ import annotations

import bisect
import enum
import hashlib
from dataclasses import dataclass
from typing import Optional

from .chain import ChainView
from .errors import DuplicateVote, UnknownBlock


def sign(validator, target: int, target_height: int, source_height: int, secret: bytes = b"") -> str:
    """Authenticity token for a vote. Stands in for a real signature."""
    msg = f"{validator}|{target}|{target_height}|{source_height}".encode()
    return hashlib.blake2b(msg, key=secret[:64], digest_size=8).hexdigest()


@dataclass(frozen=True, slots=True)
class Vote:
    validator: object
    target: int
    target_height: int
    source_height: int
    signature: str = ""

    def __post_init__(self):
        if not self.target_height > self.source_height >= 0:
            raise ValueError(
                f"vote heights must satisfy target > source >= 0, "
                f"got target={self.target_height} source={self.source_height}"
            )

    @property
    def link(self) -> tuple[int, int]:
        return (self.source_height, self.target_height)


def make_vote(validator, target: int, target_height: int, source_height: int, secret: bytes = b"") -> Vote:
    return Vote(validator, target, target_height, source_height,
                sign(validator, target, target_height, source_height, secret))


class Validity(enum.Enum):
    VALID = "valid"
    BAD_SIGNATURE = "bad_signature"
    UNKNOWN_TARGET = "unknown_target"
    HEIGHT_MISMATCH = "height_mismatch"
    WRONG_TARGET_EPOCH = "wrong_target_epoch"
    WRONG_TARGET = "wrong_target"
    SOURCE_NOT_JUSTIFIED = "source_not_justified"

    def __bool__(self):
        return self is Validity.VALID


def supermajority(stake: float, total: float, threshold: float) -> bool:
    return total > 0 and stake >= threshold * total


class FinalityState:
    """Justification and finalization bookkeeping for one contract instance.

    ``justified`` maps checkpoint id to the total deposit at the time it was
    justified (genesis maps to infinity). Both flags only ever get set.
    """

    def __init__(self, view: ChainView, epoch_length: int, secret: bytes = b"",
                 threshold: float = 2 / 3):
        if view.genesis is None:
            raise UnknownBlock("finality state needs a view with a genesis block")
        self.view = view
        self.l = epoch_length
        self.secret = secret
        self.threshold = threshold
        g = view.genesis
        self.justified: dict[int, float] = {g: float("inf")}
        self.finalized: dict[int, None] = {g: None}
        self.tallies: dict[tuple[int, int], float] = {}
        self._voters: dict[tuple[int, int], set] = {}
        self._justified_epochs: list[int] = [0]
        self._by_epoch: dict[int, list[int]] = {0: [g]}
        self.last_finalized_epoch = 0
        self.esf = 0
        view.justified.setdefault(g, float("inf"))
        view.known_finalized.setdefault(g, None)

    def copy(self, view: Optional[ChainView] = None) -> "FinalityState":
        other = FinalityState.__new__(FinalityState)
        other.view = self.view if view is None else view
        other.l = self.l
        other.secret = self.secret
        other.threshold = self.threshold
        other.justified = dict(self.justified)
        other.finalized = dict(self.finalized)
        other.tallies = dict(self.tallies)
        other._voters = {k: set(v) for k, v in self._voters.items()}
        other._justified_epochs = list(self._justified_epochs)
        other._by_epoch = {k: list(v) for k, v in self._by_epoch.items()}
        other.last_finalized_epoch = self.last_finalized_epoch
        other.esf = self.esf
        return other

    def epoch(self, checkpoint: int) -> int:
        return self.view.height(checkpoint) // self.l

    def source_of(self, vote: Vote) -> int:
        return self.view.ancestor_at(vote.target, vote.source_height * self.l)

    def last_justified(self, block: int, below_epoch: Optional[int] = None) -> int:
        """Highest justified checkpoint on the chain of ``block`` with epoch < ``below_epoch``."""
        view = self.view
        top = view.height(block) // self.l
        if below_epoch is not None:
            top = min(top, below_epoch - 1)
        i = bisect.bisect_right(self._justified_epochs, top)
        while i > 0:
            i -= 1
            for cp in self._by_epoch[self._justified_epochs[i]]:
                if view.is_ancestor(cp, block):
                    return cp
        return view.genesis

    def begin_epoch(self, epoch: int) -> int:
        self.esf = epoch - self.last_finalized_epoch
        return self.esf

    def mark_justified(self, checkpoint: int, total_deposit: float) -> None:
        if checkpoint in self.justified:
            return
        self.justified[checkpoint] = total_deposit
        self.view.justified[checkpoint] = max(total_deposit, self.view.justified.get(checkpoint, 0.0))
        e = self.epoch(checkpoint)
        if e not in self._by_epoch:
            bisect.insort(self._justified_epochs, e)
            self._by_epoch[e] = []
        self._by_epoch[e].append(checkpoint)

    def justified_in_epoch(self, epoch: int) -> list[int]:
        return list(self._by_epoch.get(epoch, ()))


def validate_vote(state: FinalityState, vote: Vote, current_epoch: int,
                  including_block: Optional[int] = None) -> Validity:
    """Classify a vote as seen by the contract on the chain of ``including_block``."""
    view = state.view
    if vote.signature != sign(vote.validator, vote.target, vote.target_height,
                              vote.source_height, state.secret):
        return Validity.BAD_SIGNATURE
    if vote.target not in view:
        return Validity.UNKNOWN_TARGET
    if view.height(vote.target) != vote.target_height * state.l:
        return Validity.HEIGHT_MISMATCH
    if vote.target_height != current_epoch:
        return Validity.WRONG_TARGET_EPOCH
    if including_block is not None:
        if including_block not in view or not view.is_ancestor(vote.target, including_block):
            return Validity.WRONG_TARGET
    if state.source_of(vote) not in state.justified:
        return Validity.SOURCE_NOT_JUSTIFIED
    return Validity.VALID


def record_vote(state: FinalityState, vote: Vote, deposit_weight: float) -> FinalityState:
    link = (state.source_of(vote), vote.target)
    voters = state._voters.setdefault(link, set())
    if vote.validator in voters:
        raise DuplicateVote(f"validator {vote.validator} already voted for link {link}")
    voters.add(vote.validator)
    state.tallies[link] = state.tallies.get(link, 0.0) + deposit_weight
    return state


def try_justify(state: FinalityState, source: int, target: int, total_deposit: float,
                threshold: Optional[float] = None) -> FinalityState:
    if target in state.justified:
        return state
    if threshold is None:
        threshold = state.threshold
    if source not in state.justified:
        return state
    view = state.view
    if source == target or not view.is_ancestor(source, target):
        return state
    if supermajority(state.tallies.get((source, target), 0.0), total_deposit, threshold):
        state.mark_justified(target, total_deposit)
    return state


def try_finalize(state: FinalityState, checkpoint: int,
                 current_epoch: Optional[int] = None) -> FinalityState:
    """Finalize ``checkpoint`` if it and its direct child checkpoint are justified."""
    if checkpoint in state.justified and checkpoint not in state.finalized:
        e = state.epoch(checkpoint)
        view = state.view
        for child in state.justified_in_epoch(e + 1):
            if view.is_ancestor(checkpoint, child):
                state.finalized[checkpoint] = None
                view.known_finalized.setdefault(checkpoint, None)
                state.last_finalized_epoch = max(state.last_finalized_epoch, e)
                break
    if current_epoch is not None:
        state.esf = current_epoch - state.last_finalized_epoch
    return state


def conflicting(view: ChainView, a: int, b: int) -> bool:
    view.get(a)
    view.get(b)
    return not view.is_ancestor(a, b) and not view.is_ancestor(b, a)


def process_vote(state: FinalityState, vote: Vote, deposit_weight: float,
                 total_deposit: float, current_epoch: int,
                 including_block: Optional[int] = None) -> tuple[Validity, list[int]]:
    """Validate, tally, and propagate one vote.

    Returns the verdict and the checkpoints newly finalized as a result.
    Duplicate votes for the same link are reported as ``DuplicateVote``.
    """
    verdict = validate_vote(state, vote, current_epoch, including_block)
    if not verdict:
        return verdict, []
    record_vote(state, vote, deposit_weight)
    source = state.source_of(vote)
    target = vote.target
    if target in state.justified:
        return verdict, []
    try_justify(state, source, target, total_deposit)
    if target not in state.justified:
        return verdict, []
    newly = []
    parent_cp = state.view.ancestor_at(target, (vote.target_height - 1) * state.l)
    for cp in (parent_cp, target):
        before = cp in state.finalized
        try_finalize(state, cp)
        if not before and cp in state.finalized:
            newly.append(cp)
    return verdict, newly
