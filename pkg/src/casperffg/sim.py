"""Discrete-event epoch simulator.

Every chain ("side") carries its own copy of the contract state. Before a
partition there is a single side called ``main`` with all the mining
power. At the partition start the main side is cloned once per partition
side, each continuing from the same tip with its own mining share. In the
default mode each side also gets its own copy of the block tree and votes
never cross sides; with ``shared_view`` every validator sees every block
and every vote.
"""

from __future__ import annotations

import copy
import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import Block, ChainView
from .errors import DuplicateVote, NeverFinalized
from .finality import FinalityState, Vote, process_vote
from .rewards import ValidatorState, epoch_transition
from .scenario import MAIN, ScenarioConfig
from .slashing import SlashEvidence, SlashLedger, VoteIndex, apply_slash
from .strategies import BranchSnapshot, Kind, branch_vote, decide_votes, worst_case_selection
from . import __version__

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

TRACE_COLUMNS = ["side", "epoch", "time", "total_deposit", "esf", "m", "rho", "collective",
                 "justified", "finalized", "last_finalized_epoch", "honest_share", "delta"]


@dataclass(frozen=True)
class TraceRow:
    side: str
    epoch: int
    time: float
    total_deposit: float
    esf: int
    m: float
    rho: float
    collective: float
    justified: bool
    finalized: bool
    last_finalized_epoch: int
    honest_share: float
    # share of worst-case stake that voted, 0 when there is none
    delta: float


@dataclass(frozen=True)
class Event:
    kind: str
    side: str
    epoch: int
    time: float
    subject: str


@dataclass
class SimTrace:
    header: dict
    rows: list[TraceRow] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    votes: list[Vote] = field(default_factory=list)
    fault_epoch: int = 0
    sides: tuple[str, ...] = (MAIN,)

    def side_rows(self, side: str) -> list[TraceRow]:
        return [r for r in self.rows if r.side == side]

    def finalizations(self, side: Optional[str] = None) -> list[Event]:
        return [e for e in self.events if e.kind == "finalize" and (side is None or e.side == side)]

    def slashes(self, side: Optional[str] = None) -> list[Event]:
        return [e for e in self.events if e.kind == "slash" and (side is None or e.side == side)]

    def to_csv(self) -> str:
        from .analysis import to_csv
        return to_csv(self.rows, self.header, TRACE_COLUMNS)

    def events_csv(self) -> str:
        from .analysis import to_csv
        return to_csv(self.events, self.header, ["kind", "side", "epoch", "time", "subject"])


class _Side:
    def __init__(self, name: str, index: int, mu: float, view: ChainView, finality: FinalityState,
                 validators: dict, ledger: SlashLedger, tip: int, epoch: int, time: float, rng):
        self.name = name
        self.index = index
        self.mu = mu
        self.view = view
        self.finality = finality
        self.validators = validators
        self.ledger = ledger
        self.tip = tip
        self.epoch = epoch
        self.time = time
        self.rng = rng
        self.pending: list[Vote] = []
        self.pending_slashes: list[SlashEvidence] = []
        self.pool = VoteIndex()
        self.total: Optional[float] = None
        self.finalized_in_epoch = False
        self.delta = 0.0
        self.stopped = False

    def total_deposit(self) -> float:
        if self.total is None:
            t = 0.0
            for v in self.validators.values():
                if v.earning:
                    t += v.deposit
            self.total = t
        return self.total


class Simulator:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config.validate()
        self.params = config.params
        self.l = config.params.epoch_length
        # votes are cast a quarter into the epoch and included in the next block
        self.vote_offset = min(math.ceil(self.l / 4), self.l - 1)
        self.specs = {v.id: v for v in config.validators}
        part = config.partition
        self.fault_epoch = self._fault_epoch()
        header = {"tool": f"casperffg {__version__}", "rng": RNG_ALGORITHM}
        header.update(config.header())
        header["fault_epoch"] = self.fault_epoch
        self.trace = SimTrace(header, fault_epoch=self.fault_epoch)
        n_sides = 1 + (len(part.sides) if part else 0)
        self._seeds = np.random.SeedSequence(config.seed).spawn(n_sides)
        self._next_id = 0
        self._global_pool = VoteIndex()
        self._voted: set = set()
        self._heap: list = []
        self._split_done = part is None

        view = ChainView()
        view.add(Block(self._new_id(), None, 0, proposer=MAIN))
        finality = FinalityState(view, self.l, threshold=self.params.finality_threshold)
        validators = {v.id: ValidatorState(v.id, v.deposit) for v in config.validators}
        ledger = SlashLedger(self.params.slash_window_epochs)
        main = _Side(MAIN, 0, 1.0, view, finality, validators, ledger, view.genesis, 0, 0.0,
                     self._rng(0))
        finality.begin_epoch(0)
        self.sides: dict[str, _Side] = {MAIN: main}
        self.active_sides = [MAIN]
        self._heap_started = False
        if part is not None and part.start_epoch == 0:
            self._split(main)
        for name in self.active_sides:
            self._schedule(self.sides[name])
        self._heap_started = True

    def _fault_epoch(self) -> int:
        starts = [v.strategy.from_epoch for v in self.cfg.validators
                  if v.strategy.kind in (Kind.OFFLINE, Kind.WORST_CASE)]
        if self.cfg.partition is not None:
            starts.append(self.cfg.partition.start_epoch)
        return min(starts) if starts else 0

    def _rng(self, index: int):
        return np.random.Generator(np.random.PCG64(self._seeds[index]))

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def _interval(self, side: _Side) -> float:
        mean = self.params.block_time / side.mu
        if self.cfg.proposal_model == "stochastic":
            return float(side.rng.exponential(mean))
        return mean

    def _schedule(self, side: _Side):
        side.next_time = side.time + self._interval(side)
        heapq.heappush(self._heap, (side.next_time, side.index, side.name))

    def _split(self, main: _Side):
        part = self.cfg.partition
        shared = part.shared_view
        for i, s in enumerate(part.sides, start=1):
            view = main.view if shared else main.view.copy()
            side = _Side(s.name, i, s.mu, view, main.finality.copy(view),
                         copy.deepcopy(main.validators), copy.deepcopy(main.ledger),
                         main.tip, main.epoch, main.time, self._rng(i))
            side.pending = list(main.pending)
            side.pool = main.pool.copy()
            side.finalized_in_epoch = main.finalized_in_epoch
            self.sides[s.name] = side
        main.stopped = True
        self.active_sides = [s.name for s in part.sides]
        self._split_done = True
        if main.index == 0 and self._heap_started:
            for name in self.active_sides:
                self._schedule(self.sides[name])

    def _visible(self, vid, side: _Side) -> list[str]:
        """Sides whose chains validator ``vid`` can see while ``side`` produces a block."""
        if side.name == MAIN:
            return [MAIN]
        spec = self.specs[vid]
        if self.cfg.partition.shared_view:
            return list(self.active_sides)
        if spec.strategy.kind is Kind.EQUIVOCATOR:
            wanted = spec.strategy.sides or tuple(self.active_sides)
            return [side.name] if side.name in wanted else []
        return [side.name] if spec.side == side.name else []

    def run(self) -> SimTrace:
        end = self.cfg.partition.end_epoch if self.cfg.partition else None
        while self._heap:
            _, _, name = heapq.heappop(self._heap)
            side = self.sides[name]
            if side.stopped:
                continue
            self._produce(side)
            if end is not None and side.epoch >= end:
                side.stopped = True
            if not side.stopped:
                self._schedule(side)
        order = {n: s.index for n, s in self.sides.items()}
        self.trace.rows.sort(key=lambda r: (order[r.side], r.epoch))
        self.trace.sides = tuple(n for n in self.sides if self.trace.side_rows(n))
        return self.trace

    def _produce(self, side: _Side):
        side.time = side.next_time
        parent = side.view.blocks[side.tip]
        block = Block(self._new_id(), parent.id, parent.height + 1, side.name, side.time)
        side.view.add(block)
        side.tip = block.id
        h = block.height

        if side.pending_slashes:
            self._include_slashes(side)
        if side.pending:
            self._include_votes(side, block.id)
        if h % self.l == 0:
            self._close_epoch(side)
            if side.stopped:
                return
            if not self._split_done and side.epoch >= self.cfg.partition.start_epoch:
                self._split(side)
                if self.vote_offset == 0:
                    for name in self.active_sides:
                        self._decide(self.sides[name])
                return
        if h - side.epoch * self.l == self.vote_offset:
            self._decide(side)

    def _include_slashes(self, side: _Side):
        for ev in side.pending_slashes:
            offender = side.validators[ev.vote_a.validator]
            if offender.slashed:
                continue
            reporter = self._reporter(side, offender.id)
            total = side.total_deposit()
            apply_slash(side.validators, side.ledger,
                        SlashEvidence(ev.vote_a, ev.vote_b, reporter), total, side.epoch)
            side.total = None
            self.trace.events.append(Event("slash", side.name, side.epoch, side.time, str(offender.id)))
        side.pending_slashes = []

    def _reporter(self, side: _Side, offender):
        for vid in sorted(side.validators, key=str):
            v = side.validators[vid]
            if vid != offender and v.earning and self.specs[vid].strategy.kind is Kind.HONEST:
                return vid
        return None

    def _include_votes(self, side: _Side, block_id: int):
        fin = side.finality
        for vote in side.pending:
            v = side.validators.get(vote.validator)
            if v is None or not v.earning:
                continue
            try:
                verdict, newly = process_vote(fin, vote, v.deposit, side.total_deposit(),
                                              side.epoch, block_id)
            except DuplicateVote:
                continue
            if not verdict:
                continue
            v.voted_this_epoch = True
            if not self.cfg.partition or not self.cfg.partition.shared_view or side.name == MAIN:
                self._check_evidence(side.pool, vote, [side])
            for cp in newly:
                side.finalized_in_epoch = True
                self.trace.events.append(
                    Event("finalize", side.name, side.epoch, side.time, str(fin.epoch(cp))))
        side.pending = []

    def _check_evidence(self, pool: VoteIndex, vote: Vote, sides: list[_Side]):
        other = pool.add(vote)
        if other is not None:
            for s in sides:
                s.pending_slashes.append(SlashEvidence(other, vote))

    def _close_epoch(self, side: _Side):
        e = side.epoch
        fin = side.finality
        cp = side.view.ancestor_at(side.tip, e * self.l)
        honest = self._honest_share(side, e, side.total_deposit())
        acc = epoch_transition(side.validators, e, fin.esf, side.finalized_in_epoch, self.params)
        side.total = None
        self.trace.rows.append(TraceRow(
            side.name, e, side.time, acc.total_deposit, fin.esf, acc.voted_fraction, acc.rho,
            acc.collective, cp in fin.justified, side.finalized_in_epoch,
            fin.last_finalized_epoch, honest, side.delta))
        side.ledger.current_epoch = e + 1
        side.epoch = e + 1
        side.finalized_in_epoch = False
        side.delta = 0.0
        fin.begin_epoch(side.epoch)
        if side.epoch >= self.cfg.max_epochs:
            side.stopped = True
        elif self.cfg.stop == "first_finalization" and self._split_done and side.name in self.active_sides:
            if any(ev.epoch >= self.fault_epoch for ev in self.trace.finalizations(side.name)):
                side.stopped = True

    def _honest_share(self, side: _Side, epoch: int, total: float) -> float:
        if total <= 0:
            return 0.0
        s = 0.0
        for vid, v in side.validators.items():
            if v.earning and self.specs[vid].strategy.active_kind(epoch) is Kind.HONEST \
                    and side.name in self._visible(vid, side):
                s += v.deposit
        return s / total

    def _snapshot(self, name: str) -> BranchSnapshot:
        s = self.sides[name]
        return BranchSnapshot(name, s.view, s.finality, s.tip)

    def _decide(self, side: _Side):
        e = side.epoch
        if e == 0:
            return
        selected = self._worst_case_pick(side, e)
        secret = side.finality.secret
        shared = self.cfg.partition is not None and self.cfg.partition.shared_view and side.name != MAIN
        cast = []
        for vid, v in side.validators.items():
            if not v.earning:
                continue
            visible = self._visible(vid, side)
            if not visible:
                continue
            strat = self.specs[vid].strategy
            kind = strat.active_kind(e)
            if kind is Kind.OFFLINE:
                continue
            if kind is Kind.EQUIVOCATOR:
                vote = branch_vote(vid, self._snapshot(side.name), e, self.params, secret)
                if vote is not None:
                    cast.append((vote, [side]))
                continue
            key = (vid, e) if shared else (vid, e, side.name)
            if key in self._voted:
                continue
            branches = {n: self._snapshot(n) for n in visible}
            votes = decide_votes(strat, vid, e, branches, self.params, secret,
                                 selected=vid in selected)
            if not votes:
                continue
            self._voted.add(key)
            for vote in votes:
                targets = [self.sides[n] for n in visible
                           if self.sides[n].view.is_ancestor(vote.target, self.sides[n].tip)]
                cast.append((vote, targets))
        for vote, targets in cast:
            self.trace.votes.append(vote)
            for t in targets:
                t.pending.append(vote)
            if shared:
                self._check_evidence(self._global_pool, vote,
                                     [self.sides[n] for n in self.active_sides])

    def _worst_case_pick(self, side: _Side, e: int) -> set:
        adversary = {}
        honest = 0.0
        for vid, v in side.validators.items():
            if not v.earning or not self._visible(vid, side):
                continue
            kind = self.specs[vid].strategy.active_kind(e)
            if kind is Kind.WORST_CASE:
                adversary[vid] = v.deposit
            elif kind is Kind.HONEST:
                honest += v.deposit
        if not adversary:
            return set()
        chosen, state = worst_case_selection(adversary, honest, side.total_deposit(),
                                             self.params.finality_threshold,
                                             self.params.deposit_quantum)
        side.delta = state.delta_i
        return chosen


def run(config: ScenarioConfig) -> SimTrace:
    """Simulate ``config``; identical configs give identical traces."""
    return Simulator(config).run()


def first_finalization_time(trace: SimTrace, side: str = MAIN) -> tuple[int, float]:
    """Epochs since the fault (or partition start) and wall-clock seconds of the first finalization.

    Finalizations before the fault epoch are ignored.
    """
    if side not in trace.sides and not trace.side_rows(side):
        raise KeyError(f"trace has no side {side!r}")
    for ev in trace.finalizations(side):
        if ev.epoch >= trace.fault_epoch:
            return ev.epoch - trace.fault_epoch, ev.time
    raise NeverFinalized(f"side {side!r} never finalized after epoch {trace.fault_epoch}")
