"""Randomized invariant checks shared by the property tests and the acceptance run.

Each ``check_*`` function draws one random case from ``rng`` and raises
AssertionError if the invariant fails.
"""

import math

from casperffg.analysis import incentive_tables, race_probability

from casperffg.chain import Block, ChainView, fork_choice
from casperffg.errors import DuplicateVote
from casperffg.finality import FinalityState, make_vote, process_vote
from casperffg.params import ProtocolParams
from casperffg.rewards import ValidatorState, total_deposit, update_deposit
from casperffg.scenario import PartitionSpec, ScenarioConfig, SideSpec, ValidatorSpec
from casperffg.sim import Simulator, run
from casperffg.slashing import (SlashEvidence, SlashLedger, VoteIndex, apply_slash,
                                find_violations, min_slashable_for_conflict, violates)
from casperffg.strategies import Strategy

UNIT = ProtocolParams(epoch_length=1)


def random_tree(rng, n_blocks, branchiness=0.3):
    view = ChainView()
    view.add(Block(0, None, 0))
    tips = [0]
    for i in range(1, n_blocks):
        if rng.random() < branchiness:
            parent = rng.randrange(i)
        else:
            parent = rng.choice(tips)
        view.add(Block(i, parent, view.height(parent) + 1))
        tips = view.leaves()
    return view


def check_monotone_and_subset(rng):
    """Justified and finalized sets only grow, and finalized stays inside justified."""
    view = random_tree(rng, rng.randint(4, 30))
    fin = FinalityState(view, 1)
    n_val = rng.randint(1, 5)
    weights = {v: rng.uniform(0.1, 3.0) for v in range(n_val)}
    total = sum(weights.values())
    by_height = {}
    for b in view.blocks.values():
        by_height.setdefault(b.height, []).append(b.id)
    prev_j, prev_f = set(fin.justified), set(fin.finalized)
    for epoch in range(1, max(by_height) + 1):
        for v in weights:
            if rng.random() < 0.25:
                continue
            target = rng.choice(by_height[epoch])
            if rng.random() < 0.7:
                source_h = fin.epoch(fin.last_justified(target, below_epoch=epoch))
            else:
                source_h = rng.randrange(epoch)
            try:
                process_vote(fin, make_vote(v, target, epoch, source_h), weights[v], total, epoch)
            except DuplicateVote:
                pass
            j, f = set(fin.justified), set(fin.finalized)
            assert prev_j <= j and prev_f <= f
            assert f <= j
            prev_j, prev_f = j, f


def check_exact_hold(rng):
    """A voter's deposit is bit-identical across an off-schedule epoch."""
    d = rng.choice([rng.uniform(1e-6, 1e9), float(rng.randint(1, 10**12)), rng.random()])
    rho = rng.choice([rng.uniform(0, 1e-3), rng.uniform(0, 10), 10 ** rng.uniform(-15, 2)])
    assert update_deposit(d, True, rho, 0.0) == d


def check_slash_conservation(rng):
    """What offenders lose is exactly what is burned plus what reporters receive."""
    n = rng.randint(2, 8)
    vs = {i: ValidatorState(i, rng.uniform(0.5, 50.0)) for i in range(n)}
    ledger = SlashLedger(window_epochs=rng.randint(1, 20))
    epoch = 0
    for _ in range(rng.randint(1, n - 1)):
        candidates = [i for i, v in vs.items() if not v.slashed]
        offender = rng.choice(candidates)
        reporter = rng.choice([None] + [i for i in candidates if i != offender])
        before = {i: v.deposit for i, v in vs.items()}
        burned0, fees0 = ledger.burned_total, ledger.fees_paid
        t = rng.randint(2, 9)
        if rng.random() < 0.5:
            a, b = make_vote(offender, 1, t, t - 1), make_vote(offender, 2, t, 0)
        else:
            a, b = make_vote(offender, 1, t + 2, 0), make_vote(offender, 2, t, 1)
        assert violates(a, b) is not None and violates(b, a) is not None
        apply_slash(vs, ledger, SlashEvidence(a, b, reporter), total_deposit(vs), epoch)
        lost = sum(before[i] - vs[i].deposit for i in vs if vs[i].deposit < before[i])
        gained = sum(vs[i].deposit - before[i] for i in vs if vs[i].deposit > before[i])
        burned = ledger.burned_total - burned0
        fees = ledger.fees_paid - fees0
        assert math.isclose(lost, burned + fees, rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(gained, fees, rel_tol=1e-12, abs_tol=1e-12)
        assert all(v.deposit >= 0 for v in vs.values())
        epoch += rng.randint(0, 5)


def check_fork_choice_respects_finality(rng):
    """The head always extends every finalized checkpoint that lies on one chain."""
    view = random_tree(rng, rng.randint(2, 40), branchiness=0.5)
    fin = FinalityState(view, 1)
    leaf = rng.choice(view.leaves())
    chain = view.chain(leaf)
    for b in chain:
        if rng.random() < 0.3:
            fin.mark_justified(b, rng.uniform(0.5, 10.0))
            if rng.random() < 0.5:
                fin.finalized[b] = None
    for b in rng.sample(list(view.blocks), min(3, len(view.blocks))):
        fin.mark_justified(b, rng.uniform(0.5, 10.0))
    head = fork_choice(view, fin, UNIT)
    for cp in fin.finalized:
        assert view.is_ancestor(cp, head)


def check_violates_symmetric(rng):
    def rand_vote():
        t = rng.randint(1, 8)
        return make_vote("v", rng.randint(0, 3), t, rng.randrange(t))
    a, b = rand_vote(), rand_vote()
    assert violates(a, b) == violates(b, a)


def check_vote_index_agrees(rng):
    """The incremental evidence index flags a validator exactly when a pairwise scan does."""
    index = VoteIndex()
    seen = []
    for _ in range(rng.randint(1, 12)):
        t = rng.randint(1, 6)
        vote = make_vote(rng.choice("ab"), rng.randint(0, 2), t, rng.randrange(t))
        hit = index.add(vote)
        expected = [w for w in seen if w.validator == vote.validator and violates(w, vote)]
        assert (hit is not None) == bool(expected)
        if hit is not None:
            assert violates(hit, vote) is not None
        seen.append(vote)


def check_honest_no_violations(rng):
    """Honest validators in a random single-view run never sign a slashable pair."""
    n = rng.randint(1, 5)
    vals = [ValidatorSpec(f"h{i}", rng.uniform(1, 10)) for i in range(n)]
    if rng.random() < 0.5:
        vals.append(ValidatorSpec("off", rng.uniform(1, 20), Strategy.offline(rng.randint(0, 4))))
    cfg = ScenarioConfig(vals, ProtocolParams(epoch_length=rng.randint(1, 4)),
                         proposal_model=rng.choice(["deterministic", "stochastic"]),
                         seed=rng.randrange(2**32), max_epochs=rng.randint(3, 12))
    trace = run(cfg)
    assert find_violations(trace.votes) == []


def check_accountable_safety(rng):
    """Two conflicting finalized checkpoints always implicate at least a third of the stake."""
    n = rng.randint(2, 5)
    vals = [ValidatorSpec(f"h{i}", rng.uniform(1, 10), side=rng.choice("AB")) for i in range(n)]
    for i in range(rng.randint(1, 3)):
        vals.append(ValidatorSpec(f"e{i}", rng.uniform(1, 10), Strategy.equivocator()))
    cfg = ScenarioConfig(
        vals, ProtocolParams(epoch_length=rng.randint(1, 3)),
        partition=PartitionSpec(rng.randint(1, 3), (SideSpec("A", 0.5), SideSpec("B", 0.5)),
                                shared_view=rng.random() < 0.5),
        proposal_model="stochastic", seed=rng.randrange(2**32), max_epochs=rng.randint(4, 10))
    sim = Simulator(cfg)
    trace = sim.run()
    sides = [s for name, s in sim.sides.items() if name != "main"]
    finalized = {}
    for s in sides:
        for cp in s.finality.finalized:
            finalized[cp] = s.view
    conflict = False
    for a, view_a in finalized.items():
        for b, view_b in finalized.items():
            view = view_a if b in view_a else view_b if a in view_b else None
            if view is None or not (view.is_ancestor(a, b) or view.is_ancestor(b, a)):
                conflict = True
    if conflict:
        deposits = {v.id: v.deposit for v in vals}
        assert min_slashable_for_conflict(trace.votes, deposits) >= 1 / 3 - 1e-12


def gf_identity_holds(alpha, mu, rho):
    for row in incentive_tables(alpha, mu, rho):
        expected = (1 - alpha) / alpha * row.plr_others
        assert math.isclose(row.gf_others, expected, rel_tol=1e-9, abs_tol=1e-15)
        parts = (mu - alpha) / alpha * row.plr_voters + (1 - mu) / alpha * row.plr_nonvoters
        assert math.isclose(row.gf_voters + row.gf_nonvoters, parts, rel_tol=1e-9, abs_tol=1e-15)


def check_gf_identity(rng):
    """Griefing factor of everyone else equals their stake ratio times their loss ratio."""
    alpha = rng.uniform(1e-3, 2 / 3 - 1e-6)
    gf_identity_holds(alpha, rng.uniform(alpha, 1.0), 10 ** rng.uniform(-9, 0))


def race_complement_holds(n1, n2, mu):
    total = race_probability(n1, n2, mu) + race_probability(n2, n1, 1 - mu)
    assert math.isclose(total, 1.0, abs_tol=1e-12)


def check_race_complement(rng):
    """One of the two chains always reaches its target first."""
    race_complement_holds(rng.randint(1, 5000), rng.randint(1, 5000), rng.uniform(1e-4, 1 - 1e-4))


PROPERTIES = {
    "justification/finalization monotonicity and finalized within justified": check_monotone_and_subset,
    "voter deposit exact hold off schedule": check_exact_hold,
    "slash conservation": check_slash_conservation,
    "fork choice respects finality": check_fork_choice_respects_finality,
    "violates is symmetric": check_violates_symmetric,
    "evidence index agrees with pairwise scan": check_vote_index_agrees,
    "honest validators never sign a slashable pair": check_honest_no_violations,
    "conflicting finality implicates a third of stake": check_accountable_safety,
    "griefing factor identity": check_gf_identity,
    "race complement": check_race_complement,
}
