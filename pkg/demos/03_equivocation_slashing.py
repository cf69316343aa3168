# Safety: two conflicting finalized checkpoints cost at least a third of stake.
#
# An equivocator signs votes on both branches of a fork. When both branches
# are visible the evidence is included on chain and the deposit is slashed.

from pathlib import Path

from casperffg import load_scenario, run
from casperffg.slashing import exhaustive_safety_search, min_slashable_for_conflict

# %% One equivocator among honest validators on a shared view
cfg = load_scenario(Path(__file__).parent / "scenarios" / "equivocators.toml")
trace = run(cfg)
for ev in trace.slashes():
    print(f"epoch {ev.epoch}: {ev.subject} slashed on side {ev.side}")
deposits = {v.id: v.deposit for v in cfg.validators}
print("share holding a violating vote pair:", min_slashable_for_conflict(trace.votes, deposits))

last = trace.side_rows("A")[-1]
print(f"side A total deposit {last.total_deposit:.2f} of {sum(deposits.values()):.2f}")

# %% Exhaustive check on a tiny instance
# Three equal validators, two branches, every possible vote pattern over
# two epochs, including votes on both branches at once.
res = exhaustive_safety_search((1, 1, 1), n_epochs=2)
print(f"\n{res.assignments} vote patterns, {res.conflicts} end in conflicting finality")
print("smallest slashable share among them:", res.min_slashed_share)
print("counterexamples:", len(res.counterexamples))
