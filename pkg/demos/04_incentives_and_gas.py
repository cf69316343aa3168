# Rewards, penalties and what it costs to abstain.

from casperffg.analysis import (annual_interest, gas_overhead, incentive_tables, max_validators,
                                mu_breakeven, offline_half_life)

# %% Calibration of the default parameters
print(f"annual interest for a voter with 10M staked: {annual_interest():.2%}")
print(f"half of an offline validator's deposit is gone after {offline_half_life(0.5)} epochs")
print(f"mining share below which 3 epochs lose to 3733: {mu_breakeven(3, 3733):.3e}")

# %% Abstaining hurts the abstainer most
# A validator with 20% of the stake abstains while everyone else votes.
for row in incentive_tables(0.2, 1.0, 1e-6):
    print(f"{row.scenario:18s} own loss {row.loss_nu:.3e}  voters {row.loss_voters:.3e}  "
          f"griefing factor {row.gf_others:.3f}")

# %% Gas spent on consensus
init, votes = gas_overhead(100, 532031, 742393, 8e6)
print(f"\nepoch initialization uses {init:.2%} of block gas, 100 validators' votes {votes:.1%}")
print("validators that fit in the vote window:", max_validators(532031, 8e6))
