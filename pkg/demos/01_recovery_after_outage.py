# How long does the chain stall when a large part of the stake goes silent?
#
# Validators who stop voting leak deposit every epoch, faster the longer
# finality has been stalled. Once the remaining voters hold two thirds of
# what is left, checkpoints finalize again.

import numpy as np

from casperffg import first_finalization_time, offline_scenario, phi, run
from casperffg.analysis import phi_curve

# %% The recovery time as a function of the silent share
shares = np.round(np.arange(0.35, 0.96, 0.05), 2)
for row in phi_curve(shares):
    print(f"silent {row['alpha']:.2f} -> finality returns after {row['phi']:5d} epochs")

# %% The same number from the simulator
# One validator keeps voting, one stops at epoch 2. The simulator runs the
# full contract: blocks, votes, justification, deposit updates.
cfg = offline_scenario(0.67)
trace = run(cfg)
epochs, seconds = first_finalization_time(trace)
print(f"\nsimulated recovery: {epochs} epochs (analysis says {phi(0.67)})")
print(f"that is {seconds / 86400:.1f} days of 14 second blocks")

# %% What the leak looks like
rows = trace.rows
silent = np.array([r.total_deposit for r in rows]) - (1 - 0.67) * 1e7
esf = np.array([r.esf for r in rows])
for e in (2, 500, 1000, 2000, 3000, len(rows) - 1):
    print(f"epoch {e:5d}  esf {esf[e]:5d}  silent deposit {silent[e] / 1e6:6.3f}M  "
          f"honest share {rows[e].honest_share:.3f}")
