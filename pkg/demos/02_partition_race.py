# Which side of a network split finalizes first?
#
# During a long partition each side keeps voting with the stake it can see
# and the other side's deposits leak away. The side holding a majority of
# both stake and block production is overwhelmingly likely to win.

from pathlib import Path

import numpy as np

from casperffg import first_finalization_time, load_scenario, phi_honest, run
from casperffg.analysis import RaceSpec, race, race_probability

# %% Finality needs a head start of thousands of epochs
print("side A (0.51 of stake) needs", phi_honest(0.51), "epochs")
print("side B (0.49 of stake) needs", phi_honest(0.49), "epochs")

# %% Race odds from the Erlang model
# Block times are exponential, so the time to n blocks is Erlang(n) and the
# chance that one side gets there first is a regularized incomplete beta.
l = 50
r = race(RaceSpec(phi_honest(0.49) * l, phi_honest(0.51) * l, 0.49))
print(f"P(B finalizes first) = 10^{r.log_probability / np.log(10):.0f}")
print("P(fast side wins, 3 vs 3733 epochs, 0.4% of miners) =",
      round(race_probability(3, 3733, 0.004), 6))

# %% Simulate the split with random block times
cfg = load_scenario(Path(__file__).parent / "scenarios" / "partition51.toml")
winners = []
for seed in range(4):
    cfg.seed = seed
    trace = run(cfg)
    times = {side: first_finalization_time(trace, side)[1] for side in ("A", "B")}
    winners.append(min(times, key=times.get))
    print(f"seed {seed}: A after {times['A'] / 86400:.1f} days, B after {times['B'] / 86400:.1f} days")
print("winners:", winners)
