r"""
Learning with and without age awareness
---------------------------------------
First a sanity check on a 3x3 micro-world whose optimum can be found by brute
force. Then a short paired run of the AoI-aware formulation against the
delay-blind baseline on the default world. The full five-seed comparison is
what ``aoimdp compare`` runs; this demo trims it to keep the runtime short.
"""
from dataclasses import replace

from aoimdp.env_underwater import WorldConfig, default_sdm
from aoimdp.rl_harness import (
    METRICS,
    Arm,
    MicroWorld,
    TrainConfig,
    greedy_return,
    micro_policy,
    run_comparison,
    train,
)

#%%
# Exhaustive enumeration of all 8**6 action sequences gives the optimum.
micro = MicroWorld()
best, seq = micro.optimal_return()
print("optimum", best, "sequence", seq)

#%%
# Tabular Q-learning reaches it well inside 5000 episodes.
cfg = TrainConfig(episodes=5000, eval_interval=5000, eval_episodes=1, alpha=0.2, gamma=0.99)
pol = micro_policy(micro, cfg)
train(micro, pol, cfg, seed=0)
print("greedy return", greedy_return(micro, pol))

#%%
# Paired comparison on the default world with two seeds.
world = WorldConfig()
sdm = default_sdm(world)
cfg = replace(TrainConfig(), eval_interval=TrainConfig().episodes)
report = run_comparison(world, [Arm("aoi-mdp", "aoi", sdm), Arm("standard-mdp", "standard", sdm)],
                        cfg, seeds=[1, 2], eval_episodes=5)
for row in report.table():
    print(row["arm"], {m: round(row[m + "_mean"], 2) for m in METRICS})
