"""
Goal-directed prediction around an obstacle
===========================================

Walkers in a square room head for one of four exits and have to bend
around a central pillar.  A constant-velocity guess runs straight into
the pillar; the goal-aware predictor follows the bend.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gpnav.fields import compute_edt
from gpnav.intent import TrackHistory, discover_goals, intent_posterior
from gpnav.prediction import PredictionConfig, cvm_predict, predict_trajectory
from gpnav.sim.corpus import curved_corpus
from gpnav.sim.evaluation import run_prediction_eval

grid, goals, tracks = curved_corpus(n_tracks=20, seed=0)
env = compute_edt(grid)

# %%
# Candidate goals can also be recovered from where people stand still.
found = discover_goals(tracks, cell_size=0.5)
print("discovered goals:\n", np.round(found.positions, 2), "\npriors:", np.round(found.prior, 2))

# %%
# Take one walker after ten observations and compare the two predictors.
track = tracks[1]
hist = TrackHistory(track.t[:10], track.xy[:10])
post = intent_posterior(hist, goals)
print("goal posterior:", np.round(post.probs, 3))
cfg = PredictionConfig()
ours = predict_trajectory(hist, goals, env, None, cfg, horizon=8.0)
cvm = cvm_predict(hist, 8.0, cfg.dt)

fig, ax = plt.subplots(figsize=(5, 5))
ax.imshow(grid.cells, origin="lower", extent=(0, 12, 0, 12), cmap="Greys")
ax.plot(*track.xy.T, "k.", ms=3, label="truth")
ax.plot(*ours.trajectory.positions.T, "b-", label="goal-aware")
ax.plot(*cvm.trajectory.positions.T, "r--", label="constant velocity")
ax.legend(loc="lower right")
fig.savefig("intent_prediction.png", dpi=80)

# %%
# Over the whole corpus the gap grows with the horizon.
report = run_prediction_eval(tracks, env, goals, cfg,
                             methods=("cvm", "lvm", "proposed", "proposed-no-intent"),
                             stride=2)
print(report.table())
