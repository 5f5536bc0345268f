"""
Swapping places with a pedestrian
=================================

The robot and a person start at opposite ends of a room and walk toward
each other's side.  Planning against the person's current position only
is too late to dodge; planning against predicted positions is not.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gpnav.sim.closed_loop import run_closed_loop
from gpnav.sim.scenario import resolve_scenario

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, name in zip(axes, ("change_of_places", "change_of_places_obstacle")):
    scenario = resolve_scenario(name)
    g = scenario.grid.geometry
    x0, y0 = np.asarray(g.origin) - 0.5 * g.cell_size
    ax.imshow(scenario.grid.cells, origin="lower", cmap="Greys",
              extent=(x0, x0 + g.width * g.cell_size, y0, y0 + g.height * g.cell_size))
    for mode, style in (("none", "r-"), ("cvm", "g-"), ("proposed", "b-")):
        log = run_closed_loop(scenario, mode)
        robot = np.array([t.robot for t in log.ticks])
        ax.plot(*robot.T, style, label=f"{mode} ({log.min_distance:.2f} m)")
        print(f"{name:>26} {mode:>8}: min distance {log.min_distance:.3f} m, "
              f"collision {log.collided}")
    human = np.array([t.humans[0] for t in log.ticks])
    ax.plot(*human.T, "k:", label="person")
    ax.set_title(name)
    ax.legend(fontsize=7)
fig.savefig("change_of_places.png", dpi=80)
