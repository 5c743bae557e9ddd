import time, json
import numpy as np
from vorflow import bench

scn = bench.build_scenario("dam_break", 40, jitter=0.05)
sim = bench.init_simulation(scn, seed=0)
rows = []
t0 = time.time()
m0 = None
k = 0
while sim.t < 1.0:
    sim.step(); k += 1
    o = bench.observables(scn, sim)
    mw = float(np.sum(sim.state.M[sim.state.C == 1]))
    if m0 is None: m0 = mw
    rows.append((sim.t, o["T"], o["X"], o["H"], mw))
arr = np.array(rows)
np.save(".scratch/dam_rows.npy", arr)
print(json.dumps({"steps": k, "wall_s": time.time()-t0, "remaps": sim.n_remaps,
                  "mass_drift": abs(arr[-1,4]-m0)/m0}))
