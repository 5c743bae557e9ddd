import time, json
import numpy as np
from vorflow import bench

scn = bench.build_scenario("rising_bubble_1", 20, jitter=0.05)
sim = bench.init_simulation(scn, seed=0)
rows = []
t0 = time.time()
k = 0
while sim.t < 3.0:
    sim.step(); k += 1
    o = bench.observables(scn, sim)
    rows.append((sim.t, o["y_centroid"], o["v_rise"], o["bubble_volume"]))
arr = np.array(rows)
np.save(".scratch/bubble_rows.npy", arr)
v0 = arr[0,3]
print(json.dumps({"steps": k, "wall_s": time.time()-t0, "remaps": sim.n_remaps,
                  "vol_drift_max": float(np.abs(arr[:,3]/v0-1).max()),
                  "v_rise_max": float(arr[:,2].max()),
                  "t_at_max": float(arr[np.argmax(arr[:,2]),0]),
                  "y_final": float(arr[-1,1])}))
