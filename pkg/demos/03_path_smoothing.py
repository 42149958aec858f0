# %% [markdown]
# # Smoothing the camera path
# Accumulate per-frame deltas into a trajectory, average it over a
# centred window and derive the per-frame corrections.

# %%
import numpy as np

from uavstab.motion import DeltaParams
from uavstab.smoothing import SmoothConfig, Trajectory, accumulate, correction, smooth_at

rng = np.random.default_rng(3)
n = 120
intended = np.linspace(0, 60, n)  # a slow pan to the right
shaky = intended + rng.normal(0, 4, n)

traj = Trajectory()
for i in range(n):
    accumulate(traj, DeltaParams(shaky[i] - (shaky[i - 1] if i else shaky[0]), 0.0))
traj.close()

# %%
cfg = SmoothConfig(10)
smooth = np.array([smooth_at(traj, i, cfg)[0] for i in range(n)])
print("frame-to-frame std before", np.diff(traj.cumulative[:, 0]).std().round(3))
print("frame-to-frame std after ", np.diff(smooth).std().round(3))

# %%
for i in (0, 30, 60):
    print(i, correction(traj, i, cfg))
