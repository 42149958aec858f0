# %% [markdown]
# # Corners and sparse tracking
# Detect good features on a textured frame, shift the content by a known
# amount and follow the corners with pyramidal Lucas-Kanade.

# %%
import numpy as np

from uavstab.features import DetectConfig, detect_corner_array
from uavstab.flow import FlowConfig, forward_backward_error, track_lk, weed_tracks
from uavstab.image_core import GrayFrame, build_pyramid
from uavstab.synth_eval import textured_image

texture = textured_image(360, 280, seed=4)
a = GrayFrame(texture[20:260, 20:340])
b = GrayFrame(texture[14:254, 32:352])  # content moves by (-12, +6)

# %%
points, scores = detect_corner_array(a, DetectConfig(max_corners=50))
print(len(points), "corners, strongest response", scores[0])

# %% [markdown]
# A 12 px move is beyond a single 21x21 window, so the coarse pyramid levels matter.

# %%
pa, pb = build_pyramid(a, 4), build_pyramid(b, 4)
for levels in (1, 4):
    new, ok = track_lk(pa, pb, points, FlowConfig(max_levels=levels))
    err = np.hypot(*(new - points - [-12, 6]).T)
    print(f"{levels} level(s): {np.mean(ok & (err < 0.2)):.0%} of tracks within 0.2 px")

# %% [markdown]
# Forward-backward weeding drops tracks that do not return to where they started.

# %%
new, ok = track_lk(pa, pb, points)
new[3] += [15, 0]  # corrupt one track
tracks = weed_tracks(pa, pb, points, new, status=ok)
print(len(points), "->", len(tracks), "tracks; worst FB error",
      forward_backward_error(pa, pb, tracks, FlowConfig()).max())
