# %% [markdown]
# # Rigid or similarity?
# Fit both models to point pairs and watch the selector hold its choice
# for a dwell period.

# %%
import math

import numpy as np

from uavstab.flow import TrackSet
from uavstab.motion import (
    Kind,
    ModelSelector,
    SimilarityTransform,
    estimate_rigid,
    estimate_similarity,
    extract_delta,
    rms_residual,
)

rng = np.random.default_rng(0)
pts = rng.uniform([0, 0], [320, 240], (60, 2))

# %%
zoom = SimilarityTransform(3.0, -2.0, 0.02, 1.03, Kind.SIMILARITY)
tracks = TrackSet(pts, zoom.apply(pts))
for fit in (estimate_rigid, estimate_similarity):
    t = fit(tracks)
    print(f"{fit.__name__:20s} residual {rms_residual(tracks, t):.3e}  delta {extract_delta(t)}")

# %% [markdown]
# Forty frame pairs of pure rotation followed by forty of slow zoom. With a
# dwell of 20 the selector decides four times.

# %%
sel = ModelSelector(dwell=20)
picked = []
for k in range(80):
    s = 1.0 if k < 40 else math.exp(0.004)
    t = SimilarityTransform(1.0, 0.5, 0.01, s, Kind.SIMILARITY)
    noisy = t.apply(pts) + rng.normal(0, 0.02, pts.shape)
    picked.append(sel.select(TrackSet(pts, noisy)).kind.value)
print([picked[i] for i in (0, 20, 40, 60)])
print(dict(sel.usage_counts))
