# %% [markdown]
# # The three-stage pipeline
# Estimation, compensation and composition run on their own threads with
# bounded queues. The output matches the single-threaded run bit for bit.

# %%
from uavstab.errors import PipelineError
from uavstab.pipeline import StabConfig, run_offline, run_streaming
from uavstab.synth_eval import JitterSpec, generate

frames = list(generate(JitterSpec(width=160, height=120, frames=90, jitter_std=3, seed=2)))
a, b = [], []
run_offline(iter(frames), StabConfig(), a.append)
s = run_streaming(iter(frames), StabConfig(mode="streaming", queue_capacity=24), b.append)
print("identical:", all(x.same_as(y) for x, y in zip(a, b)))
print("first output after", s.startup_frames, "frames; per-stage busy seconds", s.busy_s)

# %% [markdown]
# A failure in any stage stops the others and surfaces as one error.

# %%
def flaky():
    for f in frames:
        if f.index == 40:
            raise OSError("camera disconnected")
        yield f


try:
    run_streaming(flaky(), StabConfig(mode="streaming"), lambda f: None)
except PipelineError as exc:
    print("stopped:", exc)
