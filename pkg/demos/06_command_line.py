# %% [markdown]
# # Command line round trip
# Synthesize a clip, stabilize it and score it, all through the CLI entry point.

# %%
import json
import tempfile
from pathlib import Path

from uavstab.cli import main

work = Path(tempfile.mkdtemp())
main(["synth", "--output", str(work / "in.y4m"), "--frames", "60", "--jitter-std", "4",
      "--seed", "7", "--truth-csv", str(work / "truth.csv")])
main(["stabilize", "--input", str(work / "in.y4m"), "--output", str(work / "out.y4m"),
      "--traj-csv", str(work / "traj.csv"), "--summary-json", str(work / "summary.json")])
main(["eval", "--original", str(work / "in.y4m"), "--stabilized", str(work / "out.y4m"),
      "--truth-csv", str(work / "truth.csv"), "--traj-csv", str(work / "traj.csv"),
      "--output", str(work / "eval.json")])

# %%
print(json.loads((work / "summary.json").read_text())["rigid_decisions"], "rigid decisions")
print(json.dumps(json.loads((work / "eval.json").read_text()), indent=1))
