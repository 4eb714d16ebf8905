"""Render a short sequence and look at what lands on disk.

Run:  python demos/make_dataset.py [out_dir]
"""

import json
import sys
from pathlib import Path

import numpy as np

from fisheyeflow import flowio, renderer, scene

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "dataset"

# %% Named sequences: path, speed and texture. 'linec-2' is the textured cube
# moving at 2 m/s straight under the camera.
spec = scene.spec_from_name("linec-2", frame_count=8)
print(spec.label, "covers", spec.travel, "m starting at arc length", spec.start)
for k in (0, 7):
    print("  frame", k, "cube center", scene.cube_pose_at_frame(spec, k).center)

# %% One frame in memory: image, foreground mask and flow to the next frame.
b = renderer.render_bundle(spec, 0)
fg = b.fg_mask & b.gt_flow.valid
print("foreground pixels:", int(b.fg_mask.sum()))
print("mean foreground flow [px]:", b.gt_flow.magnitude[fg].mean())
print("background flow is zero:", np.all(b.gt_flow.uv[b.gt_flow.valid & ~b.fg_mask] == 0))

# %% The whole sequence on disk, with a manifest of content hashes.
manifest = renderer.write_sequence(spec, out / spec.label)
print(len(manifest["files"]), "files written to", out / spec.label)
print("manifest intact:", renderer.verify_manifest(out / spec.label) == [])

# %% Ground truth is plain Middlebury .flo.
flow = flowio.read_flo(out / spec.label / "flow_0000.flo")
print("flow shape", flow.shape, "valid", int(flow.valid.sum()))
flowio.write_png(out / "flow_0000_color.png", flowio.flow_to_color(flow))
print(json.dumps(manifest["spec"], indent=1)[:200], "...")
