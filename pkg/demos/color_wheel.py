"""The flow color wheel: hue is direction, saturation is magnitude.

Run:  python demos/color_wheel.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from fisheyeflow import flowio

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

# %% A synthetic field where flow at each pixel points away from the center.
n = 201
yy, xx = np.mgrid[0:n, 0:n] - n // 2
r = np.hypot(xx, yy)
flow = flowio.FlowField(xx / 10.0, yy / 10.0, valid=r <= n // 2)

# Saturation reaches 1 at max_mag; pin it so the rim is fully saturated.
img = flowio.flow_to_color(flow, max_mag=10.0)
flowio.write_png(out / "color_wheel.png", img)
print("wrote", out / "color_wheel.png")

# %% A few reference colors.
for name, (u, v) in {"right": (1, 0), "down": (0, 1), "left": (-1, 0), "up": (0, -1)}.items():
    c = flowio.flow_to_color(flowio.FlowField([[u]], [[v]]), max_mag=1.0)[0, 0]
    print(f"{name:5s} -> RGB {tuple(int(x) for x in c)}")

# %% Zero flow is white, invalid pixels are black.
print(flowio.flow_to_color(flowio.FlowField([[0.0, 1.0]], [[0.0, 0.0]], [[True, False]]), 1.0)[0])

# %% Without max_mag the 99th percentile of magnitudes is used, so a single
# wild vector does not wash out the rest of the image.
u = np.ones((10, 10))
u[0, 0] = 1000.0
print("auto max_mag:", flowio.flow_max_magnitude(flowio.FlowField(u, np.zeros_like(u))))
