"""Equidistant fish-eye camera: project, unproject and the image circle.

Run:  python demos/camera_model.py
"""

import math

import numpy as np

from fisheyeflow import camera as cm

# %% The default camera: 512 x 512, rim at 256 px from the center = 90 degrees.
cam = cm.FisheyeCamera()
print("pixels per radian:", cam.scale)

# Image radius grows linearly with the incidence angle.
for deg in (0, 30, 60, 90):
    x, y = cm.project(cam, math.radians(deg), 0.0)
    print(f"theta = {deg:2d} deg -> x = {x:7.2f}")

# %% Unprojection is the exact inverse inside the circle.
theta, phi = cm.unproject(cam, 256.0, 128.0)
print("pixel (256, 128):", math.degrees(theta), "deg off-axis, phi =", math.degrees(phi))

try:
    cm.unproject(cam, 5.0, 5.0)
except cm.InvalidPixelError as exc:
    print("corner pixel:", exc)

# %% Everything outside the circle is never rendered or evaluated.
mask = cm.image_circle_mask(cam)
print(f"valid pixels: {mask.sum()} of {mask.size} ({mask.mean():.1%})")

# %% World points: the camera hangs 2.5 m above the origin and looks down.
pts = np.array([[0.0, 0.0, 1.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
x, y, ok = cm.project_points(cam, pts)
for p, xi, yi in zip(pts, x, y):
    print(p, "->", (round(float(xi), 2), round(float(yi), 2)))
# world +y shows up towards the top of the image (smaller y)

# %% Cameras round-trip through a plain key = value config.
print(cm.to_config(cam))
