"""Synthetic fish-eye optical-flow ground truth and flow evaluation.

Modules
-------
camera
    Equidistant fish-eye projection, its inverse and the image-circle mask.
scene
    NURBS curves, the linec / line / spiral cube paths and sequence specs.
renderer
    Ray caster producing frames, foreground masks and analytic flow.
flowio
    FlowField, the Middlebury ``.flo`` codec and color-wheel coding.
metrics
    AAE, AEPE, Fl-bg / Fl-fg / Fl-all and report tables.
baseline_hs
    Coarse-to-fine Horn-Schunck estimator.
cli
    ``fisheyeflow`` command line.
"""

from .baseline_hs import HSParams, hs_estimate
from .camera import FisheyeCamera, image_circle_mask, project, unproject
from .flowio import FlowField, flow_to_color, read_flo, write_flo
from .metrics import EvalMask, EvalRow, aae, aepe, build_report, fl_outliers
from .renderer import FrameBundle, cast_ray, ground_truth_flow, render_frame
from .scene import (
    NurbsCurve,
    SequenceSpec,
    arc_length_param,
    cube_pose_at_frame,
    nurbs_eval,
    spec_from_name,
)

__version__ = "0.1.0"

__all__ = [
    "EvalMask",
    "EvalRow",
    "FisheyeCamera",
    "FlowField",
    "FrameBundle",
    "HSParams",
    "NurbsCurve",
    "SequenceSpec",
    "aae",
    "aepe",
    "arc_length_param",
    "build_report",
    "cast_ray",
    "cube_pose_at_frame",
    "fl_outliers",
    "flow_to_color",
    "ground_truth_flow",
    "hs_estimate",
    "image_circle_mask",
    "nurbs_eval",
    "project",
    "read_flo",
    "render_frame",
    "spec_from_name",
    "unproject",
    "write_flo",
]
