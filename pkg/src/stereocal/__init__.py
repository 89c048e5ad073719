"""One-shot multi-board stereo calibration toolkit.

Pipeline: subpixel edge detection -> segment grouping -> board
reconstruction -> line-intersection corner refinement -> joint
Levenberg-Marquardt calibration -> odometry-driven grid refinement of the
weakly constrained parameters.
"""

from .cameramodel import Intrinsics, Pose, StereoRig

__all__ = ["Intrinsics", "Pose", "StereoRig"]
__version__ = "0.1.0"
