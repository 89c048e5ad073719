"""Human-facing outputs: reprojection reports, debug overlays, solution files."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .calibrate import BoardMatch, CalibrationSolution
from .edgesegments import EdgeClass, EdgeSegment
from .errors import ParseError
from .cameramodel import Intrinsics, Pose
from .calibrate import CalibrationState

RESIDUAL_SCALE = 50.0

# class colors match the debug convention: vertical positive red, vertical
# negative yellow, horizontal positive blue, horizontal negative green
CLASS_COLORS = {
    EdgeClass.VERTICAL_POSITIVE: (255, 0, 0),
    EdgeClass.VERTICAL_NEGATIVE: (255, 255, 0),
    EdgeClass.HORIZONTAL_POSITIVE: (0, 64, 255),
    EdgeClass.HORIZONTAL_NEGATIVE: (0, 200, 0),
}


def segment_overlay(img: np.ndarray, segments: list[EdgeSegment]) -> Image.Image:
    """Classified edge points drawn over the image, one color per class."""
    base = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    rgb = np.stack([base] * 3, axis=-1)
    for seg in segments:
        color = CLASS_COLORS[seg.edge_class]
        xs = np.clip(np.round(seg.points[:, 0]).astype(int), 0, rgb.shape[1] - 1)
        ys = np.clip(np.round(seg.points[:, 1]).astype(int), 0, rgb.shape[0] - 1)
        rgb[ys, xs] = color
    return Image.fromarray(rgb)


def segment_listing(segments: list[EdgeSegment]) -> str:
    """Plain-text segment summary: class, point count, length, endpoints."""
    lines = []
    for i, seg in enumerate(segments):
        (x0, y0), (x1, y1) = seg.endpoints
        lines.append(
            f"segment {i} class {seg.edge_class.value} points "
            f"{len(seg.points)} length {seg.length:.3f} "
            f"from {x0:.3f} {y0:.3f} to {x1:.3f} {y1:.3f}")
    return "\n".join(lines) + ("\n" if lines else "")


def reprojection_table(solution: CalibrationSolution,
                       matches: list[BoardMatch]) -> str:
    """Per-board and overall RMS, with any exclusions applied to the total."""
    lines = ["board rows cols rms_px excluded"]
    for i, (m, rms) in enumerate(zip(matches, solution.board_rms)):
        flag = "yes" if solution.excluded[i] else "no"
        lines.append(f"{i} {m.rows} {m.cols} {rms:.6f} {flag}")
    lines.append(f"overall_rms {solution.rms:.6f}")
    if solution.excluded.any():
        lines.append(
            f"overall_rms_excluding {solution.rms_excluding():.6f}")
    return "\n".join(lines) + "\n"


def residual_overlay(image_size: tuple[int, int],
                     solution: CalibrationSolution,
                     matches: list[BoardMatch],
                     camera: str = "left",
                     scale: float = RESIDUAL_SCALE,
                     background: np.ndarray | None = None) -> Image.Image:
    """Residual vectors magnified ``scale`` times, heads joined per board grid."""
    w, h = image_size
    if background is not None:
        base = np.clip(np.round(background * 255.0), 0, 255).astype(np.uint8)
        rgb = np.stack([base] * 3, axis=-1)
        im = Image.fromarray(rgb)
    else:
        im = Image.new("RGB", (w, h), (20, 20, 20))
    draw = ImageDraw.Draw(im)
    idx = 0 if camera == "left" else 1
    for m, res in zip(matches, solution.residuals):
        board = m.left_board if camera == "left" else m.right_board
        corners = board.corners.reshape(-1, 2)
        heads = corners + scale * res[idx].reshape(-1, 2)
        for (x0, y0), (x1, y1) in zip(corners, heads):
            draw.line([(x0, y0), (x1, y1)], fill=(0, 255, 0), width=1)
        grid = heads.reshape(m.rows, m.cols, 2)
        for r in range(m.rows):
            draw.line([tuple(p) for p in grid[r]], fill=(255, 160, 0), width=1)
        for c in range(m.cols):
            draw.line([tuple(p) for p in grid[:, c]], fill=(255, 160, 0), width=1)
    return im


def write_solution(solution: CalibrationSolution) -> str:
    """Plain-text key-value solution file (intrinsics, pose, RMS summary)."""
    s = solution.state
    lines = []
    for name, intr in (("left", s.left), ("right", s.right)):
        vals = " ".join(f"{v:.12g}" for v in intr.as_array())
        lines.append(f"intrinsics_{name}: {vals}")
    r = " ".join(f"{v:.12g}" for v in s.right_pose.rotation.ravel())
    t = " ".join(f"{v:.12g}" for v in s.right_pose.translation)
    lines.append(f"rotation: {r}")
    lines.append(f"translation: {t}")
    lines.append(f"baseline: {s.baseline:.12g}")
    for i, rms in enumerate(solution.board_rms):
        lines.append(f"board_rms_{i}: {rms:.12g}")
    lines.append(f"overall_rms: {solution.rms:.12g}")
    return "\n".join(lines) + "\n"


def read_solution_state(text: str) -> CalibrationState:
    """Parse the key-value solution file back into a calibration state."""
    fields: dict[str, list[float]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError(f"line {lineno}: missing ':'")
        key, _, payload = line.partition(":")
        fields[key.strip()] = [float(v) for v in payload.split()]
    try:
        left = Intrinsics.from_array(fields["intrinsics_left"])
        right = Intrinsics.from_array(fields["intrinsics_right"])
        rot = np.array(fields["rotation"]).reshape(3, 3)
        t = np.array(fields["translation"])
    except KeyError as e:
        raise ParseError(f"missing key {e}") from e
    return CalibrationState(left=left, right=right,
                            right_pose=Pose(rot, t).orthonormalized(),
                            board_poses=[])


def sensitivity_csv(curve) -> str:
    """SensitivityCurve as CSV: probe, rms[, pitch_deg]."""
    with_pitch = curve.pitch_deg is not None
    header = "probe,rms" + (",pitch_deg" if with_pitch else "")
    lines = [header]
    for i, probe in enumerate(curve.probes):
        row = f"{probe:.9g},{curve.rms[i]:.9g}"
        if with_pitch:
            row += f",{curve.pitch_deg[i]:.9g}"
        lines.append(row)
    return "\n".join(lines) + "\n"
