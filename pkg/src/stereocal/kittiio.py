"""On-disk formats: KITTI calibration files, pose/trajectory files, images,
and the internal board-dump format.

Parsers reject malformed input rather than truncating; numeric output uses
the shortest representation preserving 12 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .boardfinder import Checkerboard
from .errors import DataError, ParseError
from .imagegrad import FloatImage, to_float_gray

# expected value counts for known calibration keys (per camera suffix)
_KNOWN_COUNTS = {
    "S": 2, "K": 9, "D": 5, "R": 9, "T": 3,
    "S_rect": 2, "R_rect": 9, "P_rect": 12,
}


def _fmt(v: float) -> str:
    """Shortest decimal form preserving 12 significant digits."""
    s = f"{v:.12g}"
    return s.replace("e+0", "e+").replace("e-0", "e-")


@dataclass
class KittiCalibFile:
    """Parsed calibration file: known keys as arrays, unknown kept verbatim.

    ``entries`` preserves file order as (key, payload) pairs where payload
    is an ndarray for recognized keys and the raw string otherwise.
    """

    entries: list[tuple[str, object]] = field(default_factory=list)

    def get(self, key: str) -> np.ndarray:
        for k, v in self.entries:
            if k == key:
                return v
        raise KeyError(key)

    def set(self, key: str, values: np.ndarray) -> None:
        for i, (k, _) in enumerate(self.entries):
            if k == key:
                self.entries[i] = (key, np.asarray(values, dtype=np.float64))
                return
        self.entries.append((key, np.asarray(values, dtype=np.float64)))

    def __contains__(self, key: str) -> bool:
        return any(k == key for k, _ in self.entries)


def _known_count(key: str) -> int | None:
    # keys look like K_00, R_rect_01, calib_time, corner_dist
    parts = key.split("_")
    if parts[-1].isdigit():
        stem = "_".join(parts[:-1])
        return _KNOWN_COUNTS.get(stem)
    return None


def read_calib(text: str) -> KittiCalibFile:
    """Parse a KITTI calib_cam_to_cam-style file."""
    out = KittiCalibFile()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError(f"line {lineno}: missing ':' separator")
        key, _, payload = line.partition(":")
        key = key.strip()
        payload = payload.strip()
        count = _known_count(key)
        if count is None:
            out.entries.append((key, payload))
            continue
        tokens = payload.split()
        if len(tokens) != count:
            raise ParseError(
                f"line {lineno}: key {key} expects {count} values, "
                f"got {len(tokens)}")
        try:
            values = np.array([float(t) for t in tokens])
        except ValueError as e:
            raise ParseError(f"line {lineno}: key {key}: {e}") from e
        out.entries.append((key, values))
    _validate_calib(out)
    return out


def _validate_calib(calib: KittiCalibFile) -> None:
    for key, v in calib.entries:
        if not isinstance(v, np.ndarray):
            continue
        if key.startswith("K_"):
            k = v.reshape(3, 3)
            if k[0, 0] <= 0 or k[1, 1] <= 0:
                raise ParseError(f"key {key}: K diagonal must be positive")
        if key.startswith(("R_rect_", "R_")) and len(v) == 9:
            r = v.reshape(3, 3)
            if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-6:
                raise ParseError(f"key {key}: rotation not orthonormal")


def write_calib(calib: KittiCalibFile) -> str:
    lines = []
    for key, v in calib.entries:
        if isinstance(v, np.ndarray):
            payload = " ".join(_fmt(x) for x in v)
        else:
            payload = v
        lines.append(f"{key}: {payload}")
    return "\n".join(lines) + "\n"


def read_poses(text: str) -> np.ndarray:
    """Parse a KITTI pose file into an (n, 3, 4) trajectory array."""
    poses = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 12:
            raise ParseError(
                f"line {lineno}: expected 12 values, got {len(tokens)}")
        try:
            m = np.array([float(t) for t in tokens]).reshape(3, 4)
        except ValueError as e:
            raise ParseError(f"line {lineno}: {e}") from e
        r = m[:, :3]
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-6:
            raise ParseError(f"line {lineno}: rotation not orthonormal")
        poses.append(m)
    return np.array(poses).reshape(-1, 3, 4)


def write_trajectory(trajectory: np.ndarray) -> str:
    lines = []
    for pose in trajectory:
        lines.append(" ".join(f"{v:.9g}" for v in np.asarray(pose).ravel()))
    return "\n".join(lines) + ("\n" if lines else "")


def write_boards(boards: list[Checkerboard]) -> str:
    """Serialize boards in the snake-order dump format (byte-stable)."""
    lines = []
    for i, board in enumerate(boards):
        lines.append(f"board {i} rows {board.rows} cols {board.cols}")
        for u, v in board.snake_order():
            lines.append(f"{u:.6f} {v:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_boards(text: str) -> list[Checkerboard]:
    boards = []
    lines = [l for l in text.splitlines() if l.strip()]
    i = 0
    while i < len(lines):
        tokens = lines[i].split()
        if (len(tokens) != 6 or tokens[0] != "board" or tokens[2] != "rows"
                or tokens[4] != "cols"):
            raise ParseError(f"line {i + 1}: malformed board header")
        rows, cols = int(tokens[3]), int(tokens[5])
        n = rows * cols
        corners = []
        for j in range(n):
            if i + 1 + j >= len(lines):
                raise ParseError(f"board at line {i + 1}: truncated corner list")
            parts = lines[i + 1 + j].split()
            if len(parts) != 2:
                raise ParseError(f"line {i + 2 + j}: expected 'u v' pair")
            corners.append([float(parts[0]), float(parts[1])])
        boards.append(Checkerboard.from_snake(rows, cols, np.array(corners)))
        i += 1 + n
    return boards


def load_image(path: str) -> FloatImage:
    """Load an 8-bit grayscale PNG or PGM as a FloatImage."""
    try:
        with Image.open(path) as im:
            raw = np.asarray(im.convert("L"))
    except Exception as e:
        raise DataError(f"cannot read image {path}: {e}") from e
    return to_float_gray(raw)


def save_image(path: str, img: FloatImage) -> None:
    """Write a float image in [0, 1] as 8-bit grayscale PNG/PGM."""
    data = np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)
