"""Frame stream readers/writers (Y4M, PNG/PGM sequences) and run artifacts."""
from __future__ import annotations

import csv
import json
import os
import re
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatchError,
    InvalidInputError,
    MalformedHeaderError,
    UnreadableStreamError,
    UnwritablePathError,
)
from .image_core import AuxPlanes, GrayFrame
from .motion import DeltaParams
from .smoothing import Trajectory

IMAGE_EXTS = (".png", ".pgm")

TRAJ_HEADER = [
    "frame", "dx", "dy", "da", "dls",
    "cum_x", "cum_y", "cum_a", "cum_ls",
    "smooth_x", "smooth_y", "smooth_a", "smooth_ls",
]
TRUTH_HEADER = ["frame"] + ["truth_" + h for h in TRAJ_HEADER[1:9]]


def fmt(v: float) -> str:
    return format(float(v), ".17g")


@contextmanager
def atomic_write(path, mode: str = "wb"):
    """Write to a sibling temp file and rename into place only on success."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        os.chmod(tmp, 0o644)
    except OSError as exc:
        raise UnwritablePathError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def luma_bt601(rgb: np.ndarray) -> np.ndarray:
    """Integer ``round(0.299 R + 0.587 G + 0.114 B)``."""
    rgb = rgb.astype(np.int64)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


# --- YUV4MPEG2 ---------------------------------------------------------------

_CHROMA = {
    "420jpeg": (2, 2), "420paldv": (2, 2), "420mpeg2": (2, 2), "420": (2, 2),
    "422": (2, 1), "444": (1, 1), "mono": None,
}


@dataclass
class Y4MHeader:
    width: int
    height: int
    fps: Fraction = Fraction(30, 1)
    colorspace: str = "420jpeg"
    extra: list[str] = field(default_factory=list)

    @property
    def chroma_shape(self) -> tuple[int, int] | None:
        sub = _CHROMA[self.colorspace]
        if sub is None:
            return None
        return -(-self.height // sub[1]), -(-self.width // sub[0])

    @property
    def frame_bytes(self) -> int:
        c = self.chroma_shape
        return self.width * self.height + (2 * c[0] * c[1] if c else 0)

    def encode(self) -> bytes:
        parts = ["YUV4MPEG2", f"W{self.width}", f"H{self.height}",
                 f"F{self.fps.numerator}:{self.fps.denominator}", "Ip", "A1:1", f"C{self.colorspace}"]
        return (" ".join(parts + self.extra) + "\n").encode("ascii")

    @classmethod
    def parse(cls, line: bytes) -> Y4MHeader:
        try:
            tokens = line.decode("ascii").split()
        except UnicodeDecodeError as exc:
            raise MalformedHeaderError("Y4M header is not ASCII") from exc
        if not tokens or tokens[0] != "YUV4MPEG2":
            raise MalformedHeaderError("missing YUV4MPEG2 signature")
        w = h = None
        fps, cs, extra = Fraction(30, 1), "420jpeg", []
        for tok in tokens[1:]:
            key, val = tok[0], tok[1:]
            try:
                if key == "W":
                    w = int(val)
                elif key == "H":
                    h = int(val)
                elif key == "F":
                    num, den = val.split(":")
                    fps = Fraction(int(num), int(den))
                elif key == "C":
                    cs = val
                elif key == "X":
                    extra.append(tok)
            except (ValueError, ZeroDivisionError) as exc:
                raise MalformedHeaderError(f"bad header token {tok!r}") from exc
        if w is None or h is None or w <= 0 or h <= 0:
            raise MalformedHeaderError("header lacks positive W and H")
        if cs not in _CHROMA:
            raise MalformedHeaderError(f"unsupported colour space C{cs}")
        return cls(w, h, fps, cs, extra)


class Y4MReader:
    """Iterates the luma plane of each frame; chroma is kept as ``aux`` planes."""

    def __init__(self, path, keep_color: bool = True):
        self.path = Path(path)
        self.keep_color = keep_color
        try:
            self._fh = open(self.path, "rb")
        except OSError as exc:
            raise UnreadableStreamError(f"cannot open {path}: {exc}") from exc
        line = self._fh.readline(4096)
        if not line.endswith(b"\n"):
            self._fh.close()
            raise MalformedHeaderError(f"{path}: header line is not terminated")
        try:
            self.header = Y4MHeader.parse(line)
        except MalformedHeaderError:
            self._fh.close()
            raise

    @property
    def fps(self) -> float:
        return float(self.header.fps)

    def __iter__(self) -> Iterator[GrayFrame]:
        h = self.header
        index = 0
        try:
            while True:
                tag = self._fh.readline(4096)
                if not tag:
                    return
                if not tag.startswith(b"FRAME") or not tag.endswith(b"\n"):
                    raise MalformedHeaderError(f"{self.path}: bad frame marker at frame {index}")
                data = self._fh.read(h.frame_bytes)
                if len(data) != h.frame_bytes:
                    raise UnreadableStreamError(f"{self.path}: truncated frame {index}")
                buf = np.frombuffer(data, dtype=np.uint8)
                y = buf[: h.width * h.height].reshape(h.height, h.width)
                aux = None
                c = h.chroma_shape
                if c and self.keep_color:
                    n = c[0] * c[1]
                    rest = buf[h.width * h.height :]
                    aux = AuxPlanes("yuv", (rest[:n].reshape(c).copy(), rest[n:].reshape(c).copy()))
                yield GrayFrame(y, index, aux)
                index += 1
        finally:
            self._fh.close()


class Y4MWriter:
    """Streams frames into a sibling temp file; renamed into place on a clean close."""

    def __init__(self, path, fps: Fraction | float = Fraction(30, 1)):
        self.path = Path(path)
        self.fps = fps if isinstance(fps, Fraction) else Fraction(fps).limit_denominator(1001)
        self.header: Y4MHeader | None = None
        self.count = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd, self._tmp = tempfile.mkstemp(prefix=f".{self.path.name}.", suffix=".tmp", dir=self.path.parent)
            os.chmod(self._tmp, 0o644)
        except OSError as exc:
            raise UnwritablePathError(f"cannot write {self.path}: {exc}") from exc
        self._fh = os.fdopen(fd, "wb")

    def write(self, frame: GrayFrame) -> None:
        if self.header is None:
            self.header = Y4MHeader(frame.width, frame.height, self.fps, "420jpeg")
            self._fh.write(self.header.encode())
        elif (frame.width, frame.height) != (self.header.width, self.header.height):
            raise DimensionMismatchError(
                f"frame {frame.index} is {frame.width}x{frame.height}, stream is "
                f"{self.header.width}x{self.header.height}"
            )
        c = self.header.chroma_shape
        if frame.aux is not None and frame.aux.kind == "yuv" and all(p.shape == c for p in frame.aux.planes):
            u, v = frame.aux.planes
        else:
            u = v = np.full(c, 128, np.uint8)
        self._fh.write(b"FRAME\n")
        self._fh.write(frame.pixels.tobytes())
        self._fh.write(np.ascontiguousarray(u).tobytes())
        self._fh.write(np.ascontiguousarray(v).tobytes())
        self.count += 1

    __call__ = write

    def discard(self) -> None:
        if not self._fh.closed:
            self._fh.close()
        if os.path.exists(self._tmp):
            os.unlink(self._tmp)

    def close(self) -> None:
        if self._fh.closed:
            return
        if self.count == 0:
            self.discard()
            raise InvalidInputError(f"refusing to write empty stream to {self.path}")
        self._fh.close()
        os.replace(self._tmp, self.path)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.discard()
        else:
            self.close()
        return False


# --- numbered image sequences -----------------------------------------------

_NUM = re.compile(r"(\d+)(?!.*\d)")


def _frame_number(p: Path) -> tuple[int, str]:
    m = _NUM.search(p.stem)
    return (int(m.group(1)) if m else -1, p.name)


def list_image_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise UnreadableStreamError(f"{d} is not a directory")
    files = [p for p in d.iterdir() if p.suffix.lower() in IMAGE_EXTS and not p.name.startswith(".")]
    return sorted(files, key=_frame_number)


def read_image(path, index: int = 0, keep_color: bool = True) -> GrayFrame:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "P", "RGB", "RGBA", "LA"):
                arr = np.asarray(im.convert("RGB") if mode != "L" else im)
            elif mode in ("I;16", "I;16B", "I"):
                raise UnreadableStreamError(f"{path}: only 8-bit images are supported")
            else:
                arr = np.asarray(im.convert("RGB"))
    except UnreadableStreamError:
        raise
    except (OSError, ValueError) as exc:
        raise UnreadableStreamError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim == 2:
        return GrayFrame(arr, index)
    aux = AuxPlanes("rgb", tuple(np.ascontiguousarray(arr[..., c]) for c in range(3))) if keep_color else None
    return GrayFrame(luma_bt601(arr), index, aux)


def read_image_dir(directory, keep_color: bool = True) -> Iterator[GrayFrame]:
    files = list_image_files(directory)
    if not files:
        raise UnreadableStreamError(f"no .png/.pgm frames in {directory}")
    shape = None
    for i, p in enumerate(files):
        f = read_image(p, i, keep_color)
        if shape is None:
            shape = f.pixels.shape
        elif f.pixels.shape != shape:
            raise DimensionMismatchError(f"{p} is {f.width}x{f.height}, expected {shape[1]}x{shape[0]}")
        yield f


class ImageDirWriter:
    """Writes ``frame_000001.<ext>``, ... one atomic file per frame."""

    def __init__(self, directory, ext: str = "png", prefix: str = "frame_"):
        self.dir = Path(directory)
        self.ext = ext.lower().lstrip(".")
        if "." + self.ext not in IMAGE_EXTS:
            raise InvalidInputError(f"unsupported image format {ext!r}")
        self.prefix = prefix
        self.count = 0
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UnwritablePathError(f"cannot create {self.dir}: {exc}") from exc

    def write(self, frame: GrayFrame) -> None:
        self.count += 1
        if frame.aux is not None and frame.aux.kind == "rgb" and self.ext == "png":
            im = Image.fromarray(np.dstack(frame.aux.planes), "RGB")
        else:
            im = Image.fromarray(np.asarray(frame.pixels), "L")
        path = self.dir / f"{self.prefix}{self.count:06d}.{self.ext}"
        fmt_name = "PNG" if self.ext == "png" else "PPM"
        with atomic_write(path) as fh:
            im.save(fh, format=fmt_name)

    __call__ = write

    def close(self) -> None:
        if self.count == 0:
            raise InvalidInputError(f"refusing to write empty stream to {self.dir}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            self.close()
        return False


# --- stream specs -----------------------------------------------------------


@dataclass
class StreamSpec:
    """Where frames come from or go to.

    ``kind`` is ``"y4m"``, ``"images"`` or ``"synthetic"``; ``synth`` holds a
    :class:`~uavstab.synth_eval.JitterSpec` for the synthetic kind.
    """

    kind: str
    path: Path | None = None
    fps: float = 30.0
    image_ext: str = "png"
    synth: object = None
    keep_color: bool = True

    @classmethod
    def from_path(cls, path, fps: float = 30.0, image_ext: str | None = None) -> StreamSpec:
        p = Path(path)
        if p.suffix.lower() == ".y4m":
            return cls("y4m", p, fps)
        ext = image_ext
        if ext is None and p.is_dir():
            files = list_image_files(p)
            ext = files[0].suffix.lstrip(".").lower() if files else "png"
        return cls("images", p, fps, ext or "png")


def read_stream(spec: StreamSpec) -> Iterator[GrayFrame]:
    if spec.kind == "y4m":
        reader = Y4MReader(spec.path, spec.keep_color)
        spec.fps = reader.fps
        return iter(reader)
    if spec.kind == "images":
        return read_image_dir(spec.path, spec.keep_color)
    if spec.kind == "synthetic":
        from .synth_eval import generate

        return iter(generate(spec.synth))
    raise InvalidInputError(f"unknown stream kind {spec.kind!r}")


def open_writer(spec: StreamSpec):
    if spec.kind == "y4m":
        return Y4MWriter(spec.path, spec.fps)
    if spec.kind == "images":
        return ImageDirWriter(spec.path, spec.image_ext)
    raise InvalidInputError(f"cannot write stream kind {spec.kind!r}")


def write_stream(frames: Iterable[GrayFrame], spec: StreamSpec) -> int:
    writer = open_writer(spec)
    with writer:
        for f in frames:
            writer.write(f)
    return writer.count


# --- CSV / JSON artifacts ---------------------------------------------------


def export_trajectory(traj: Trajectory, path) -> None:
    if len(traj) == 0:
        raise InvalidInputError("trajectory is empty")
    cum = traj.cumulative
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_HEADER)
        for i, d in enumerate(traj.raw_deltas):
            s = traj.smoothed.get(i)
            row = [str(i)] + [fmt(v) for v in d.as_array()] + [fmt(v) for v in cum[i]]
            row += [fmt(v) for v in s] if s is not None else [""] * 4
            w.writerow(row)


def write_truth_csv(truth: Sequence[DeltaParams], path) -> None:
    if not truth:
        raise InvalidInputError("truth is empty")
    cum = np.zeros(4)
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for i, d in enumerate(truth):
            step = d.as_array()
            cum = step if i == 0 else cum + step
            w.writerow([str(i)] + [fmt(v) for v in step] + [fmt(v) for v in cum])


def read_csv_rows(path) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise UnreadableStreamError(f"cannot read {path}: {exc}") from exc


def read_deltas_csv(path) -> list[DeltaParams]:
    """Deltas from either a trajectory CSV or a truth CSV.

    Trajectory rows after the first whose delta is exactly zero are read back
    as skipped frames (the identity fallback writes exact zeros).
    """
    rows = read_csv_rows(path)
    if not rows:
        raise MalformedHeaderError(f"{path} has no rows")
    prefix = "truth_" if "truth_dx" in rows[0] else ""
    out = []
    try:
        for i, r in enumerate(rows):
            vals = [float(r[prefix + k]) for k in ("dx", "dy", "da", "dls")]
            skipped = prefix == "" and i > 0 and not any(vals)
            out.append(DeltaParams(*vals, skipped=skipped))
    except (KeyError, ValueError) as exc:
        raise MalformedHeaderError(f"{path}: not a trajectory or truth CSV ({exc})") from exc
    return out


def write_json(obj, path) -> None:
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2, sort_keys=True) + "\n"
    with atomic_write(path, "w") as fh:
        fh.write(text)

