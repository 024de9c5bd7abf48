"""Portable graymap (PGM) reading and writing, plain (P2) and raw (P5)."""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from errors import BadImageFormat

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MAX_MAXVAL = 65535
_COMMENT = re.compile(rb"#[^\n]*")


@dataclass(frozen=True)
class GrayImage:
    """Gray values of a PGM, shape (height, width), row 0 at the top.

    Attributes:
        pixels: Integer gray values in [0, maxval].
        maxval: Largest representable gray value (1..65535).
    """

    pixels: np.ndarray
    maxval: int

    def __post_init__(self) -> None:
        if not 1 <= self.maxval <= MAX_MAXVAL:
            raise BadImageFormat(f"maxval must be in 1..{MAX_MAXVAL}, got {self.maxval}")
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise BadImageFormat(f"image must be a non-empty 2-D array, got {self.pixels.shape}")
        if not np.issubdtype(self.pixels.dtype, np.integer):
            raise BadImageFormat(f"gray values must be integers, got {self.pixels.dtype}")
        if self.pixels.min() < 0 or self.pixels.max() > self.maxval:
            raise BadImageFormat(f"gray values outside [0, {self.maxval}]")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def _header(data: bytes) -> Tuple[List[bytes], int]:
    """Magic, width, height and maxval tokens, and the offset just past maxval."""
    tokens: List[bytes] = []
    pos, end = 0, len(data)
    while len(tokens) < 4:
        while pos < end and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= end:
            raise BadImageFormat("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            newline = data.find(b"\n", pos)
            pos = end if newline < 0 else newline + 1
            continue
        start = pos
        while pos < end and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def _positive(token: bytes, what: str) -> int:
    if not token.isdigit() or int(token) < 1:
        raise BadImageFormat(f"{what} must be a positive integer, got {token!r}")
    return int(token)


def parse_pgm(data: bytes) -> GrayImage:
    """Decode PGM bytes.

    Raises:
        BadImageFormat: On a wrong magic number, bad dimensions, maxval out
            of range, a short raster or gray values above maxval.
    """
    if data[:2] not in (b"P2", b"P5"):
        raise BadImageFormat(f"not a PGM file (magic {data[:2]!r})")
    tokens, pos = _header(data)
    if tokens[0] not in (b"P2", b"P5"):
        raise BadImageFormat(f"not a PGM file (magic {tokens[0]!r})")
    width = _positive(tokens[1], "width")
    height = _positive(tokens[2], "height")
    maxval = _positive(tokens[3], "maxval")
    if maxval > MAX_MAXVAL:
        raise BadImageFormat(f"maxval {maxval} exceeds {MAX_MAXVAL}")
    count = width * height

    if tokens[0] == b"P2":
        words = _COMMENT.sub(b"", data[pos:]).split()
        if len(words) != count:
            raise BadImageFormat(f"expected {count} gray values, found {len(words)}")
        if not all(w.isdigit() for w in words):
            raise BadImageFormat("plain PGM raster contains non-numeric data")
        values = np.array([int(w) for w in words], dtype=np.int64)
    else:
        # exactly one whitespace byte separates maxval from the raster
        if pos >= len(data):
            raise BadImageFormat("raw PGM has no raster")
        raster = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        needed = count * dtype.itemsize
        if len(raster) < needed:
            raise BadImageFormat(f"raw PGM raster has {len(raster)} bytes, need {needed}")
        if len(raster) > needed:
            logger.warning(f"Ignoring {len(raster) - needed} trailing bytes after PGM raster")
        values = np.frombuffer(raster[:needed], dtype=dtype).astype(np.int64)

    if values.max() > maxval:
        raise BadImageFormat(f"gray value {values.max()} exceeds maxval {maxval}")
    return GrayImage(values.reshape(height, width), maxval)


def read_pgm(path: PathLike) -> GrayImage:
    """Read a P2 or P5 file."""
    image = parse_pgm(Path(path).read_bytes())
    logger.debug(f"Read {image.width}x{image.height} PGM (maxval {image.maxval}) from {path}")
    return image


def encode_pgm(image: GrayImage, binary: bool = True) -> bytes:
    """Encode as P5 (big-endian for maxval > 255) or, with ``binary=False``, as P2."""
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{image.width} {image.height}\n{image.maxval}\n".encode("ascii")
    if binary:
        dtype = ">u2" if image.maxval > 255 else "u1"
        return header + image.pixels.astype(dtype).tobytes()
    rows = [" ".join(str(int(g)) for g in row) for row in image.pixels]
    return header + ("\n".join(rows) + "\n").encode("ascii")


def write_pgm(path: PathLike, image: GrayImage, binary: bool = True) -> Path:
    """Write ``image`` to ``path``, creating parent directories.

    Returns:
        The written path.
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(encode_pgm(image, binary))
    logger.info(f"Wrote {out}")
    return out
