"""On-disk formats: binary vectors and index lists, problem directories, PGM images.

Vector file: 8-byte magic ``CSVF64\\x00\\x01``, little-endian uint64 length,
then that many little-endian float64 values.  Index file: magic
``CSIDX64\\x01``, uint64 length, little-endian int64 values.  A problem
directory holds ``signal.f64``, ``first_row.f64``, ``omega.i64``,
``measurements.f64`` and a ``meta.json`` with the generation parameters.
"""

import json
import re
import struct
from pathlib import Path

import numpy as np

from .circulant import CirculantMatrix, PartialCirculantOperator, SubsamplingMask
from .deblur import GrayImage
from .errors import FormatError
from .sensing import SensingProblem, SparseSignal

VECTOR_MAGIC = b"CSVF64\x00\x01"
INDEX_MAGIC = b"CSIDX64\x01"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<8sQ")


def _write(path, magic, data, dtype):
    data = np.ascontiguousarray(data, dtype=dtype)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, data.shape[0]))
        fh.write(data.tobytes())


def _read(path, magic, dtype):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    found, count = _HEADER.unpack_from(raw)
    if found != magic:
        raise FormatError(f"{path}: bad magic {found!r}, expected {magic!r}")
    body = raw[_HEADER.size :]
    if len(body) != 8 * count:
        raise FormatError(f"{path}: header says {count} entries, found {len(body) // 8}")
    return np.frombuffer(body, dtype=dtype).copy()


def write_vector(path, x):
    _write(path, VECTOR_MAGIC, x, "<f8")


def read_vector(path):
    return _read(path, VECTOR_MAGIC, "<f8").astype(np.float64)


def write_indices(path, idx):
    _write(path, INDEX_MAGIC, idx, "<i8")


def read_indices(path):
    return _read(path, INDEX_MAGIC, "<i8").astype(np.int64)


def save_problem(problem, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_vector(d / "signal.f64", problem.signal.values)
    write_vector(d / "first_row.f64", problem.operator.circulant.first_row)
    write_indices(d / "omega.i64", problem.operator.mask.omega)
    write_vector(d / "measurements.f64", problem.measurements)
    meta = {
        "format_version": FORMAT_VERSION,
        "n": problem.n,
        "m": problem.m,
        "k": problem.k,
        "seed": problem.seed,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return d


def load_problem(directory):
    d = Path(directory)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{d / 'meta.json'}: {exc}") from exc
    values = read_vector(d / "signal.f64")
    row = read_vector(d / "first_row.f64")
    omega = read_indices(d / "omega.i64")
    y = read_vector(d / "measurements.f64")
    n = row.shape[0]
    if values.shape[0] != n or y.shape[0] != omega.shape[0]:
        raise FormatError(f"{d}: inconsistent vector lengths")
    op = PartialCirculantOperator(CirculantMatrix(row), SubsamplingMask(omega, n))
    signal = SparseSignal(values=values, support=np.flatnonzero(values))
    return SensingProblem(signal=signal, operator=op, measurements=y, seed=int(meta.get("seed", 0)))


# ------------------------------------------------------------------ PGM

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_tokens(raw, count):
    pos = 0
    tokens = []
    for _ in range(count):
        match = _TOKEN.match(raw, pos)
        if match is None:
            raise FormatError("truncated PGM header")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens, pos


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM into a GrayImage with intensities in [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, pos = _pgm_tokens(raw, 1)
    if tokens[0] != b"P5":
        raise FormatError(f"unsupported PGM magic {tokens[0].decode(errors='replace')!r}, need 'P5'")
    tokens, pos = _pgm_tokens(raw, 4)
    _, w_tok, h_tok, max_tok = tokens
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise FormatError(f"non-numeric PGM header token: {exc}") from exc
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {w_tok.decode()} x {h_tok.decode()}")
    if not 1 <= maxval <= 255:
        raise FormatError(f"unsupported PGM maxval {max_tok.decode()!r}, need 1..255")
    pixels = raw[pos + 1 : pos + 1 + width * height]
    if len(pixels) != width * height:
        raise FormatError(f"PGM body has {len(pixels)} bytes, expected {width * height}")
    data = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64) / maxval
    return GrayImage(width, height, data)


def write_pgm(path, image):
    """Write a GrayImage as P5 with maxval 255, clamping to [0, 1]."""
    data = np.round(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
