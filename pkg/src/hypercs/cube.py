"""Hyperspectral cube container and I/O.

Cubes are stored as float64 arrays of shape (x, y, bands); the flat sample
order is therefore x-major with the band index fastest.  The native binary
layout is the magic b"HSC1", the three dimensions as little-endian uint32,
then the raw sample payload in that same order.  ENVI cubes (BSQ/BIL/BIP,
data types 4, 5 and 12) are read-only.
"""

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transform import build_dft_basis

NATIVE_MAGIC = b"HSC1"
NATIVE_HEADER = struct.Struct("<III")

ENVI_DTYPES = {4: "f4", 5: "f8", 12: "u2"}
ENVI_INTERLEAVES = ("bsq", "bil", "bip")
ELEMENT_SIZES = {"f32": 4, "f64": 8}


class CubeFormatError(Exception):
    """Malformed or unsupported cube file."""


@dataclass
class CubeFormat:
    """Describes how cube samples are laid out on disk.

    kind is "native" or "envi".  Native files are little-endian f32 or f64;
    the other fields record what an ENVI header declared.
    """

    kind: str = "native"
    interleave: str = "bip"
    element_type: str = "f64"
    byte_order: str = "little"

    def __post_init__(self):
        if self.kind not in ("native", "envi"):
            raise ValueError(f"unknown cube format kind {self.kind!r}")
        if self.interleave not in ENVI_INTERLEAVES:
            raise ValueError(f"unknown interleave {self.interleave!r}")
        if self.byte_order not in ("little", "big"):
            raise ValueError(f"unknown byte order {self.byte_order!r}")
        if self.kind == "native":
            if self.element_type not in ("f32", "f64"):
                raise ValueError("native cubes store f32 or f64 samples")
            if self.byte_order != "little":
                raise ValueError("native cubes are little-endian")
        elif self.element_type not in ("f32", "f64", "u16"):
            raise ValueError(f"unsupported element type {self.element_type!r}")


@dataclass
class HsiCube:
    """In-memory cube: float64 samples indexed as data[x, y, band]."""

    data: np.ndarray
    band_meta: list | None = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError("cube data must be 3-D (x, y, band)")
        if min(self.data.shape) < 1:
            raise ValueError("cube dimensions must be >= 1")
        if not np.isfinite(self.data).all():
            raise ValueError("cube contains non-finite samples")
        if self.band_meta is not None and len(self.band_meta) != self.data.shape[2]:
            raise ValueError("band metadata length does not match the band count")

    @property
    def x(self):
        return int(self.data.shape[0])

    @property
    def y(self):
        return int(self.data.shape[1])

    @property
    def bands(self):
        return int(self.data.shape[2])

    @property
    def samples(self):
        """Flat sample vector in on-disk order (x-major, band fastest)."""
        return self.data.reshape(-1)


def extract_pixel(cube, x, y):
    """Spectrum of one pixel as a fresh length-`bands` float64 vector."""
    if not (0 <= x < cube.x and 0 <= y < cube.y):
        raise IndexError(f"pixel ({x}, {y}) outside {cube.x} x {cube.y} grid")
    return cube.data[x, y, :].copy()


def save_cube(cube, path, fmt=None):
    """Write a cube in the native binary layout (f64 unless fmt says f32)."""
    fmt = fmt or CubeFormat()
    if fmt.kind != "native":
        raise CubeFormatError("only the native binary format is writable")
    dtype = "<f4" if fmt.element_type == "f32" else "<f8"
    payload = np.ascontiguousarray(cube.data, dtype=dtype)
    with open(path, "wb") as fh:
        fh.write(NATIVE_MAGIC)
        fh.write(NATIVE_HEADER.pack(cube.x, cube.y, cube.bands))
        fh.write(payload.tobytes())


def load_cube(path, fmt=None):
    """Read a cube. With fmt=None the kind is sniffed: native magic bytes
    first, otherwise a sibling ENVI header."""
    path = Path(path)
    if fmt is None:
        with open(path, "rb") as fh:
            head = fh.read(4)
        kind = "native" if head == NATIVE_MAGIC else "envi"
    else:
        kind = fmt.kind
    if kind == "native":
        return _load_native(path, fmt)
    return _load_envi(path)


def _load_native(path, fmt):
    raw = Path(path).read_bytes()
    if len(raw) < 4 + NATIVE_HEADER.size or raw[:4] != NATIVE_MAGIC:
        raise CubeFormatError(f"{path}: not a native cube file")
    x, y, bands = NATIVE_HEADER.unpack_from(raw, 4)
    if min(x, y, bands) < 1:
        raise CubeFormatError(f"{path}: degenerate dimensions {x} x {y} x {bands}")
    count = x * y * bands
    payload = raw[4 + NATIVE_HEADER.size:]
    if fmt is not None:
        sizes = [ELEMENT_SIZES[fmt.element_type]]
    else:
        sizes = [8, 4]
    for size in sizes:
        if len(payload) == count * size:
            dtype = "<f8" if size == 8 else "<f4"
            data = np.frombuffer(payload, dtype=dtype).astype(np.float64)
            try:
                return HsiCube(data=data.reshape(x, y, bands))
            except ValueError as exc:
                raise CubeFormatError(f"{path}: {exc}") from None
    raise CubeFormatError(
        f"{path}: payload holds {len(payload)} bytes, expected {count} samples"
    )


def _find_envi_header(path):
    path = Path(path)
    if path.suffix.lower() == ".hdr":
        raise CubeFormatError(
            f"{path}: pass the data file, the header is located next to it"
        )
    candidates = [path.with_suffix(path.suffix + ".hdr"), path.with_suffix(".hdr")]
    for cand in candidates:
        if cand.exists():
            return cand
    raise CubeFormatError(f"{path}: no ENVI header found next to the data file")


def _parse_envi_header(text, path):
    fields = {}
    # strip brace-delimited blocks onto one line first
    text = re.sub(r"\{[^}]*\}", lambda m: m.group(0).replace("\n", " "), text)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.upper() == "ENVI" or line.startswith(";"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            continue
        fields[key.strip().lower()] = value.strip()
    required = ("samples", "lines", "bands", "interleave", "data type")
    missing = [key for key in required if key not in fields]
    if missing:
        raise CubeFormatError(f"{path}: header is missing {', '.join(missing)}")
    return fields


def _load_envi(path):
    header_path = _find_envi_header(path)
    try:
        text = header_path.read_text(errors="replace")
    except OSError as exc:
        raise CubeFormatError(f"{header_path}: unreadable header: {exc}") from None
    fields = _parse_envi_header(text, header_path)
    try:
        samples = int(fields["samples"])
        lines = int(fields["lines"])
        bands = int(fields["bands"])
        dtype_code = int(fields["data type"])
        offset = int(fields.get("header offset", 0))
        byte_order = int(fields.get("byte order", 0))
    except ValueError as exc:
        raise CubeFormatError(f"{header_path}: bad header value: {exc}") from None
    interleave = fields["interleave"].lower()
    if interleave not in ENVI_INTERLEAVES:
        raise CubeFormatError(f"{header_path}: unsupported interleave {interleave!r}")
    if dtype_code not in ENVI_DTYPES:
        raise CubeFormatError(f"{header_path}: unsupported data type {dtype_code}")
    dtype = np.dtype(("<" if byte_order == 0 else ">") + ENVI_DTYPES[dtype_code])

    raw = Path(path).read_bytes()[offset:]
    count = samples * lines * bands
    if len(raw) < count * dtype.itemsize:
        raise CubeFormatError(
            f"{path}: file holds {len(raw)} bytes, header declares {count} samples"
        )
    flat = np.frombuffer(raw, dtype=dtype, count=count).astype(np.float64)
    if interleave == "bsq":
        data = flat.reshape(bands, lines, samples).transpose(2, 1, 0)
    elif interleave == "bil":
        data = flat.reshape(lines, bands, samples).transpose(2, 0, 1)
    else:  # bip
        data = flat.reshape(lines, samples, bands).transpose(1, 0, 2)

    band_meta = None
    if "band names" in fields:
        names = fields["band names"].strip("{} \t")
        band_meta = [name.strip() for name in names.split(",") if name.strip()]
        if len(band_meta) != bands:
            band_meta = None
    try:
        return HsiCube(data=data.copy(), band_meta=band_meta)
    except ValueError as exc:
        raise CubeFormatError(f"{path}: {exc}") from None


def _symmetric_support(bands, kappa, rng):
    """Random index set of exactly kappa bins, closed under j -> (N - j) % N.

    Self-paired bins (0 and, for even N, N/2) count once; every other bin
    drags its mirror along.
    """
    self_bins = [0] + ([bands // 2] if bands % 2 == 0 else [])
    pair_bins = [j for j in range(1, (bands + 1) // 2)]
    n_self = kappa % 2
    if kappa - n_self > 2 * len(pair_bins):
        n_self += 2
    if n_self > len(self_bins):
        raise ValueError(f"cannot place {kappa} symmetric nonzeros in {bands} bands")
    chosen = list(rng.choice(len(self_bins), size=n_self, replace=False))
    support = [self_bins[i] for i in chosen]
    n_pairs = (kappa - n_self) // 2
    for i in rng.choice(len(pair_bins), size=n_pairs, replace=False):
        support.append(pair_bins[i])
        support.append(bands - pair_bins[i])
    return sorted(support)


def generate_synthetic_cube(x, y, bands, kappa_true, seed):
    """Cube whose every pixel has exactly kappa_true nonzero inverse-DFT
    coefficients (magnitudes in [1, 2], random phases, conjugate-symmetric
    so the spectra come out real).  Deterministic per seed."""
    if min(x, y, bands) < 1:
        raise ValueError("cube dimensions must be >= 1")
    if not 1 <= kappa_true <= bands:
        raise ValueError(f"kappa_true must be in [1, {bands}]")
    rng = np.random.default_rng(seed)
    basis = build_dft_basis(bands)
    data = np.empty((x, y, bands), dtype=np.float64)
    half = bands / 2.0
    for ix in range(x):
        for iy in range(y):
            support = _symmetric_support(bands, kappa_true, rng)
            coeffs = np.zeros(bands, dtype=np.complex128)
            for j in support:
                mirror = (bands - j) % bands
                if j == mirror:
                    # self-paired bin: the coefficient must be real
                    coeffs[j] = rng.uniform(1.0, 2.0) * rng.choice((-1.0, 1.0))
                elif j < half:
                    mag = rng.uniform(1.0, 2.0)
                    phase = rng.uniform(0.0, 2.0 * np.pi)
                    coeffs[j] = mag * np.exp(1j * phase)
                    coeffs[mirror] = np.conj(coeffs[j])
            data[ix, iy, :] = (basis.matrix @ coeffs).real
    return HsiCube(data=data)
