"""Bringing external data in: write a miniature ENVI scene by hand, load it
back, and sparsify one of its pixels.

ENVI stores a cube as a raw binary payload plus a small text header; the
reader here supports BSQ/BIL/BIP interleaves, float32/float64/uint16
payloads and both byte orders.  The library only reads ENVI: processed
cubes are saved in the native format instead.
"""

from pathlib import Path

import numpy as np

from hypercs import build_dft_basis, extract_pixel, load_cube, sparsify, to_sparse_domain

out = Path("envi_out")
out.mkdir(exist_ok=True)

# a 5x4 scene with 16 bands: smooth gaussian-bump spectra, band-interleaved
x_dim, y_dim, bands = 5, 4, 16
grid = np.arange(bands, dtype=np.float64)
scene = np.empty((x_dim, y_dim, bands))
for ix in range(x_dim):
    for iy in range(y_dim):
        center = 3.0 + 0.7 * ix + 0.3 * iy
        scene[ix, iy] = 100.0 * np.exp(-0.5 * ((grid - center) / 2.5) ** 2)

# BIL layout is [line][band][sample]; our in-memory order is (x, y, bands)
payload = np.ascontiguousarray(scene.transpose(1, 2, 0), dtype="<f4").tobytes()
(out / "scene.raw").write_bytes(payload)
(out / "scene.raw.hdr").write_text(
    "ENVI\n"
    f"samples = {x_dim}\n"
    f"lines = {y_dim}\n"
    f"bands = {bands}\n"
    "data type = 4\n"
    "interleave = bil\n"
    "byte order = 0\n"
    "header offset = 0\n"
)
print(f"wrote {out / 'scene.raw'} + header ({x_dim}x{y_dim}, {bands} bands, bil/f4)")

# --- load and verify -------------------------------------------------------
cube = load_cube(out / "scene.raw")  # format sniffed from the header
err = np.max(np.abs(cube.data - scene))
print(
    f"loaded {cube.x}x{cube.y} pixels, {cube.bands} bands; "
    f"max abs round-trip error {err:.2e} (f4 storage)"
)

# --- a real spectrum is not exactly sparse, only compressible ---------------
basis = build_dft_basis(bands)
coeffs = to_sparse_domain(extract_pixel(cube, 2, 2), basis)
kept, stats = sparsify(coeffs, 0.1)
print(
    f"pixel (2,2) at T=0.1: kept {np.count_nonzero(kept)}/{bands} coefficients, "
    f"zero fraction {stats.zero_fraction:.2f}, mean |x| {stats.mean_magnitude:.2f}, "
    f"std {stats.std_magnitude:.2f}"
)
