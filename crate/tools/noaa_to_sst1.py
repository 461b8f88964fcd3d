#!/usr/bin/env python3
"""Convert NOAA OISST v2 weekly-mean NetCDF files into the SST1/MSK1 binaries.

    python3 tools/noaa_to_sst1.py --mask lsmask.nc \
        --sst sst.wkmean.1981-1989.nc sst.wkmean.1990-present.nc \
        --weeks 1914 --out data/

Writes data/sst.bin (SST1: magic, T/H/W as u32 LE, f32 LE values, land NaN)
and data/mask.msk (MSK1: magic, H/W as u32 LE, one byte per cell, 1 = ocean).
Rows run north to south and columns eastward from 0 degrees, which is the
orientation the loader expects. Cells missing in any kept week become land.
"""

import argparse
import struct
from pathlib import Path

import numpy as np


def read_var(path, name):
    """Return (values as float64 with NaN for missing, lat, lon)."""
    try:
        from scipy.io import netcdf_file

        with netcdf_file(path, "r", mmap=False) as f:
            var = f.variables[name]
            raw = np.array(var.data)
            attrs = dict(var._attributes)
            lat = np.array(f.variables["lat"].data, dtype=np.float64)
            lon = np.array(f.variables["lon"].data, dtype=np.float64)
    except (TypeError, ValueError, OSError):
        import h5py

        with h5py.File(path, "r") as f:
            var = f[name]
            raw = var[()]
            attrs = {k: v for k, v in var.attrs.items()}
            lat = f["lat"][()].astype(np.float64)
            lon = f["lon"][()].astype(np.float64)
    values = raw.astype(np.float64)
    missing = np.zeros(values.shape, dtype=bool)
    for key in ("missing_value", "_FillValue"):
        if key in attrs:
            for m in np.atleast_1d(attrs[key]):
                missing |= raw == m
    scale = float(np.atleast_1d(attrs.get("scale_factor", 1.0))[0])
    offset = float(np.atleast_1d(attrs.get("add_offset", 0.0))[0])
    values = values * scale + offset
    values[missing] = np.nan
    return values, lat, lon


def orient(values, lat, lon):
    """Flip to north-to-south rows and roll columns to start at 0 degrees east."""
    if lat[0] < lat[-1]:
        values = values[..., ::-1, :]
        lat = lat[::-1]
    lon = np.mod(lon, 360.0)
    order = np.argsort(lon)
    return values[..., order], lat, lon[order]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sst", nargs="+", required=True, help="weekly-mean files in time order")
    ap.add_argument("--mask", required=True, help="land-sea mask file (1 = ocean)")
    ap.add_argument("--weeks", type=int, default=1914, help="keep the first N weeks")
    ap.add_argument("--sst-var", default="sst")
    ap.add_argument("--mask-var", default="mask")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    parts = []
    grid = None
    for p in args.sst:
        v, lat, lon = read_var(p, args.sst_var)
        v, lat, lon = orient(v, lat, lon)
        if grid is not None and (not np.allclose(lat, grid[0]) or not np.allclose(lon, grid[1])):
            raise SystemExit(f"{p}: grid differs from the first file")
        grid = (lat, lon)
        parts.append(v)
    sst = np.concatenate(parts, axis=0)[: args.weeks]
    if sst.shape[0] < args.weeks:
        raise SystemExit(f"only {sst.shape[0]} weeks available, {args.weeks} requested")

    m, mlat, mlon = read_var(args.mask, args.mask_var)
    m, mlat, mlon = orient(m, mlat, mlon)
    m = m.reshape(-1, *m.shape[-2:])[0]
    if m.shape != sst.shape[1:]:
        raise SystemExit(f"mask shape {m.shape} does not match fields {sst.shape[1:]}")
    ocean = (m == 1) & np.all(np.isfinite(sst), axis=0)
    dropped = int(np.sum((m == 1) & ~ocean))

    t, h, w = sst.shape
    sst = np.where(ocean[None, :, :], sst, np.nan).astype("<f4")
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "sst.bin", "wb") as f:
        f.write(b"SST1" + struct.pack("<III", t, h, w))
        f.write(sst.tobytes(order="C"))
    with open(args.out / "mask.msk", "wb") as f:
        f.write(b"MSK1" + struct.pack("<II", h, w))
        f.write(ocean.astype(np.uint8).tobytes(order="C"))
    print(f"{t} weeks on {h}x{w}; {int(ocean.sum())} ocean cells ({dropped} masked for missing values)")


if __name__ == "__main__":
    main()
