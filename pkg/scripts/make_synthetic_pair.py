"""
Synthetic Input Script for metamorph

Writes a pair of grayscale test images: a disk translated by a few pixels, or
a Gaussian bump shifted the same way.
"""

import sys
import os
import argparse
from pathlib import Path

import numpy as np

# Add the parent directory to the path so we can import the metamorph modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from metamorph.io_cli.images import to_uint8, write_raster


def disk(size: int, center_x: float, radius: float) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(float)
    return ((x - center_x) ** 2 + (y - (size - 1) / 2) ** 2 <= radius ** 2).astype(float)


def bump(size: int, center_x: float, width: float) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(float)
    return np.exp(-((x - center_x) ** 2 + (y - (size - 1) / 2) ** 2) / (2 * width ** 2))


def make_pair(kind: str, size: int, shift: float):
    """Return the two pixel arrays of a translating pair."""
    start = (size - 1) / 2 - shift / 2
    if kind == "disk":
        return disk(size, start, size / 5), disk(size, start + shift, size / 5)
    return bump(size, start, size / 8), bump(size, start + shift, size / 8)


def main():
    parser = argparse.ArgumentParser(description="Write a synthetic image pair")
    parser.add_argument("--kind", choices=["disk", "bump"], default="disk")
    parser.add_argument("--size", type=int, default=33)
    parser.add_argument("--shift", type=float, default=3.0)
    parser.add_argument("--out", default="inputs")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    first, second = make_pair(args.kind, args.size, args.shift)
    write_raster(out / f"{args.kind}_a.pgm", to_uint8(first))
    write_raster(out / f"{args.kind}_b.pgm", to_uint8(second))
    print(f"Wrote {args.kind} pair ({args.size}x{args.size}, shift {args.shift}) to {out}")


if __name__ == "__main__":
    main()
