#!/usr/bin/env python3
"""Converter stub: raw band-sequential binary volume -> HSC.

Covers the common case of a headerless BSQ dump with known dimensions, as
produced by exporting a MATLAB array or stripping an ENVI header by hand:

    python3 scripts/convert_raw_to_hsc.py scene.raw --m 200 --n 200 \
        --bands 103 --dtype f32 --normalize -o scene.hsc

``--dtype`` names the source element type (f32, f64, u16, u8; little endian).
``--normalize`` min-max scales the whole cube into [0, 1], which is the range
the reconstruction defaults are tuned for. Anything fancier (ENVI headers,
interleave conversion, wavelength metadata) is out of scope; do that with
your usual tools and feed the flat BSQ here.
"""

import argparse
import sys

import numpy as np

from hsldmm import DataCube
from hsldmm.hsio import write_cube

DTYPES = {"f32": "<f4", "f64": "<f8", "u16": "<u2", "u8": "u1"}


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input")
    ap.add_argument("--m", type=int, required=True)
    ap.add_argument("--n", type=int, required=True)
    ap.add_argument("--bands", type=int, required=True)
    ap.add_argument("--dtype", choices=sorted(DTYPES), default="f32")
    ap.add_argument("--normalize", action="store_true",
                    help="min-max scale the cube into [0, 1]")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()

    count = args.m * args.n * args.bands
    raw = np.fromfile(args.input, dtype=DTYPES[args.dtype])
    if raw.size != count:
        print(f"error: file holds {raw.size} elements, dims imply {count}", file=sys.stderr)
        return 1
    values = raw.astype(np.float64).reshape(args.bands, args.m, args.n)
    if args.normalize:
        lo, hi = values.min(), values.max()
        if hi > lo:
            values = (values - lo) / (hi - lo)
    write_cube(args.output, DataCube(values))
    print(f"wrote {args.output}: m={args.m} n={args.n} B={args.bands}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
