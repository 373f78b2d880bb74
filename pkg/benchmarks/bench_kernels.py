"""Steering-block kernel timing: compiled extension vs numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--points P] [--repeat R]``.
Prints ns per (point, element) pair for each available backend at desk and
full (64x32) array size, plus the maximum deviation between the two.
"""

import argparse
import time

import numpy as np

from nfmmse import _fallback
from nfmmse.geometry import ArrayGeometry

try:
    from nfmmse import _kernels
except ImportError:
    _kernels = None


def _inputs(geom, points, rng):
    pos = geom.positions
    y = np.ascontiguousarray(pos[:, 1])
    z = np.ascontiguousarray(pos[:, 2])
    sq = np.ascontiguousarray((pos ** 2).sum(axis=1))
    r = rng.uniform(1.0, 10.0, points)
    phi = rng.uniform(-1.2, 1.2, points)
    theta = rng.uniform(-1.2, 1.2, points)
    return y, z, sq, r, phi, theta


def time_kernel(func, geom, points, repeat, rng):
    y, z, sq, r, phi, theta = _inputs(geom, points, rng)
    out = np.empty((points, 2 * geom.n_elements))
    func(y, z, sq, r, phi, theta, geom.wavenumber, out)  # warm-up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(y, z, sq, r, phi, theta, geom.wavenumber, out)
        best = min(best, time.perf_counter() - t0)
    return best / (points * geom.n_elements) * 1e9, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=4096)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    for label, geom in (("16x8", ArrayGeometry.half_wavelength(16, 8, 0.003)),
                        ("64x32", ArrayGeometry.half_wavelength(64, 32, 0.003))):
        ref_ns, ref = time_kernel(_fallback.steering_rows, geom, args.points, args.repeat,
                                  np.random.default_rng(1))
        line = f"{label:>6}  numpy {ref_ns:7.2f} ns/elem"
        if _kernels is not None:
            fast_ns, fast = time_kernel(_kernels.steering_rows, geom, args.points, args.repeat,
                                        np.random.default_rng(1))
            dev = np.abs(fast - ref).max()
            line += f"  cython {fast_ns:7.2f} ns/elem  speedup {ref_ns / fast_ns:5.1f}x  max dev {dev:.1e}"
        else:
            line += "  cython unavailable"
        print(line)


if __name__ == "__main__":
    main()
