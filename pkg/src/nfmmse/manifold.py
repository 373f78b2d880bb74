"""Spherical-wavefront distances and near-field array response vectors."""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DegeneratePoint

_HALF_PI = np.pi / 2

# Radicand floor |r k - v|**2 / r**2 below which the source sits on an element.
_RADICAND_FLOOR = 1e-24


@dataclass(frozen=True)
class SphericalPoint:
    """Source location: distance ``r`` (m), ``azimuth`` and ``elevation`` (rad)."""

    r: float
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r!r}")
        for name in ("azimuth", "elevation"):
            val = getattr(self, name)
            if not -_HALF_PI - 1e-12 <= val <= _HALF_PI + 1e-12:
                raise ValueError(f"{name} must lie in [-pi/2, pi/2], got {val!r}")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "azimuth", float(self.azimuth))
        object.__setattr__(self, "elevation", float(self.elevation))

    @classmethod
    def from_degrees(cls, r, azimuth_deg, elevation_deg):
        return cls(r, np.deg2rad(azimuth_deg), np.deg2rad(elevation_deg))

    def as_degrees(self):
        """``(r, azimuth_deg, elevation_deg)`` tuple."""
        return (self.r, float(np.rad2deg(self.azimuth)), float(np.rad2deg(self.elevation)))


def direction_vector(p):
    """Unit vector ``(cos el cos az, cos el sin az, sin el)``."""
    ct = np.cos(p.elevation)
    return np.array([ct * np.cos(p.azimuth), ct * np.sin(p.azimuth), np.sin(p.elevation)])


def element_distance(p, v):
    """Distance from the source at ``p`` to an element at position ``v``.

    Evaluated as the Euclidean norm ``|r k - v|``, which is the expanded
    square-root form without its cancellation at large ``r``.
    """
    v = np.asarray(v, dtype=float)
    diff = p.r * direction_vector(p) - v
    dist = float(np.sqrt(diff @ diff))
    if (dist / p.r) ** 2 <= _RADICAND_FLOOR:
        raise DegeneratePoint(f"source {p} coincides with element at {tuple(v)}")
    return dist


def _check_degenerate(geom, coords):
    """Raise DegeneratePoint naming the first point that lies on an element."""
    pos = geom.positions
    reach = np.sqrt((pos ** 2).sum(axis=1).max())
    for i in np.flatnonzero(coords[:, 0] <= reach * (1 + 1e-9)):
        r, phi, theta = coords[i]
        k = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)])
        rad = ((r * k - pos) ** 2).sum(axis=1).min() / r ** 2
        if rad <= _RADICAND_FLOOR:
            raise DegeneratePoint(f"point index {i} (r={r}, az={phi}, el={theta}) lies on an element")


def _as_coords(points):
    if isinstance(points, SphericalPoint):
        points = [points]
    if isinstance(points, np.ndarray):
        arr = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
    else:
        arr = np.array([(p.r, p.azimuth, p.elevation) for p in points], dtype=float).reshape(-1, 3)
    return arr


def steering_block(geom, r, phi, theta, out=None):
    """Real/imaginary parts of steering vectors as one ``(P, 2N)`` float array.

    Row ``i`` holds ``cos`` of the element phases in its first ``N`` columns and
    ``sin`` in the last ``N``.  This layout lets callers project many points onto
    a basis with a single real matrix product.
    """
    r = np.ascontiguousarray(r, dtype=float)
    phi = np.ascontiguousarray(phi, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    n = geom.n_elements
    if out is None:
        out = np.empty((r.size, 2 * n))
    pos = geom.positions
    y = np.ascontiguousarray(pos[:, 1])
    z = np.ascontiguousarray(pos[:, 2])
    vv = y * y + z * z
    _backend.steering_rows(y, z, vv, r, phi, theta, geom.wavenumber, out)
    return out


def steering_vector(geom, p):
    """Near-field response ``exp(j 2 pi / lambda * (r_n - r))`` for every element.

    Returns a complex ``(N,)`` array.  The phase reference is the array centroid.
    """
    return steering_batch(geom, [p])[:, 0]


def steering_batch(geom, points):
    """Steering vectors for many points as the columns of a complex ``(N, P)`` array.

    ``points`` is a sequence of :class:`SphericalPoint` or a ``(P, 3)`` array of
    ``(r, azimuth, elevation)`` rows.  Each column is bit-identical to
    :func:`steering_vector` for that point.
    """
    coords = _as_coords(points)
    if coords.shape[0] == 0:
        raise ValueError("steering_batch needs at least one point")
    _check_degenerate(geom, coords)
    n = geom.n_elements
    block = steering_block(geom, coords[:, 0], coords[:, 1], coords[:, 2])
    out = np.empty((n, coords.shape[0]), dtype=complex)
    out.real = block[:, :n].T
    out.imag = block[:, n:].T
    return out
