"""Uniform planar array layout in the yz-plane."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """UPA with ``n_horizontal`` columns along y and ``n_vertical`` rows along z.

    Element ``n`` sits at ``(0, (i_h - (N_H-1)/2) * spacing, (i_v - (N_V-1)/2) * spacing)``
    with ``n = i_v * N_H + i_h``, so the centroid is the origin.
    """

    n_horizontal: int
    n_vertical: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if int(self.n_horizontal) != self.n_horizontal or self.n_horizontal < 1:
            raise ValueError(f"n_horizontal must be a positive integer, got {self.n_horizontal!r}")
        if int(self.n_vertical) != self.n_vertical or self.n_vertical < 1:
            raise ValueError(f"n_vertical must be a positive integer, got {self.n_vertical!r}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing!r}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength!r}")
        object.__setattr__(self, "n_horizontal", int(self.n_horizontal))
        object.__setattr__(self, "n_vertical", int(self.n_vertical))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @classmethod
    def half_wavelength(cls, n_horizontal, n_vertical, wavelength):
        return cls(n_horizontal, n_vertical, wavelength / 2, wavelength)

    @property
    def n_elements(self):
        return self.n_horizontal * self.n_vertical

    @cached_property
    def positions(self):
        """(N, 3) read-only array of element coordinates in meters."""
        return element_positions(self)

    @property
    def wavenumber(self):
        return 2 * np.pi / self.wavelength


def element_positions(geom):
    """Return the ``(N, 3)`` element coordinates, enumerated i_V-major then i_H."""
    n_h, n_v, d = geom.n_horizontal, geom.n_vertical, geom.spacing
    y = (np.arange(n_h) - (n_h - 1) / 2) * d
    z = (np.arange(n_v) - (n_v - 1) / 2) * d
    pos = np.zeros((n_v * n_h, 3))
    pos[:, 1] = np.tile(y, n_v)
    pos[:, 2] = np.repeat(z, n_h)
    pos.flags.writeable = False
    return pos


def aperture(geom):
    """Aperture length ``sqrt(N_V**2 + N_H**2) * spacing``.

    Uses element counts rather than ``N - 1`` extents on purpose.
    """
    return float(np.hypot(geom.n_vertical, geom.n_horizontal) * geom.spacing)


def fraunhofer_distance(geom):
    """Near-field/far-field boundary ``2 D**2 / wavelength``."""
    return 2 * aperture(geom) ** 2 / geom.wavelength
