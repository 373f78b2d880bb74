"""Pure-numpy steering kernel, used when the compiled extension is unavailable.

For a point at distance ``r`` along unit direction ``k`` and an element at ``v``
(x-coordinate zero), the element distance is ``rt = |r k - v|`` and the phase
offset relative to the centroid is ``(2 pi / lambda) * (rt - r)``, evaluated as
``(|v|**2 - 2 r k.v) / (rt + r)`` to avoid cancellation at large ``r``.
"""

import numpy as np


def steering_rows(y, z, vv, r, phi, theta, wavenumber, out):
    """Fill ``out[:, :N]`` with cos and ``out[:, N:]`` with sin of the phases."""
    n = y.size
    ct = np.cos(theta)
    kx = ct * np.cos(phi)
    ky = ct * np.sin(phi)
    kz = np.sin(theta)
    rp = r[:, None]
    dy = rp * ky[:, None] - y
    dz = rp * kz[:, None] - z
    rt = np.sqrt((rp * kx[:, None]) ** 2 + dy * dy + dz * dz)
    psi = wavenumber * ((vv - 2.0 * rp * (ky[:, None] * y + kz[:, None] * z)) / (rt + rp))
    np.cos(psi, out=out[:, :n])
    np.sin(psi, out=out[:, n:])
