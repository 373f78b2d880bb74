"""Binary container for complex matrices (correlation matrices, snapshot sets).

Layout, all little-endian float64:

* header: ``N_H, N_V, spacing, wavelength, r, azimuth, elevation, rank``
* payload: ``N x K`` complex matrix, row-major, each entry as ``(re, im)``

``N = N_H * N_V`` and ``K`` follows from the payload length.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry
from .manifold import SphericalPoint
from .simulation import SnapshotSet

HEADER_FIELDS = 8
_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class ContainerHeader:
    n_horizontal: int
    n_vertical: int
    spacing: float
    wavelength: float
    r: float
    azimuth: float
    elevation: float
    rank: int

    @property
    def n(self):
        return self.n_horizontal * self.n_vertical

    @property
    def geometry(self):
        return ArrayGeometry(self.n_horizontal, self.n_vertical, self.spacing, self.wavelength)


def write_matrix(path, header, matrix):
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.shape[0] != header.n:
        raise ValueError(f"matrix has {matrix.shape[0]} rows, header implies N={header.n}")
    head = np.array([header.n_horizontal, header.n_vertical, header.spacing, header.wavelength,
                     header.r, header.azimuth, header.elevation, header.rank], dtype=_DTYPE)
    payload = np.empty((matrix.shape[0], 2 * matrix.shape[1]), dtype=_DTYPE)
    payload[:, 0::2] = matrix.real
    payload[:, 1::2] = matrix.imag
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(payload.tobytes())


def read_matrix(path):
    """Return ``(ContainerHeader, complex (N, K) array)``."""
    raw = np.fromfile(path, dtype=_DTYPE)
    if raw.size < HEADER_FIELDS:
        raise ValueError(f"{path}: truncated header")
    h = raw[:HEADER_FIELDS]
    header = ContainerHeader(int(h[0]), int(h[1]), float(h[2]), float(h[3]),
                             float(h[4]), float(h[5]), float(h[6]), int(h[7]))
    body = raw[HEADER_FIELDS:]
    if header.n == 0 or body.size % (2 * header.n):
        raise ValueError(f"{path}: payload of {body.size} floats does not fit N={header.n}")
    pairs = body.reshape(header.n, -1, 2)
    return header, pairs[..., 0] + 1j * pairs[..., 1]


def model_header(geom, model):
    c = model.center
    return ContainerHeader(geom.n_horizontal, geom.n_vertical, geom.spacing, geom.wavelength,
                           c.r, c.azimuth, c.elevation, model.rank)


def save_correlation(path, geom, model):
    write_matrix(path, model_header(geom, model), model.matrix)


def save_snapshots(path, geom, snapshots, location=None, rank=0):
    """Write the observation matrix ``(N, M)``; ``location`` fills the point fields."""
    loc = location or SphericalPoint(1.0, 0.0, 0.0)
    header = ContainerHeader(geom.n_horizontal, geom.n_vertical, geom.spacing, geom.wavelength,
                             loc.r, loc.azimuth, loc.elevation, rank)
    write_matrix(path, header, snapshots.observations)


def load_snapshots(path, noise_variance=float("nan"), seed=-1):
    """Observation-only SnapshotSet; channels are unknown and set to NaN."""
    _, obs = read_matrix(path)
    return SnapshotSet(obs, np.full_like(obs, np.nan), noise_variance, seed)
