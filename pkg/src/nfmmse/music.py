"""Subspace split of the sample covariance and 3D MUSIC grid search."""

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .correlation import RANK_THRESHOLD, effective_rank, hermitian_eig, orthonormal_complement
from .errors import EigFailure
from .geometry import fraunhofer_distance
from .manifold import SphericalPoint, steering_block
from .simulation import SnapshotSet

# Denominator floor, relative to N, at points inside the signal span.
_CLAMP = 1e-12
# Floats per steering chunk (cos and sin halves included).
_CHUNK_FLOATS = 1 << 23


def _observations(snapshots):
    if isinstance(snapshots, SnapshotSet):
        return snapshots.observations
    y = np.asarray(snapshots)
    return y[:, None] if y.ndim == 1 else y


def sample_covariance(snapshots):
    """``(1/M) sum_m y(m) y(m)^H`` for a SnapshotSet or an ``(N, M)`` array."""
    y = _observations(snapshots)
    cov = (y @ y.conj().T) / y.shape[1]
    return 0.5 * (cov + cov.conj().T)


class SubspaceSplit:
    """Signal/noise partition of a Hermitian matrix.

    ``eigenvalues`` holds all ``N`` eigenvalues, nonincreasing.  The noise basis
    is built on first access, since grid search only needs the signal part.
    """

    def __init__(self, signal_basis, eigenvalues, noise_basis=None):
        self.signal_basis = signal_basis
        self.eigenvalues = eigenvalues
        self.detected_rank = signal_basis.shape[1]
        if noise_basis is not None:
            self.__dict__["noise_basis"] = noise_basis

    @property
    def n(self):
        return self.signal_basis.shape[0]

    @cached_property
    def noise_basis(self):
        return orthonormal_complement(self.signal_basis)

    def __repr__(self):
        return f"SubspaceSplit(N={self.n}, detected_rank={self.detected_rank})"


def split_subspaces(cov, threshold=RANK_THRESHOLD):
    """Full eigendecomposition of ``cov`` split at the relative-threshold rank."""
    vals, vecs = hermitian_eig(np.asarray(cov))
    rank = effective_rank(vals, threshold)
    return SubspaceSplit(vecs[:, :rank], vals, vecs[:, rank:])


def split_snapshots(snapshots, threshold=RANK_THRESHOLD):
    """Same split as ``split_subspaces(sample_covariance(snapshots))`` via a thin SVD.

    The sample covariance has rank at most ``M``; its nonzero eigenpairs are the
    squared singular values and left singular vectors of ``Y / sqrt(M)``.  The
    remaining eigenvalues are reported as exact zeros.
    """
    y = _observations(snapshots)
    n, m = y.shape
    try:
        u, s, _ = np.linalg.svd(y / math.sqrt(m), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"SVD of snapshot matrix failed: {exc}") from exc
    vals = np.zeros(n)
    vals[: s.size] = s ** 2
    rank = effective_rank(vals, threshold)
    return SubspaceSplit(u[:, :rank], vals)


@dataclass(frozen=True)
class SearchGrid:
    """Rectangular grid in (distance, azimuth, elevation), angles in radians.

    Axis values are ``lo + step * i`` for every ``i`` with value ``<= hi``.
    Points are enumerated r-major, then azimuth, then elevation.
    """

    r_min: float
    r_max: float
    r_step: float
    az_min: float
    az_max: float
    az_step: float
    el_min: float
    el_max: float
    el_step: float

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")
        for name in ("r", "az", "el"):
            lo, hi, step = (getattr(self, f"{name}_{s}") for s in ("min", "max", "step"))
            if not step > 0:
                raise ValueError(f"{name}_step must be positive, got {step}")
            if hi < lo:
                raise ValueError(f"{name} range is empty: [{lo}, {hi}]")

    @classmethod
    def from_degrees(cls, r_min, r_max, r_step, az_min, az_max, az_step, el_min, el_max, el_step):
        rad = math.radians
        return cls(r_min, r_max, r_step, rad(az_min), rad(az_max), rad(az_step),
                   rad(el_min), rad(el_max), rad(el_step))

    @classmethod
    def default_for(cls, geom, r_step=0.5, angle_step_deg=0.5):
        """``r`` in ``[r_step, d_F]``, both angles in ``[-90, 90]`` degrees."""
        return cls.from_degrees(r_step, fraunhofer_distance(geom), r_step,
                                -90.0, 90.0, angle_step_deg, -90.0, 90.0, angle_step_deg)

    @staticmethod
    def _axis(lo, hi, step):
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    @cached_property
    def axes(self):
        return (self._axis(self.r_min, self.r_max, self.r_step),
                self._axis(self.az_min, self.az_max, self.az_step),
                self._axis(self.el_min, self.el_max, self.el_step))

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def point(self, index):
        """Grid point at linear ``index``."""
        i, j, k = np.unravel_index(index, self.shape)
        r, az, el = self.axes
        return SphericalPoint(r[i], az[j], el[k])

    def coords(self, start, stop):
        """``(r, az, el)`` arrays for linear indices ``[start, stop)``."""
        i, j, k = np.unravel_index(np.arange(start, stop), self.shape)
        r, az, el = self.axes
        return r[i], az[j], el[k]


def music_spectrum(split, geom, p):
    """MUSIC metric ``1 / (a^H Qn Qn^H a)`` via ``N - |Qs^H a|^2``."""
    n = geom.n_elements
    blk = steering_block(geom, [p.r], [p.azimuth], [p.elevation])
    a = blk[0, :n] + 1j * blk[0, n:]
    proj = split.signal_basis.conj().T @ a
    denom = n - float(np.vdot(proj, proj).real)
    return 1.0 / max(denom, _CLAMP * n)


def _stacked_basis(splits, n):
    """Real ``(2N, 2K)`` matrix so that ``[cos | sin] @ basis`` gives Re/Im of ``Qs^H a``."""
    cols, owner = [], []
    for t, split in enumerate(splits):
        q = split.signal_basis
        if q.shape[0] != n:
            raise ValueError(f"split {t} has dimension {q.shape[0]}, geometry has {n}")
        cols.append(np.vstack([q.real, q.imag]))
        cols.append(np.vstack([-q.imag, q.real]))
        owner.extend([t] * (2 * q.shape[1]))
    if not owner:
        return np.zeros((2 * n, 0)), np.zeros(0, dtype=int)
    return np.ascontiguousarray(np.hstack(cols)), np.asarray(owner)


def _scan(splits, geom, grid, indices=None):
    """Yield ``(linear_indices, denominators)`` chunks, denominators shaped ``(P, T)``."""
    n = geom.n_elements
    basis, owner = _stacked_basis(splits, n)
    n_split = len(splits)
    chunk = max(1, _CHUNK_FLOATS // (2 * n))
    total = grid.size if indices is None else indices.size
    buf = np.empty((chunk, 2 * n))
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        if indices is None:
            idx = np.arange(start, stop)
            r, az, el = grid.coords(start, stop)
        else:
            idx = indices[start:stop]
            i, j, k = np.unravel_index(idx, grid.shape)
            ra, aa, ea = grid.axes
            r, az, el = ra[i], aa[j], ea[k]
        blk = steering_block(geom, r, az, el, out=buf[: stop - start])
        power = np.zeros((stop - start, n_split))
        if owner.size:
            g = blk @ basis
            g *= g
            # Sum squared Re/Im parts per split; column groups are contiguous.
            bounds = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
            sums = np.add.reduceat(g, bounds, axis=1)
            power[:, owner[bounds]] = sums
        yield idx, np.maximum(n - power, _CLAMP * n)


def _argmin_indices(splits, geom, grid, indices=None):
    best = np.full(len(splits), np.inf)
    best_idx = np.zeros(len(splits), dtype=np.int64)
    for idx, denom in _scan(splits, geom, grid, indices):
        pos = np.argmin(denom, axis=0)
        vals = denom[pos, np.arange(len(splits))]
        better = vals < best
        best[better] = vals[better]
        best_idx[better] = idx[pos[better]]
    return best_idx


def _refine_indices(grid, coarse_index, factor):
    """Fine-grid indices within ``factor`` steps of a coarse peak on every axis."""
    centre = np.unravel_index(coarse_index, grid.shape)
    ranges = [np.arange(max(0, c - factor), min(s, c + factor + 1)) for c, s in zip(centre, grid.shape)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index([m.ravel() for m in mesh], grid.shape)


def locate_many(splits, geom, grid, coarse_factor=None):
    """MUSIC peak for several splits, sharing the steering computation.

    Returns a list of SphericalPoint, one per split.  Ties go to the smallest
    linear grid index.  With ``coarse_factor`` set, every ``coarse_factor``-th
    point per axis is scanned first and the peak is then refined on the full
    grid within ``coarse_factor`` steps of the coarse maximum.
    """
    splits = list(splits)
    if not splits:
        return []
    if coarse_factor is None or coarse_factor <= 1:
        best = _argmin_indices(splits, geom, grid)
    else:
        sub = [np.arange(0, s, coarse_factor) for s in grid.shape]
        mesh = np.meshgrid(*sub, indexing="ij")
        coarse = np.ravel_multi_index([m.ravel() for m in mesh], grid.shape)
        first = _argmin_indices(splits, geom, grid, coarse)
        best = np.array([
            _argmin_indices([s], geom, grid, _refine_indices(grid, c, coarse_factor))[0]
            for s, c in zip(splits, first)])
    return [grid.point(int(i)) for i in best]


def locate(split, geom, grid, coarse_factor=None):
    """Grid point maximizing the MUSIC metric for one split."""
    return locate_many([split], geom, grid, coarse_factor)[0]


def spectrum_values(split, geom, grid):
    """MUSIC metric at every grid point, in linear-index order."""
    out = np.empty(grid.size)
    for idx, denom in _scan([split], geom, grid):
        out[idx] = 1.0 / denom[:, 0]
    return out


def write_spectrum_csv(path, split, geom, grid):
    """Dump ``r, phi_deg, theta_deg, metric`` rows for every grid point."""
    metric = spectrum_values(split, geom, grid)
    r, az, el = grid.coords(0, grid.size)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "phi_deg", "theta_deg", "metric"])
        for row in zip(r, np.rad2deg(az), np.rad2deg(el), metric):
            writer.writerow([f"{v:.10g}" for v in row])
