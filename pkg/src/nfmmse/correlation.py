"""Spatial correlation matrices integrated over a distance/angle spread region.

The matrix is ``A = sum_i w_i a(x_i) a(x_i)^H`` over tensor-product
Gauss-Legendre nodes ``x_i`` of the box ``center +- spreads``.  It is kept in
factored form ``A = B B^H`` with ``B = [sqrt(w_i) a(x_i)]`` so eigenpairs come
from a thin SVD of ``B`` whenever there are fewer nodes than elements.
"""

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import EigFailure, InvalidRegion, QuadratureUnderresolved
from .manifold import SphericalPoint, steering_block

HALF_PI = math.pi / 2

#: Eigenvalues at or above this fraction of the largest count toward the rank.
RANK_THRESHOLD = 1e-2

_ANGLE_TOL = 1e-12
_MAX_CHUNK = 2048


@dataclass(frozen=True)
class SpreadTriplet:
    """Half-widths of the region in distance (m), azimuth and elevation (rad)."""

    delta_r: float
    delta_phi: float
    delta_theta: float

    def __post_init__(self):
        for name in ("delta_r", "delta_phi", "delta_theta"):
            val = getattr(self, name)
            if not val >= 0:
                raise InvalidRegion(f"{name} must be nonnegative, got {val!r}")
            object.__setattr__(self, name, float(val))

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre settings.

    ``nodes`` is the per-dimension count.  With ``adaptive`` on, a dimension whose
    integrand oscillates faster than ``nodes`` can resolve gets more nodes: the
    count is raised to ``ceil(0.6 * w + 6)`` where ``w`` bounds the phase swing
    of ``a_m conj(a_n)`` over half the interval.  ``check`` doubles the counts
    once and warns with :class:`QuadratureUnderresolved` if the matrix moves by
    more than ``tol`` (Frobenius-relative).
    """

    nodes: int = 8
    adaptive: bool = True
    check: bool = False
    tol: float = 1e-3

    def __post_init__(self):
        if self.nodes < 1:
            raise ValueError(f"nodes must be >= 1, got {self.nodes}")


def uniform_density(r, phi, theta):
    """Uniform scattering density over the box; weights are normalized afterwards."""
    return np.ones_like(r)


def effective_rank(eigenvalues, threshold=RANK_THRESHOLD):
    """Count eigenvalues with ``lambda_i / lambda_1 >= threshold``."""
    eigenvalues = np.asarray(eigenvalues)
    if eigenvalues.size == 0 or not eigenvalues[0] > 0:
        return 0
    return int(np.count_nonzero(eigenvalues >= threshold * eigenvalues[0]))


def orthonormal_complement(basis):
    """Orthonormal basis of the complement of the column space of ``basis``."""
    n, k = basis.shape
    if k >= n:
        return np.zeros((n, 0), dtype=basis.dtype)
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, k:]


class CorrelationModel:
    """Normalized spatial correlation matrix plus its eigenstructure.

    Attributes
    ----------
    center : SphericalPoint
    spreads : SpreadTriplet
    beta : float
        Linear average channel power; the channel covariance is ``beta * matrix``.
    eigenvalues : ndarray
        All ``N`` eigenvalues of ``matrix``, nonincreasing.
    rank : int
        Number of eigenvalues within ``RANK_THRESHOLD`` of the largest.
    """

    def __init__(self, center, spreads, matrix, eigenvalues, leading_vectors, beta=1.0,
                 nodes=(1, 1, 1), bounds=None):
        self.center = center
        self.spreads = spreads
        self.matrix = matrix
        self.eigenvalues = eigenvalues
        self._leading = leading_vectors
        self.beta = float(beta)
        self.nodes = tuple(nodes)
        self.bounds = bounds
        self.rank = effective_rank(eigenvalues)
        matrix.flags.writeable = False
        eigenvalues.flags.writeable = False

    @property
    def n(self):
        return self.matrix.shape[0]

    @cached_property
    def eigenvectors(self):
        """Full ``(N, N)`` unitary eigenvector matrix, columns ordered like ``eigenvalues``."""
        lead = self._leading
        if lead.shape[1] == self.n:
            return lead
        return np.hstack([lead, orthonormal_complement(lead)])

    @property
    def signal_basis(self):
        """``(N, rank)`` eigenvectors of the retained eigenvalues."""
        return self._leading[:, : self.rank]

    @property
    def signal_eigenvalues(self):
        return self.eigenvalues[: self.rank]

    @property
    def noise_basis(self):
        return self.eigenvectors[:, self.rank:]

    def with_beta(self, beta):
        """Copy sharing the matrix and eigenstructure but with another power."""
        other = object.__new__(CorrelationModel)
        other.__dict__.update(self.__dict__)
        other.beta = float(beta)
        return other

    def covariance(self):
        return self.beta * self.matrix

    def __repr__(self):
        return (f"CorrelationModel(N={self.n}, rank={self.rank}, center={self.center}, "
                f"spreads={self.spreads}, beta={self.beta:g})")


def region_bounds(center, spreads, clip=False):
    """Integration limits ``((r_lo, r_hi), (phi_lo, phi_hi), (theta_lo, theta_hi))``.

    Raises InvalidRegion if the box leaves ``r > 0`` or ``[-pi/2, pi/2]``, unless
    ``clip`` is set, in which case the box is intersected with the valid domain.
    """
    r_lo, r_hi = center.r - spreads.delta_r, center.r + spreads.delta_r
    p_lo, p_hi = center.azimuth - spreads.delta_phi, center.azimuth + spreads.delta_phi
    t_lo, t_hi = center.elevation - spreads.delta_theta, center.elevation + spreads.delta_theta
    if clip:
        r_lo = max(r_lo, 1e-3 * center.r)
        p_lo, p_hi = max(p_lo, -HALF_PI), min(p_hi, HALF_PI)
        t_lo, t_hi = max(t_lo, -HALF_PI), min(t_hi, HALF_PI)
    else:
        if r_lo <= 0:
            raise InvalidRegion(f"distance bound r - delta_r = {r_lo:g} must be positive")
        for name, lo, hi in (("azimuth", p_lo, p_hi), ("elevation", t_lo, t_hi)):
            if lo < -HALF_PI - _ANGLE_TOL or hi > HALF_PI + _ANGLE_TOL:
                raise InvalidRegion(f"{name} bounds [{lo:g}, {hi:g}] exit [-pi/2, pi/2]")
    return (r_lo, r_hi), (p_lo, p_hi), (t_lo, t_hi)


def _node_counts(geom, bounds, spreads, quad):
    reach = float(np.sqrt((geom.positions ** 2).sum(axis=1).max()))
    k = geom.wavenumber
    (r_lo, r_hi), (p_lo, p_hi), (t_lo, t_hi) = bounds
    # Half-interval phase swing of a_m conj(a_n); pairs are at most 2*reach apart.
    swings = (
        0.5 * (r_hi - r_lo) * k * 2 * reach ** 2 / max(r_lo, 1e-12) ** 2,
        0.5 * (p_hi - p_lo) * k * 2 * reach,
        0.5 * (t_hi - t_lo) * k * 2 * reach,
    )
    widths = (spreads.delta_r, spreads.delta_phi, spreads.delta_theta)
    counts = []
    for width, swing in zip(widths, swings):
        if width == 0:
            counts.append(1)
        elif quad.adaptive:
            counts.append(max(quad.nodes, math.ceil(0.6 * swing + 6)))
        else:
            counts.append(quad.nodes)
    return tuple(counts)


def _nodes_1d(lo, hi, count):
    if count == 1:
        return np.array([(lo + hi) / 2]), np.array([1.0])
    x, w = leggauss(count)
    return (hi - lo) / 2 * x + (hi + lo) / 2, w / 2


def _quadrature(bounds, counts, density):
    axes = [_nodes_1d(lo, hi, c) for (lo, hi), c in zip(bounds, counts)]
    rr, pp, tt = np.meshgrid(axes[0][0], axes[1][0], axes[2][0], indexing="ij")
    wr, wp, wt = np.meshgrid(axes[0][1], axes[1][1], axes[2][1], indexing="ij")
    r, phi, theta = rr.ravel(), pp.ravel(), tt.ravel()
    w = (wr * wp * wt).ravel() * density(r, phi, theta)
    total = w.sum()
    if not total > 0:
        raise InvalidRegion("scattering density integrates to zero over the region")
    return r, phi, theta, w / total


def _factor(geom, r, phi, theta, w, start, stop):
    n = geom.n_elements
    blk = steering_block(geom, r[start:stop], phi[start:stop], theta[start:stop])
    sw = np.sqrt(w[start:stop])
    b = np.empty((n, stop - start), dtype=complex)
    b.real = (blk[:, :n] * sw[:, None]).T
    b.imag = (blk[:, n:] * sw[:, None]).T
    return b


def _assemble(geom, r, phi, theta, w):
    """Return ``(matrix, eigenvalues, leading_vectors)`` for ``sum w_i a_i a_i^H``."""
    n = geom.n_elements
    q = r.size
    if q <= n:
        b = _factor(geom, r, phi, theta, w, 0, q)
        b *= math.sqrt(n / np.vdot(b, b).real)
        try:
            u, s, _ = np.linalg.svd(b, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise EigFailure(f"SVD of correlation factor failed: {exc}") from exc
        matrix = b @ b.conj().T
        matrix = 0.5 * (matrix + matrix.conj().T)
        vals = np.zeros(n)
        vals[: s.size] = s ** 2
        return matrix, vals, u
    matrix = np.zeros((n, n), dtype=complex)
    for start in range(0, q, _MAX_CHUNK):
        b = _factor(geom, r, phi, theta, w, start, min(q, start + _MAX_CHUNK))
        matrix += b @ b.conj().T
    matrix = 0.5 * (matrix + matrix.conj().T)
    matrix *= n / np.trace(matrix).real
    vals, vecs = hermitian_eig(matrix)
    return matrix, vals, vecs


def hermitian_eig(matrix):
    """Eigenpairs of a Hermitian matrix sorted by nonincreasing eigenvalue."""
    try:
        vals, vecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(f"Hermitian eigensolver did not converge: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def build_correlation(geom, center, spreads, quadrature=None, *, beta=1.0, clip=False,
                      density=uniform_density):
    """Integrate ``a a^H`` against ``density`` over ``center +- spreads``.

    Parameters
    ----------
    geom : ArrayGeometry
    center : SphericalPoint
    spreads : SpreadTriplet
        Zero entries collapse that dimension to the center value.
    quadrature : QuadratureSpec, optional
    beta : float
        Average power stored on the returned model.
    clip : bool
        Intersect the region with the valid domain instead of raising.
    density : callable
        ``density(r, phi, theta)`` evaluated at the nodes; normalized to unit mass.

    Returns
    -------
    CorrelationModel
        Matrix normalized to trace ``N``.
    """
    quadrature = quadrature or QuadratureSpec()
    bounds = region_bounds(center, spreads, clip=clip)
    counts = _node_counts(geom, bounds, spreads, quadrature)
    r, phi, theta, w = _quadrature(bounds, counts, density)
    matrix, vals, vecs = _assemble(geom, r, phi, theta, w)
    if quadrature.check and max(counts) > 1:
        doubled = tuple(2 * c if c > 1 else 1 for c in counts)
        ref, _, _ = _assemble(geom, *_quadrature(bounds, doubled, density))
        change = np.linalg.norm(ref - matrix) / np.linalg.norm(ref)
        if change > quadrature.tol:
            warnings.warn(
                f"correlation matrix changed by {change:.2e} when doubling nodes {counts}",
                QuadratureUnderresolved, stacklevel=2)
    return CorrelationModel(center, spreads, matrix, vals, vecs, beta=beta, nodes=counts,
                            bounds=bounds)


def spread_from_elevation(r_hat, theta_hat, delta_theta_bar, clip=False):
    """Couple the distance and azimuth spreads to an elevation spread.

    ``delta_r = |r (cos(theta - dtheta) - cos(theta + dtheta)) / 2|`` and
    ``delta_phi = arctan(delta_r / (r cos theta))``.  The absolute value fixes
    the sign for negative elevations.
    """
    if not r_hat > 0:
        raise InvalidRegion(f"r_hat must be positive, got {r_hat!r}")
    if delta_theta_bar < 0:
        raise InvalidRegion(f"elevation spread must be nonnegative, got {delta_theta_bar!r}")
    if not clip and abs(theta_hat) + delta_theta_bar > HALF_PI + _ANGLE_TOL:
        raise InvalidRegion(
            f"|theta_hat| + delta_theta_bar = {abs(theta_hat) + delta_theta_bar:g} exceeds pi/2")
    delta_r = abs(r_hat * (math.cos(theta_hat - delta_theta_bar)
                           - math.cos(theta_hat + delta_theta_bar)) / 2)
    cos_t = math.cos(theta_hat)
    delta_phi = math.atan(delta_r / (r_hat * cos_t)) if cos_t > 0 else HALF_PI
    if not clip and delta_r >= r_hat:
        raise InvalidRegion(f"distance spread {delta_r:g} reaches the origin")
    return SpreadTriplet(delta_r, delta_phi, delta_theta_bar)


def isotropic_spreads(r_hat):
    """Spreads covering the whole front hemisphere at distance ``r_hat``."""
    return SpreadTriplet(spread_from_elevation(r_hat, 0.0, HALF_PI).delta_r, HALF_PI, HALF_PI)


def isotropic_correlation(geom, r_hat, quadrature=None, *, beta=1.0):
    """Correlation over all azimuths and elevations at distance ``r_hat``."""
    center = SphericalPoint(r_hat, 0.0, 0.0)
    return build_correlation(geom, center, isotropic_spreads(r_hat), quadrature, beta=beta)
