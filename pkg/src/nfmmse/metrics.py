"""Error metrics: NMSE and chordal distance between subspaces."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonOrthonormalInput, ZeroTruthPower


@dataclass
class TrialRecord:
    estimator_name: str
    nmse: float
    seed: int
    location_error: tuple = None
    nuisance_errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.nmse >= 0:
            raise ValueError(f"nmse must be nonnegative, got {self.nmse}")


def _stack(vectors):
    if isinstance(vectors, np.ndarray):
        return vectors[:, None] if vectors.ndim == 1 else vectors
    return np.column_stack([np.asarray(v) for v in vectors])


def nmse(estimates, truths):
    """Ratio of summed squared errors to summed truth power.

    Accepts matching sequences of vectors or ``(N, T)`` arrays.
    """
    est = _stack(estimates)
    ref = _stack(truths)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    if est.size == 0:
        raise ValueError("nmse needs at least one vector")
    power = np.vdot(ref, ref).real
    if power == 0:
        raise ZeroTruthPower("sum of |h|^2 is zero")
    err = est - ref
    return float(np.vdot(err, err).real / power)


def _check_orthonormal(x, name, tol):
    gram = x.conj().T @ x
    dev = np.abs(gram - np.eye(x.shape[1])).max() if x.shape[1] else 0.0
    if dev > tol:
        raise NonOrthonormalInput(f"{name} columns deviate from orthonormal by {dev:.2e}")


def chordal_distance(x, y, tol=1e-8):
    """``|X X^H - Y Y^H|_F^2`` for orthonormal bases ``X`` and ``Y``.

    Bases of different rank are allowed.  Computed as
    ``rank X + rank Y - 2 |X^H Y|_F^2`` to avoid forming ``N x N`` projectors.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    _check_orthonormal(x, "X", tol)
    _check_orthonormal(y, "Y", tol)
    cross = x.conj().T @ y
    return float(max(x.shape[1] + y.shape[1] - 2 * np.vdot(cross, cross).real, 0.0))
