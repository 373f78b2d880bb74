"""Quick invariant checks used by ``nfmmse validate``.

Each check returns ``(ok, detail)``; :func:`run_invariants` runs them all on a
(normally desk-scale) configuration and never raises.
"""

import math

import numpy as np

from . import _backend
from ._fallback import steering_rows as _reference_rows
from .correlation import build_correlation, spread_from_elevation
from .estimators import direct_wiener, estimate_noise_variance, wiener_filter
from .geometry import fraunhofer_distance
from .manifold import SphericalPoint, element_distance, steering_batch, steering_block
from .metrics import chordal_distance
from .music import locate, split_snapshots
from .simulation import generate_snapshots


def _random_points(rng, geom, count):
    d_f = fraunhofer_distance(geom)
    return [SphericalPoint(rng.uniform(0.05, 2.0) * d_f, rng.uniform(-1.5, 1.5),
                           rng.uniform(-1.5, 1.5)) for _ in range(count)]


def check_unit_modulus(cfg, rng):
    a = steering_batch(cfg.geometry, _random_points(rng, cfg.geometry, 50))
    dev = float(np.abs(np.abs(a) - 1).max())
    return dev < 1e-12, f"max | |a_n| - 1 | = {dev:.1e}"


def check_euclidean_identity(cfg, rng):
    geom = cfg.geometry
    pts = _random_points(rng, geom, 20)
    a = steering_batch(geom, pts)
    worst = 0.0
    for col, p in enumerate(pts):
        dist = np.array([element_distance(p, v) for v in geom.positions])
        ref = np.exp(1j * geom.wavenumber * (dist - p.r))
        worst = max(worst, float(np.abs(a[:, col] - ref).max()))
    return worst < 1e-9, f"max deviation from direct distances {worst:.1e}"


def check_far_field(cfg, rng):
    geom = cfg.geometry
    p = SphericalPoint(1e6 * fraunhofer_distance(geom), 0.3, -0.2)
    k = np.array([math.cos(p.elevation) * math.cos(p.azimuth),
                  math.cos(p.elevation) * math.sin(p.azimuth), math.sin(p.elevation)])
    plane = np.exp(-1j * geom.wavenumber * geom.positions @ k)
    dev = float(np.abs(steering_batch(geom, [p])[:, 0] - plane).max())
    return dev < 1e-5, f"distance 1e6 d_F vs plane wave: {dev:.1e}"


def check_backend(cfg, rng):
    if _backend.BACKEND != "cython":
        return True, "pure-Python backend in use; nothing to compare"
    geom = cfg.geometry
    pts = np.array([[p.r, p.azimuth, p.elevation] for p in _random_points(rng, geom, 64)])
    fast = steering_block(geom, pts[:, 0], pts[:, 1], pts[:, 2])
    ref = np.empty_like(fast)
    pos = geom.positions
    _reference_rows(np.ascontiguousarray(pos[:, 1]), np.ascontiguousarray(pos[:, 2]),
                    np.ascontiguousarray((pos ** 2).sum(axis=1)), pts[:, 0].copy(),
                    pts[:, 1].copy(), pts[:, 2].copy(), geom.wavenumber, ref)
    dev = float(np.abs(fast - ref).max())
    return dev < 1e-10, f"compiled vs reference kernel {dev:.1e}"


def _true_model(cfg):
    spreads = spread_from_elevation(cfg.ue.r, cfg.ue.elevation, cfg.ue_delta_theta)
    return build_correlation(cfg.geometry, cfg.ue, spreads, cfg.quadrature)


def check_correlation(cfg, rng):
    model = _true_model(cfg)
    a = model.matrix
    n = model.n
    herm = float(np.abs(a - a.conj().T).max())
    trace = abs(float(np.trace(a).real) - n) / n
    low = float(model.eigenvalues.min())
    ok = herm < 1e-10 and trace < 1e-10 and low > -1e-9 * n
    return ok, f"hermitian {herm:.1e}, trace error {trace:.1e}, min eigenvalue {low:.1e}"


def check_wiener_oracle(cfg, rng):
    model = _true_model(cfg)
    n = model.n
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    s = 0.3
    full = model.eigenvectors
    fast = wiener_filter(y, full, model.eigenvalues, s)
    ref = direct_wiener(y, model.matrix, s)
    err = float(np.linalg.norm(fast - ref) / np.linalg.norm(ref))
    return err < 1e-8, f"eigenform vs direct inverse {err:.1e}"


def check_noise_identity(cfg, rng):
    model = _true_model(cfg)
    hist = generate_snapshots(model, cfg.power, cfg.snapshots, cfg.seed)
    fast = estimate_noise_variance(hist, model)
    un = model.noise_basis
    proj = un.conj().T @ hist.observations
    ref = float(np.vdot(proj, proj).real) / (hist.m * un.shape[1])
    err = abs(fast - ref) / ref
    return err < 1e-8, f"complement identity vs explicit projector {err:.1e}"


def check_chordal(cfg, rng):
    n = cfg.geometry.n_elements
    q, _ = np.linalg.qr(rng.standard_normal((n, 6)) + 1j * rng.standard_normal((n, 6)))
    x, y = q[:, :4], q[:, 2:]
    self_d = chordal_distance(x, x)
    sym = abs(chordal_distance(x, y) - chordal_distance(y, x))
    expected = 4 + 4 - 2 * 2
    val = chordal_distance(x, y)
    ok = self_d < 1e-10 and sym < 1e-10 and abs(val - expected) < 1e-10
    return ok, f"d(X,X)={self_d:.1e}, asymmetry {sym:.1e}, overlap case {val:.6f} (expect 4)"


def check_point_source(cfg, rng):
    geom = cfg.geometry
    grid = cfg.grid
    target = grid.point(int(np.ravel_multi_index(
        [np.abs(ax - v).argmin() for ax, v in zip(grid.axes, (cfg.ue.r, cfg.ue.azimuth,
                                                              cfg.ue.elevation))], grid.shape)))
    a = steering_batch(geom, [target])
    found = locate(split_snapshots(a), geom, grid)
    return found == target, f"noiseless source at {target.as_degrees()} -> {found.as_degrees()}"


CHECKS = (
    ("unit_modulus", check_unit_modulus),
    ("euclidean_identity", check_euclidean_identity),
    ("far_field_limit", check_far_field),
    ("backend_equivalence", check_backend),
    ("correlation_normalization", check_correlation),
    ("wiener_direct_oracle", check_wiener_oracle),
    ("noise_complement_identity", check_noise_identity),
    ("chordal_distance", check_chordal),
    ("noiseless_localization", check_point_source),
)


def run_invariants(cfg):
    """Run every check; returns ``[(name, ok, detail), ...]``."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for name, check in CHECKS:
        try:
            ok, detail = check(cfg, rng)
        except Exception as exc:  # report, do not abort the suite
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
