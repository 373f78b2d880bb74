"""Monte Carlo sweep harness.

Every trial draws an ``M``-snapshot history and an independent current
observation from the true model.  Seeds depend only on ``(seed, trial)``, so
all sweep points see the same underlying channel and noise draws.
"""

import csv
import hashlib
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import container
from .correlation import (
    CorrelationModel, build_correlation, isotropic_spreads, spread_from_elevation,
)
from .errors import NFMMSEError
from .estimators import (
    estimate_iso, estimate_ls, estimate_mmse, estimate_nuisances, estimate_sample,
    parametric_filter,
)
from .manifold import SphericalPoint
from .metrics import TrialRecord, chordal_distance
from .music import locate_many, split_snapshots
from .simulation import generate_snapshots

log = logging.getLogger(__name__)

SUMMARY_HEADER = ("sweep_value", "estimator", "nmse_median", "nmse_mean", "trials", "failures")
CHORDAL_HEADER = ("sweep_value", "subspace", "dc_median", "dc_mean", "trials")
TRIALS_HEADER = ("sweep_value", "trial", "estimator", "nmse", "seed", "r_error", "az_error_deg",
                 "el_error_deg", "sigma_w2_rel_error", "beta_rel_error")
_PARAM_DEPENDENT = ("param", "samp", "iso")
_HISTORY, _CURRENT = 0, 1


def default_threads():
    try:
        return max(1, int(os.environ.get("NFMMSE_THREADS", "1")))
    except ValueError:
        return 1


def trial_seed(seed, trial, role):
    """Integer seed for one trial; ``role`` separates history and current draws."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(role)))
    return int(ss.generate_state(1, np.uint64)[0])


class ModelCache:
    """Memoizes correlation models in memory and, optionally, on disk.

    Disk entries are a container file holding the matrix plus a ``.npz``
    sidecar with the eigenstructure, named by a hash of the model inputs.
    """

    def __init__(self, cache_dir=None):
        self.cache_dir = cache_dir
        self._mem = {}
        self._lock = threading.Lock()
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)

    @staticmethod
    def _key(geom, center, spreads, quadrature, clip):
        fields = (geom.n_horizontal, geom.n_vertical, geom.spacing, geom.wavelength,
                  center.r, center.azimuth, center.elevation,
                  spreads.delta_r, spreads.delta_phi, spreads.delta_theta,
                  quadrature.nodes, quadrature.adaptive, bool(clip))
        return hashlib.sha256(repr(fields).encode()).hexdigest()[:32]

    def get(self, geom, center, spreads, quadrature, clip=False):
        key = self._key(geom, center, spreads, quadrature, clip)
        with self._lock:
            hit = self._mem.get(key)
        if hit is not None:
            return hit
        model = self._load(key, center, spreads)
        if model is None:
            model = build_correlation(geom, center, spreads, quadrature, clip=clip)
            self._store(key, geom, model)
        with self._lock:
            self._mem.setdefault(key, model)
            return self._mem[key]

    def _paths(self, key):
        base = os.path.join(self.cache_dir, key)
        return base + ".bin", base + ".eig.npz"

    def _load(self, key, center, spreads):
        if not self.cache_dir:
            return None
        mat_path, eig_path = self._paths(key)
        if not (os.path.exists(mat_path) and os.path.exists(eig_path)):
            return None
        try:
            _, matrix = container.read_matrix(mat_path)
            with np.load(eig_path) as eig:
                vals, vecs, nodes = eig["eigenvalues"], eig["leading"], eig["nodes"]
        except (OSError, ValueError, KeyError) as exc:
            log.warning("ignoring unreadable cache entry %s: %s", key, exc)
            return None
        return CorrelationModel(center, spreads, matrix, vals, vecs, nodes=tuple(int(c) for c in nodes))

    def _store(self, key, geom, model):
        if not self.cache_dir:
            return
        mat_path, eig_path = self._paths(key)
        # Keep enough leading vectors for the signal basis plus headroom.
        keep = min(model.n, max(4 * model.rank, model.rank + 16))
        container.save_correlation(mat_path, geom, model)
        np.savez(eig_path, eigenvalues=model.eigenvalues, leading=model._leading[:, :keep],
                 nodes=np.array(model.nodes))


@dataclass
class PointResult:
    """All per-trial outcomes at one sweep value."""

    value: float
    records: dict = field(default_factory=dict)
    trial_ids: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    chordal: dict = field(default_factory=lambda: {"refined": [], "sample": []})
    # estimator -> [sum |h_hat - h|^2, sum |h|^2] over successful trials
    pooled: dict = field(default_factory=dict)
    true_rank: int = 0

    def nmse_values(self, estimator):
        return np.array([rec.nmse for rec in self.records.get(estimator, [])])

    def pooled_nmse(self, estimator):
        err, power = self.pooled.get(estimator, (math.nan, math.nan))
        return err / power if power else math.nan


@dataclass
class SweepResult:
    config: object
    points: list

    def summary_rows(self):
        rows = []
        for pt in self.points:
            for est in self.config.estimators:
                vals = pt.nmse_values(est)
                rows.append((pt.value, est,
                             float(np.median(vals)) if vals.size else math.nan,
                             float(np.mean(vals)) if vals.size else math.nan,
                             int(vals.size), int(pt.failures.get(est, 0))))
        return rows

    def chordal_rows(self):
        rows = []
        for pt in self.points:
            for name in ("refined", "sample"):
                vals = np.asarray(pt.chordal[name])
                if vals.size:
                    rows.append((pt.value, name, float(np.median(vals)), float(np.mean(vals)),
                                 int(vals.size)))
        return rows

    def write(self, out_dir):
        """Write ``nmse.csv``, ``chordal.csv`` and ``trials.csv`` into ``out_dir``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        paths["nmse"] = _write_csv(os.path.join(out_dir, "nmse.csv"), SUMMARY_HEADER,
                                   self.summary_rows())
        paths["chordal"] = _write_csv(os.path.join(out_dir, "chordal.csv"), CHORDAL_HEADER,
                                      self.chordal_rows())
        trial_rows = []
        for pt in self.points:
            for est in self.config.estimators:
                for trial, rec in zip(pt.trial_ids.get(est, []), pt.records.get(est, [])):
                    loc = rec.location_error or (math.nan,) * 3
                    nu = rec.nuisance_errors
                    trial_rows.append((pt.value, trial, est,
                                       rec.nmse, rec.seed, loc[0], loc[1], loc[2],
                                       nu.get("sigma_w2", math.nan), nu.get("beta", math.nan)))
        paths["trials"] = _write_csv(os.path.join(out_dir, "trials.csv"), TRIALS_HEADER,
                                     trial_rows)
        return paths


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


@dataclass
class _TrialData:
    trial: int
    seed: int
    history: object
    current: object
    split: object = None
    location: object = None
    failure: str = None


def _chunks(items, parts):
    parts = max(1, min(parts, len(items)))
    size = -(-len(items) // parts)
    return [items[i:i + size] for i in range(0, len(items), size)]


def _map(pool, func, items):
    return list(pool.map(func, items)) if pool else [func(i) for i in items]


def _location_error(est, truth):
    return (est.r - truth.r, math.degrees(est.azimuth - truth.azimuth),
            math.degrees(est.elevation - truth.elevation))


def run_point(cfg, value=math.nan, *, threads=1, cache=None, pool=None):
    """Run ``cfg.trials`` trials of every configured estimator at one sweep point."""
    cache = cache or ModelCache()
    geom, pm = cfg.geometry, cfg.power
    beta, sigma2 = pm.beta_linear, pm.noise_variance
    spreads = spread_from_elevation(cfg.ue.r, cfg.ue.elevation, cfg.ue_delta_theta)
    truth = cache.get(geom, cfg.ue, spreads, cfg.quadrature)
    need_param = any(e in _PARAM_DEPENDENT for e in cfg.estimators)

    def draw(t):
        hist_seed = trial_seed(cfg.seed, t, _HISTORY)
        hist = generate_snapshots(truth, pm, cfg.snapshots, hist_seed)
        cur = generate_snapshots(truth, pm, 1, trial_seed(cfg.seed, t, _CURRENT))
        data = _TrialData(t, hist_seed, hist, cur)
        if need_param:
            try:
                data.split = split_snapshots(hist)
            except NFMMSEError as exc:
                data.failure = f"subspace split: {exc}"
        return data

    trials = _map(pool, draw, range(cfg.trials))

    if need_param:
        ok = [d for d in trials if d.failure is None]

        def localize(batch):
            try:
                return locate_many([d.split for d in batch], geom, cfg.grid, cfg.coarse_factor)
            except NFMMSEError as exc:
                return exc

        for batch, found in zip(_chunks(ok, threads), _map(pool, localize, _chunks(ok, threads))):
            for d, loc in zip(batch, found if isinstance(found, list) else [found] * len(batch)):
                if isinstance(loc, Exception):
                    d.failure = f"localization: {loc}"
                else:
                    d.location = loc

    def evaluate(d):
        y = d.current.observations[:, 0]
        h = d.current.channels[:, 0]
        out = {}
        param_state = None
        if need_param and d.failure is None:
            try:
                spreads_hat = spread_from_elevation(d.location.r, d.location.elevation,
                                                    cfg.assumed_delta_theta, clip=True)
                refined = cache.get(geom, d.location, spreads_hat, cfg.quadrature, clip=True)
                nuis = estimate_nuisances(d.history, refined)
                param_state = (refined, nuis)
            except NFMMSEError as exc:
                d.failure = f"parametric: {exc}"
        for est in cfg.estimators:
            if est in _PARAM_DEPENDENT and param_state is None:
                out[est] = d.failure or "parametric pipeline unavailable"
                continue
            try:
                if est == "mmse":
                    h_hat = estimate_mmse(y, truth, beta, sigma2)
                elif est == "ls":
                    h_hat = estimate_ls(y)
                elif est == "param":
                    h_hat = parametric_filter(y, *param_state)
                elif est == "samp":
                    h_hat = estimate_sample(y, d.history, param_state[1].sigma_w2_hat)
                else:
                    iso = cache.get(geom, *_iso_key(d.location), cfg.quadrature)
                    h_hat = estimate_iso(y, iso, param_state[1])
            except (NFMMSEError, np.linalg.LinAlgError) as exc:
                out[est] = f"{est}: {exc}"
                continue
            out[est] = (float(np.vdot(h_hat - h, h_hat - h).real), float(np.vdot(h, h).real))
        chordal = {}
        if param_state is not None:
            chordal["refined"] = chordal_distance(param_state[0].signal_basis, truth.signal_basis)
            chordal["sample"] = chordal_distance(d.split.signal_basis, truth.signal_basis)
        return out, chordal, param_state

    result = PointResult(value, true_rank=truth.rank)
    for d, (out, chordal, param_state) in zip(trials, _map(pool, evaluate, trials)):
        extra = {}
        loc_err = None
        if param_state is not None:
            nuis = param_state[1]
            extra["sigma_w2"] = abs(nuis.sigma_w2_hat / sigma2 - 1)
            extra["beta"] = abs(nuis.beta_hat / beta - 1)
            loc_err = _location_error(d.location, cfg.ue)
        for est, res in out.items():
            if isinstance(res, str):
                result.failures[est] = result.failures.get(est, 0) + 1
                result.errors.setdefault(est, []).append((d.trial, res))
                continue
            err, power = res
            acc = result.pooled.setdefault(est, [0.0, 0.0])
            acc[0] += err
            acc[1] += power
            rec = TrialRecord(est, err / power if power else math.inf, d.seed,
                              loc_err if est == "param" else None, dict(extra))
            result.records.setdefault(est, []).append(rec)
            result.trial_ids.setdefault(est, []).append(d.trial)
        for name, val in chordal.items():
            result.chordal[name].append(val)
    return result


def _iso_key(location):
    return SphericalPoint(location.r, 0.0, 0.0), isotropic_spreads(location.r)


def run_sweep(cfg, threads=None, cache_dir=None, progress=None):
    """Run every sweep point of ``cfg``; returns a :class:`SweepResult`.

    ``threads`` defaults to ``NFMMSE_THREADS`` (or 1).  Results do not depend
    on the thread count.
    """
    threads = threads or default_threads()
    cache = ModelCache(cache_dir)
    points = []
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for value, point_cfg in cfg.points():
            log.info("sweep point %s=%s: %d trials", cfg.sweep_variable, value, point_cfg.trials)
            res = run_point(point_cfg, value, threads=threads, cache=cache, pool=pool)
            points.append(res)
            if progress:
                progress(res)
    finally:
        if pool:
            pool.shutdown()
    return SweepResult(cfg, points)

