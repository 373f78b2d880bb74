"""Experiment configuration: INI-style files, reference defaults, desk-scale reduction.

Angles are degrees in files and radians everywhere else.
"""

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from .correlation import QuadratureSpec
from .errors import ConfigError
from .geometry import ArrayGeometry, aperture, fraunhofer_distance
from .manifold import SphericalPoint
from .music import SearchGrid
from .simulation import PowerModel

ESTIMATORS = ("mmse", "param", "ls", "samp", "iso")
SWEEP_VARIABLES = ("none", "transmit_power_dbm", "snapshots", "assumed_delta_theta_deg")

# Keys that must appear in a config file.  [music] and [stationarity] are optional.
REQUIRED = {
    "geometry": ("n_horizontal", "n_vertical", "spacing", "wavelength"),
    "power": ("transmit_power_dbm", "pilot_length", "bandwidth_hz", "noise_psd_dbm_per_hz",
              "beta_db"),
    "ue": ("r", "azimuth_deg", "elevation_deg", "delta_theta_deg"),
    "assumed": ("delta_theta_deg",),
    "run": ("snapshots", "trials", "seed", "estimators"),
}

DESK_SHAPE = (16, 8)


def _table1_geometry():
    return ArrayGeometry.half_wavelength(64, 32, 0.003)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed for a sweep.  ``ExperimentConfig()`` is the reference operating point."""

    geometry: ArrayGeometry = field(default_factory=_table1_geometry)
    power: PowerModel = field(default_factory=PowerModel)
    ue: SphericalPoint = field(default_factory=lambda: SphericalPoint.from_degrees(4.0, -20.0, -30.0))
    ue_delta_theta: float = math.radians(1.5)
    assumed_delta_theta: float = math.radians(5.0)
    grid: SearchGrid = None
    coarse_factor: int = None
    snapshots: int = 10
    trials: int = 200
    seed: int = 1
    estimators: tuple = ESTIMATORS
    sweep_variable: str = "none"
    sweep_values: tuple = ()
    tau_s: int = 100
    tau_c: int = 1000
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.grid is None:
            object.__setattr__(self, "grid", SearchGrid.default_for(self.geometry))
        if self.snapshots < 1:
            raise ConfigError("snapshots must be >= 1", "run.snapshots")
        if self.snapshots > self.tau_s:
            raise ConfigError(f"snapshots M={self.snapshots} exceeds tau_s={self.tau_s}",
                              "run.snapshots")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", "run.trials")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}", "run.estimators")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.sweep_variable!r}", "run.sweep")
        if self.sweep_variable != "none" and not self.sweep_values:
            raise ConfigError("sweep needs at least one value", "run.values")

    def points(self):
        """``[(sweep_value, config), ...]`` with the swept field substituted."""
        if self.sweep_variable == "none":
            return [(float("nan"), self)]
        return [(v, self.with_sweep_value(v)) for v in self.sweep_values]

    def with_sweep_value(self, value):
        var = self.sweep_variable
        if var == "transmit_power_dbm":
            return dataclasses.replace(
                self, power=dataclasses.replace(self.power, transmit_power_dbm=float(value)))
        if var == "snapshots":
            return dataclasses.replace(self, snapshots=int(value))
        if var == "assumed_delta_theta_deg":
            return dataclasses.replace(self, assumed_delta_theta=math.radians(value))
        return self


def desk_scale(cfg, shape=DESK_SHAPE):
    """Shrink a configuration to a small array.

    The geometry becomes ``shape`` with the same spacing and wavelength.  UE
    distance and the distance grid scale with the Fraunhofer distance; angular
    grid steps scale with the aperture.  Angular spreads are left unchanged.
    """
    old = cfg.geometry
    new = ArrayGeometry(shape[0], shape[1], old.spacing, old.wavelength)
    s_r = fraunhofer_distance(new) / fraunhofer_distance(old)
    s_a = aperture(old) / aperture(new)
    g = cfg.grid
    grid = SearchGrid(g.r_min * s_r, g.r_max * s_r, g.r_step * s_r,
                      g.az_min, g.az_max, g.az_step * s_a, g.el_min, g.el_max, g.el_step * s_a)
    ue = SphericalPoint(cfg.ue.r * s_r, cfg.ue.azimuth, cfg.ue.elevation)
    return dataclasses.replace(cfg, geometry=new, grid=grid, ue=ue)


def _get(parser, section, key, conv, default=None, required=True):
    name = f"{section}.{key}"
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing config key {name}", name)
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r} ({exc})", name) from None


def _bool(raw):
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(raw):
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _int(raw):
    val = float(raw)
    if val != int(val):
        raise ValueError("expected an integer")
    return int(val)


def parse_config(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for section, keys in REQUIRED.items():
        for key in keys:
            if not parser.has_option(section, key):
                raise ConfigError(f"missing config key {section}.{key}", f"{section}.{key}")
    try:
        geom = ArrayGeometry(_get(parser, "geometry", "n_horizontal", _int),
                             _get(parser, "geometry", "n_vertical", _int),
                             _get(parser, "geometry", "spacing", float),
                             _get(parser, "geometry", "wavelength", float))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid geometry: {exc}", "geometry") from None
    try:
        power = PowerModel(
            transmit_power_dbm=_get(parser, "power", "transmit_power_dbm", float),
            pilot_length=_get(parser, "power", "pilot_length", _int),
            bandwidth_hz=_get(parser, "power", "bandwidth_hz", float),
            noise_psd_dbm_per_hz=_get(parser, "power", "noise_psd_dbm_per_hz", float),
            beta_db=_get(parser, "power", "beta_db", float),
            beta_is_loss=_get(parser, "power", "beta_is_loss", _bool, True, required=False))
        ue = SphericalPoint.from_degrees(_get(parser, "ue", "r", float),
                                         _get(parser, "ue", "azimuth_deg", float),
                                         _get(parser, "ue", "elevation_deg", float))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "power/ue") from None

    d_f = fraunhofer_distance(geom)

    def r_max_conv(raw):
        return d_f if raw.strip().lower() in ("fraunhofer", "d_f") else float(raw)

    m = "music"
    opt = dict(required=False)
    try:
        grid = SearchGrid.from_degrees(
            _get(parser, m, "r_min", float, 0.5, **opt),
            _get(parser, m, "r_max", r_max_conv, d_f, **opt),
            _get(parser, m, "r_step", float, 0.5, **opt),
            _get(parser, m, "az_min_deg", float, -90.0, **opt),
            _get(parser, m, "az_max_deg", float, 90.0, **opt),
            _get(parser, m, "az_step_deg", float, 0.5, **opt),
            _get(parser, m, "el_min_deg", float, -90.0, **opt),
            _get(parser, m, "el_max_deg", float, 90.0, **opt),
            _get(parser, m, "el_step_deg", float, 0.5, **opt))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid search grid: {exc}", "music") from None
    coarse = _get(parser, m, "coarse_to_fine", _bool, False, **opt)
    factor = _get(parser, m, "coarse_factor", _int, 4, **opt) if coarse else None
    nodes = _get(parser, m, "quadrature_nodes", _int, 8, **opt)

    sweep = _get(parser, "run", "sweep", str, "none", **opt).strip()
    values = _get(parser, "run", "values", _floats, (), **opt)
    estimators = tuple(e.strip().lower() for e in
                       _get(parser, "run", "estimators", str).replace(",", " ").split())
    return ExperimentConfig(
        geometry=geom, power=power, ue=ue,
        ue_delta_theta=math.radians(_get(parser, "ue", "delta_theta_deg", float)),
        assumed_delta_theta=math.radians(_get(parser, "assumed", "delta_theta_deg", float)),
        grid=grid, coarse_factor=factor,
        snapshots=_get(parser, "run", "snapshots", _int),
        trials=_get(parser, "run", "trials", _int),
        seed=_get(parser, "run", "seed", _int),
        estimators=estimators, sweep_variable=sweep, sweep_values=values,
        tau_s=_get(parser, "stationarity", "tau_s", _int, 100, **opt),
        tau_c=_get(parser, "stationarity", "tau_c", _int, 1000, **opt),
        quadrature=QuadratureSpec(nodes=nodes))


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def format_config(cfg):
    """Render a config as file text; ``parse_config(format_config(c))`` round-trips."""
    g, p, grid = cfg.geometry, cfg.power, cfg.grid
    deg = math.degrees
    lines = [
        "[geometry]",
        f"n_horizontal = {g.n_horizontal}",
        f"n_vertical = {g.n_vertical}",
        f"spacing = {g.spacing!r}",
        f"wavelength = {g.wavelength!r}",
        "",
        "[power]",
        f"transmit_power_dbm = {p.transmit_power_dbm!r}",
        f"pilot_length = {p.pilot_length}",
        f"bandwidth_hz = {p.bandwidth_hz!r}",
        f"noise_psd_dbm_per_hz = {p.noise_psd_dbm_per_hz!r}",
        f"beta_db = {p.beta_db!r}",
        f"beta_is_loss = {str(p.beta_is_loss).lower()}",
        "",
        "[ue]",
        f"r = {cfg.ue.r!r}",
        f"azimuth_deg = {deg(cfg.ue.azimuth)!r}",
        f"elevation_deg = {deg(cfg.ue.elevation)!r}",
        f"delta_theta_deg = {deg(cfg.ue_delta_theta)!r}",
        "",
        "[assumed]",
        f"delta_theta_deg = {deg(cfg.assumed_delta_theta)!r}",
        "",
        "[music]",
        f"r_min = {grid.r_min!r}",
        f"r_max = {grid.r_max!r}",
        f"r_step = {grid.r_step!r}",
        f"az_min_deg = {deg(grid.az_min)!r}",
        f"az_max_deg = {deg(grid.az_max)!r}",
        f"az_step_deg = {deg(grid.az_step)!r}",
        f"el_min_deg = {deg(grid.el_min)!r}",
        f"el_max_deg = {deg(grid.el_max)!r}",
        f"el_step_deg = {deg(grid.el_step)!r}",
        f"coarse_to_fine = {str(cfg.coarse_factor is not None).lower()}",
        f"coarse_factor = {cfg.coarse_factor or 4}",
        f"quadrature_nodes = {cfg.quadrature.nodes}",
        "",
        "[run]",
        f"snapshots = {cfg.snapshots}",
        f"trials = {cfg.trials}",
        f"seed = {cfg.seed}",
        f"estimators = {', '.join(cfg.estimators)}",
        f"sweep = {cfg.sweep_variable}",
        f"values = {', '.join(repr(float(v)) for v in cfg.sweep_values)}",
        "",
        "[stationarity]",
        f"tau_s = {cfg.tau_s}",
        f"tau_c = {cfg.tau_c}",
        "",
    ]
    return "\n".join(lines)
