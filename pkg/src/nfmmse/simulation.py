"""Correlated Rayleigh channel draws and noisy pilot observations."""

from dataclasses import dataclass

import numpy as np

# Stream ids inside a snapshot's key; channel and noise never share a generator.
_CHANNEL, _NOISE = 0, 1


@dataclass(frozen=True)
class PowerModel:
    """Uplink pilot power budget.

    ``beta_db`` is stored as a positive number; with ``beta_is_loss`` (default)
    the linear average channel gain is ``10**(-beta_db / 10)``.  The default
    noise PSD gives ``N0 B = -84 dBm`` over 100 MHz.
    """

    transmit_power_dbm: float = -4.0
    pilot_length: int = 10
    bandwidth_hz: float = 100e6
    noise_psd_dbm_per_hz: float = -164.0
    beta_db: float = 90.0
    beta_is_loss: bool = True

    def __post_init__(self):
        if int(self.pilot_length) != self.pilot_length or self.pilot_length < 1:
            raise ValueError(f"pilot_length must be a positive integer, got {self.pilot_length!r}")
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz!r}")

    @property
    def noise_power_dbm(self):
        return self.noise_psd_dbm_per_hz + 10 * np.log10(self.bandwidth_hz)

    @property
    def beta_linear(self):
        sign = -1.0 if self.beta_is_loss else 1.0
        return 10 ** (sign * self.beta_db / 10)

    @property
    def noise_variance(self):
        return noise_variance(self)


def noise_variance(pm):
    """Per-entry pilot noise variance ``N0 B / (p tau_p)`` in linear units."""
    return 10 ** ((pm.noise_power_dbm - pm.transmit_power_dbm) / 10) / pm.pilot_length


@dataclass(frozen=True)
class SnapshotSet:
    """``M`` observations ``y(m) = h(m) + w(m)`` stored as the columns of ``(N, M)`` arrays."""

    observations: np.ndarray
    channels: np.ndarray
    noise_variance: float
    rng_seed: int

    def __post_init__(self):
        if self.observations.ndim != 2 or self.observations.shape[1] < 1:
            raise ValueError("observations must be an (N, M) array with M >= 1")
        if self.channels.shape != self.observations.shape:
            raise ValueError("channels and observations must have the same shape")

    @property
    def n(self):
        return self.observations.shape[0]

    @property
    def m(self):
        return self.observations.shape[1]

    def head(self, count):
        """The first ``count`` snapshots as a new set."""
        if not 1 <= count <= self.m:
            raise ValueError(f"count must be in [1, {self.m}], got {count}")
        return SnapshotSet(self.observations[:, :count], self.channels[:, :count],
                           self.noise_variance, self.rng_seed)

    def scaled_noise(self, factor):
        """Same channels with the noise component multiplied by ``factor``."""
        noise = self.observations - self.channels
        return SnapshotSet(self.channels + factor * noise, self.channels,
                           self.noise_variance * factor ** 2, self.rng_seed)


def stream(seed, *key):
    """Independent generator for ``(seed, *key)``; same inputs, same stream."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def complex_normal(rng, size):
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * np.sqrt(0.5)


def sample_channel(model, beta_linear, seed):
    """Draw ``h = sqrt(beta) U Lambda^(1/2) z`` over the model's retained eigenpairs.

    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    rng = np.random.default_rng(seed)
    z = complex_normal(rng, model.rank)
    return np.sqrt(beta_linear) * (model.signal_basis @ (np.sqrt(model.signal_eigenvalues) * z))


def generate_snapshots(model, pm, m, seed, *, beta=None, noise_var=None):
    """Generate ``m`` independent pilot observations.

    Snapshot ``i`` draws its channel from ``stream(seed, i, 0)`` and its noise
    from ``stream(seed, i, 1)``, so the first ``k`` snapshots do not depend on
    ``m``.  ``beta`` and ``noise_var`` override the values implied by ``pm``.
    """
    if m < 1:
        raise ValueError(f"need at least one snapshot, got m={m}")
    beta = pm.beta_linear if beta is None else float(beta)
    sigma2 = pm.noise_variance if noise_var is None else float(noise_var)
    n = model.n
    basis = model.signal_basis
    scale = np.sqrt(beta * model.signal_eigenvalues)
    z = np.empty((model.rank, m), dtype=complex)
    w = np.empty((n, m), dtype=complex)
    for i in range(m):
        z[:, i] = complex_normal(stream(seed, i, _CHANNEL), model.rank)
        w[:, i] = complex_normal(stream(seed, i, _NOISE), n)
    # Column by column so the first k channels do not depend on m, bit for bit.
    h = np.empty((n, m), dtype=complex)
    for i in range(m):
        h[:, i] = basis @ (scale * z[:, i])
    y = h + np.sqrt(sigma2) * w
    return SnapshotSet(y, h, sigma2, int(seed))
