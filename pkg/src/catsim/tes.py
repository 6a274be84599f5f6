"""Transition-edge-sensor response model: pulse synthesis and photon-number
discrimination quality.

Traces are expressed in units of the single-photon pulse height. Absorbing n
photons produces a double-exponential pulse whose height carries one Gaussian
energy-resolution jitter draw per pulse; white trace noise sits on top.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .errors import DomainError, SaturationWarning

FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class TesParams:
    """Detector figures of merit and trace digitization settings."""

    photon_energy_ev: float = 0.8
    energy_resolution_ev: float = 0.176
    decay_tau_ns: float = 107.0
    rise_tau_ns: float = 15.0
    rep_period_ns: float = 200.0
    samples_per_trace: int = 400
    noise_floor: float = 0.01
    resolution_is_fwhm: bool = True

    def __post_init__(self):
        for name in ("photon_energy_ev", "energy_resolution_ev", "decay_tau_ns",
                     "rep_period_ns"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.rise_tau_ns < 0:
            raise DomainError("rise_tau_ns must be >= 0 (0 means an instantaneous rise)")
        if self.samples_per_trace < 8:
            raise DomainError("samples_per_trace must be >= 8")
        if self.noise_floor < 0:
            raise DomainError("noise_floor must be >= 0")
        if self.energy_resolution_ev >= self.photon_energy_ev:
            raise DomainError("energy resolution must be below the single-photon energy")

    @property
    def sigma_ev(self) -> float:
        """Gaussian sigma of the energy jitter; the resolution is read as FWHM
        by default, or directly as sigma when resolution_is_fwhm is False."""
        if self.resolution_is_fwhm:
            return self.energy_resolution_ev / FWHM_TO_SIGMA
        return self.energy_resolution_ev

    @property
    def dt_ns(self) -> float:
        return self.rep_period_ns / self.samples_per_trace

    @property
    def onset_index(self) -> int:
        return self.samples_per_trace // 8

    def pulse_shape(self) -> np.ndarray:
        """Unit-height pulse sampled over one repetition period."""
        t = (np.arange(self.samples_per_trace) - self.onset_index) * self.dt_ns
        shape = np.zeros(self.samples_per_trace)
        after = t >= 0
        if self.rise_tau_ns == 0.0:
            shape[after] = np.exp(-t[after] / self.decay_tau_ns)
        else:
            raw = np.exp(-t[after] / self.decay_tau_ns) - np.exp(-t[after] / self.rise_tau_ns)
            shape[after] = raw / raw.max()
        return shape


def pulse_trace(n_photons: int, params: TesParams, seed: int | None = None) -> np.ndarray:
    """One digitized trace for n absorbed photons; deterministic per seed."""
    if n_photons < 0:
        raise DomainError("photon number must be >= 0")
    rng = np.random.default_rng(seed)
    height = 0.0
    if n_photons > 0:
        jitter = rng.normal(0.0, params.sigma_ev / params.photon_energy_ev)
        height = n_photons + jitter
    trace = height * params.pulse_shape()
    if params.noise_floor > 0:
        trace = trace + rng.normal(0.0, params.noise_floor, params.samples_per_trace)
    return trace


def _heights_from_traces(traces: np.ndarray, params: TesParams) -> np.ndarray:
    baseline = np.median(traces[:, : params.onset_index], axis=1)
    return traces.max(axis=1) - baseline


def classify_pulse(trace: np.ndarray, params: TesParams, n_max: int | None = None) -> int:
    """Nearest-integer photon number from (peak - baseline), thresholds at half-integers.

    The baseline is the median of the pre-onset samples, which removes the
    residual decay of a preceding pulse. With n_max given, larger estimates
    saturate at n_max with a SaturationWarning.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.shape != (params.samples_per_trace,):
        raise DomainError(
            f"trace length {trace.size} does not match samples_per_trace {params.samples_per_trace}"
        )
    height = float(_heights_from_traces(trace[None, :], params)[0])
    est = max(0, int(math.floor(height + 0.5)))
    if n_max is not None and est > n_max:
        warnings.warn(
            f"pulse height {height:.2f} exceeds the largest resolvable number {n_max}",
            SaturationWarning,
        )
        return n_max
    return est


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic matrix: rows are true photon numbers, columns assignments."""

    matrix: np.ndarray
    n_max: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.n_max + 1, self.n_max + 1):
            raise DomainError(f"matrix shape {m.shape} does not match n_max {self.n_max}")
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise DomainError(f"rows must sum to 1, got {sums}")
        object.__setattr__(self, "matrix", m)

    @property
    def off_diagonal_mass(self) -> float:
        m = self.matrix
        return float(m.sum() - np.trace(m)) / (self.n_max + 1)

    def to_csv(self, path: str | Path) -> None:
        header = "true\\assigned," + ",".join(str(j) for j in range(self.n_max + 1))
        lines = [header]
        for i, row in enumerate(self.matrix):
            lines.append(str(i) + "," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def adjacent_confusion_estimate(params: TesParams) -> float:
    """Analytic Gaussian-overlap rate for one half-integer boundary:
    erfc(E / (2·sqrt(2)·sigma)) / 2."""
    return float(erfc(params.photon_energy_ev / (2.0 * math.sqrt(2.0) * params.sigma_ev)) / 2.0)


def confusion(params: TesParams, n_max: int, trials: int, seed: int = 0) -> ConfusionMatrix:
    """Monte Carlo confusion matrix over `trials` pulses split evenly across
    true photon numbers 0..n_max, each run through the full trace pipeline."""
    if trials < 1000:
        raise DomainError("trials must be >= 1000 for a meaningful estimate")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    per_row = -(-trials // (n_max + 1))  # ceil split
    shape = params.pulse_shape()
    sigma_rel = params.sigma_ev / params.photon_energy_ev
    counts = np.zeros((n_max + 1, n_max + 1), dtype=np.int64)
    chunk = max(1, 2_000_000 // params.samples_per_trace)
    rng = np.random.default_rng(seed)
    for n in range(n_max + 1):
        done = 0
        while done < per_row:
            size = min(chunk, per_row - done)
            heights = np.zeros(size) if n == 0 else n + rng.normal(0.0, sigma_rel, size)
            traces = heights[:, None] * shape[None, :]
            if params.noise_floor > 0:
                traces = traces + rng.normal(0.0, params.noise_floor, traces.shape)
            est = np.floor(_heights_from_traces(traces, params) + 0.5).astype(int)
            np.clip(est, 0, n_max, out=est)
            counts[n] += np.bincount(est, minlength=n_max + 1)
            done += size
    return ConfusionMatrix(counts / per_row, n_max)
