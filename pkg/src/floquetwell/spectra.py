"""Radiation spectra of single Floquet states.

The dipole ``<x(t)>`` is sampled on a uniform grid over many drive cycles;
the acceleration spectrum follows by spectral differentiation,
``xi(omega) = -omega^2 x~(omega)``, because the hard walls make the
acceleration operator singular.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .basis import WellConfig, assemble_dipole
from .floquet import DEFAULT_STEPS_PER_PERIOD, IntegrationError, Propagator

__all__ = [
    "DipoleSeries",
    "RadiationSpectrum",
    "dipole_series",
    "radiation_spectrum",
    "band_power",
    "spectrum_diff",
    "write_spectrum_csv",
    "write_diff_csv",
]

NORM_DRIFT_TOL = 1e-8


@dataclass
class DipoleSeries:
    samples: np.ndarray
    dt: float
    n_cycles: int
    samples_per_cycle: int
    omega0: float
    norm_drift: float = 0.0


@dataclass
class RadiationSpectrum:
    """Normalized acceleration power on the grid ``k * omega0 / n_cycles``.

    ``power[n_cycles]`` (the fundamental) equals 1; ``normalization`` is the
    raw power there.  ``amplitudes`` keeps the one-sided DFT of the dipole.
    """

    frequencies: np.ndarray
    power: np.ndarray
    normalization: float
    n_cycles: int
    omega0: float
    amplitudes: np.ndarray = field(repr=False, default=None)

    @property
    def harmonic(self) -> np.ndarray:
        return self.frequencies / self.omega0

    def harmonic_bin(self, k: int) -> int:
        return k * self.n_cycles

    def harmonic_power(self, k: int) -> float:
        return float(self.power[self.harmonic_bin(k)])

    def interharmonic_max(self) -> float:
        """Largest normalized power away from integer harmonics (DC excluded)."""
        idx = np.arange(len(self.power))
        mask = (idx % self.n_cycles) != 0
        return float(self.power[mask].max()) if mask.any() else 0.0

    def even_harmonic_max(self) -> float:
        kmax = (len(self.power) - 1) // self.n_cycles
        evens = [self.harmonic_power(k) for k in range(2, kmax + 1, 2)]
        return float(max(evens)) if evens else 0.0


def dipole_series(cfg: WellConfig, epsilon: float, state: np.ndarray, n_cycles: int = 128,
                  samples_per_cycle: int = 128,
                  steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> DipoleSeries:
    """``<psi(t)|x|psi(t)>`` for ``t = k T / samples_per_cycle``.

    The propagators between consecutive samples of one cycle are built once
    and reused for every cycle, which is exact for a periodic drive.
    """
    if samples_per_cycle < 2 or samples_per_cycle & (samples_per_cycle - 1):
        raise ValueError("samples_per_cycle must be a power of two >= 2")
    psi = np.asarray(state, dtype=complex).copy()
    norm0 = np.linalg.norm(psi)
    if abs(norm0 - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    prop = Propagator(cfg, epsilon, steps_per_period)
    T = cfg.period
    dt = T / samples_per_cycle
    sub = max(1, int(np.ceil(steps_per_period / samples_per_cycle)))
    legs = [prop.evolve(k * dt, (k + 1) * dt, sub) for k in range(samples_per_cycle)]
    X = assemble_dipole(cfg)
    out = np.empty(n_cycles * samples_per_cycle)
    i = 0
    for _ in range(n_cycles):
        for U in legs:
            out[i] = np.real(np.vdot(psi, X @ psi))
            psi = U @ psi
            i += 1
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > NORM_DRIFT_TOL:
        raise IntegrationError(f"norm drift {drift:.3e} over {n_cycles} cycles")
    return DipoleSeries(samples=out, dt=dt, n_cycles=n_cycles, samples_per_cycle=samples_per_cycle,
                        omega0=cfg.omega0, norm_drift=float(drift))


def radiation_spectrum(series: DipoleSeries) -> RadiationSpectrum:
    """``|xi(omega)|^2`` scaled so the fundamental has unit power."""
    n = len(series.samples)
    amp = np.fft.rfft(series.samples) / n
    freq = np.arange(len(amp)) * series.omega0 / series.n_cycles
    raw = np.abs(freq ** 2 * amp) ** 2
    raw[0] = 0.0
    fund = raw[series.n_cycles] if series.n_cycles < len(raw) else 0.0
    if not fund > 0:
        raise ValueError("no power at the fundamental; cannot normalize")
    return RadiationSpectrum(frequencies=freq, power=raw / fund, normalization=float(fund),
                             n_cycles=series.n_cycles, omega0=series.omega0, amplitudes=amp)


def band_power(spec: RadiationSpectrum, k_lo: int, k_hi: int) -> float:
    """Sum of normalized power at harmonics ``k_lo .. k_hi``."""
    if not 1 <= k_lo <= k_hi:
        raise ValueError("need 1 <= k_lo <= k_hi")
    if spec.harmonic_bin(k_hi) >= len(spec.power):
        raise ValueError(f"harmonic {k_hi} lies above the Nyquist frequency")
    return float(sum(spec.harmonic_power(k) for k in range(k_lo, k_hi + 1)))


def spectrum_diff(a: RadiationSpectrum, b: RadiationSpectrum) -> np.ndarray:
    """Per-bin ``a.power - b.power``."""
    if a.frequencies.shape != b.frequencies.shape or not np.allclose(a.frequencies, b.frequencies):
        raise ValueError("spectra are on different frequency axes")
    return a.power - b.power


def write_spectrum_csv(path, spec: RadiationSpectrum, header: dict | None = None) -> None:
    head = {"n_cycles": spec.n_cycles, "omega0": spec.omega0, "normalization": spec.normalization}
    head.update(header or {})
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["harmonic_index", "frequency", "power"])
        for h, f, p in zip(spec.harmonic, spec.frequencies, spec.power):
            w.writerow([repr(float(h)), repr(float(f)), repr(float(p))])


def write_diff_csv(path, a: RadiationSpectrum, delta: np.ndarray, header: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header or {}, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["harmonic_index", "delta_power"])
        for h, d in zip(a.harmonic, delta):
            w.writerow([repr(float(h)), repr(float(d))])
