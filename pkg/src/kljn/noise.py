"""Time-domain simulation of the wire noise during one bit period.

Generator noise is synthesized in the frequency domain: independent complex
Gaussian coefficients on the FFT bins in (0, B], nothing elsewhere, so the
band edge is ideal.  The cable is modelled as two independent single-pole
low-passes, RC for the voltage and RL for the current.  Both are discretized
with the bilinear transform pre-warped at the crossover, which keeps the DC
gain at 1 and the -3 dB point exactly at the analog crossover.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize, signal

from .circuit import (
    BitState,
    CableModel,
    GeneratorSet,
    ResistorQuad,
    current_crossover,
    lorentzian,
    voltage_crossover,
)
from .errors import BandwidthExceedsNyquist, GridTooCoarse, InvalidInput, SegmentTooLong

OVERSAMPLING = 20  # minimum fs / (fastest frequency in play)
CHANNELS = ("voltage", "current")


@dataclass(frozen=True)
class SimulationGrid:
    sample_rate_hz: float
    duration_s: float

    def __post_init__(self):
        if not (self.sample_rate_hz > 0 and self.duration_s > 0):
            raise InvalidInput("sample_rate_hz and duration_s must be > 0")
        if self.n < 2:
            raise InvalidInput(f"grid has only {self.n} samples")

    @property
    def n(self) -> int:
        return int(round(self.sample_rate_hz * self.duration_s))

    def require(self, bandwidth_b: float, crossovers=()) -> None:
        """Check the sampling rule fs >= 20 * max(B, finite crossovers)."""
        fastest = max([bandwidth_b] + [f for f in crossovers if math.isfinite(f)])
        if self.sample_rate_hz < OVERSAMPLING * fastest:
            raise GridTooCoarse(
                f"sample rate {self.sample_rate_hz:.6g} Hz is below {OVERSAMPLING} x "
                f"{fastest:.6g} Hz")

    @classmethod
    def covering(cls, bandwidth_b: float, crossovers=(), periods: float = 200.0) -> "SimulationGrid":
        """Smallest grid obeying the sampling rule and lasting ``periods / B`` seconds."""
        fastest = max([bandwidth_b] + [f for f in crossovers if math.isfinite(f)])
        return cls(sample_rate_hz=OVERSAMPLING * fastest, duration_s=periods / bandwidth_b)


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: float
    units: str = "V"

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size < 2:
            raise InvalidInput("waveform needs a 1-d array of at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("waveform contains non-finite samples")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """One-sided PSD estimate; ``resolution_hz`` is the equivalent noise bandwidth of a bin."""

    frequencies: np.ndarray
    psd: np.ndarray
    resolution_hz: float

    def at(self, f):
        """PSD linearly interpolated at frequency ``f``."""
        return np.interp(f, self.frequencies, self.psd)

    def integral(self) -> float:
        return float(np.sum(self.psd) * (self.frequencies[1] - self.frequencies[0]))


class BitPeriod(NamedTuple):
    wire_voltage: Waveform | None
    wire_current: Waveform | None


def synth_band_limited_gaussian(rms: float, bandwidth_b: float, grid: SimulationGrid,
                                seed=None) -> Waveform:
    """Zero-mean Gaussian noise with flat one-sided PSD ``rms**2 / B`` on (0, B].

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.  The
    expected mean square is ``rms**2``; any single realization fluctuates
    around it.
    """
    fs = grid.sample_rate_hz
    if bandwidth_b > fs / 2:
        raise BandwidthExceedsNyquist(f"B = {bandwidth_b} Hz exceeds Nyquist {fs / 2} Hz")
    if rms < 0:
        raise InvalidInput("rms must be >= 0")
    n = grid.n
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    band = (freqs > 0) & (freqs <= bandwidth_b)
    if n % 2 == 0:
        band[-1] = False  # the Nyquist bin is real-only
    m = int(band.sum())
    if m == 0:
        raise InvalidInput("bandwidth is narrower than the frequency resolution of the grid")
    rng = np.random.default_rng(seed)
    sigma = rms * n / (2.0 * math.sqrt(m))
    coeffs = np.zeros(freqs.size, dtype=complex)
    coeffs[band] = sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return Waveform(np.fft.irfft(coeffs, n), fs)


def single_pole_coefficients(f_cr: float, sample_rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Pre-warped bilinear discretization of 1 / (1 + s / (2 pi f_cr))."""
    k = math.tan(math.pi * f_cr / sample_rate_hz)
    b0 = k / (1.0 + k)
    return np.array([b0, b0]), np.array([1.0, (k - 1.0) / (k + 1.0)])


def lowpass(x: np.ndarray, f_cr: float, sample_rate_hz: float) -> np.ndarray:
    """Single-pole low-pass in periodic steady state.

    The synthesized noise is periodic, so running the filter once to obtain
    its end state and again from that state removes the start-up transient.
    """
    if math.isinf(f_cr):
        return np.array(x, dtype=float)
    if f_cr >= sample_rate_hz / 2:
        raise GridTooCoarse(f"crossover {f_cr:.6g} Hz is above Nyquist")
    b, a = single_pole_coefficients(f_cr, sample_rate_hz)
    _, zf = signal.lfilter(b, a, x, zi=np.zeros(1))
    y, _ = signal.lfilter(b, a, x, zi=zf)
    return y


def simulate_bit_period(state: BitState, quad: ResistorQuad, gens: GeneratorSet,
                        cable: CableModel, grid: SimulationGrid, seed,
                        channels=CHANNELS) -> BitPeriod:
    """Wire voltage and current waveforms for one bit period.

    Only the two connected generators are synthesized (independent streams
    spawned from ``seed``).  Channels not listed in ``channels`` come back as
    ``None`` and do not constrain the sampling rule.
    """
    for ch in channels:
        if ch not in CHANNELS:
            raise InvalidInput(f"unknown channel {ch!r}")
    ra, rb = quad.alice(state.alice), quad.bob(state.bob)
    r_p, r_s = ra * rb / (ra + rb), ra + rb
    f_u = voltage_crossover(r_p, cable)
    f_i = current_crossover(r_s, cable)
    in_play = [f for ch, f in (("voltage", f_u), ("current", f_i)) if ch in channels]
    b = gens.bandwidth_b
    grid.require(b, in_play)

    seq_a, seq_b = np.random.SeedSequence(seed).spawn(2)
    ua = synth_band_limited_gaussian(gens.alice(state.alice), b, grid, seq_a).samples
    ub = synth_band_limited_gaussian(gens.bob(state.bob), b, grid, seq_b).samples
    fs = grid.sample_rate_hz

    voltage = current = None
    if "voltage" in channels:
        thevenin = (ua * rb + ub * ra) / r_s
        voltage = Waveform(lowpass(thevenin, f_u, fs), fs, "V")
    if "current" in channels:
        loop = (ua - ub) / r_s
        current = Waveform(lowpass(loop, f_i, fs), fs, "A")
    return BitPeriod(voltage, current)


def welch_psd(w: Waveform, segment_len: int = 4096, overlap_fraction: float = 0.5) -> SpectrumEstimate:
    """Hann-windowed Welch estimate of the one-sided PSD, density scaling."""
    if segment_len > len(w):
        raise SegmentTooLong(f"segment of {segment_len} samples exceeds waveform length {len(w)}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise InvalidInput("overlap_fraction must be in [0, 1)")
    if segment_len < 2:
        raise InvalidInput("segment_len must be >= 2")
    noverlap = int(segment_len * overlap_fraction)
    f, pxx = signal.welch(w.samples, fs=w.sample_rate_hz, window="hann", nperseg=segment_len,
                          noverlap=noverlap, detrend=False, scaling="density")
    win = signal.get_window("hann", segment_len)
    enbw = w.sample_rate_hz * np.sum(win ** 2) / np.sum(win) ** 2
    return SpectrumEstimate(frequencies=f, psd=pxx, resolution_hz=float(enbw))


def mean_square(w: Waveform) -> float:
    x = w.samples
    return float(np.dot(x, x) / x.size)


def fit_lorentzian(spectrum: SpectrumEstimate, f_max: float) -> tuple[float, float]:
    """Least-squares fit of ``(s0, f_cr)`` to the spectrum on (0, f_max]."""
    sel = (spectrum.frequencies > 0) & (spectrum.frequencies <= f_max)
    f, s = spectrum.frequencies[sel], spectrum.psd[sel]
    if f.size < 3:
        raise InvalidInput("need at least 3 bins below f_max to fit")
    p0 = (float(s[: max(1, f.size // 10)].mean()), float(f[-1]) / 2)
    (s0, f_cr), _ = optimize.curve_fit(lambda x, a, c: lorentzian(a, c, x), f, s, p0=p0,
                                       bounds=([0.0, 1e-12], [np.inf, np.inf]))
    return float(s0), float(f_cr)


def dump_waveform(w: Waveform, path, seed=None) -> tuple[Path, Path]:
    """Write raw little-endian float64 samples plus a JSON sidecar."""
    path = Path(path)
    w.samples.astype("<f8").tofile(path)
    sidecar = path.with_name(path.name + ".json")
    meta = {"sample_rate_hz": w.sample_rate_hz, "units": w.units, "seed": seed,
            "n_samples": len(w), "dtype": "<f8"}
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, sidecar


def load_waveform(path) -> tuple[Waveform, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    samples = np.fromfile(path, dtype="<f8")
    return Waveform(samples, meta["sample_rate_hz"], meta.get("units", "V")), meta


def write_psd_csv(spectrum: SpectrumEstimate, path) -> None:
    with open(path, "w") as fh:
        fh.write("frequency,psd\n")
        for f, s in zip(spectrum.frequencies, spectrum.psd):
            fh.write(f"{f!r},{s!r}\n")
