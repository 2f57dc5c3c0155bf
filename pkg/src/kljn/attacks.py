"""Eve's passive single-point attacks and leak statistics.

Two attacks are implemented:

* crossover attack: estimate the Lorentzian pole of the measured wire
  voltage and/or current spectrum and compare it with the public HL and LH
  predictions,
* noise-temperature attack: compare measured cable mean squares with the
  band-limited predictions for HL and LH.

Eve is assumed to know the resistor set, generator levels, cable and
bandwidth exactly.  When the HL and LH predictions coincide on every channel
she has nothing to decide on; the attack raises
:class:`~kljn.errors.IndistinguishableHypotheses` and leak statistics count
that trial as a fair coin flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .circuit import SECURE_STATES, BitState, ChannelLevels, SpectralSummary
from .errors import IndistinguishableHypotheses, InvalidInput, NoUsablePoints
from .noise import SpectrumEstimate
from .seeding import fair_coin

# HL/LH predictions closer than this are treated as identical
IDENTICAL_RTOL = 1e-9
N_EVAL_FREQS = 8


@dataclass(frozen=True)
class AttackVerdict:
    guessed_state: BitState
    statistic_value: float
    decision_margin: float
    channel: str = ""

    def __post_init__(self):
        if self.guessed_state not in SECURE_STATES:
            raise InvalidInput(f"verdict must name a secure state, got {self.guessed_state}")
        if not self.decision_margin >= 0:
            raise InvalidInput("decision_margin must be >= 0")

    def as_dict(self) -> dict:
        return {"guessed_state": self.guessed_state.value, "statistic": self.statistic_value,
                "margin": self.decision_margin, "channel": self.channel}


@dataclass(frozen=True)
class LeakReport:
    n_trials: int
    n_correct: int
    p: float
    wilson_95_interval: tuple[float, float]

    @property
    def excludes_half(self) -> bool:
        lo, hi = self.wilson_95_interval
        return not lo <= 0.5 <= hi

    def as_dict(self) -> dict:
        return {"n_trials": self.n_trials, "n_correct": self.n_correct, "p": self.p,
                "ci_low": self.wilson_95_interval[0], "ci_high": self.wilson_95_interval[1]}


class Trial(NamedTuple):
    true_state: BitState
    verdict: Optional[AttackVerdict]  # None when the verdict was withheld
    seed: int


def _same(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= IDENTICAL_RTOL * max(abs(a), abs(b))


def default_eval_freqs(bandwidth_b: float, spectrum: SpectrumEstimate | None = None,
                       n: int = N_EVAL_FREQS) -> np.ndarray:
    """Log-spaced evaluation frequencies across [B/8, B].

    With a spectrum given, the range is clipped to its support and the top
    point is pulled two resolution bandwidths below B, where the window
    smears the ideal band edge.
    """
    lo, hi = bandwidth_b / 8.0, bandwidth_b
    if spectrum is not None:
        lo = max(lo, spectrum.frequencies[1])
        hi = min(hi - 2.0 * spectrum.resolution_hz, spectrum.frequencies[-1])
    if hi <= lo:
        raise NoUsablePoints(f"no room for evaluation points in [{lo:.6g}, {hi:.6g}] Hz")
    return np.geomspace(lo, hi, n)


def point_crossover(s0: float, s_f: float, f: float) -> float:
    """Invert the Lorentzian at one frequency: f / sqrt(s0 / S(f) - 1)."""
    return f / math.sqrt(s0 / s_f - 1.0)


def estimate_crossover(spectrum: SpectrumEstimate, s0: float, eval_freqs) -> float:
    """Crossover frequency from a measured spectrum and the known S(0).

    Each evaluation point with ``0 < S(f) < s0`` gives an estimate by
    inverting the Lorentzian; they are averaged with weights ``f**2 S(f)**2``,
    proportional to the sensitivity of S(f) to the crossover.
    """
    if not s0 > 0:
        raise InvalidInput("s0 must be > 0")
    f = np.atleast_1d(np.asarray(eval_freqs, dtype=float))
    inside = (f > 0) & (f >= spectrum.frequencies[0]) & (f <= spectrum.frequencies[-1])
    s = spectrum.at(f)
    ok = inside & (s > 0) & (s < s0)
    if not ok.any():
        raise NoUsablePoints("every evaluation point has S(f) >= S(0)")
    f, s = f[ok], s[ok]
    estimates = f / np.sqrt(s0 / s - 1.0)
    weights = (f * s) ** 2
    return float(np.sum(weights * estimates) / np.sum(weights))


def _verdict(distance_hl: float, distance_lh: float, channel: str) -> AttackVerdict:
    stat = distance_lh - distance_hl  # > 0 favors HL
    guess = BitState.HL if stat > 0 else BitState.LH
    return AttackVerdict(guess, stat, abs(stat), channel)


def crossover_attack(measured: Mapping[str, float | None], predictions: SpectralSummary) -> AttackVerdict:
    """Pick HL or LH from crossover estimates on the voltage and/or current channel.

    ``measured`` maps ``"voltage"`` / ``"current"`` to an estimated crossover
    in Hz (``None`` or missing for a channel that was not measured).  Each
    usable channel votes for the prediction nearer in log-frequency; the
    channel with the larger margin decides.
    """
    verdicts = []
    for channel in ("voltage", "current"):
        est = measured.get(channel)
        if est is None or not (est > 0 and math.isfinite(est)):
            continue
        f_hl = predictions.crossover(channel, BitState.HL)
        f_lh = predictions.crossover(channel, BitState.LH)
        if _same(f_hl, f_lh) or not (math.isfinite(f_hl) and math.isfinite(f_lh)):
            continue
        verdicts.append(_verdict(abs(math.log(est / f_hl)), abs(math.log(est / f_lh)), channel))
    if not verdicts:
        raise IndistinguishableHypotheses("no measured channel separates the HL and LH crossovers")
    return max(verdicts, key=lambda v: v.decision_margin)


def temperature_attack(measured: Mapping[str, float | None],
                       predictions: Mapping[BitState, ChannelLevels]) -> AttackVerdict:
    """Pick HL or LH from measured cable mean squares.

    ``measured`` maps ``"voltage"`` to U_C^2 and/or ``"current"`` to I_L^2;
    ``predictions`` gives the expected pair for each state (see
    :func:`kljn.circuit.filtered_levels`).  The hypothesis with the smaller
    summed squared relative deviation wins.
    """
    d_hl = d_lh = 0.0
    informative = []
    for channel in ("voltage", "current"):
        value = measured.get(channel)
        if value is None:
            continue
        p_hl = getattr(predictions[BitState.HL], channel)
        p_lh = getattr(predictions[BitState.LH], channel)
        if not _same(p_hl, p_lh):
            informative.append(channel)
        d_hl += ((value - p_hl) / p_hl) ** 2
        d_lh += ((value - p_lh) / p_lh) ** 2
    if not informative:
        raise IndistinguishableHypotheses("HL and LH mean-square predictions coincide")
    return _verdict(d_hl, d_lh, "+".join(informative))


def wilson_interval(n_correct: int, n_trials: int, alpha: float = 0.05) -> tuple[float, float]:
    lo, hi = proportion_confint(n_correct, n_trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def trial_correct(trial: Trial) -> bool:
    if trial.verdict is None:
        return fair_coin(trial.seed)
    return trial.verdict.guessed_state == trial.true_state


def leak_estimate(trials: Sequence[Trial]) -> LeakReport:
    """Eve's correct-guess probability with a Wilson 95% interval."""
    trials = list(trials)
    if not trials:
        raise InvalidInput("leak_estimate needs at least one trial")
    n = len(trials)
    k = sum(trial_correct(t) for t in trials)
    lo, hi = wilson_interval(k, n)
    p = k / n
    return LeakReport(n, k, p, (min(lo, p), max(hi, p)))


def merge_reports(reports: Sequence[LeakReport]) -> LeakReport:
    """Pool per-batch counts into one report."""
    n = sum(r.n_trials for r in reports)
    k = sum(r.n_correct for r in reports)
    lo, hi = wilson_interval(k, n)
    return LeakReport(n, k, k / n, (min(lo, k / n), max(hi, k / n)))
