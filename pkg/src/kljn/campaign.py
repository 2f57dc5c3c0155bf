"""Monte-Carlo attack campaigns: many secure bit periods, one verdict each.

Every trial draws a fair HL/LH state, simulates the wire for one bit period
and lets Eve run the configured attack on it.  Trial ``i`` is fully
determined by ``derive_seed(master_seed, i)``, so campaigns can be split
across processes and still reproduce bit-for-bit.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Mapping, Sequence

from . import attacks
from .circuit import (
    SECURE_STATES,
    BitState,
    CableModel,
    GeneratorSet,
    ResistorQuad,
    crossover_frequencies,
    filtered_levels,
    spectral_summary,
)
from .errors import IndistinguishableHypotheses, InvalidInput, NoUsablePoints
from .noise import SimulationGrid, mean_square, simulate_bit_period, welch_psd
from .seeding import CHOICE_STREAM, derive_seed, rng_for

ATTACKS = ("crossover", "temperature")
MODES = ("montecarlo", "analytic")


@dataclass(frozen=True)
class CampaignConfig:
    quad: ResistorQuad
    gens: GeneratorSet
    cable: CableModel
    attack: str = "crossover"
    channels: tuple = ("voltage",)
    n_trials: int = 500
    master_seed: int = 0
    periods: float = 200.0  # bit-period length in units of 1/B
    sample_rate_hz: float | None = None
    segment_len: int | None = None
    overlap_fraction: float = 0.5
    mode: str = "montecarlo"

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise InvalidInput(f"attack must be one of {ATTACKS}")
        if self.mode not in MODES:
            raise InvalidInput(f"mode must be one of {MODES}")
        if self.n_trials < 1:
            raise InvalidInput("n_trials must be >= 1")
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def bandwidth_b(self) -> float:
        return self.gens.bandwidth_b

    def crossovers_in_play(self) -> list[float]:
        cr = crossover_frequencies(self.quad, self.cable)
        out = []
        if "voltage" in self.channels:
            out += [cr.f_ucr_hl, cr.f_ucr_lh]
        if "current" in self.channels:
            out += [cr.f_icr_hl, cr.f_icr_lh]
        return out

    def grid(self) -> SimulationGrid:
        b = self.bandwidth_b
        if self.sample_rate_hz is None:
            return SimulationGrid.covering(b, self.crossovers_in_play(), self.periods)
        return SimulationGrid(self.sample_rate_hz, self.periods / b)

    def welch_segment(self, n_samples: int) -> int:
        """Default Welch segment: 4096, shrunk to a power of two fitting ~8 segments."""
        if self.segment_len is not None:
            return self.segment_len
        return min(4096, 2 ** int(math.log2(max(n_samples // 8, 16))))

    def as_dict(self) -> dict:
        return {
            "quad": self.quad.as_dict(), "generators": self.gens.as_dict(),
            "cable": self.cable.as_dict(), "attack": self.attack, "channels": list(self.channels),
            "n_trials": self.n_trials, "master_seed": self.master_seed, "periods": self.periods,
            "sample_rate_hz": self.sample_rate_hz, "segment_len": self.segment_len,
            "overlap_fraction": self.overlap_fraction, "mode": self.mode,
        }


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    true_state: BitState
    statistics: dict
    verdict: attacks.AttackVerdict | None

    def as_trial(self) -> attacks.Trial:
        return attacks.Trial(self.true_state, self.verdict, self.seed)

    def as_dict(self) -> dict:
        return {
            "index": self.index, "seed": self.seed, "true_state": self.true_state.value,
            "statistics": self.statistics,
            "verdict": None if self.verdict is None else self.verdict.guessed_state.value,
            "margin": None if self.verdict is None else self.verdict.decision_margin,
            "channel": None if self.verdict is None else self.verdict.channel,
        }


@dataclass
class CampaignResult:
    config: CampaignConfig
    trials: list[TrialRecord] = field(default_factory=list)

    @property
    def report(self) -> attacks.LeakReport:
        return attacks.leak_estimate([t.as_trial() for t in self.trials])

    def jsonl(self) -> str:
        return "".join(json.dumps(t.as_dict(), sort_keys=True) + "\n" for t in self.trials)


def measure(cfg: CampaignConfig, state: BitState, noise_seed: int, grid: SimulationGrid) -> dict:
    """Eve's per-channel statistic for one bit period: crossover estimate or mean square."""
    summary = spectral_summary(cfg.quad, cfg.gens, cfg.cable)
    if cfg.mode == "analytic":
        if cfg.attack == "crossover":
            return {ch: summary.crossover(ch, state) for ch in cfg.channels}
        levels = filtered_levels(cfg.quad, cfg.gens, cfg.cable)[state]
        return {ch: getattr(levels, ch) for ch in cfg.channels}

    period = simulate_bit_period(state, cfg.quad, cfg.gens, cfg.cable, grid, noise_seed, cfg.channels)
    waves = {"voltage": period.wire_voltage, "current": period.wire_current}
    s0 = {"voltage": summary.s_u0, "current": summary.s_i0}
    out = {}
    for ch in cfg.channels:
        w = waves[ch]
        if cfg.attack == "temperature":
            out[ch] = mean_square(w)
            continue
        spectrum = welch_psd(w, cfg.welch_segment(len(w)), cfg.overlap_fraction)
        try:
            freqs = attacks.default_eval_freqs(cfg.bandwidth_b, spectrum)
            out[ch] = attacks.estimate_crossover(spectrum, s0[ch], freqs)
        except NoUsablePoints:
            out[ch] = None
    return out


def decide(cfg: CampaignConfig, statistics: Mapping[str, float | None]) -> attacks.AttackVerdict | None:
    try:
        if cfg.attack == "crossover":
            return attacks.crossover_attack(statistics, spectral_summary(cfg.quad, cfg.gens, cfg.cable))
        return attacks.temperature_attack(statistics, filtered_levels(cfg.quad, cfg.gens, cfg.cable))
    except IndistinguishableHypotheses:
        return None


def run_trial(cfg: CampaignConfig, index: int) -> TrialRecord:
    seed = derive_seed(cfg.master_seed, index)
    rng = rng_for(seed, CHOICE_STREAM)
    state = SECURE_STATES[int(rng.integers(2))]
    noise_seed = int(rng.integers(2 ** 63))
    stats = measure(cfg, state, noise_seed, cfg.grid())
    return TrialRecord(index, seed, state, stats, decide(cfg, stats))


def run_campaign(cfg: CampaignConfig, jobs: int = 1) -> CampaignResult:
    grid = cfg.grid() if cfg.mode == "montecarlo" else None
    if grid is not None:
        grid.require(cfg.bandwidth_b, cfg.crossovers_in_play())
    work = partial(run_trial, cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(work, range(cfg.n_trials), chunksize=max(1, cfg.n_trials // (4 * jobs))))
    else:
        trials = [work(i) for i in range(cfg.n_trials)]
    return CampaignResult(cfg, trials)


def run_campaigns(configs: Mapping[str, CampaignConfig], jobs: int = 1) -> dict[str, CampaignResult]:
    """Run a grid of campaigns; results come back ordered by sorted key."""
    keys = sorted(configs)
    if jobs > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_campaign, [configs[k] for k in keys]))
    else:
        results = [run_campaign(configs[k]) for k in keys]
    return dict(zip(keys, results))


SWEEP_STREAM = 0xB5


def bandwidth_sweep(base: CampaignConfig, bandwidths: Sequence[float]) -> dict[str, CampaignConfig]:
    """Same campaign at several generator bandwidths (the bandwidth-reduction defense).

    Point ``i`` gets its own master seed, ``derive_seed(base.master_seed,
    SWEEP_STREAM, i)``.  With a fixed number of periods per 1/B the
    synthesized in-band draws would otherwise repeat across points, making
    their leak estimates fully correlated.
    """
    return {f"B={b:.6g}": CampaignConfig(**{**base.__dict__, "gens": base.gens.with_bandwidth(b),
                                            "master_seed": derive_seed(base.master_seed, SWEEP_STREAM, i)})
            for i, b in enumerate(bandwidths)}
