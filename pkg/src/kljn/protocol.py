"""Key-exchange session: random resistor choices, level decoding, key assembly.

A session runs ``n_bit_periods`` independent periods.  In each one Alice and
Bob pick H or L with a fair coin, the wire is evaluated (exact expected
levels in ``analytic`` mode, simulated noise in ``montecarlo`` mode), and
each party classifies the measured mean-square wire voltage against the
four expected levels to infer the other's choice.  Periods where both chose
the same resistor are discarded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import attacks
from .circuit import (
    BitState,
    CableModel,
    GeneratorSet,
    ResistorQuad,
    effective_bandwidth,
    filtered_levels,
    spectral_summary,
    state_levels,
    voltage_crossover,
    vmg_solve,
)
from .errors import AmbiguousLevels, IndistinguishableHypotheses, InvalidInput
from .noise import SimulationGrid, mean_square, simulate_bit_period
from .seeding import CHOICE_STREAM, derive_seed, rng_for

SEPARATION_SIGMAS = 3.0
EVE_ATTACKS = (None, "temperature")


def _candidates(own_choice: str, party: str) -> dict[str, BitState]:
    """States consistent with ``own_choice``, keyed by the peer's choice."""
    if party == "alice":
        return {peer: BitState.from_choices(own_choice, peer) for peer in "LH"}
    if party == "bob":
        return {peer: BitState.from_choices(peer, own_choice) for peer in "LH"}
    raise InvalidInput(f"party must be 'alice' or 'bob', got {party!r}")


def decode_state(own_choice: str, measured_u_ms: float, level_table, party: str = "alice") -> str:
    """Infer the peer's resistor (``"L"``/``"H"``) from the wire mean-square voltage.

    ``level_table`` maps each :class:`BitState` to its expected mean-square
    voltage; the nearest of the two states compatible with ``own_choice``
    wins.
    """
    if own_choice not in ("L", "H"):
        raise InvalidInput(f"own_choice must be 'L' or 'H', got {own_choice!r}")
    cands = _candidates(own_choice, party)
    return min(cands, key=lambda peer: abs(measured_u_ms - level_table[cands[peer]]))


def level_standard_errors(quad: ResistorQuad, gens: GeneratorSet, cable: CableModel,
                          duration_s: float) -> dict[BitState, float]:
    """Standard error of a mean-square voltage measurement over one period, per state."""
    b = gens.bandwidth_b
    levels = filtered_levels(quad, gens, cable)
    out = {}
    for state in BitState:
        f_u = voltage_crossover(state_levels(state, quad, gens).r_p, cable)
        out[state] = levels[state].voltage / math.sqrt(effective_bandwidth(f_u, b) * duration_s)
    return out


def check_level_separation(quad: ResistorQuad, gens: GeneratorSet, cable: CableModel,
                           duration_s: float) -> None:
    """Raise AmbiguousLevels unless every decision pair is resolvable.

    Only pairs a party ever has to separate are checked (for Alice with L:
    LL vs LH, and so on); HL and LH are meant to coincide.
    """
    levels = {s: v.voltage for s, v in filtered_levels(quad, gens, cable).items()}
    se = level_standard_errors(quad, gens, cable, duration_s)
    for party in ("alice", "bob"):
        for own in "LH":
            a, b = _candidates(own, party).values()
            gap = abs(levels[a] - levels[b])
            floor = SEPARATION_SIGMAS * max(se[a], se[b])
            if gap <= floor:
                raise AmbiguousLevels(
                    f"{party} with {own}: levels {a.value}/{b.value} differ by {gap:.4g} V^2, "
                    f"below {SEPARATION_SIGMAS:g} standard errors ({floor:.4g} V^2); "
                    f"lengthen the bit period")


@dataclass(frozen=True)
class SessionConfig:
    quad: ResistorQuad
    cable: CableModel
    bandwidth_b: float
    n_bit_periods: int
    master_seed: int = 0
    gens: GeneratorSet | None = None
    u_la: float | None = None
    grid: SimulationGrid | None = None
    bit_convention: BitState = BitState.HL  # the secure state that encodes 1
    mode: str = "analytic"
    eve: str | None = None
    forced_states: tuple | None = None

    def __post_init__(self):
        if self.n_bit_periods < 1:
            raise InvalidInput("n_bit_periods must be >= 1")
        if self.bit_convention not in (BitState.HL, BitState.LH):
            raise InvalidInput("bit_convention must be HL or LH")
        if self.mode not in ("analytic", "montecarlo"):
            raise InvalidInput(f"unknown mode {self.mode!r}")
        if self.eve not in EVE_ATTACKS:
            raise InvalidInput(f"eve must be one of {EVE_ATTACKS}")
        if (self.gens is None) == (self.u_la is None):
            raise InvalidInput("give exactly one of gens or u_la")
        if self.mode == "montecarlo" and self.grid is None:
            raise InvalidInput("montecarlo mode needs a simulation grid")
        if self.forced_states is not None:
            states = tuple(BitState(s) for s in self.forced_states)
            if len(states) != self.n_bit_periods:
                raise InvalidInput("forced_states must have one entry per bit period")
            object.__setattr__(self, "forced_states", states)

    def generators(self) -> GeneratorSet:
        if self.gens is not None:
            return self.gens.with_bandwidth(self.bandwidth_b)
        return vmg_solve(self.quad, self.u_la, self.bandwidth_b)

    def as_dict(self) -> dict:
        gens = self.generators()
        return {
            "quad": self.quad.as_dict(), "generators": gens.as_dict(), "cable": self.cable.as_dict(),
            "bandwidth_b": self.bandwidth_b, "n_bit_periods": self.n_bit_periods,
            "master_seed": self.master_seed, "bit_convention": self.bit_convention.value,
            "mode": self.mode, "eve": self.eve,
            "grid": None if self.grid is None else
            {"sample_rate_hz": self.grid.sample_rate_hz, "duration_s": self.grid.duration_s},
        }


@dataclass(frozen=True)
class PeriodRecord:
    index: int
    seed: int
    true_state: BitState
    alice_peer: str
    bob_peer: str
    u_ms: float
    i_ms: float | None = None
    eve: attacks.AttackVerdict | None = None

    @property
    def secure(self) -> bool:
        return self.true_state.secure

    @property
    def alice_state(self) -> BitState:
        return BitState.from_choices(self.true_state.alice, self.alice_peer)

    @property
    def bob_state(self) -> BitState:
        return BitState.from_choices(self.bob_peer, self.true_state.bob)

    @property
    def decode_error(self) -> bool:
        return self.alice_state != self.true_state or self.bob_state != self.true_state

    def as_dict(self) -> dict:
        return {
            "index": self.index, "seed": self.seed, "true_state": self.true_state.value,
            "secure": self.secure, "alice_decoded_peer": self.alice_peer,
            "bob_decoded_peer": self.bob_peer, "u_ms": self.u_ms, "i_ms": self.i_ms,
            "eve": None if self.eve is None else self.eve.as_dict(),
        }


def _bits_to_hex(bits: list[int]) -> str:
    if not bits:
        return ""
    padded = bits + [0] * (-len(bits) % 8)
    return bytes(int("".join(map(str, padded[i:i + 8])), 2)
                 for i in range(0, len(padded), 8)).hex()


@dataclass
class SessionRecord:
    config: SessionConfig
    periods: list[PeriodRecord] = field(default_factory=list)

    def _key(self, party: str) -> list[int]:
        one = self.config.bit_convention
        bits = []
        for p in self.periods:
            state = p.alice_state if party == "alice" else p.bob_state
            if state.secure:
                bits.append(int(state == one))
        return bits

    @property
    def alice_key(self) -> list[int]:
        return self._key("alice")

    @property
    def bob_key(self) -> list[int]:
        return self._key("bob")

    @property
    def true_key(self) -> list[int]:
        one = self.config.bit_convention
        return [int(p.true_state == one) for p in self.periods if p.secure]

    @property
    def discard_count(self) -> int:
        return sum(not p.secure for p in self.periods)

    @property
    def decode_errors(self) -> int:
        return sum(p.decode_error for p in self.periods)

    def leak_report(self) -> attacks.LeakReport | None:
        trials = [attacks.Trial(p.true_state, p.eve, p.seed) for p in self.periods if p.secure]
        if self.config.eve is None or not trials:
            return None
        return attacks.leak_estimate(trials)

    def as_dict(self) -> dict:
        leak = self.leak_report()
        return {
            "config": self.config.as_dict(),
            "periods": [p.as_dict() for p in self.periods],
            "key_bits": len(self.alice_key),
            "key_hex": _bits_to_hex(self.alice_key),
            "keys_agree": self.alice_key == self.bob_key,
            "discard_count": self.discard_count,
            "decode_errors": self.decode_errors,
            "leak": None if leak is None else leak.as_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def _eve_verdict(cfg: SessionConfig, predictions, u_ms: float, i_ms: float | None):
    measured = {"voltage": u_ms}
    if i_ms is not None:
        measured["current"] = i_ms
    try:
        return attacks.temperature_attack(measured, predictions)
    except IndistinguishableHypotheses:
        return None


def run_session(cfg: SessionConfig) -> SessionRecord:
    """Run every bit period of a session and collect the ground truth and decodings."""
    gens = cfg.generators()
    expected = filtered_levels(cfg.quad, gens, cfg.cable)
    u_table = {s: v.voltage for s, v in expected.items()}
    channels = ("voltage", "current") if cfg.eve else ("voltage",)
    if cfg.mode == "montecarlo":
        check_level_separation(cfg.quad, gens, cfg.cable, cfg.grid.duration_s)
    record = SessionRecord(cfg)
    for i in range(cfg.n_bit_periods):
        seed = derive_seed(cfg.master_seed, i)
        rng = rng_for(seed, CHOICE_STREAM)
        alice, bob = ("L", "H")[int(rng.integers(2))], ("L", "H")[int(rng.integers(2))]
        noise_seed = int(rng.integers(2 ** 63))
        state = cfg.forced_states[i] if cfg.forced_states else BitState.from_choices(alice, bob)

        if cfg.mode == "analytic":
            u_ms, i_ms = expected[state].voltage, expected[state].current
        else:
            period = simulate_bit_period(state, cfg.quad, gens, cfg.cable, cfg.grid, noise_seed, channels)
            u_ms = mean_square(period.wire_voltage)
            i_ms = mean_square(period.wire_current) if period.wire_current is not None else None

        verdict = None
        if cfg.eve and state.secure:
            verdict = _eve_verdict(cfg, expected, u_ms, i_ms)
        record.periods.append(PeriodRecord(
            index=i, seed=seed, true_state=state,
            alice_peer=decode_state(state.alice, u_ms, u_table, "alice"),
            bob_peer=decode_state(state.bob, u_ms, u_table, "bob"),
            u_ms=u_ms, i_ms=i_ms, eve=verdict,
        ))
    return record


def public_summary(cfg: SessionConfig):
    """Public spectral predictions for a session configuration."""
    return spectral_summary(cfg.quad, cfg.generators(), cfg.cable)
