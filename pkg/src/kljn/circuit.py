"""Closed-form circuit physics of the (VMG-)KLJN key exchanger.

Everything here is a pure function of immutable inputs: resistor sets,
generator RMS voltages, the lumped cable model.  The wire is treated in
the quasi-static (no wave) limit.  Voltage noise sees the parallel
resultant of the two connected resistors shunted by the cable capacitance,
current noise sees the serial resultant in series with the cable
inductance, and each forms a single-pole low-pass with a Lorentzian
spectrum.

Resistor naming follows the usual convention: ``r_ha`` / ``r_la`` are
Alice's high / low resistors, ``r_hb`` / ``r_lb`` Bob's.  In bit state
``HL`` Alice has connected ``r_ha`` and Bob ``r_lb``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import DegenerateCable, InfeasibleMatch, InvalidInput, UnphysicalQuad

BOLTZMANN = 1.380649e-23  # J/K, exact SI value

IDENTITY_RTOL = 1e-12
CONSTRAINT_RTOL = 1e-9


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidInput(f"{name} must be finite and > 0, got {value!r}")
    return value


def _check_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise InvalidInput(f"{name} must be finite and >= 0, got {value!r}")
    return value


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


class BitState(str, Enum):
    """Resistor pair connected during one bit period, written Alice-then-Bob."""

    HH = "HH"
    HL = "HL"
    LH = "LH"
    LL = "LL"

    @property
    def alice(self) -> str:
        return self.value[0]

    @property
    def bob(self) -> str:
        return self.value[1]

    @property
    def secure(self) -> bool:
        return self.value[0] != self.value[1]

    @classmethod
    def from_choices(cls, alice: str, bob: str) -> "BitState":
        return cls(alice + bob)

    def swapped(self) -> "BitState":
        """Mirror the state under exchange of Alice and Bob."""
        return BitState(self.value[::-1])


SECURE_STATES = (BitState.HL, BitState.LH)


@dataclass(frozen=True)
class ResistorQuad:
    """The four resistances (ohms) of a VMG-KLJN instance."""

    r_ha: float
    r_lb: float
    r_la: float
    r_hb: float

    def __post_init__(self):
        for name in ("r_ha", "r_lb", "r_la", "r_hb"):
            object.__setattr__(self, name, _check_positive(name, getattr(self, name)))

    def is_classical(self, rtol: float = IDENTITY_RTOL, allow_swap: bool = False) -> bool:
        """True for the original KLJN arrangement (identical resistor pairs).

        With ``allow_swap`` the degenerate mirror arrangement, where each party's
        H and L resistors are equal (``r_ha = r_la``, ``r_lb = r_hb``), is also
        accepted: its HL and LH states are electrically identical as well.
        """
        classical = _close(self.r_la, self.r_lb, rtol) and _close(self.r_ha, self.r_hb, rtol)
        if classical or not allow_swap:
            return classical
        return _close(self.r_ha, self.r_la, rtol) and _close(self.r_lb, self.r_hb, rtol)

    def alice(self, choice: str) -> float:
        return self.r_ha if choice == "H" else self.r_la

    def bob(self, choice: str) -> float:
        return self.r_hb if choice == "H" else self.r_lb

    def swapped(self) -> "ResistorQuad":
        """Exchange the roles of Alice and Bob."""
        return ResistorQuad(r_ha=self.r_hb, r_lb=self.r_la, r_la=self.r_lb, r_hb=self.r_ha)

    def as_dict(self) -> dict:
        return {"r_ha": self.r_ha, "r_lb": self.r_lb, "r_la": self.r_la, "r_hb": self.r_hb}


@dataclass(frozen=True)
class GeneratorSet:
    """RMS voltages (V) of the four noise generators and their shared bandwidth (Hz)."""

    u_ha: float
    u_lb: float
    u_la: float
    u_hb: float
    bandwidth_b: float

    def __post_init__(self):
        for name in ("u_ha", "u_lb", "u_la", "u_hb"):
            object.__setattr__(self, name, _check_nonnegative(name, getattr(self, name)))
        object.__setattr__(self, "bandwidth_b", _check_positive("bandwidth_b", self.bandwidth_b))

    def alice(self, choice: str) -> float:
        return self.u_ha if choice == "H" else self.u_la

    def bob(self, choice: str) -> float:
        return self.u_hb if choice == "H" else self.u_lb

    def swapped(self) -> "GeneratorSet":
        return GeneratorSet(u_ha=self.u_hb, u_lb=self.u_la, u_la=self.u_lb, u_hb=self.u_ha,
                            bandwidth_b=self.bandwidth_b)

    def with_bandwidth(self, bandwidth_b: float) -> "GeneratorSet":
        return GeneratorSet(self.u_ha, self.u_lb, self.u_la, self.u_hb, bandwidth_b)

    def as_dict(self) -> dict:
        return {"u_ha": self.u_ha, "u_lb": self.u_lb, "u_la": self.u_la, "u_hb": self.u_hb,
                "bandwidth_b": self.bandwidth_b}


@dataclass(frozen=True)
class CableModel:
    """Lumped cable: length (m), capacitance per meter (F/m), inductance per meter (H/m)."""

    length_m: float
    cap_per_m: float = 0.0
    ind_per_m: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "length_m", _check_positive("length_m", self.length_m))
        object.__setattr__(self, "cap_per_m", _check_nonnegative("cap_per_m", self.cap_per_m))
        object.__setattr__(self, "ind_per_m", _check_nonnegative("ind_per_m", self.ind_per_m))

    @property
    def capacitance(self) -> float:
        return self.length_m * self.cap_per_m

    @property
    def inductance(self) -> float:
        return self.length_m * self.ind_per_m

    def scaled(self, factor: float) -> "CableModel":
        """Cable with C and L multiplied by ``factor``: every crossover divides by it."""
        factor = _check_positive("factor", factor)
        return CableModel(self.length_m, self.cap_per_m * factor, self.ind_per_m * factor)

    def as_dict(self) -> dict:
        return {"length_m": self.length_m, "cap_per_m": self.cap_per_m, "ind_per_m": self.ind_per_m}


class Resultants(NamedTuple):
    r_p_hl: float
    r_p_lh: float
    r_s_hl: float
    r_s_lh: float


class GeneratorTemperatures(NamedTuple):
    t_ha: float
    t_lb: float
    t_la: float
    t_hb: float


class Crossovers(NamedTuple):
    f_ucr_hl: float
    f_ucr_lh: float
    f_icr_hl: float
    f_icr_lh: float


class BitTemperatures(NamedTuple):
    t_u_hl: float
    t_u_lh: float
    t_i_hl: float
    t_i_lh: float


@dataclass(frozen=True)
class WireLevels:
    """RMS wire voltage/current and net Alice-to-Bob power in the two secure states."""

    u_hl: float
    u_lh: float
    i_hl: float
    i_lh: float
    p_hl: float
    p_lh: float


@dataclass(frozen=True)
class SpectralSummary:
    s_u0: float
    s_i0: float
    f_ucr_hl: float
    f_ucr_lh: float
    f_icr_hl: float
    f_icr_lh: float
    t_u_hl: float
    t_u_lh: float
    t_i_hl: float
    t_i_lh: float

    def crossover(self, channel: str, state: BitState) -> float:
        prefix = "f_ucr" if channel == "voltage" else "f_icr"
        return getattr(self, f"{prefix}_{state.value.lower()}")


class StateLevels(NamedTuple):
    """Unfiltered (white, band B) wire quantities for one connected pair."""

    r_p: float
    r_s: float
    u_ms: float
    i_ms: float
    power: float


# --------------------------------------------------------------------------
# resistor algebra


def parallel(r1: float, r2: float) -> float:
    return r1 * r2 / (r1 + r2)


def resultants(quad: ResistorQuad) -> Resultants:
    """Parallel and serial resultants of the connected pair in the HL and LH states."""
    return Resultants(
        r_p_hl=parallel(quad.r_ha, quad.r_lb),
        r_p_lh=parallel(quad.r_la, quad.r_hb),
        r_s_hl=quad.r_ha + quad.r_lb,
        r_s_lh=quad.r_la + quad.r_hb,
    )


def state_levels(state: BitState, quad: ResistorQuad, gens: GeneratorSet) -> StateLevels:
    """Superposition of the two connected generators for any of the four states.

    The wire voltage is the Thevenin voltage of the two generators across the
    pair; the loop current is their difference over the serial resultant.
    Power is the net flow from Alice to Bob.
    """
    ra, rb = quad.alice(state.alice), quad.bob(state.bob)
    ua2, ub2 = gens.alice(state.alice) ** 2, gens.bob(state.bob) ** 2
    rs = ra + rb
    u_ms = (ua2 * rb * rb + ub2 * ra * ra) / (rs * rs)
    i_ms = (ua2 + ub2) / (rs * rs)
    power = (rb * ua2 - ra * ub2) / (rs * rs)
    return StateLevels(r_p=parallel(ra, rb), r_s=rs, u_ms=u_ms, i_ms=i_ms, power=power)


def wire_levels(quad: ResistorQuad, gens: GeneratorSet) -> WireLevels:
    hl = state_levels(BitState.HL, quad, gens)
    lh = state_levels(BitState.LH, quad, gens)
    return WireLevels(
        u_hl=math.sqrt(hl.u_ms), u_lh=math.sqrt(lh.u_ms),
        i_hl=math.sqrt(hl.i_ms), i_lh=math.sqrt(lh.i_ms),
        p_hl=hl.power, p_lh=lh.power,
    )


# --------------------------------------------------------------------------
# generator design


def noise_temperature(u_rms: float, resistance: float, bandwidth_b: float) -> float:
    """Johnson-Nyquist temperature of a generator: T = U^2 / (4 k R B)."""
    return u_rms * u_rms / (4.0 * BOLTZMANN * resistance * bandwidth_b)


def generator_rms(temperature: float, resistance: float, bandwidth_b: float) -> float:
    return math.sqrt(4.0 * BOLTZMANN * temperature * resistance * bandwidth_b)


def temperatures(quad: ResistorQuad, gens: GeneratorSet) -> GeneratorTemperatures:
    b = gens.bandwidth_b
    return GeneratorTemperatures(
        t_ha=noise_temperature(gens.u_ha, quad.r_ha, b),
        t_lb=noise_temperature(gens.u_lb, quad.r_lb, b),
        t_la=noise_temperature(gens.u_la, quad.r_la, b),
        t_hb=noise_temperature(gens.u_hb, quad.r_hb, b),
    )


def vmg_closed_form(quad: ResistorQuad, u_la: float) -> tuple[float, float, float]:
    """Published closed-form squared voltages ``(U_HB^2, U_HA^2, U_LB^2)``.

    Kept as an independent cross-check of :func:`vmg_solve`; not used by it.
    Returns ``nan`` entries where a denominator vanishes.
    """
    ha, lb, la, hb = quad.r_ha, quad.r_lb, quad.r_la, quad.r_hb
    a = u_la * u_la

    def ratio(num, den):
        return a * num / den if den != 0.0 else math.nan

    u_hb2 = ratio(lb * (ha + hb) - ha * hb - hb * hb, la * la + lb * (la - ha) - ha * la)
    u_ha2 = ratio(lb * (ha + hb) + ha * hb + ha * ha, la * la + lb * (la + hb) + hb * la)
    u_lb2 = ratio(lb * (ha - hb) - ha * hb + lb * lb, la * la + la * (hb - ha) - ha * hb)
    return u_hb2, u_ha2, u_lb2


def vmg_residuals(quad: ResistorQuad, gens: GeneratorSet) -> tuple[float, float, float]:
    """Relative violations of U_HL = U_LH, I_HL = I_LH and P_HL = P_LH.

    The power residual is scaled by the apparent power of the LH state, since
    both powers can legitimately be zero.
    """
    hl = state_levels(BitState.HL, quad, gens)
    lh = state_levels(BitState.LH, quad, gens)
    du = abs(hl.u_ms - lh.u_ms) / max(hl.u_ms, lh.u_ms)
    di = abs(hl.i_ms - lh.i_ms) / max(hl.i_ms, lh.i_ms)
    scale = math.sqrt(lh.u_ms * lh.i_ms)
    dp = abs(hl.power - lh.power) / scale
    return du, di, dp


def vmg_solve(quad: ResistorQuad, u_la: float, bandwidth_b: float = 1000.0) -> GeneratorSet:
    """Generator voltages making the HL and LH states indistinguishable.

    ``u_la`` is chosen freely; the remaining three RMS voltages follow from
    equal mean-square wire voltage, equal mean-square current and equal net
    power in the two secure states.  Those three conditions are linear in
    the squared voltages, so they are solved directly and the result is
    checked against the conditions before being returned.

    Raises
    ------
    UnphysicalQuad
        If the system is singular or a squared voltage comes out negative.
    """
    u_la = _check_positive("u_la", u_la)
    ha, lb, la, hb = quad.r_ha, quad.r_lb, quad.r_la, quad.r_hb
    a = u_la * u_la
    c = ((ha + lb) / (la + hb)) ** 2
    # unknowns: (U_HB^2, U_HA^2, U_LB^2)
    lhs = np.array([
        [-c * la * la, lb * lb, ha * ha],   # voltage
        [-c, 1.0, 1.0],                     # current
        [c * la, lb, -ha],                  # power
    ])
    rhs = np.array([c * a * hb * hb, c * a, c * a * hb])
    # det(lhs) is proportional to (R_HA - R_LA): Alice's two resistors must differ
    if math.isclose(ha, la, rel_tol=IDENTITY_RTOL):
        raise UnphysicalQuad(f"singular generator system (R_HA = R_LA) for {quad}")
    try:
        u_hb2, u_ha2, u_lb2 = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise UnphysicalQuad(f"singular generator system for {quad}") from exc

    squares = {"U_HB^2": u_hb2, "U_HA^2": u_ha2, "U_LB^2": u_lb2}
    floor = CONSTRAINT_RTOL * max(a, *(abs(v) for v in squares.values()))
    for name, value in squares.items():
        if not math.isfinite(value) or value < -floor:
            raise UnphysicalQuad(f"{name} = {value:.6g} V^2 is not physical for {quad}")

    gens = GeneratorSet(
        u_ha=math.sqrt(max(u_ha2, 0.0)),
        u_lb=math.sqrt(max(u_lb2, 0.0)),
        u_la=u_la,
        u_hb=math.sqrt(max(u_hb2, 0.0)),
        bandwidth_b=bandwidth_b,
    )
    worst = max(vmg_residuals(quad, gens))
    if worst > CONSTRAINT_RTOL:
        raise UnphysicalQuad(f"generator solution fails verification (residual {worst:.3g}) for {quad}")
    return gens


def zero_power_fourth(r_hb: float, r_la: float, r_ha: float) -> float:
    """Bob's low resistor giving zero net power flow in both secure states."""
    r_hb, r_la, r_ha = (_check_positive(n, v) for n, v in
                        (("r_hb", r_hb), ("r_la", r_la), ("r_ha", r_ha)))
    return r_hb * r_la / r_ha


def match_parallel_fourth(r_ha: float, r_la: float, r_lb: float) -> float:
    """Bob's high resistor equalizing the HL and LH parallel resultants.

    Raises InfeasibleMatch when the required value is not a positive resistance.
    """
    r_ha, r_la, r_lb = (_check_positive(n, v) for n, v in
                        (("r_ha", r_ha), ("r_la", r_la), ("r_lb", r_lb)))
    den = r_ha * r_la - r_ha * r_lb + r_la * r_lb
    if den <= 0.0:
        raise InfeasibleMatch(
            f"no positive r_hb: r_la={r_la} must exceed the HL parallel resultant "
            f"{parallel(r_ha, r_lb):.6g}")
    return r_ha * r_la * r_lb / den


def match_serial_fourth(r_la: float, r_hb: float, r_ha: float) -> float:
    """Bob's low resistor equalizing the HL and LH serial resultants."""
    r_la, r_hb, r_ha = (_check_positive(n, v) for n, v in
                        (("r_la", r_la), ("r_hb", r_hb), ("r_ha", r_ha)))
    if r_la + r_hb <= r_ha:
        raise InfeasibleMatch(f"no positive r_lb: r_la + r_hb = {r_la + r_hb:.6g} <= r_ha = {r_ha:.6g}")
    return r_la + r_hb - r_ha


# --------------------------------------------------------------------------
# cable spectra


def voltage_crossover(r_p: float, cable: CableModel, strict: bool = False) -> float:
    c = cable.capacitance
    if c == 0.0:
        if strict:
            raise DegenerateCable("voltage crossover needs a nonzero cable capacitance")
        return math.inf
    return 1.0 / (2.0 * math.pi * r_p * c)


def current_crossover(r_s: float, cable: CableModel, strict: bool = False) -> float:
    ind = cable.inductance
    if ind == 0.0:
        if strict:
            raise DegenerateCable("current crossover needs a nonzero cable inductance")
        return math.inf
    return r_s / (2.0 * math.pi * ind)


def crossover_frequencies(quad: ResistorQuad, cable: CableModel, strict: bool = False) -> Crossovers:
    """Voltage (RC) and current (RL) pole frequencies in both secure states.

    A zero capacitance or inductance gives ``inf`` unless ``strict`` is set,
    in which case DegenerateCable is raised.
    """
    res = resultants(quad)
    return Crossovers(
        f_ucr_hl=voltage_crossover(res.r_p_hl, cable, strict),
        f_ucr_lh=voltage_crossover(res.r_p_lh, cable, strict),
        f_icr_hl=current_crossover(res.r_s_hl, cable, strict),
        f_icr_lh=current_crossover(res.r_s_lh, cable, strict),
    )


def lorentzian(s0, f_cr, f):
    """S(f) = s0 / (1 + f^2 / f_cr^2); broadcasts over numpy arrays."""
    f = np.asarray(f, dtype=float)
    out = s0 / (1.0 + (f / f_cr) ** 2)
    return float(out) if out.ndim == 0 else out


def band_limited_ms(s0: float, f_cr: float, b: float) -> float:
    """Mean square of a Lorentzian spectrum integrated over [0, b].

    Equals ``s0 * f_cr * atan(b / f_cr)``; an infinite crossover (no cable
    reactance) gives the white-noise value ``s0 * b``.
    """
    if b <= 0.0:
        return 0.0
    if math.isinf(f_cr):
        return s0 * b
    return s0 * f_cr * math.atan(b / f_cr)


def band_limited_ms_squared(s0: float, f_cr: float, b: float) -> float:
    """Integral of S(f)^2 over [0, b], used for measurement-variance estimates."""
    if b <= 0.0:
        return 0.0
    if math.isinf(f_cr):
        return s0 * s0 * b
    x = b / f_cr
    return 0.5 * s0 * s0 * f_cr * (math.atan(x) + x / (1.0 + x * x))


def effective_bandwidth(f_cr: float, b: float) -> float:
    """Equivalent flat bandwidth (int S)^2 / int S^2 of a band-limited Lorentzian.

    The mean square of ``duration`` seconds of such a Gaussian process has
    relative standard error ``1 / sqrt(effective_bandwidth * duration)``.
    """
    return band_limited_ms(1.0, f_cr, b) ** 2 / band_limited_ms_squared(1.0, f_cr, b)


class ChannelLevels(NamedTuple):
    voltage: float
    current: float


def filtered_levels(quad: ResistorQuad, gens: GeneratorSet, cable: CableModel,
                    bandwidth_b: float | None = None) -> dict[BitState, ChannelLevels]:
    """Expected cable mean-square voltage and current for each of the four states.

    The generator PSD is flat at U^2/B on (0, B]; the cable shapes it into a
    Lorentzian which is then integrated up to B.
    """
    b = gens.bandwidth_b if bandwidth_b is None else bandwidth_b
    out = {}
    for state in BitState:
        lv = state_levels(state, quad, gens)
        f_u = voltage_crossover(lv.r_p, cable)
        f_i = current_crossover(lv.r_s, cable)
        out[state] = ChannelLevels(
            voltage=band_limited_ms(lv.u_ms / b, f_u, b),
            current=band_limited_ms(lv.i_ms / b, f_i, b),
        )
    return out


def bit_temperatures(levels: WireLevels, quad: ResistorQuad, b: float) -> BitTemperatures:
    """Effective noise temperature of the line in each secure state.

    Voltage temperatures use the parallel resultant, current temperatures the
    serial one, with the white (unfiltered) wire levels.
    """
    res = resultants(quad)
    kb4 = 4.0 * BOLTZMANN * b
    return BitTemperatures(
        t_u_hl=levels.u_hl ** 2 / (kb4 * res.r_p_hl),
        t_u_lh=levels.u_lh ** 2 / (kb4 * res.r_p_lh),
        t_i_hl=levels.i_hl ** 2 * res.r_s_hl / kb4,
        t_i_lh=levels.i_lh ** 2 * res.r_s_lh / kb4,
    )


def spectral_summary(quad: ResistorQuad, gens: GeneratorSet, cable: CableModel) -> SpectralSummary:
    """Public spectral predictions Eve compares her measurements against.

    ``s_u0`` / ``s_i0`` are the zero-frequency PSDs of the HL state, which
    equal the LH values whenever ``gens`` satisfies the VMG conditions.
    """
    b = gens.bandwidth_b
    levels = wire_levels(quad, gens)
    cr = crossover_frequencies(quad, cable)
    bt = bit_temperatures(levels, quad, b)
    return SpectralSummary(
        s_u0=levels.u_hl ** 2 / b,
        s_i0=levels.i_hl ** 2 / b,
        f_ucr_hl=cr.f_ucr_hl, f_ucr_lh=cr.f_ucr_lh,
        f_icr_hl=cr.f_icr_hl, f_icr_lh=cr.f_icr_lh,
        t_u_hl=bt.t_u_hl, t_u_lh=bt.t_u_lh,
        t_i_hl=bt.t_i_hl, t_i_lh=bt.t_i_lh,
    )


REPORT_ROWS = (
    "R_HA", "R_LB", "R_LA", "R_HB",
    "U_HA", "U_LB", "U_LA", "U_HB",
    "T_HA", "T_LB", "T_LA", "T_HB",
    "R_pHL", "R_pLH", "R_sHL", "R_sLH",
    "T_uHL", "T_uLH", "T_iHL", "T_iLH",
    "U_HL", "U_LH", "I_HL", "I_LH",
    "P_HL", "P_LH",
    "f_ucrHL", "f_ucrLH", "f_icrHL", "f_icrLH",
)


def full_report(quad: ResistorQuad, u_la: float, cable: CableModel, b: float) -> dict[str, float]:
    """Every derived design quantity for one configuration, keyed by table row label."""
    gens = vmg_solve(quad, u_la, b)
    temps = temperatures(quad, gens)
    res = resultants(quad)
    levels = wire_levels(quad, gens)
    bt = bit_temperatures(levels, quad, b)
    cr = crossover_frequencies(quad, cable)
    values = (
        quad.r_ha, quad.r_lb, quad.r_la, quad.r_hb,
        gens.u_ha, gens.u_lb, gens.u_la, gens.u_hb,
        temps.t_ha, temps.t_lb, temps.t_la, temps.t_hb,
        res.r_p_hl, res.r_p_lh, res.r_s_hl, res.r_s_lh,
        bt.t_u_hl, bt.t_u_lh, bt.t_i_hl, bt.t_i_lh,
        levels.u_hl, levels.u_lh, levels.i_hl, levels.i_lh,
        levels.p_hl, levels.p_lh,
        cr.f_ucr_hl, cr.f_ucr_lh, cr.f_icr_hl, cr.f_icr_lh,
    )
    return dict(zip(REPORT_ROWS, values))
