"""Analytic design library and Monte-Carlo simulator for KLJN key exchangers."""

from .circuit import (
    BOLTZMANN,
    BitState,
    CableModel,
    GeneratorSet,
    ResistorQuad,
    SpectralSummary,
    WireLevels,
    band_limited_ms,
    bit_temperatures,
    crossover_frequencies,
    filtered_levels,
    full_report,
    lorentzian,
    match_parallel_fourth,
    match_serial_fourth,
    resultants,
    spectral_summary,
    temperatures,
    vmg_solve,
    wire_levels,
    zero_power_fourth,
)

__version__ = "0.1.0"
