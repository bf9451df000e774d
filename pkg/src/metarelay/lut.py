"""Control-plane sweep and phase->voltage lookup-table synthesis.

The sweep evaluates the unit cell over a (u_m, u_e) voltage grid (and
optionally several frequencies).  The one-time table build then picks,
for every phase bin, the grid point that maximizes coefficient magnitude.
Optimization is exhaustive on the grid: the landscape contains resonance
poles, so gradient methods are not trustworthy, and a full scan of ~10^4
points is cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import __version__
from .config import CellConfig, CellStack, build_cell_stack
from .errors import ConfigError, CoverageError, DomainError


class BeamMode(str, Enum):
    LENS = "lens"       # transmissive: table indexes T
    MIRROR = "mirror"   # reflective: table indexes Gamma


def wrap_degrees(angle):
    """Wrap angles to [-180, 180)."""
    return (np.asarray(angle) + 180.0) % 360.0 - 180.0


def quantize_voltage(volts: float, bits: int = 16, v_max: float = 10.0) -> tuple[int, float]:
    """DAC code and the voltage the DAC actually reproduces.

    Codes 0..2^bits-1 span [0, v_max]; round-trip error is at most half the
    v_max/(2^bits - 1) step.
    """
    if not 0.0 <= volts <= v_max:
        raise DomainError(f"voltage {volts} outside [0, {v_max}] V")
    levels = (1 << bits) - 1
    code = int(round(volts / v_max * levels))
    return code, code * v_max / levels


@dataclass(frozen=True)
class ControlState:
    """One rib's voltage pair, stored exactly as the DAC reproduces it."""

    u_m: float
    u_e: float
    code_m: int
    code_e: int

    @classmethod
    def from_voltages(cls, u_m: float, u_e: float, bits: int = 16, v_max: float = 10.0) -> "ControlState":
        code_m, qm = quantize_voltage(u_m, bits, v_max)
        code_e, qe = quantize_voltage(u_e, bits, v_max)
        return cls(u_m=qm, u_e=qe, code_m=code_m, code_e=code_e)


def voltage_grid(v_min: float, v_max: float, step: float, bits: int = 16, dac_full_scale: float = 10.0) -> np.ndarray:
    """Uniform bias grid pre-snapped to DAC-representable voltages."""
    if step <= 0:
        raise DomainError("voltage step must be positive")
    n = int(round((v_max - v_min) / step))
    raw = v_min + step * np.arange(n + 1)
    return np.array([quantize_voltage(float(v), bits, dac_full_scale)[1] for v in raw])


@dataclass
class HuygensPattern:
    """Cell coefficients over a frequency x u_m x u_e grid."""

    freqs: np.ndarray          # (F,) Hz
    u_m: np.ndarray            # (A,) V
    u_e: np.ndarray            # (B,) V
    transmission: np.ndarray   # (F, A, B) complex
    reflection: np.ndarray     # (F, A, B) complex
    stack: CellStack

    def freq_index(self, freq: float) -> int:
        if not (self.freqs.min() <= freq <= self.freqs.max()):
            raise DomainError(
                f"frequency {freq/1e9:.3f} GHz outside the swept "
                f"[{self.freqs.min()/1e9:.3f}, {self.freqs.max()/1e9:.3f}] GHz"
            )
        return int(np.argmin(np.abs(self.freqs - freq)))

    def coefficients(self, mode: BeamMode) -> np.ndarray:
        return self.transmission if mode is BeamMode.LENS else self.reflection


def sweep_pattern(stack: CellStack, freqs, u_m, u_e) -> HuygensPattern:
    """Evaluate the cell over every (freq, u_m, u_e) grid point."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    u_m = np.atleast_1d(np.asarray(u_m, dtype=float))
    u_e = np.atleast_1d(np.asarray(u_e, dtype=float))
    if freqs.size == 0 or u_m.size == 0 or u_e.size == 0:
        raise DomainError("sweep grids must be non-empty")
    t, g = stack.coefficients(
        u_m[None, :, None], u_e[None, None, :], freqs[:, None, None]
    )
    return HuygensPattern(
        freqs=freqs, u_m=u_m, u_e=u_e,
        transmission=np.asarray(t, dtype=complex),
        reflection=np.asarray(g, dtype=complex),
        stack=stack,
    )


@dataclass(frozen=True)
class LutEntry:
    target_phase_deg: float
    control: ControlState
    achieved: complex          # coefficient at the table's center frequency
    flagged: bool = False      # True when filled from the nearest-phase fallback

    @property
    def achieved_phase_deg(self) -> float:
        return float(np.degrees(np.angle(self.achieved)))

    @property
    def achieved_magnitude(self) -> float:
        return float(abs(self.achieved))


@dataclass
class PhaseLookupTable:
    """Phase bin -> best control state, for one mode at one frequency."""

    mode: BeamMode
    center_freq: float
    phase_step_deg: float
    entries: list[LutEntry]
    stack: CellStack
    cell_config: Optional[dict] = None
    config_hash: Optional[str] = None

    def __post_init__(self) -> None:
        self.entries = sorted(self.entries, key=lambda e: e.target_phase_deg)

    @property
    def targets(self) -> np.ndarray:
        return np.array([e.target_phase_deg for e in self.entries])

    @property
    def flagged_count(self) -> int:
        return sum(e.flagged for e in self.entries)

    def entry_for_phase(self, phase_deg: float) -> LutEntry:
        """Nearest bin by wrapped phase distance."""
        distances = np.abs(wrap_degrees(self.targets - wrap_degrees(phase_deg)))
        return self.entries[int(np.argmin(distances))]

    def resolve(self, phase_deg) -> tuple[list[LutEntry], np.ndarray]:
        """Map target phases to entries; returns entries and achieved coefficients."""
        phases = np.atleast_1d(np.asarray(phase_deg, dtype=float))
        chosen = [self.entry_for_phase(p) for p in phases]
        return chosen, np.array([e.achieved for e in chosen])


def build_lut(
    pattern: HuygensPattern,
    mode: BeamMode,
    phase_step_deg: float = 15.0,
    center_freq: Optional[float] = None,
    max_flagged_fraction: float = 0.25,
    dac_bits: int = 16,
    cell_config: Optional[dict] = None,
    config_hash: Optional[str] = None,
) -> PhaseLookupTable:
    """Exhaustive per-bin magnitude maximization over the swept grid.

    Bins partition [-180, 180) half-open.  Empty bins are filled from the
    nearest-phase candidate and flagged; more than ``max_flagged_fraction``
    flagged bins aborts with a coverage failure.  Ties on magnitude break
    to the lower u_m + u_e sum, then the lower u_m, so the result does not
    depend on scan order.
    """
    if pattern.u_m.size == 0 or pattern.u_e.size == 0:
        raise DomainError("cannot build a lookup table from an empty pattern")
    if phase_step_deg <= 0 or abs(360.0 / phase_step_deg - round(360.0 / phase_step_deg)) > 1e-12:
        raise DomainError(f"phase step {phase_step_deg} must divide 360")
    freq = pattern.freqs[pattern.freq_index(center_freq)] if center_freq is not None else pattern.freqs[0]
    if center_freq is None and pattern.freqs.size > 1:
        raise DomainError("pattern spans several frequencies; specify center_freq")

    coef = pattern.coefficients(mode)[pattern.freq_index(freq)]
    phase = np.degrees(np.angle(coef))
    mag = np.abs(coef)
    um_grid, ue_grid = np.meshgrid(pattern.u_m, pattern.u_e, indexing="ij")

    targets = np.arange(-180.0, 180.0, phase_step_deg)
    half = phase_step_deg / 2.0
    entries: list[LutEntry] = []
    n_flagged = 0
    for target in targets:
        offset = wrap_degrees(phase - target)
        in_bin = (offset >= -half) & (offset < half) & (mag > 0)
        if in_bin.any():
            candidates = np.argwhere(in_bin)
            flagged = False
        else:
            distance = np.abs(offset)
            distance[mag == 0] = np.inf
            if not np.isfinite(distance).any():
                n_flagged += 1
                continue
            candidates = np.argwhere(distance == distance.min())
            flagged = True
            n_flagged += 1
        order = sorted(
            (tuple(c) for c in candidates),
            key=lambda ij: (
                -mag[ij], um_grid[ij] + ue_grid[ij], um_grid[ij],
            ),
        )
        i, j = order[0]
        entries.append(
            LutEntry(
                target_phase_deg=float(target),
                control=ControlState.from_voltages(
                    float(pattern.u_m[i]), float(pattern.u_e[j]), bits=dac_bits
                ),
                achieved=complex(coef[i, j]),
                flagged=flagged,
            )
        )
    if n_flagged > max_flagged_fraction * targets.size:
        raise CoverageError(
            f"{n_flagged} of {targets.size} phase bins lack candidates "
            f"(limit {max_flagged_fraction:.0%}) for mode {mode.value}"
        )
    return PhaseLookupTable(
        mode=mode, center_freq=float(freq), phase_step_deg=float(phase_step_deg),
        entries=entries, stack=pattern.stack,
        cell_config=cell_config, config_hash=config_hash,
    )


def efficiency(pattern: HuygensPattern, mode: BeamMode, freq: float) -> complex:
    """Coherent best-per-degree sum: sum_phi T(phi) e^{-j phi} / 360.

    Per integer degree in [-180, 180) the maximum-magnitude coefficient is
    taken; degrees with no candidate contribute zero.  A perfect surface
    (unit magnitude at every phase) scores exactly 1.
    """
    coef = pattern.coefficients(mode)[pattern.freq_index(freq)]
    phase = np.round(np.degrees(np.angle(coef))).astype(int)
    phase[phase == 180] = -180
    mag = np.abs(coef)
    flat_phase = phase.ravel()
    flat_mag = mag.ravel()
    flat_coef = coef.ravel()
    total = 0j
    for degree in range(-180, 180):
        sel = flat_phase == degree
        if sel.any():
            idx = np.flatnonzero(sel)[np.argmax(flat_mag[sel])]
            total += flat_coef[idx] * np.exp(-1j * np.radians(degree))
    return total / 360.0


@dataclass
class BandwidthProfile:
    """Per-entry coefficient curves across a frequency grid."""

    freqs: np.ndarray             # (F,)
    coefficients: np.ndarray      # (n_entries, F) complex
    max_dev_deg: np.ndarray       # (n_entries,) worst |phase - stored| within the band
    band_halfwidth: float


def bandwidth_profile(
    lut: PhaseLookupTable, freqs, band_halfwidth: float = 100e6
) -> BandwidthProfile:
    """Re-evaluate each stored control state across ``freqs``.

    ``max_dev_deg`` reports the worst wrapped phase deviation from the
    stored achieved coefficient among grid frequencies within
    ``band_halfwidth`` of the table's center frequency.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if freqs.size == 0 or np.any(np.diff(freqs) <= 0):
        raise DomainError("frequency grid must be non-empty and strictly increasing")
    u_m = np.array([e.control.u_m for e in lut.entries])
    u_e = np.array([e.control.u_e for e in lut.entries])
    t, g = lut.stack.coefficients(u_m[:, None], u_e[:, None], freqs[None, :])
    coefs = np.asarray(t if lut.mode is BeamMode.LENS else g, dtype=complex)
    in_band = np.abs(freqs - lut.center_freq) <= band_halfwidth
    devs = np.zeros(len(lut.entries))
    if in_band.any():
        stored = np.array([e.achieved for e in lut.entries])
        delta = np.degrees(np.angle(coefs[:, in_band])) - np.degrees(np.angle(stored))[:, None]
        devs = np.abs(wrap_degrees(delta)).max(axis=1)
    return BandwidthProfile(
        freqs=freqs, coefficients=coefs, max_dev_deg=devs, band_halfwidth=band_halfwidth
    )


# ---------------------------------------------------------------------------
# Persistence: JSON with explicit units and the generating config hash.

def lut_to_document(lut: PhaseLookupTable) -> dict:
    return {
        "kind": "phase-lookup-table",
        "tool_version": __version__,
        "config_hash": lut.config_hash,
        "mode": lut.mode.value,
        "center_freq_hz": lut.center_freq,
        "phase_step_deg": lut.phase_step_deg,
        "units": {"voltage": "V", "frequency": "Hz", "phase": "deg"},
        "cell": lut.cell_config,
        "entries": [
            {
                "target_phase_deg": e.target_phase_deg,
                "u_m": e.control.u_m,
                "u_e": e.control.u_e,
                "code_m": e.control.code_m,
                "code_e": e.control.code_e,
                "achieved_re": e.achieved.real,
                "achieved_im": e.achieved.imag,
                "achieved_mag": e.achieved_magnitude,
                "achieved_phase_deg": e.achieved_phase_deg,
                "flagged": e.flagged,
            }
            for e in lut.entries
        ],
    }


def lut_from_document(doc: dict) -> PhaseLookupTable:
    if doc.get("kind") != "phase-lookup-table":
        raise ConfigError("document is not a phase lookup table")
    if doc.get("cell") is None:
        raise ConfigError("lookup table document lacks the embedded cell config")
    stack = build_cell_stack(CellConfig.model_validate(doc["cell"]))
    entries = [
        LutEntry(
            target_phase_deg=float(e["target_phase_deg"]),
            control=ControlState(
                u_m=float(e["u_m"]), u_e=float(e["u_e"]),
                code_m=int(e["code_m"]), code_e=int(e["code_e"]),
            ),
            achieved=complex(e["achieved_re"], e["achieved_im"]),
            flagged=bool(e["flagged"]),
        )
        for e in doc["entries"]
    ]
    return PhaseLookupTable(
        mode=BeamMode(doc["mode"]),
        center_freq=float(doc["center_freq_hz"]),
        phase_step_deg=float(doc["phase_step_deg"]),
        entries=entries,
        stack=stack,
        cell_config=doc.get("cell"),
        config_hash=doc.get("config_hash"),
    )


def lut_to_json(lut: PhaseLookupTable) -> str:
    return json.dumps(lut_to_document(lut), indent=2, sort_keys=True)


def lut_from_json(text: str) -> PhaseLookupTable:
    return lut_from_document(json.loads(text))
