"""Far-field beam synthesis over the rib array.

One control pair drives a whole vertical rib, so steering is azimuthal
over the columns; the rows contribute a fixed vertical factor that folds
into aggregate gain.  Angles are measured from broadside (the surface
normal), so the per-column phase gradient goes with sin(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import wavelength
from .errors import DomainError
from .lut import BeamMode, ControlState, PhaseLookupTable, wrap_degrees


@dataclass(frozen=True)
class SurfaceArray:
    """Element grid: columns steer, rows stack vertically."""

    n_cols: int = 76
    m_rows: int = 28
    col_spacing: float = 2.6e-3
    row_spacing: float = 4.0789e-3      # ~wavelength/3 at 24.5 GHz
    center_freq: float = 24.5e9

    def __post_init__(self) -> None:
        if self.n_cols < 1 or self.m_rows < 1:
            raise DomainError("element counts must be at least 1")
        if self.col_spacing <= 0 or self.row_spacing <= 0:
            raise DomainError("element spacings must be positive")

    @property
    def wavelength(self) -> float:
        return wavelength(self.center_freq)

    @property
    def width(self) -> float:
        return self.n_cols * self.col_spacing

    @property
    def height(self) -> float:
        return self.m_rows * self.row_spacing


@dataclass
class BeamCommand:
    """Per-column targets and the LUT resolution that realizes them."""

    mode: BeamMode
    arms: list[tuple[float, float]]           # (angle deg from broadside, weight)
    per_column_phase: np.ndarray              # target phases, deg, length n_cols
    controls: list[ControlState]
    coefficients: np.ndarray                  # achieved complex coefficient per column
    incident_angle: float = 0.0
    amplitude_targets: Optional[np.ndarray] = None   # multibeam |e_n| before LUT
    amplitude_rms_error: float = 0.0


@dataclass
class RadiationPattern:
    angles_deg: np.ndarray
    field: np.ndarray          # complex
    power_db: np.ndarray       # normalized, peak at 0 dB

    @classmethod
    def from_field(cls, angles_deg: np.ndarray, field: np.ndarray) -> "RadiationPattern":
        mag = np.abs(field)
        peak = mag.max()
        if peak == 0:
            power = np.full(mag.shape, -np.inf)
        else:
            with np.errstate(divide="ignore"):
                power = 20.0 * np.log10(mag / peak)
        return cls(angles_deg=angles_deg, field=field, power_db=power)


def element_pattern(theta_deg, q: float = 0.5611):
    """Normalized element power pattern cos^q(theta), zero from +-90 deg on."""
    if q <= 0:
        raise DomainError("element pattern exponent must be positive")
    theta = np.asarray(theta_deg, dtype=float)
    inside = np.abs(theta) < 90.0
    clipped = np.minimum(np.abs(theta), 90.0)
    out = np.where(inside, np.cos(np.radians(clipped)) ** q, 0.0)
    return out if out.ndim else float(out)


def _column_phases(array: SurfaceArray, angles_deg: Sequence[float], incident_angle: float) -> np.ndarray:
    """Target phase per column for each steering angle: -k n d (sin th + sin th_i)."""
    n = np.arange(array.n_cols)
    k_d = 2.0 * np.pi * array.col_spacing / array.wavelength
    sin_sum = np.sin(np.radians(np.asarray(angles_deg))) + np.sin(np.radians(incident_angle))
    return -np.degrees(k_d) * n[None, :] * sin_sum[:, None]


def steering_command(
    array: SurfaceArray,
    lut: PhaseLookupTable,
    theta_s: float,
    incident_angle: float = 0.0,
) -> BeamCommand:
    """Single-beam steering command resolved through the lookup table."""
    if not -90.0 < theta_s < 90.0:
        raise DomainError("steering angle must lie strictly inside (-90, 90) deg")
    targets = wrap_degrees(_column_phases(array, [theta_s], incident_angle)[0])
    entries, coefficients = lut.resolve(targets)
    return BeamCommand(
        mode=lut.mode,
        arms=[(theta_s, 1.0)],
        per_column_phase=targets,
        controls=[e.control for e in entries],
        coefficients=coefficients,
        incident_angle=incident_angle,
    )


def multibeam_command(
    array: SurfaceArray,
    lut: PhaseLookupTable,
    arms: Sequence[tuple[float, float]],
    incident_angle: float = 0.0,
) -> BeamCommand:
    """Two-armed beam: superpose per-arm phasors, resolve the net phase.

    The synthesized excitation is alpha*e^{j phi1} + beta*e^{j phi2},
    rescaled so the largest column magnitude is 1.  The table is phase
    indexed, so only the phase is commanded; the residual between the
    wanted |e_n| and the achieved coefficient magnitudes is reported.
    """
    if len(arms) != 2:
        raise DomainError("multibeam synthesis expects exactly two arms")
    (a1, w1), (a2, w2) = arms
    if abs(wrap_degrees(a1 - a2)) < 1e-9:
        raise DomainError("coincident arm angles: use steering_command instead")
    if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
        raise DomainError("arm weights must be non-negative and not both zero")
    phases = np.radians(_column_phases(array, [a1, a2], incident_angle))
    excitation = w1 * np.exp(1j * phases[0]) + w2 * np.exp(1j * phases[1])
    peak = np.abs(excitation).max()
    excitation = excitation / peak
    targets = wrap_degrees(np.degrees(np.angle(excitation)))
    entries, coefficients = lut.resolve(targets)
    residual = float(np.sqrt(np.mean((np.abs(excitation) - np.abs(coefficients)) ** 2)))
    return BeamCommand(
        mode=lut.mode,
        arms=[(a1, w1), (a2, w2)],
        per_column_phase=targets,
        controls=[e.control for e in entries],
        coefficients=coefficients,
        incident_angle=incident_angle,
        amplitude_targets=np.abs(excitation),
        amplitude_rms_error=residual,
    )


def natural_beamwidth_deg(array: SurfaceArray) -> float:
    """Approximate -3 dB width of the unspoiled column array at broadside."""
    return math.degrees(0.886 * array.wavelength / (array.n_cols * array.col_spacing))


def _spoiled_phases(
    array: SurfaceArray, center_deg: float, width_deg: float, incident_angle: float
) -> np.ndarray:
    """Steering phases plus quadratic spoiling to cover ``width_deg``.

    A quadratic profile sweeps the local steering direction across the
    aperture; the edge phase is sized so the swept sin-range widens the
    natural beam out to the requested width.  Widths at or under the
    natural beamwidth leave the pencil beam untouched.
    """
    n = np.arange(array.n_cols)
    u = 2.0 * n / max(array.n_cols - 1, 1) - 1.0        # -1..1 across the aperture
    k_d = 2.0 * math.pi * array.col_spacing / array.wavelength
    span = math.sin(math.radians(center_deg + width_deg / 2.0)) - math.sin(
        math.radians(center_deg - width_deg / 2.0)
    )
    natural_span = 0.886 * array.wavelength / (array.n_cols * array.col_spacing)
    extra = max(abs(span) - natural_span, 0.0)
    edge_phase = array.n_cols * k_d * extra / 8.0
    steer = _column_phases(array, [center_deg], incident_angle)[0]
    return steer + math.degrees(edge_phase) * u**2


def region_pair_command(
    array: SurfaceArray,
    lut: PhaseLookupTable,
    arms: Sequence[tuple[float, float]],
    incident_angle: float = 0.0,
) -> BeamCommand:
    """Two-armed beam whose arms are widened to cover angular regions.

    ``arms`` holds (center_deg, width_deg) pairs; one arm degenerates to a
    single widened beam.  Used by the hierarchical search, where each stage
    must illuminate whole candidate regions rather than single directions.
    """
    if not 1 <= len(arms) <= 2:
        raise DomainError("region pair expects one or two arms")
    natural = natural_beamwidth_deg(array)
    excitation = np.zeros(array.n_cols, dtype=complex)
    for center, width in arms:
        phases = _spoiled_phases(array, center, max(width, natural), incident_angle)
        excitation += np.exp(1j * np.radians(phases))
    excitation /= np.abs(excitation).max()
    targets = wrap_degrees(np.degrees(np.angle(excitation)))
    entries, coefficients = lut.resolve(targets)
    return BeamCommand(
        mode=lut.mode,
        arms=[(center, 1.0) for center, _ in arms],
        per_column_phase=targets,
        controls=[e.control for e in entries],
        coefficients=coefficients,
        incident_angle=incident_angle,
        amplitude_targets=np.abs(excitation),
        amplitude_rms_error=float(
            np.sqrt(np.mean((np.abs(excitation) - np.abs(coefficients)) ** 2))
        ),
    )


def ideal_phase_command(
    array: SurfaceArray,
    mode: BeamMode,
    theta_s: float,
    incident_angle: float = 0.0,
) -> BeamCommand:
    """Unit-magnitude, unquantized-phase reference command (no LUT)."""
    targets = wrap_degrees(_column_phases(array, [theta_s], incident_angle)[0])
    return BeamCommand(
        mode=mode,
        arms=[(theta_s, 1.0)],
        per_column_phase=targets,
        controls=[],
        coefficients=np.exp(1j * np.radians(targets)),
        incident_angle=incident_angle,
    )


def radiation_pattern(
    array: SurfaceArray,
    command: BeamCommand,
    incident_angle: Optional[float] = None,
    angles_deg=None,
) -> RadiationPattern:
    """Element pattern times the column sum, over an observation grid.

    field(th) = sqrt(F(th_i)) sqrt(F(th)) sum_n C_n e^{j k n d (sin th + sin th_i)}

    The expression is symmetric in (th_i, th) term by term, which is the
    angular-reciprocity property at the pattern level.  The column sum runs
    in fixed index order so results are reduction-order deterministic.
    """
    if incident_angle is None:
        incident_angle = command.incident_angle
    if angles_deg is None:
        angles_deg = np.arange(-90.0, 90.0 + 1e-9, 0.5)
    angles_deg = np.asarray(angles_deg, dtype=float)
    if angles_deg.size and (angles_deg.min() < -90.0 or angles_deg.max() > 90.0):
        raise DomainError("observation grid must stay within (-90, 90) deg")
    coefficients = np.asarray(command.coefficients, dtype=complex)
    if coefficients.shape != (array.n_cols,):
        raise DomainError(
            f"command carries {coefficients.shape} coefficients for {array.n_cols} columns"
        )
    n = np.arange(array.n_cols)
    k_d = 2.0 * np.pi * array.col_spacing / array.wavelength
    sin_sum = np.sin(np.radians(angles_deg)) + np.sin(np.radians(incident_angle))
    steering = np.exp(1j * k_d * np.outer(sin_sum, n))
    field = steering @ coefficients
    field = field * np.sqrt(element_pattern(incident_angle)) * np.sqrt(element_pattern(angles_deg))
    return RadiationPattern.from_field(angles_deg, field)


def peak_detect(
    pattern: RadiationPattern, k: int = 1, guard_deg: float = 5.0
) -> list[tuple[float, float]]:
    """Top-k local maxima (angle, power dB), separated by at least the guard."""
    if k < 1:
        raise DomainError("peak count must be at least 1")
    power = pattern.power_db
    angles = pattern.angles_deg
    finite = np.isfinite(power)
    if not finite.any():
        return []
    candidates = []
    for i in range(len(power)):
        if not finite[i]:
            continue
        left = power[i - 1] if i > 0 else -np.inf
        right = power[i + 1] if i < len(power) - 1 else -np.inf
        if power[i] >= left and power[i] >= right:
            candidates.append((power[i], angles[i]))
    candidates.sort(key=lambda c: (-c[0], c[1]))
    kept: list[tuple[float, float]] = []
    for p, a in candidates:
        if all(abs(a - ka) >= guard_deg for ka, _ in kept):
            kept.append((a, p))
        if len(kept) == k:
            break
    return kept


def quantization_loss_db(
    array: SurfaceArray, lut_step_deg: float, theta_s: float, incident_angle: float = 0.0
) -> float:
    """Peak-gain loss of phase quantization at unit element magnitude.

    Compares the coherent peak of exact per-column phases against the same
    phases snapped to the table step; isolates quantization from the
    table's magnitude profile.
    """
    targets = wrap_degrees(_column_phases(array, [theta_s], incident_angle)[0])
    quantized = wrap_degrees(np.round(targets / lut_step_deg) * lut_step_deg)
    exact = np.abs(np.sum(np.exp(1j * np.radians(targets)) * np.exp(-1j * np.radians(targets))))
    snapped = np.abs(np.sum(np.exp(1j * np.radians(quantized)) * np.exp(-1j * np.radians(targets))))
    return 20.0 * np.log10(exact / snapped)


def grating_lobe_report(
    pattern: RadiationPattern, main_angle: float, threshold_db: float = -10.0, guard_deg: float = 10.0
) -> dict:
    """Brute-force scan for secondary lobes above ``threshold_db``.

    Returns the worst secondary lobe outside the guard window around the
    commanded angle; ``clean`` is False when it exceeds the threshold.
    """
    away = np.abs(pattern.angles_deg - main_angle) > guard_deg
    if not away.any():
        return {"clean": True, "worst_angle_deg": None, "worst_level_db": None}
    finite = np.where(away, pattern.power_db, -np.inf)
    idx = int(np.argmax(finite))
    worst = float(pattern.power_db[idx])
    return {
        "clean": bool(worst < threshold_db),
        "worst_angle_deg": float(pattern.angles_deg[idx]),
        "worst_level_db": worst,
    }


def grating_lobe_check(
    array: SurfaceArray, theta_s: float, incident_angle: float = 0.0, margin: float = 0.1
) -> dict:
    """Lattice-alias safety of a steering command.

    Diffraction orders sit at sin(th) = sin(th_s) - m * lambda/d.  The
    command is flagged when any order lands inside visible space or within
    ``margin`` of it in sin-space (near-grazing orders still bleed power as
    commands or geometry wiggle).  ``incident_angle`` is accepted for
    symmetry with the command builders; the incident phase ramp cancels out
    of the order locations.
    """
    ratio = array.wavelength / array.col_spacing
    target = math.sin(math.radians(theta_s))
    aliases = []
    m = 1
    while True:
        candidates = [target - m * ratio, target + m * ratio]
        in_reach = [c for c in candidates if abs(c) <= 1.0 + margin]
        if not in_reach and min(abs(c) for c in candidates) > 1.0 + margin:
            break
        aliases.extend(in_reach)
        m += 1
        if m > 64:
            break
    nearest = min((abs(abs(a) - 1.0) for a in aliases), default=math.inf)
    return {
        "clean": not aliases,
        "alias_sines": aliases,
        "nearest_alias_margin": nearest if aliases else None,
    }
