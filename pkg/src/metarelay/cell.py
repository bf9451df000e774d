"""Equivalent-circuit model of one tunable Huygens unit cell.

A unit cell pairs a magnetic-side split-ring resonator with an electric-side
resonator on the opposite face of the substrate.  Each side behaves as a
series LC circuit whose capacitance is partly fixed by the copper geometry
(gap + surface capacitance) and partly set by a reverse-biased varactor
diode.  From the two immittances the complex transmission and reflection
coefficients of the cell follow in closed form.

All quantities are SI (meters, farads, henries, hertz, ohms, siemens).
Functions accept scalars or numpy arrays interchangeably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import ETA_0, EPS_0, MU_0
from .errors import DomainError, PoleError, SingularityError

DENOMINATOR_FLOOR = 1e-30


class Side(str, Enum):
    MAGNETIC = "magnetic"
    ELECTRIC = "electric"


class ImpedanceFormula(str, Enum):
    """Which immittance expressions to evaluate.

    CANONICAL is the series-LC impedance/admittance pair whose units are
    consistent with the transmission/reflection formula (ohm * siemens
    products are dimensionless).  LEGACY evaluates an alternate published
    form verbatim; it is dimensionally suspect off resonance and is kept
    only for cross-checking resonance locations.
    """

    CANONICAL = "canonical"
    LEGACY = "legacy"


@dataclass(frozen=True)
class UnitCellGeometry:
    """Copper-loop geometry of one meta-atom side.

    radius           mean loop radius R (m)
    trace_width      copper trace width w (m)
    gap              split-gap length g (m)
    copper_thickness copper foil thickness t (m)
    substrate_eps_r  relative permittivity of the substrate
    side             which resonator this geometry describes
    """

    radius: float
    trace_width: float
    gap: float
    copper_thickness: float
    substrate_eps_r: float
    side: Side

    def __post_init__(self) -> None:
        for name in ("radius", "trace_width", "gap", "copper_thickness"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gap >= 2 * math.pi * self.radius:
            raise DomainError("gap length must be shorter than the loop circumference")
        if self.substrate_eps_r < 1:
            raise DomainError("substrate permittivity must be >= 1")

    def scaled(self, **factors: float) -> "UnitCellGeometry":
        """Copy with named dimensions multiplied by the given factors."""
        values = {
            "radius": self.radius,
            "trace_width": self.trace_width,
            "gap": self.gap,
            "copper_thickness": self.copper_thickness,
        }
        for name, factor in factors.items():
            values[name] = values[name] * factor
        return UnitCellGeometry(
            substrate_eps_r=self.substrate_eps_r, side=self.side, **values
        )


@dataclass(frozen=True)
class VaractorModel:
    """Junction-capacitance law C(V) = c_j0 / (1 + V/phi_j)^gamma."""

    c_j0: float          # zero-bias junction capacitance (F)
    phi_j: float         # junction potential (V)
    gamma: float         # grading exponent
    v_min: float = 0.0   # legal bias range (V)
    v_max: float = 10.0

    def __post_init__(self) -> None:
        if self.c_j0 <= 0 or self.phi_j <= 0 or self.gamma <= 0:
            raise DomainError("varactor parameters must be positive")
        if self.v_min >= self.v_max:
            raise DomainError("varactor bias range is empty")


@dataclass(frozen=True)
class CircuitParams:
    """Lumped series-LC equivalent of one meta-atom side."""

    inductance: float    # H
    capacitance: float   # F
    side: Side

    def __post_init__(self) -> None:
        if self.inductance <= 0 or self.capacitance <= 0:
            raise DomainError("circuit L and C must be positive")


@dataclass(frozen=True)
class SurfaceImmittance:
    """Electric surface impedance and magnetic surface admittance.

    ``magnetic_pole`` is set instead of returning an infinite admittance
    when the magnetic side is evaluated exactly at its series resonance.
    """

    z_e: complex                 # ohm
    y_m: complex                 # siemens
    eta: float = ETA_0           # ohm
    magnetic_pole: bool = False


@dataclass(frozen=True)
class ScatterCoefficient:
    """Complex transmission/reflection of one cell at one frequency."""

    t_coef: complex
    gamma_coef: complex
    freq: float


def varactor_capacitance(model: VaractorModel, bias):
    """Varactor junction capacitance at the given bias voltage (F).

    Strictly decreasing in bias.  Raises for bias outside the legal range.
    """
    bias_arr = np.asarray(bias, dtype=float)
    if np.any(bias_arr < model.v_min) or np.any(bias_arr > model.v_max):
        raise DomainError(
            f"bias outside [{model.v_min}, {model.v_max}] V: {bias!r}"
        )
    out = model.c_j0 / (1.0 + bias_arr / model.phi_j) ** model.gamma
    return out if out.ndim else float(out)


def loop_inductance(radius: float, trace_width: float, copper_thickness: float) -> float:
    """Self-inductance of a full circular loop of flat trace (H)."""
    argument = 8.0 * radius / (copper_thickness + trace_width)
    if argument <= 0:
        raise DomainError("loop inductance log argument must be positive")
    value = MU_0 * radius * (math.log(argument) - 0.5)
    if value <= 0:
        raise DomainError(
            "non-physical loop geometry: inductance is not positive "
            f"(R={radius}, w={trace_width}, t={copper_thickness})"
        )
    return value


def strip_inductance(length: float, trace_width: float) -> float:
    """Self-inductance of a flat straight strip (H).

    Exact thin-tape expression; the large leading terms cancel to O(1),
    which float64 absorbs comfortably for any realistic aspect ratio.
    """
    l, w = length, trace_width
    if l <= 0 or w <= 0:
        raise DomainError("strip dimensions must be positive")
    bracket = (
        2.0 * math.asinh(l / w)
        + 2.0 * (w / l) * math.asinh(w / l)
        - 2.0 * (w**2 + l**2) ** 1.5 / (3.0 * l * w**2)
        + (2.0 / 3.0) * (l / w) ** 2
        + (2.0 / 3.0) * (w / l)
    )
    value = MU_0 * l / (4.0 * math.pi) * bracket
    if value <= 0:
        raise DomainError("non-physical strip geometry: inductance is not positive")
    return value


def effective_permittivity(geom: UnitCellGeometry) -> float:
    """Effective permittivity seen by the trace capacitances."""
    eps_r = geom.substrate_eps_r
    ratio = 12.0 * geom.copper_thickness / geom.trace_width
    return (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 / math.sqrt(1.0 + ratio)


def gap_capacitance(geom: UnitCellGeometry) -> float:
    """Parallel-plate plus fringing capacitance of the split gap (F)."""
    eps = EPS_0 * effective_permittivity(geom)
    w, t, g = geom.trace_width, geom.copper_thickness, geom.gap
    return eps * (w * t / g) + eps * (t + w + g)

def surface_capacitance(geom: UnitCellGeometry) -> float:
    """Capacitance contributed by the metallic ring surface itself (F)."""
    eps = EPS_0 * effective_permittivity(geom)
    return (
        2.0
        * eps
        * (geom.copper_thickness + geom.trace_width)
        / math.pi
        * math.log(4.0 * geom.radius / geom.gap)
    )


def gap_factor(geom: UnitCellGeometry) -> float:
    """Fraction of the loop circumference that carries copper."""
    return 1.0 - geom.gap / (2.0 * math.pi * geom.radius)


def magnetic_circuit(geom: UnitCellGeometry, c_var: float) -> CircuitParams:
    """Lumped LC equivalent of the magnetic-side split ring."""
    if geom.side is not Side.MAGNETIC:
        raise DomainError("geometry is not a magnetic-side description")
    if c_var <= 0:
        raise DomainError("varactor capacitance must be positive")
    inductance = gap_factor(geom) * loop_inductance(
        geom.radius, geom.trace_width, geom.copper_thickness
    )
    fixed = gap_capacitance(geom) + surface_capacitance(geom)
    capacitance = 1.0 / (1.0 / fixed + 1.0 / c_var)
    return CircuitParams(inductance, capacitance, Side.MAGNETIC)


def electric_circuit(geom: UnitCellGeometry, c_var: float) -> CircuitParams:
    """Lumped LC equivalent of the electric-side resonator.

    Two half-loops in parallel (each half of the gapped full circle) in
    series with the shared center strip of length 2R; the two gap+surface
    capacitances sit in parallel, in series with the varactor.
    """
    if geom.side is not Side.ELECTRIC:
        raise DomainError("geometry is not an electric-side description")
    if c_var <= 0:
        raise DomainError("varactor capacitance must be positive")
    l_circle = loop_inductance(geom.radius, geom.trace_width, geom.copper_thickness)
    l_curve = gap_factor(geom) * l_circle / 2.0
    l_strip = strip_inductance(2.0 * geom.radius, geom.trace_width)
    inductance = l_curve / 2.0 + l_strip
    fixed = gap_capacitance(geom) + surface_capacitance(geom)
    capacitance = 1.0 / (1.0 / (2.0 * fixed) + 1.0 / c_var)
    return CircuitParams(inductance, capacitance, Side.ELECTRIC)


def resonant_frequency(params: CircuitParams) -> float:
    """Series resonance 1 / (2*pi*sqrt(LC)) in Hz."""
    return 1.0 / (2.0 * math.pi * math.sqrt(params.inductance * params.capacitance))


def series_reactance(params: CircuitParams, freq):
    """Series reactance w*L - 1/(w*C) at the given frequency (ohm)."""
    omega = 2.0 * np.pi * np.asarray(freq, dtype=float)
    out = omega * params.inductance - 1.0 / (omega * params.capacitance)
    return out if out.ndim else float(out)


def surface_immittance(
    f_op: float,
    elec: CircuitParams,
    mag: CircuitParams,
    mode: ImpedanceFormula = ImpedanceFormula.CANONICAL,
) -> SurfaceImmittance:
    """Electric impedance and magnetic admittance of the cell at ``f_op``.

    Both formula modes are purely reactive (lossless).  In canonical mode
    an exact magnetic series resonance has no finite admittance; the result
    is tagged with ``magnetic_pole`` instead of silently overflowing.
    """
    if f_op <= 0:
        raise DomainError("operating frequency must be positive")
    if elec.side is not Side.ELECTRIC or mag.side is not Side.MAGNETIC:
        raise DomainError("surface_immittance needs one electric and one magnetic side")
    omega = 2.0 * math.pi * f_op
    if mode is ImpedanceFormula.CANONICAL:
        x_e = omega * elec.inductance - 1.0 / (omega * elec.capacitance)
        x_m = omega * mag.inductance - 1.0 / (omega * mag.capacitance)
        if x_m == 0.0:
            return SurfaceImmittance(z_e=1j * x_e, y_m=0j, magnetic_pole=True)
        return SurfaceImmittance(z_e=1j * x_e, y_m=1.0 / (1j * x_m))
    # Legacy published form, evaluated verbatim.
    z_e = 1j * (omega * elec.capacitance - 1.0) / (omega**2 * elec.inductance * elec.capacitance)
    y_m = 1j * (1.0 - omega**2 * mag.inductance * mag.capacitance) / (omega * mag.capacitance)
    return SurfaceImmittance(z_e=z_e, y_m=y_m)


def scatter_coefficients(imm: SurfaceImmittance, freq: float) -> ScatterCoefficient:
    """Transmission and reflection of the cell from its immittances."""
    if imm.magnetic_pole:
        raise PoleError("immittance carries an unresolved magnetic-resonance pole")
    t, gamma = _scatter_from_immittance(imm.z_e, imm.y_m, imm.eta)
    return ScatterCoefficient(t_coef=complex(t), gamma_coef=complex(gamma), freq=freq)


def _scatter_from_immittance(z_e, y_m, eta: float = ETA_0):
    """Vector-friendly core of the transmission/reflection formula."""
    denom = (2.0 + y_m * eta) * (2.0 + z_e / eta)
    small = np.abs(denom) < DENOMINATOR_FLOOR
    if np.any(small):
        raise SingularityError("scatter coefficient denominator below numerical floor")
    t = (4.0 - y_m * z_e) / denom
    gamma = 2.0 * (z_e / eta - y_m * eta) / denom
    return t, gamma


def cell_coefficients(
    geom_m: UnitCellGeometry,
    geom_e: UnitCellGeometry,
    varactor: VaractorModel,
    u_m,
    u_e,
    freq,
    formula: ImpedanceFormula = ImpedanceFormula.CANONICAL,
    loss_factor: float = 1.0,
):
    """End-to-end cell evaluation: bias pair -> (T, Gamma).

    ``u_m``, ``u_e`` and ``freq`` broadcast together, so voltage grids and
    frequency sweeps evaluate in one vectorized pass.  ``loss_factor``
    scales both coefficients for insertion-loss sensitivity studies
    (1.0 = the lossless baseline).
    """
    c_m = varactor_capacitance(varactor, u_m)
    c_e = varactor_capacitance(varactor, u_e)
    mag = magnetic_circuit(geom_m, 1.0)   # unit varactor; recombined below
    ele = electric_circuit(geom_e, 1.0)

    fixed_m = gap_capacitance(geom_m) + surface_capacitance(geom_m)
    fixed_e = 2.0 * (gap_capacitance(geom_e) + surface_capacitance(geom_e))
    cap_m = 1.0 / (1.0 / fixed_m + 1.0 / np.asarray(c_m, dtype=float))
    cap_e = 1.0 / (1.0 / fixed_e + 1.0 / np.asarray(c_e, dtype=float))

    omega = 2.0 * np.pi * np.asarray(freq, dtype=float)
    if formula is ImpedanceFormula.CANONICAL:
        x_e = omega * ele.inductance - 1.0 / (omega * cap_e)
        x_m = omega * mag.inductance - 1.0 / (omega * cap_m)
        if np.any(x_m == 0.0):
            where = np.argwhere(np.broadcast_to(x_m == 0.0, np.shape(x_m)))
            raise PoleError(
                f"magnetic resonance pole on the evaluation grid at indices {where[:4].tolist()}"
            )
        z_e = 1j * x_e
        y_m = 1.0 / (1j * x_m)
    else:
        z_e = 1j * (omega * cap_e - 1.0) / (omega**2 * ele.inductance * cap_e)
        y_m = 1j * (1.0 - omega**2 * mag.inductance * cap_m) / (omega * cap_m)
    t, gamma = _scatter_from_immittance(z_e, y_m)
    return loss_factor * t, loss_factor * gamma


def calibrate_radius(
    geom: UnitCellGeometry,
    varactor: VaractorModel,
    target_freq: float,
    bias: float,
    r_lo: float = 0.1e-3,
    r_hi: float = 5e-3,
    tol_hz: float = 1e3,
) -> UnitCellGeometry:
    """Bisect the loop radius so the side resonates at ``target_freq``.

    The resonant frequency decreases monotonically in R (larger loop:
    more inductance and more surface capacitance), so bisection is exact.
    Returns a copy of ``geom`` with the calibrated radius.
    """
    c_var = varactor_capacitance(varactor, bias)
    build = magnetic_circuit if geom.side is Side.MAGNETIC else electric_circuit

    def f_res(radius: float) -> float:
        candidate = UnitCellGeometry(
            radius=radius,
            trace_width=geom.trace_width,
            gap=geom.gap,
            copper_thickness=geom.copper_thickness,
            substrate_eps_r=geom.substrate_eps_r,
            side=geom.side,
        )
        return resonant_frequency(build(candidate, c_var))

    lo, hi = r_lo, r_hi
    if not (f_res(hi) <= target_freq <= f_res(lo)):
        raise DomainError(
            f"target {target_freq/1e9:.3f} GHz not bracketed by radii "
            f"[{r_lo*1e3:.3f}, {r_hi*1e3:.3f}] mm"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_res(mid) > target_freq:
            lo = mid
        else:
            hi = mid
        if abs(f_res(0.5 * (lo + hi)) - target_freq) < tol_hz:
            break
    radius = 0.5 * (lo + hi)
    return UnitCellGeometry(
        radius=radius,
        trace_width=geom.trace_width,
        gap=geom.gap,
        copper_thickness=geom.copper_thickness,
        substrate_eps_r=geom.substrate_eps_r,
        side=geom.side,
    )
