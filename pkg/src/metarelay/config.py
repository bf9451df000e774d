"""Configuration models, defaults, JSON loading, overrides, and hashing.

All defaults live here as pydantic field defaults; user JSON files are
deep-merged over them, then ``key.path=value`` overrides are applied on
top.  The effective configuration hashes to a stable hex digest that every
output artifact embeds.

The default cell geometry (loop radii per side) comes from running
``cell.calibrate_radius`` so that both resonators sit at 24.5 GHz with
4 V bias; the numbers are stored here rather than recomputed so builds
are reproducible byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from .cell import ImpedanceFormula, Side, UnitCellGeometry, VaractorModel
from .constants import wavelength
from .errors import ConfigError

# Calibrated loop radii (m): bisection on R per side, 24.5 GHz at 4 V bias.
CALIBRATED_RADIUS_MAGNETIC = 2.565313085913658e-3
CALIBRATED_RADIUS_ELECTRIC = 4.034190183877943e-3


class VaractorConfig(BaseModel):
    """Junction-capacitance law parameters; capacitance in farads."""

    c_j0: float = 12e-15
    phi_j: float = 0.8
    gamma: float = 0.65
    v_min: float = 0.0
    v_max: float = 10.0


class CellSideConfig(BaseModel):
    """One meta-atom side's copper geometry (meters)."""

    radius: float
    trace_width: float = 0.2e-3
    gap: float
    copper_thickness: float = 35e-6   # standard 1-oz foil
    substrate_eps_r: float = 3.55


class CellConfig(BaseModel):
    magnetic: CellSideConfig = Field(
        default_factory=lambda: CellSideConfig(radius=CALIBRATED_RADIUS_MAGNETIC, gap=0.10e-3)
    )
    electric: CellSideConfig = Field(
        default_factory=lambda: CellSideConfig(radius=CALIBRATED_RADIUS_ELECTRIC, gap=0.05e-3)
    )
    varactor: VaractorConfig = Field(default_factory=VaractorConfig)
    impedance_formula: Literal["canonical", "legacy"] = "canonical"
    loss_factor: float = 1.0          # scalar insertion-loss multiplier (1 = lossless)


class SurfaceConfig(BaseModel):
    """Element grid of the relay surface."""

    n_cols: int = 76
    m_rows: int = 28
    col_spacing: float = 2.6e-3
    row_spacing: Optional[float] = None   # None -> wavelength/3 at center_freq
    center_freq: float = 24.5e9


class LutConfig(BaseModel):
    voltage_step: float = 0.1
    phase_step_deg: float = 15.0
    dac_bits: int = 16
    max_flagged_fraction: float = 0.25


class RadioConfig(BaseModel):
    """Link-budget radio parameters (dBm / dBi at the interface)."""

    p_t_dbm: float = 6.0
    g_t_dbi: float = 25.0
    g_r_dbi: float = 15.0             # 25 dBi horn with a -10 dB terminal correction
    noise_floor_dbm: float = -80.0
    element_q: float = 0.5611


class PatternGridConfig(BaseModel):
    angle_min_deg: float = -90.0
    angle_max_deg: float = 90.0
    step_deg: float = 0.5


class ProtocolConfig(BaseModel):
    detection_threshold_db: float = 10.0
    tolerance_deg: float = 3.0
    refine_levels: int = 2
    refine_beams: int = 5
    noise_sigma_db: float = 0.0
    enodeb_beamwidth_deg: float = 10.0
    ue_beamwidth_deg: float = 15.0


class ScenarioSegment(BaseModel):
    """Wall/window segment; ``loss_db`` None means opaque."""

    p1: tuple[float, float]
    p2: tuple[float, float]
    loss_db: Optional[float] = None
    kind: str = "wall"


class ScenarioReflector(BaseModel):
    p1: tuple[float, float]
    p2: tuple[float, float]
    reflection_loss_db: float = 10.0


class ScenarioSheet(BaseModel):
    """Fixed metal sheet: specular reflector, no steering."""

    p1: tuple[float, float]
    p2: tuple[float, float]
    reflection_loss_db: float = 0.0


class ScenarioSurface(BaseModel):
    origin: tuple[float, float]
    normal_deg: float                 # plan-view direction the front face points at
    steer_range_deg: float = 60.0
    modes: list[Literal["lens", "mirror"]] = ["lens", "mirror"]


class ScenarioConfig(BaseModel):
    """Plan-view scenario; meters, degrees, dB."""

    bounds: tuple[float, float] = (10.0, 8.0)
    segments: list[ScenarioSegment] = Field(default_factory=list)
    reflectors: list[ScenarioReflector] = Field(default_factory=list)
    sheets: list[ScenarioSheet] = Field(default_factory=list)
    surfaces: list[ScenarioSurface] = Field(default_factory=list)
    tx: list[tuple[float, float]] = Field(default_factory=list)
    rx: list[tuple[float, float]] = Field(default_factory=list)
    blockage_threshold_db: float = 10.0
    modulation_tiers: dict[str, float] = Field(
        # thresholds inferred from the measured QAM/SNR pairings
        default_factory=lambda: {"128-QAM": 24.0, "64-QAM": 19.0}
    )


class RootConfig(BaseModel):
    cell: CellConfig = Field(default_factory=CellConfig)
    surface: SurfaceConfig = Field(default_factory=SurfaceConfig)
    lut: LutConfig = Field(default_factory=LutConfig)
    radio: RadioConfig = Field(default_factory=RadioConfig)
    pattern_grid: PatternGridConfig = Field(default_factory=PatternGridConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    scenario: Optional[ScenarioConfig] = None   # None -> bundled office testbed
    seed: int = 0


def default_config() -> RootConfig:
    return RootConfig()


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RootConfig:
    """Defaults, optionally overlaid with a JSON file and key=value overrides."""
    user: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
    return load_config_dict(user, overrides)


def load_config_dict(user: dict | None = None, overrides: list[str] | None = None) -> RootConfig:
    """Like ``load_config`` but with an inline partial document."""
    merged = default_config().model_dump(mode="json")
    if user:
        if not isinstance(user, dict):
            raise ConfigError("inline config must be a JSON object")
        merged = _deep_merge(merged, user)
    for item in overrides or []:
        merged = _apply_override(merged, item)
    try:
        return RootConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _apply_override(cfg: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override must look like key.path=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} does not address an object")
    node[parts[-1]] = value
    return cfg


def config_hash(cfg: RootConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Bridges from configuration models to physics-layer value objects.

@dataclass(frozen=True)
class CellStack:
    """A full unit cell: both sides, the shared varactor law, and options."""

    magnetic: UnitCellGeometry
    electric: UnitCellGeometry
    varactor: VaractorModel
    formula: ImpedanceFormula = ImpedanceFormula.CANONICAL
    loss_factor: float = 1.0

    def coefficients(self, u_m, u_e, freq):
        from .cell import cell_coefficients

        return cell_coefficients(
            self.magnetic, self.electric, self.varactor, u_m, u_e, freq,
            formula=self.formula, loss_factor=self.loss_factor,
        )


def to_geometry(side_cfg: CellSideConfig, side: Side) -> UnitCellGeometry:
    return UnitCellGeometry(
        radius=side_cfg.radius,
        trace_width=side_cfg.trace_width,
        gap=side_cfg.gap,
        copper_thickness=side_cfg.copper_thickness,
        substrate_eps_r=side_cfg.substrate_eps_r,
        side=side,
    )


def to_varactor(var_cfg: VaractorConfig) -> VaractorModel:
    return VaractorModel(
        c_j0=var_cfg.c_j0, phi_j=var_cfg.phi_j, gamma=var_cfg.gamma,
        v_min=var_cfg.v_min, v_max=var_cfg.v_max,
    )


def build_cell_stack(cell_cfg: CellConfig) -> CellStack:
    return CellStack(
        magnetic=to_geometry(cell_cfg.magnetic, Side.MAGNETIC),
        electric=to_geometry(cell_cfg.electric, Side.ELECTRIC),
        varactor=to_varactor(cell_cfg.varactor),
        formula=ImpedanceFormula(cell_cfg.impedance_formula),
        loss_factor=cell_cfg.loss_factor,
    )


def row_spacing_of(surface_cfg: SurfaceConfig) -> float:
    if surface_cfg.row_spacing is not None:
        return surface_cfg.row_spacing
    return wavelength(surface_cfg.center_freq) / 3.0
