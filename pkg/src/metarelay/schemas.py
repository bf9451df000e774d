"""Request/response models for the simulation service.

Every request embeds a partial configuration document (deep-merged over
the package defaults) plus optional ``key.path=value`` overrides, so one
service instance can serve many parameter studies.  Every response's
``meta`` echoes the tool version and the effective config hash.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class Meta(BaseModel):
    tool_version: str
    config_hash: str
    seed: int


class ConfiguredRequest(BaseModel):
    config: dict = Field(default_factory=dict)
    overrides: list[str] = Field(default_factory=list)
    seed: Optional[int] = None


class PatternRequest(ConfiguredRequest):
    freqs_hz: Optional[list[float]] = None     # default: the configured center frequency


class PatternResponse(BaseModel):
    meta: Meta
    freqs_hz: list[float]
    u_m_grid: list[float]
    u_e_grid: list[float]
    # columnar rows, length len(freqs) * len(u_m) * len(u_e)
    freq_hz: list[float]
    u_m: list[float]
    u_e: list[float]
    t_mag: list[float]
    t_phase_deg: list[float]
    g_mag: list[float]
    g_phase_deg: list[float]


class LutRequest(ConfiguredRequest):
    mode: Literal["lens", "mirror"] = "lens"
    phase_step_deg: Optional[float] = None


class LutResponse(BaseModel):
    meta: Meta
    document: dict
    flagged_bins: int
    min_magnitude: float


class BeamRequest(ConfiguredRequest):
    mode: Literal["lens", "mirror"] = "lens"
    arms: list[tuple[float, float]] = Field(default_factory=lambda: [(0.0, 1.0)])
    incident_angle_deg: float = 0.0
    lut_document: Optional[dict] = None        # reuse a previously built table
    peak_count: int = 2


class BeamResponse(BaseModel):
    meta: Meta
    angles_deg: list[float]
    power_db: list[float]
    peaks: list[tuple[float, float]]
    per_column_phase_deg: list[float]
    u_m: list[float]
    u_e: list[float]
    coefficient_mag: list[float]
    amplitude_rms_error: float


class BudgetGeometry(BaseModel):
    tx: tuple[float, float, float]
    rx: tuple[float, float, float]
    surface_origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    surface_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)
    column_axis: tuple[float, float, float] = (1.0, 0.0, 0.0)


class BudgetRequest(ConfiguredRequest):
    geometry: BudgetGeometry
    coefficient_magnitude: float = 1.0


class BudgetResponse(BaseModel):
    meta: Meta
    d_i_m: float
    d_s_m: float
    theta_i_deg: float
    theta_s_deg: float
    friis_direct_dbm: float
    exact_matched_dbm: float
    farfield_matched_dbm: float
    path_loss_db: float
    aperture_capacity_dbi: float
    synthesized_gain_dbi: float
    snr_exact_db: float


class ScenarioRequest(ConfiguredRequest):
    operation: Literal["coverage", "blockage"] = "coverage"
    tx_index: int = 0
    with_surfaces: bool = True
    with_sheets: bool = False
    surface_count: Optional[int] = None
    betas: list[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8])
    trials: int = 10_000


class CoverageRecord(BaseModel):
    rx: tuple[float, float]
    snr_db: float
    tier: str
    kind: Optional[str]


class ScenarioResponse(BaseModel):
    meta: Meta
    operation: str
    coverage: Optional[list[CoverageRecord]] = None
    blockage: Optional[dict] = None


class ProtocolRequest(ConfiguredRequest):
    variant: Literal["cold_start", "steady_state", "multiarm"] = "cold_start"
    n_enodeb: int = 8
    n_surface: int = 8
    n_ue: int = 8
    span_deg: float = 120.0
    ground_truth: Optional[tuple[float, float, float]] = None   # default: seeded random
    refine: bool = True
    record_trace: bool = True


class AlignmentOutcome(BaseModel):
    enodeb_angle_deg: float
    surface_angle_deg: float
    ue_angle_deg: float
    probes_used: int
    achieved_snr_db: float
    oracle_snr_db: float
    success: bool
    ground_truth: tuple[float, float, float]
    flags: list[str]


class ProtocolResponse(BaseModel):
    meta: Meta
    variant: str
    coarse: AlignmentOutcome
    refined: Optional[AlignmentOutcome] = None
    uplink: Optional[AlignmentOutcome] = None
    trace: list[dict] = Field(default_factory=list)


class SelftestRequest(ConfiguredRequest):
    only: Optional[list[str]] = None


class CheckOutcome(BaseModel):
    name: str
    passed: bool
    detail: str
    duration_s: float


class SelftestResponse(BaseModel):
    meta: Meta
    results: list[CheckOutcome]
    all_passed: bool


class HealthResponse(BaseModel):
    status: str
    tool_version: str
