"""FastAPI service exposing the simulation pipeline.

The service is stateless apart from a lookup-table cache keyed by config
hash; identical requests always produce identical responses.  Domain
errors map to 422, configuration errors to 400.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .beam import SurfaceArray, multibeam_command, peak_detect, radiation_pattern, steering_command
from .budget import (
    LinkGeometry,
    RadioParams,
    aperture_capacity_dbi,
    friis,
    matched_coefficients,
    received_power_exact,
    received_power_farfield,
    synthesized_gain_dbi,
)
from .config import RootConfig, build_cell_stack, config_hash, load_config_dict, row_spacing_of
from .errors import ConfigError, DomainError
from .lut import (
    BeamMode,
    PhaseLookupTable,
    build_lut,
    lut_from_document,
    lut_to_document,
    sweep_pattern,
    voltage_grid,
)
from .protocol import AlignmentResult, AlignmentSession, RelayChannel, beam_codebook
from .scenario import build_engine
from .schemas import (
    AlignmentOutcome,
    BeamRequest,
    BeamResponse,
    BudgetRequest,
    BudgetResponse,
    CheckOutcome,
    ConfiguredRequest,
    CoverageRecord,
    HealthResponse,
    LutRequest,
    LutResponse,
    Meta,
    PatternRequest,
    PatternResponse,
    ProtocolRequest,
    ProtocolResponse,
    ScenarioRequest,
    ScenarioResponse,
    SelftestRequest,
    SelftestResponse,
)

app = FastAPI(title="metarelay", version=__version__)

_lut_cache: dict[tuple[str, str], PhaseLookupTable] = {}

# JSON cannot carry +-inf; decibel quantities are floored at this sentinel
# (interpreted as "no signal" by clients).
DB_FLOOR = -1.0e6


def _safe_db(value):
    arr = np.asarray(value, dtype=float)
    out = np.where(np.isfinite(arr), arr, DB_FLOOR)
    return float(out) if out.ndim == 0 else out.tolist()


@app.exception_handler(DomainError)
async def _domain_error(request: Request, exc: DomainError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _effective_config(req: ConfiguredRequest) -> tuple[RootConfig, Meta]:
    cfg = load_config_dict(req.config, req.overrides)
    if req.seed is not None:
        cfg = cfg.model_copy(update={"seed": req.seed})
    meta = Meta(tool_version=__version__, config_hash=config_hash(cfg), seed=cfg.seed)
    return cfg, meta


def _surface_array(cfg: RootConfig) -> SurfaceArray:
    return SurfaceArray(
        n_cols=cfg.surface.n_cols, m_rows=cfg.surface.m_rows,
        col_spacing=cfg.surface.col_spacing, row_spacing=row_spacing_of(cfg.surface),
        center_freq=cfg.surface.center_freq,
    )


def _radio(cfg: RootConfig) -> RadioParams:
    return RadioParams(
        p_t_dbm=cfg.radio.p_t_dbm, g_t_dbi=cfg.radio.g_t_dbi, g_r_dbi=cfg.radio.g_r_dbi,
        freq=cfg.surface.center_freq, noise_floor_dbm=cfg.radio.noise_floor_dbm,
        element_q=cfg.radio.element_q,
    )


def _build_lut_cached(cfg: RootConfig, mode: BeamMode, phase_step: float | None = None) -> PhaseLookupTable:
    step = phase_step if phase_step is not None else cfg.lut.phase_step_deg
    key = (config_hash(cfg), f"{mode.value}:{step}")
    cached = _lut_cache.get(key)
    if cached is not None:
        return cached
    stack = build_cell_stack(cfg.cell)
    grid = voltage_grid(
        cfg.cell.varactor.v_min, cfg.cell.varactor.v_max,
        cfg.lut.voltage_step, cfg.lut.dac_bits,
    )
    pattern = sweep_pattern(stack, [cfg.surface.center_freq], grid, grid)
    lut = build_lut(
        pattern, mode, step, cfg.surface.center_freq,
        max_flagged_fraction=cfg.lut.max_flagged_fraction, dac_bits=cfg.lut.dac_bits,
        cell_config=cfg.cell.model_dump(mode="json"), config_hash=config_hash(cfg),
    )
    _lut_cache[key] = lut
    return lut


def _luts(cfg: RootConfig) -> dict[BeamMode, PhaseLookupTable]:
    return {mode: _build_lut_cached(cfg, mode) for mode in BeamMode}


@app.get("/v1/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", tool_version=__version__)


@app.post("/v1/pattern", response_model=PatternResponse)
def pattern(req: PatternRequest) -> PatternResponse:
    cfg, meta = _effective_config(req)
    stack = build_cell_stack(cfg.cell)
    grid = voltage_grid(
        cfg.cell.varactor.v_min, cfg.cell.varactor.v_max,
        cfg.lut.voltage_step, cfg.lut.dac_bits,
    )
    freqs = req.freqs_hz if req.freqs_hz else [cfg.surface.center_freq]
    pat = sweep_pattern(stack, freqs, grid, grid)
    shape = pat.transmission.shape
    f_col, um_col, ue_col = np.meshgrid(pat.freqs, pat.u_m, pat.u_e, indexing="ij")
    return PatternResponse(
        meta=meta,
        freqs_hz=pat.freqs.tolist(),
        u_m_grid=pat.u_m.tolist(),
        u_e_grid=pat.u_e.tolist(),
        freq_hz=f_col.ravel().tolist(),
        u_m=um_col.ravel().tolist(),
        u_e=ue_col.ravel().tolist(),
        t_mag=np.abs(pat.transmission).ravel().tolist(),
        t_phase_deg=np.degrees(np.angle(pat.transmission)).ravel().tolist(),
        g_mag=np.abs(pat.reflection).ravel().tolist(),
        g_phase_deg=np.degrees(np.angle(pat.reflection)).ravel().tolist(),
    )


@app.post("/v1/lut", response_model=LutResponse)
def lut(req: LutRequest) -> LutResponse:
    cfg, meta = _effective_config(req)
    table = _build_lut_cached(cfg, BeamMode(req.mode), req.phase_step_deg)
    return LutResponse(
        meta=meta,
        document=lut_to_document(table),
        flagged_bins=table.flagged_count,
        min_magnitude=min(e.achieved_magnitude for e in table.entries),
    )


@app.post("/v1/beam", response_model=BeamResponse)
def beam(req: BeamRequest) -> BeamResponse:
    cfg, meta = _effective_config(req)
    array = _surface_array(cfg)
    if req.lut_document is not None:
        table = lut_from_document(req.lut_document)
        if table.mode is not BeamMode(req.mode):
            raise DomainError(f"lookup table is {table.mode.value}, request wants {req.mode}")
    else:
        table = _build_lut_cached(cfg, BeamMode(req.mode))
    if len(req.arms) == 1:
        command = steering_command(array, table, req.arms[0][0], req.incident_angle_deg)
    else:
        command = multibeam_command(array, table, req.arms, req.incident_angle_deg)
    grid = np.arange(
        cfg.pattern_grid.angle_min_deg,
        cfg.pattern_grid.angle_max_deg + 1e-9,
        cfg.pattern_grid.step_deg,
    )
    pat = radiation_pattern(array, command, angles_deg=grid)
    peaks = peak_detect(pat, k=max(req.peak_count, len(req.arms)))
    return BeamResponse(
        meta=meta,
        angles_deg=pat.angles_deg.tolist(),
        power_db=_safe_db(pat.power_db),
        peaks=[(float(a), float(p)) for a, p in peaks],
        per_column_phase_deg=command.per_column_phase.tolist(),
        u_m=[c.u_m for c in command.controls],
        u_e=[c.u_e for c in command.controls],
        coefficient_mag=np.abs(command.coefficients).tolist(),
        amplitude_rms_error=command.amplitude_rms_error,
    )


@app.post("/v1/budget", response_model=BudgetResponse)
def budget(req: BudgetRequest) -> BudgetResponse:
    cfg, meta = _effective_config(req)
    array = _surface_array(cfg)
    radio = _radio(cfg)
    geom = LinkGeometry(
        tx=np.array(req.geometry.tx), rx=np.array(req.geometry.rx),
        surface_origin=np.array(req.geometry.surface_origin),
        surface_normal=np.array(req.geometry.surface_normal),
        column_axis=np.array(req.geometry.column_axis),
    )
    d_i, d_s, theta_i, theta_s = geom.center_geometry()
    matched = matched_coefficients(geom, array, req.coefficient_magnitude)
    exact = received_power_exact(radio, geom, array, matched)
    n_elements = array.n_cols * array.m_rows
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        farfield = received_power_farfield(
            radio, d_i, d_s, theta_i, theta_s, array, None,
            phase_sum=req.coefficient_magnitude * n_elements,
        )
    direct = friis(radio, float(np.linalg.norm(geom.tx - geom.rx)))
    loss = -(exact - radio.p_t_dbm - radio.g_t_dbi - radio.g_r_dbi)
    magnitudes = np.full((array.n_cols, array.m_rows), req.coefficient_magnitude)
    return BudgetResponse(
        meta=meta,
        d_i_m=d_i, d_s_m=d_s, theta_i_deg=theta_i, theta_s_deg=theta_s,
        friis_direct_dbm=_safe_db(direct),
        exact_matched_dbm=_safe_db(exact),
        farfield_matched_dbm=_safe_db(farfield),
        path_loss_db=min(loss, -DB_FLOOR),
        aperture_capacity_dbi=aperture_capacity_dbi(array.width * array.height, array.wavelength),
        synthesized_gain_dbi=synthesized_gain_dbi(
            array, magnitudes, theta_i, theta_s, radio.element_q,
            phase_sum=req.coefficient_magnitude * n_elements,
        ),
        snr_exact_db=_safe_db(exact - radio.noise_floor_dbm),
    )


@app.post("/v1/scenario", response_model=ScenarioResponse)
def scenario(req: ScenarioRequest) -> ScenarioResponse:
    cfg, meta = _effective_config(req)
    engine = build_engine(cfg, _luts(cfg))
    if req.tx_index < 0 or req.tx_index >= len(engine.scenario.tx):
        raise DomainError(
            f"tx_index {req.tx_index} outside the scenario's {len(engine.scenario.tx)} transmitters"
        )
    if req.operation == "coverage":
        tx = engine.scenario.tx[req.tx_index]
        records = engine.coverage_map(
            tx, with_surfaces=req.with_surfaces, with_sheets=req.with_sheets,
            surface_count=req.surface_count,
        )
        coverage = [CoverageRecord(**{**r, "snr_db": _safe_db(r["snr_db"])}) for r in records]
        return ScenarioResponse(meta=meta, operation="coverage", coverage=coverage)
    n_surfaces = len(engine.scenario.surfaces)
    counts = tuple(range(min(n_surfaces, 2) + 1))
    blockage = engine.blockage_failure_rate(
        req.betas, req.trials, seed=cfg.seed, surface_counts=counts,
        with_sheets=req.with_sheets,
    )
    blockage["configs"] = {str(k): v for k, v in blockage["configs"].items()}
    return ScenarioResponse(meta=meta, operation="blockage", blockage=blockage)


def _outcome(result: AlignmentResult) -> AlignmentOutcome:
    return AlignmentOutcome(
        enodeb_angle_deg=result.enodeb_angle,
        surface_angle_deg=result.surface_angle,
        ue_angle_deg=result.ue_angle,
        probes_used=result.probes_used,
        achieved_snr_db=_safe_db(result.achieved_snr),
        oracle_snr_db=_safe_db(result.oracle_snr),
        success=result.success,
        ground_truth=result.ground_truth,
        flags=result.flags,
    )


@app.post("/v1/protocol", response_model=ProtocolResponse)
def protocol(req: ProtocolRequest) -> ProtocolResponse:
    cfg, meta = _effective_config(req)
    array = _surface_array(cfg)
    radio = _radio(cfg)
    luts = _luts(cfg)
    if req.ground_truth is not None:
        gt_e, gt_w, gt_u = req.ground_truth
    else:
        rng = np.random.default_rng(cfg.seed)
        gt_e, gt_w, gt_u = (float(v) for v in rng.uniform(-45.0, 45.0, size=3))
    channel = RelayChannel(
        array, luts, radio,
        ue_position=gt_w, enodeb_truth=gt_e, ue_truth=gt_u,
        enodeb_beamwidth=cfg.protocol.enodeb_beamwidth_deg,
        ue_beamwidth=cfg.protocol.ue_beamwidth_deg,
        noise_sigma_db=cfg.protocol.noise_sigma_db,
        seed=cfg.seed,
    )
    session = AlignmentSession(
        channel,
        tolerance_deg=cfg.protocol.tolerance_deg,
        detection_threshold_db=cfg.protocol.detection_threshold_db,
        record_trace=req.record_trace,
    )
    cb_e = beam_codebook(req.n_enodeb, req.span_deg)
    cb_w = beam_codebook(req.n_surface, req.span_deg)
    cb_u = beam_codebook(req.n_ue, req.span_deg)
    refined = uplink = None
    if req.variant == "cold_start":
        coarse = session.cold_start_align(cb_e, cb_w, cb_u)
    elif req.variant == "steady_state":
        coarse = session.steady_state_align(gt_e, cb_w, cb_u)
    else:
        coarse = session.multiarm_search(
            cb_w, enodeb_beam=gt_e, ue_beam=gt_u,
            refine_levels=cfg.protocol.refine_levels,
            refine_beams=cfg.protocol.refine_beams,
        )
    if req.refine and req.variant != "multiarm" and coarse.success:
        step = float(cb_w[1] - cb_w[0]) if len(cb_w) > 1 else 5.0
        legs = ("enodeb", "surface", "ue") if req.variant == "cold_start" else ("surface", "ue")
        refined = session.refine_align(
            coarse, levels=cfg.protocol.refine_levels, beams=cfg.protocol.refine_beams,
            legs=legs, initial_span=2.0 * step,
        )
    final = refined if refined is not None else coarse
    if final.success:
        uplink = session.uplink_from_downlink(final)
    return ProtocolResponse(
        meta=meta,
        variant=req.variant,
        coarse=_outcome(coarse),
        refined=_outcome(refined) if refined else None,
        uplink=_outcome(uplink) if uplink else None,
        trace=session.trace,
    )


@app.post("/v1/selftest", response_model=SelftestResponse)
def selftest(req: SelftestRequest) -> SelftestResponse:
    from .selftest import run_all

    cfg, meta = _effective_config(req)
    results = run_all(cfg, only=req.only)
    return SelftestResponse(
        meta=meta,
        results=[
            CheckOutcome(name=r.name, passed=r.passed, detail=r.detail, duration_s=r.duration_s)
            for r in results
        ],
        all_passed=all(r.passed for r in results),
    )
