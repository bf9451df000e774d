"""End-to-end acceptance checks, runnable without a test harness.

Each check returns a named pass/fail with a one-line numeric summary;
``run_all`` executes them in order on a given configuration.  The same
functions back the pytest acceptance module and the ``selftest`` CLI
subcommand / service endpoint.

Golden numbers are frozen from independent evaluations: the circuit
values from a 40-digit arbitrary-precision pass over the closed-form
expressions, the link numbers from direct formula arithmetic.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .beam import (
    SurfaceArray,
    multibeam_command,
    peak_detect,
    radiation_pattern,
    steering_command,
)
from .budget import (
    LinkGeometry,
    RadioParams,
    aperture_capacity_dbi,
    friis,
    matched_coefficients,
    received_power_exact,
    received_power_farfield,
    surface_path_loss,
    synthesized_gain_dbi,
)
from .cell import (
    ETA_0,
    electric_circuit,
    magnetic_circuit,
    varactor_capacitance,
    _scatter_from_immittance,
)
from .config import RootConfig, build_cell_stack, default_config, row_spacing_of, to_geometry, to_varactor
from .cell import Side
from .lut import BeamMode, bandwidth_profile, build_lut, lut_to_json, sweep_pattern, voltage_grid
from .protocol import AlignmentSession, RelayChannel, beam_codebook
from .scenario import build_engine

# Golden values, frozen from independent oracle evaluations.
GOLDEN = {
    "l_m_henry": 1.271757272e-8,        # magnetic inductance at the calibrated radius
    "c_m_farad": 3.318209948e-15,       # magnetic capacitance at 4 V bias
    "l_e_henry": 1.188633533e-8,
    "c_e_farad": 3.550259369e-15,
    "column_increment_deg": -38.246459155420105,   # 30 deg steer, 2.6 mm pitch, 24.5 GHz
    "capacity_10x20_dbi": 32.249306225592875,      # 10 x 20 cm aperture at 24.5 GHz
    "friis_1m_dbm": -60.23110490917403,            # 0 dBm, isotropic, 1 m, 24.5 GHz
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    duration_s: float


class _Workbench:
    """Shared artifacts so checks do not rebuild the pipeline repeatedly."""

    def __init__(self, cfg: RootConfig) -> None:
        self.cfg = cfg
        self.stack = build_cell_stack(cfg.cell)
        self.grid = voltage_grid(
            cfg.cell.varactor.v_min, cfg.cell.varactor.v_max,
            cfg.lut.voltage_step, cfg.lut.dac_bits,
        )
        self.pattern = sweep_pattern(self.stack, [cfg.surface.center_freq], self.grid, self.grid)
        self.luts = {
            mode: build_lut(
                self.pattern, mode, cfg.lut.phase_step_deg, cfg.surface.center_freq,
                max_flagged_fraction=cfg.lut.max_flagged_fraction, dac_bits=cfg.lut.dac_bits,
                cell_config=cfg.cell.model_dump(mode="json"),
            )
            for mode in BeamMode
        }
        self.array = SurfaceArray(
            n_cols=cfg.surface.n_cols, m_rows=cfg.surface.m_rows,
            col_spacing=cfg.surface.col_spacing, row_spacing=row_spacing_of(cfg.surface),
            center_freq=cfg.surface.center_freq,
        )
        self.radio = RadioParams(
            p_t_dbm=cfg.radio.p_t_dbm, g_t_dbi=cfg.radio.g_t_dbi, g_r_dbi=cfg.radio.g_r_dbi,
            freq=cfg.surface.center_freq, noise_floor_dbm=cfg.radio.noise_floor_dbm,
            element_q=cfg.radio.element_q,
        )


def check_energy_conservation(bench: _Workbench) -> tuple[bool, str]:
    """1e5 random lossless cells satisfy ||T|^2 + |G|^2 - 1| < 1e-9, under 1 s."""
    rng = np.random.default_rng(bench.cfg.seed)
    start = time.perf_counter()
    x = np.tan(rng.uniform(-1.55, 1.55, 100_000))      # wide heavy-tailed reactance spread
    y = np.tan(rng.uniform(-1.55, 1.55, 100_000))
    t, g = _scatter_from_immittance(1j * x * ETA_0, 1j * y / ETA_0)
    residual = np.abs(np.abs(t) ** 2 + np.abs(g) ** 2 - 1.0)
    elapsed = time.perf_counter() - start
    worst = float(residual.max())
    return worst < 1e-9 and elapsed < 1.0, f"max residual {worst:.2e}, {elapsed:.2f}s"


def check_lut_coverage(bench: _Workbench) -> tuple[bool, str]:
    """Both tables fill all 24 bins with zero flags; rebuilds are byte-identical."""
    issues = []
    for mode, lut in bench.luts.items():
        if len(lut.entries) != 24:
            issues.append(f"{mode.value}: {len(lut.entries)} bins")
        if lut.flagged_count != 0:
            issues.append(f"{mode.value}: {lut.flagged_count} flagged")
    pattern2 = sweep_pattern(bench.stack, [bench.cfg.surface.center_freq], bench.grid, bench.grid)
    for mode, lut in bench.luts.items():
        rebuilt = build_lut(
            pattern2, mode, bench.cfg.lut.phase_step_deg, bench.cfg.surface.center_freq,
            cell_config=bench.cfg.cell.model_dump(mode="json"),
        )
        if lut_to_json(rebuilt) != lut_to_json(lut):
            issues.append(f"{mode.value}: rebuild differs")
    floors = {m.value: min(e.achieved_magnitude for e in t.entries) for m, t in bench.luts.items()}
    return not issues, (
        "; ".join(issues) if issues
        else f"24/24 bins both modes, floors {floors['lens']:.3f}/{floors['mirror']:.3f}"
    )


def check_steering_accuracy(bench: _Workbench) -> tuple[bool, str]:
    """Peaks within 3 deg of -60..60 commands, both modes, under 10 s."""
    start = time.perf_counter()
    worst = 0.0
    for mode in BeamMode:
        for theta in np.arange(-60.0, 60.0 + 1e-9, 5.0):
            command = steering_command(bench.array, bench.luts[mode], float(theta))
            pattern = radiation_pattern(bench.array, command)
            peaks = peak_detect(pattern, 1)
            worst = max(worst, abs(peaks[0][0] - theta))
    elapsed = time.perf_counter() - start
    return worst <= 3.0 and elapsed < 10.0, f"worst error {worst:.2f} deg, {elapsed:.2f}s"


def check_multibeam_splits(bench: _Workbench) -> tuple[bool, str]:
    """Splits -45/15, -30/30, -15/45: both peaks within 3 deg, arms within 1 dB."""
    worst_angle, worst_balance = 0.0, 0.0
    for pair in ((-45.0, 15.0), (-30.0, 30.0), (-15.0, 45.0)):
        command = multibeam_command(
            bench.array, bench.luts[BeamMode.MIRROR], [(pair[0], 1.0), (pair[1], 1.0)]
        )
        pattern = radiation_pattern(bench.array, command)
        peaks = sorted(peak_detect(pattern, 2))
        if len(peaks) < 2:
            return False, f"split {pair}: found {len(peaks)} peaks"
        for target, (angle, _) in zip(sorted(pair), peaks):
            worst_angle = max(worst_angle, abs(angle - target))
        worst_balance = max(worst_balance, abs(peaks[0][1] - peaks[1][1]))
    return (
        worst_angle <= 3.0 and worst_balance <= 1.0,
        f"worst angle error {worst_angle:.2f} deg, arm imbalance {worst_balance:.2f} dB",
    )


def check_path_loss_scaling(bench: _Workbench) -> tuple[bool, str]:
    """Doubling N and M with |C| = 1 gains 12.04 +/- 0.2 dB."""
    arr = bench.array
    half = SurfaceArray(arr.n_cols // 2, arr.m_rows // 2, arr.col_spacing,
                        arr.row_spacing, arr.center_freq)
    loss_half = surface_path_loss(3.0, 3.0, 0.0, 0.0, half, np.ones((half.n_cols, half.m_rows)))
    loss_full = surface_path_loss(3.0, 3.0, 0.0, 0.0, arr, np.ones((arr.n_cols, arr.m_rows)))
    delta = loss_half - loss_full
    return abs(delta - 12.04) <= 0.2, f"doubling gain {delta:.3f} dB"


def check_capacity_bound(bench: _Workbench) -> tuple[bool, str]:
    """Broadside gain never exceeds aperture capacity and stays within 3 dB of it."""
    lam = bench.array.wavelength
    entry = bench.luts[BeamMode.LENS].entry_for_phase(0.0)
    worst_gap, violated = 0.0, False
    for size in (0.1, 0.2, 0.3, 0.4, 0.5):
        n = max(1, round(size / bench.array.col_spacing))
        m = max(1, round(size / bench.array.row_spacing))
        arr = SurfaceArray(n, m, bench.array.col_spacing, bench.array.row_spacing,
                           bench.array.center_freq)
        coefficients = np.full((n, m), entry.achieved)
        gain = synthesized_gain_dbi(arr, coefficients, 0.0, 0.0, bench.radio.element_q)
        capacity = aperture_capacity_dbi(n * m * arr.col_spacing * arr.row_spacing, lam)
        if gain > capacity + 1e-6:
            violated = True
        worst_gap = max(worst_gap, capacity - gain)
    return (not violated) and worst_gap <= 3.0, f"worst capacity gap {worst_gap:.2f} dB"


def check_reciprocity(bench: _Workbench) -> tuple[bool, str]:
    """Far-field endpoint swap invariant to 1e-9 relative; uplink free and exact."""
    rng = np.random.default_rng(bench.cfg.seed)
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(50):
            d_i, d_s = rng.uniform(2.0, 30.0, 2)
            th_i, th_s = rng.uniform(-75.0, 75.0, 2)
            coefficients = np.exp(1j * rng.uniform(0, 2 * np.pi, (8, 4)))
            arr = SurfaceArray(8, 4, bench.array.col_spacing, bench.array.row_spacing,
                               bench.array.center_freq)
            forward = received_power_farfield(bench.radio, d_i, d_s, th_i, th_s, arr, coefficients)
            reverse = received_power_farfield(bench.radio, d_s, d_i, th_s, th_i, arr, coefficients)
            worst = max(worst, abs(10 ** (forward / 10.0) / 10 ** (reverse / 10.0) - 1.0))
    channel = RelayChannel(bench.array, bench.luts, bench.radio,
                           ue_position=20.0, enodeb_truth=-10.0, ue_truth=15.0)
    session = AlignmentSession(channel, record_trace=False)
    codebook = beam_codebook(25, 120.0)
    downlink = session.cold_start_align(codebook, codebook, codebook)
    uplink = session.uplink_from_downlink(downlink)
    ok = (
        worst < 1e-9
        and uplink.probes_used == 0
        and uplink.achieved_snr == downlink.achieved_snr
    )
    return ok, (
        f"swap residual {worst:.1e}, uplink probes {uplink.probes_used}, "
        f"snr delta {abs(uplink.achieved_snr - downlink.achieved_snr):.1e} dB"
    )


def check_farfield_agreement(bench: _Workbench) -> tuple[bool, str]:
    """Exact vs far-field within 0.1 dB at 20x aperture; convergence monotone."""
    extent = max(bench.array.width, bench.array.height)
    n_elements = bench.array.n_cols * bench.array.m_rows
    gaps = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for mult in (5, 10, 20, 40):
            d = mult * extent
            geom = LinkGeometry(
                tx=np.array([0.0, d, 0.0]), rx=np.array([0.0, -d, 0.0]),
                surface_origin=np.zeros(3), surface_normal=np.array([0.0, 1.0, 0.0]),
                column_axis=np.array([1.0, 0.0, 0.0]),
            )
            exact = received_power_exact(
                bench.radio, geom, bench.array, matched_coefficients(geom, bench.array)
            )
            far = received_power_farfield(
                bench.radio, d, d, 0.0, 0.0, bench.array, None, phase_sum=n_elements
            )
            gaps.append(abs(exact - far))
    monotone = all(gaps[i + 1] <= gaps[i] + 1e-12 for i in range(len(gaps) - 1))
    return gaps[2] <= 0.1 and monotone, (
        f"gaps at 5/10/20/40x: {', '.join(f'{g:.4f}' for g in gaps)} dB"
    )


def check_protocol_counts(bench: _Workbench) -> tuple[bool, str]:
    """Exact probe counts and 100/100 seeded noiseless successes within 3 deg."""
    def session_for(seed: int, **kw) -> AlignmentSession:
        channel = RelayChannel(bench.array, bench.luts, bench.radio, seed=seed, **kw)
        return AlignmentSession(channel, record_trace=False)

    n = 8
    cb = beam_codebook(n, 120.0)
    session = session_for(0, ue_position=17.0, enodeb_truth=-12.0, ue_truth=23.0)
    cold = session.cold_start_align(cb, cb, cb)
    if cold.probes_used != n**3:
        return False, f"cold start used {cold.probes_used} probes, wanted {n**3}"
    steady = session.steady_state_align(0.0, cb, cb)
    if steady.probes_used != n**2:
        return False, f"steady state used {steady.probes_used} probes, wanted {n**2}"

    n_w = 64
    bound = 2 * math.ceil(math.log2(n_w)) + (
        bench.cfg.protocol.refine_levels * bench.cfg.protocol.refine_beams
    )
    rng = np.random.default_rng(bench.cfg.seed)
    failures = 0
    worst_multiarm = 0
    fine = beam_codebook(25, 120.0)
    for trial in range(100):
        gt_e, gt_w, gt_u = rng.uniform(-45.0, 45.0, 3)
        session = session_for(trial, ue_position=float(gt_w),
                              enodeb_truth=float(gt_e), ue_truth=float(gt_u))
        coarse = session.steady_state_align(float(gt_e), fine, fine)
        refined = session.refine_align(coarse, legs=("surface", "ue"), initial_span=10.0)
        multi = session.multiarm_search(beam_codebook(n_w, 120.0),
                                        enodeb_beam=float(gt_e), ue_beam=refined.ue_angle)
        worst_multiarm = max(worst_multiarm, multi.probes_used)
        if not (refined.success and multi.success):
            failures += 1
    ok = failures == 0 and worst_multiarm <= bound
    return ok, (
        f"cold {cold.probes_used}, steady {steady.probes_used}, "
        f"multiarm <= {worst_multiarm} (bound {bound}), failures {failures}/100"
    )


def check_scenario_properties(bench: _Workbench) -> tuple[bool, str]:
    """Blockage monotone in beta, surfaces never hurt, sheet trails the surface."""
    start = time.perf_counter()
    engine = build_engine(bench.cfg, bench.luts)
    betas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    results = engine.blockage_failure_rate(betas, trials=10_000, seed=bench.cfg.seed)
    issues = []
    for count, data in results["configs"].items():
        rates = data["failure_rate"]
        if any(rates[i + 1] < rates[i] - 1e-12 for i in range(len(rates) - 1)):
            issues.append(f"non-monotone rates for {count} surfaces")
    for i, beta in enumerate(betas):
        r0 = results["configs"][0]["failure_rate"][i]
        r1 = results["configs"][1]["failure_rate"][i]
        r2 = results["configs"][2]["failure_rate"][i]
        if not (r2 <= r1 + 1e-12 and r1 <= r0 + 1e-12):
            issues.append(f"surface ordering violated at beta={beta}")
    tx = engine.scenario.tx[0]
    surface_cov = engine.coverage_map(tx, with_surfaces=True, surface_count=1)
    sheet_cov = engine.coverage_map(tx, with_surfaces=False, with_sheets=True)
    frac_surface = float(np.mean([r["snr_db"] >= 30.0 for r in surface_cov]))
    frac_sheet = float(np.mean([r["snr_db"] >= 30.0 for r in sheet_cov]))
    if not frac_sheet < frac_surface:
        issues.append(f"sheet fraction {frac_sheet:.2f} not below surface {frac_surface:.2f}")
    elapsed = time.perf_counter() - start
    if elapsed >= 60.0:
        issues.append(f"took {elapsed:.1f}s")
    return not issues, (
        "; ".join(issues) if issues
        else f"rates ordered, sheet {frac_sheet:.2f} < surface {frac_surface:.2f}, {elapsed:.1f}s"
    )


def check_bandwidth(bench: _Workbench) -> tuple[bool, str]:
    """Every table entry drifts at most 15 deg across +/-100 MHz of center."""
    f0 = bench.cfg.surface.center_freq
    freqs = np.linspace(f0 - 100e6, f0 + 100e6, 41)
    worst = 0.0
    for lut in bench.luts.values():
        profile = bandwidth_profile(lut, freqs)
        worst = max(worst, float(profile.max_dev_deg.max()))
    return worst <= 15.0, f"worst in-band phase drift {worst:.2f} deg"


def check_golden_values(bench: _Workbench) -> tuple[bool, str]:
    """Derived numbers match the stored oracle values to 4 significant figures."""
    cfg = bench.cfg
    c_var = varactor_capacitance(to_varactor(cfg.cell.varactor), 4.0)
    mag = magnetic_circuit(to_geometry(cfg.cell.magnetic, Side.MAGNETIC), c_var)
    ele = electric_circuit(to_geometry(cfg.cell.electric, Side.ELECTRIC), c_var)
    command = steering_command(bench.array, bench.luts[BeamMode.LENS], 30.0)
    increment = float(command.per_column_phase[1] - command.per_column_phase[0])
    radio_iso = RadioParams(p_t_dbm=0.0, g_t_dbi=0.0, g_r_dbi=0.0, freq=24.5e9)
    pairs = {
        "l_m_henry": mag.inductance,
        "c_m_farad": mag.capacitance,
        "l_e_henry": ele.inductance,
        "c_e_farad": ele.capacitance,
        "column_increment_deg": increment,
        "capacity_10x20_dbi": aperture_capacity_dbi(0.02, radio_iso.wavelength),
        "friis_1m_dbm": friis(radio_iso, 1.0),
    }
    bad = [
        name
        for name, value in pairs.items()
        if abs(value - GOLDEN[name]) > 5e-4 * abs(GOLDEN[name])
    ]
    worst = max(abs(v - GOLDEN[k]) / abs(GOLDEN[k]) for k, v in pairs.items())
    return not bad, ("mismatch: " + ", ".join(bad)) if bad else f"worst rel dev {worst:.1e}"


CHECKS: dict[str, Callable[[_Workbench], tuple[bool, str]]] = {
    "energy_conservation": check_energy_conservation,
    "lut_coverage": check_lut_coverage,
    "steering_accuracy": check_steering_accuracy,
    "multibeam_splits": check_multibeam_splits,
    "path_loss_scaling": check_path_loss_scaling,
    "capacity_bound": check_capacity_bound,
    "reciprocity": check_reciprocity,
    "farfield_agreement": check_farfield_agreement,
    "protocol_counts": check_protocol_counts,
    "scenario_properties": check_scenario_properties,
    "bandwidth": check_bandwidth,
    "golden_values": check_golden_values,
}


def run_all(cfg: Optional[RootConfig] = None, only: Optional[list[str]] = None) -> list[CheckResult]:
    cfg = cfg if cfg is not None else default_config()
    names = list(CHECKS) if not only else [n for n in CHECKS if n in set(only)]
    if only and not names:
        from .errors import ConfigError

        raise ConfigError(f"no such checks: {only}; available: {sorted(CHECKS)}")
    bench = _Workbench(cfg)
    results = []
    for name in names:
        start = time.perf_counter()
        try:
            passed, detail = CHECKS[name](bench)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - start))
    return results
