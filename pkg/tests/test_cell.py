"""Unit-cell circuit model: formulas, limits, and golden values.

Golden L/C numbers were produced by an independent 40-digit mpmath pass
over the closed-form expressions at the calibrated default geometry with
4 V bias, then frozen here.
"""

import math

import numpy as np
import pytest

from metarelay.cell import (
    ETA_0,
    ImpedanceFormula,
    Side,
    SurfaceImmittance,
    UnitCellGeometry,
    VaractorModel,
    calibrate_radius,
    cell_coefficients,
    electric_circuit,
    gap_capacitance,
    gap_factor,
    loop_inductance,
    magnetic_circuit,
    resonant_frequency,
    scatter_coefficients,
    strip_inductance,
    surface_capacitance,
    surface_immittance,
    varactor_capacitance,
)
from metarelay.config import to_geometry, to_varactor
from metarelay.errors import DomainError, PoleError, SingularityError

GOLDEN_L_M = 1.271757272e-8
GOLDEN_C_M = 3.318209948e-15
GOLDEN_L_E = 1.188633533e-8
GOLDEN_C_E = 3.550259369e-15


@pytest.fixture(scope="module")
def geom_m():
    from metarelay.config import default_config

    return to_geometry(default_config().cell.magnetic, Side.MAGNETIC)


@pytest.fixture(scope="module")
def geom_e():
    from metarelay.config import default_config

    return to_geometry(default_config().cell.electric, Side.ELECTRIC)


@pytest.fixture(scope="module")
def varactor():
    from metarelay.config import default_config

    return to_varactor(default_config().cell.varactor)


class TestVaractor:
    def test_zero_bias_is_cj0(self, varactor):
        assert varactor_capacitance(varactor, 0.0) == varactor.c_j0

    def test_decreases_with_bias(self, varactor):
        assert varactor_capacitance(varactor, 8.0) < varactor_capacitance(varactor, 0.0)

    def test_strictly_monotone(self, varactor):
        biases = np.linspace(0.0, 10.0, 101)
        caps = varactor_capacitance(varactor, biases)
        assert np.all(np.diff(caps) < 0)

    def test_out_of_range_raises(self, varactor):
        with pytest.raises(DomainError):
            varactor_capacitance(varactor, -0.1)
        with pytest.raises(DomainError):
            varactor_capacitance(varactor, 10.1)

    def test_calibrated_resonance_at_design_bias(self, geom_m, geom_e, varactor):
        # calibration oracle: 24.5 GHz at 4 V on both sides, +/- 0.05 GHz
        c4 = varactor_capacitance(varactor, 4.0)
        f_m = resonant_frequency(magnetic_circuit(geom_m, c4))
        f_e = resonant_frequency(electric_circuit(geom_e, c4))
        assert f_m == pytest.approx(24.5e9, abs=0.05e9)
        assert f_e == pytest.approx(24.5e9, abs=0.05e9)

    def test_recalibration_reproduces_stored_radius(self, geom_m, varactor):
        recal = calibrate_radius(geom_m, varactor, 24.5e9, 4.0, r_hi=9e-3)
        assert recal.radius == pytest.approx(geom_m.radius, rel=1e-6)

    def test_bad_parameters_rejected(self):
        with pytest.raises(DomainError):
            VaractorModel(c_j0=-1e-15, phi_j=1.0, gamma=1.0)
        with pytest.raises(DomainError):
            VaractorModel(c_j0=1e-15, phi_j=1.0, gamma=1.0, v_min=5, v_max=1)


class TestGeometry:
    def test_invariants(self):
        with pytest.raises(DomainError):
            UnitCellGeometry(1e-3, 0.2e-3, -1e-4, 35e-6, 3.55, Side.MAGNETIC)
        with pytest.raises(DomainError):
            UnitCellGeometry(1e-3, 0.2e-3, 7e-3, 35e-6, 3.55, Side.MAGNETIC)  # gap > loop
        with pytest.raises(DomainError):
            UnitCellGeometry(1e-3, 0.2e-3, 1e-4, 35e-6, 0.9, Side.MAGNETIC)

    def test_nonphysical_loop_rejected(self):
        # 8R/(t+w) so small the log term goes non-positive
        with pytest.raises(DomainError):
            loop_inductance(radius=1e-5, trace_width=1e-3, copper_thickness=1e-3)


class TestMagneticCircuit:
    def test_vanishing_gap_recovers_full_loop(self, geom_m, varactor):
        # p_m -> 1 as the gap closes; L_m is exactly the gap factor times the loop
        tiny = geom_m.scaled(gap=1e-9)
        params = magnetic_circuit(tiny, 1e-15)
        full = loop_inductance(tiny.radius, tiny.trace_width, tiny.copper_thickness)
        assert gap_factor(tiny) == pytest.approx(1.0, abs=1e-9)
        assert params.inductance == gap_factor(tiny) * full

    def test_equal_series_capacitance_halves(self, geom_m):
        fixed = gap_capacitance(geom_m) + surface_capacitance(geom_m)
        params = magnetic_circuit(geom_m, fixed)
        assert params.capacitance == pytest.approx(fixed / 2.0, rel=1e-12)

    def test_golden_values(self, geom_m, varactor):
        params = magnetic_circuit(geom_m, varactor_capacitance(varactor, 4.0))
        assert params.inductance == pytest.approx(GOLDEN_L_M, rel=5e-4)
        assert params.capacitance == pytest.approx(GOLDEN_C_M, rel=5e-4)

    def test_wrong_side_rejected(self, geom_e):
        with pytest.raises(DomainError):
            magnetic_circuit(geom_e, 1e-15)


class TestElectricCircuit:
    def test_large_varactor_series_limit(self, geom_e):
        fixed = gap_capacitance(geom_e) + surface_capacitance(geom_e)
        params = electric_circuit(geom_e, 1e6 * fixed)
        assert params.capacitance == pytest.approx(2.0 * fixed, rel=1e-4)

    def test_wider_trace_lowers_strip_inductance(self, geom_e):
        narrow = strip_inductance(2 * geom_e.radius, geom_e.trace_width)
        wide = strip_inductance(2 * geom_e.radius, 2 * geom_e.trace_width)
        assert wide < narrow

    def test_golden_values(self, geom_e, varactor):
        params = electric_circuit(geom_e, varactor_capacitance(varactor, 4.0))
        assert params.inductance == pytest.approx(GOLDEN_L_E, rel=5e-4)
        assert params.capacitance == pytest.approx(GOLDEN_C_E, rel=5e-4)


class TestResonance:
    def test_unit_lc(self):
        from metarelay.cell import CircuitParams

        params = CircuitParams(1.0, 1.0, Side.MAGNETIC)
        assert resonant_frequency(params) == pytest.approx(1.0 / (2 * math.pi))

    def test_halving_capacitance_scales_sqrt2(self):
        from metarelay.cell import CircuitParams

        f1 = resonant_frequency(CircuitParams(1e-9, 2e-15, Side.MAGNETIC))
        f2 = resonant_frequency(CircuitParams(1e-9, 1e-15, Side.MAGNETIC))
        assert f2 / f1 == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_bias_raises_resonance_both_sides(self, geom_m, geom_e, varactor):
        biases = np.linspace(0.0, 10.0, 21)
        f_m = [resonant_frequency(magnetic_circuit(geom_m, varactor_capacitance(varactor, b)))
               for b in biases]
        f_e = [resonant_frequency(electric_circuit(geom_e, varactor_capacitance(varactor, b)))
               for b in biases]
        assert np.all(np.diff(f_m) > 0)
        assert np.all(np.diff(f_e) > 0)


class TestImmittance:
    def test_electric_resonance_zeroes_impedance(self, geom_m, geom_e, varactor):
        c4 = varactor_capacitance(varactor, 4.0)
        ele = electric_circuit(geom_e, c4)
        mag = magnetic_circuit(geom_m, c4)
        imm = surface_immittance(resonant_frequency(ele), ele, mag)
        assert abs(imm.z_e) < 1e-3     # ohms; exact zero up to float rounding of f_res

    def test_magnetic_resonance_is_polelike(self, geom_m, geom_e, varactor):
        c4 = varactor_capacitance(varactor, 4.0)
        ele = electric_circuit(geom_e, c4)
        mag = magnetic_circuit(geom_m, c4)
        imm = surface_immittance(resonant_frequency(mag), ele, mag)
        assert imm.magnetic_pole or abs(imm.y_m) > 1e9

    def test_purely_reactive_both_modes(self, geom_m, geom_e, varactor):
        c4 = varactor_capacitance(varactor, 4.0)
        ele = electric_circuit(geom_e, c4)
        mag = magnetic_circuit(geom_m, c4)
        for mode in ImpedanceFormula:
            imm = surface_immittance(26e9, ele, mag, mode)
            assert imm.z_e.real == 0.0
            assert imm.y_m.real == 0.0

    def test_modes_agree_on_resonance_location(self, stack):
        # sharpest phase change of T sits at the common resonance in both modes
        freqs = np.linspace(23e9, 26e9, 3001)
        for formula in ImpedanceFormula:
            t, _ = cell_coefficients(
                stack.magnetic, stack.electric, stack.varactor, 4.0, 4.0, freqs,
                formula=formula,
            )
            phase = np.unwrap(np.angle(t))
            slope = np.abs(np.gradient(phase, freqs))
            peak_freq = freqs[np.argmax(slope)]
            assert peak_freq == pytest.approx(24.5e9, rel=5e-3)


class TestScatterCoefficients:
    def test_transparent_sheet(self):
        imm = SurfaceImmittance(z_e=0j, y_m=0j)
        coef = scatter_coefficients(imm, 24.5e9)
        assert coef.t_coef == pytest.approx(1.0)
        assert coef.gamma_coef == pytest.approx(0.0)

    def test_matched_condition_nulls_reflection(self):
        for x in (-3.0, -0.5, 0.7, 4.0):
            imm = SurfaceImmittance(z_e=1j * x * ETA_0, y_m=1j * x / ETA_0)
            coef = scatter_coefficients(imm, 24.5e9)
            assert abs(coef.gamma_coef) < 1e-12
            assert abs(coef.t_coef) == pytest.approx(1.0, abs=1e-9)

    def test_product_four_nulls_transmission(self):
        # y_m * z_e = 4 with opposite-sign reactances
        x, y = 2.0, -2.0
        imm = SurfaceImmittance(z_e=1j * x * ETA_0, y_m=1j * y / ETA_0)
        coef = scatter_coefficients(imm, 24.5e9)
        assert abs(coef.t_coef) < 1e-12

    def test_energy_conservation_randomized(self, rng):
        x = np.tan(rng.uniform(-1.55, 1.55, 100_000))
        y = np.tan(rng.uniform(-1.55, 1.55, 100_000))
        from metarelay.cell import _scatter_from_immittance

        t, g = _scatter_from_immittance(1j * x * ETA_0, 1j * y / ETA_0)
        assert np.max(np.abs(np.abs(t) ** 2 + np.abs(g) ** 2 - 1.0)) < 1e-9

    def test_pole_input_rejected(self):
        imm = SurfaceImmittance(z_e=0j, y_m=0j, magnetic_pole=True)
        with pytest.raises(PoleError):
            scatter_coefficients(imm, 24.5e9)

    def test_degenerate_denominator_rejected(self):
        imm = SurfaceImmittance(z_e=complex(-2.0 * ETA_0, 0.0), y_m=0j)
        with pytest.raises(SingularityError):
            scatter_coefficients(imm, 24.5e9)


class TestSensitivity:
    def test_radius_dominates_gap(self, geom_m, varactor):
        # central finite differences of f_res against +/-5% per-parameter swings
        c4 = varactor_capacitance(varactor, 4.0)

        def shift(param):
            lo = resonant_frequency(magnetic_circuit(geom_m.scaled(**{param: 0.95}), c4))
            hi = resonant_frequency(magnetic_circuit(geom_m.scaled(**{param: 1.05}), c4))
            return abs(hi - lo) / 2.0

        assert shift("radius") > shift("gap")

    @pytest.mark.parametrize("param", ["radius", "trace_width", "gap", "copper_thickness"])
    @pytest.mark.parametrize("side", ["magnetic", "electric"])
    def test_fabrication_tolerance(self, geom_m, geom_e, varactor, param, side):
        geom = geom_m if side == "magnetic" else geom_e
        build = magnetic_circuit if side == "magnetic" else electric_circuit
        c4 = varactor_capacitance(varactor, 4.0)
        base = resonant_frequency(build(geom, c4))
        for factor in (0.95, 1.05):
            shifted = resonant_frequency(build(geom.scaled(**{param: factor}), c4))
            assert abs(shifted - base) / base < 0.04
