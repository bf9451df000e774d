"""Shared fixtures: one pipeline build reused across the whole suite."""

import numpy as np
import pytest

from metarelay.beam import SurfaceArray
from metarelay.budget import RadioParams
from metarelay.config import build_cell_stack, default_config, row_spacing_of
from metarelay.lut import BeamMode, build_lut, sweep_pattern, voltage_grid


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def stack(cfg):
    return build_cell_stack(cfg.cell)


@pytest.fixture(scope="session")
def grid(cfg):
    return voltage_grid(
        cfg.cell.varactor.v_min, cfg.cell.varactor.v_max,
        cfg.lut.voltage_step, cfg.lut.dac_bits,
    )


@pytest.fixture(scope="session")
def pattern(stack, grid, cfg):
    return sweep_pattern(stack, [cfg.surface.center_freq], grid, grid)


@pytest.fixture(scope="session")
def luts(pattern, cfg):
    return {
        mode: build_lut(
            pattern, mode, cfg.lut.phase_step_deg, cfg.surface.center_freq,
            cell_config=cfg.cell.model_dump(mode="json"),
        )
        for mode in BeamMode
    }


@pytest.fixture(scope="session")
def lens_lut(luts):
    return luts[BeamMode.LENS]


@pytest.fixture(scope="session")
def mirror_lut(luts):
    return luts[BeamMode.MIRROR]


@pytest.fixture(scope="session")
def array(cfg):
    return SurfaceArray(
        n_cols=cfg.surface.n_cols, m_rows=cfg.surface.m_rows,
        col_spacing=cfg.surface.col_spacing, row_spacing=row_spacing_of(cfg.surface),
        center_freq=cfg.surface.center_freq,
    )


@pytest.fixture(scope="session")
def radio(cfg):
    return RadioParams(
        p_t_dbm=cfg.radio.p_t_dbm, g_t_dbi=cfg.radio.g_t_dbi, g_r_dbi=cfg.radio.g_r_dbi,
        freq=cfg.surface.center_freq, noise_floor_dbm=cfg.radio.noise_floor_dbm,
        element_q=cfg.radio.element_q,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
