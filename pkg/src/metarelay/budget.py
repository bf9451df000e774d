"""Relay link budgets: free-space chain, exact element sums, far-field forms.

Public interfaces speak dBm/dB; all internal math runs in linear watts and
converts once at the boundary.  Element sums iterate in fixed index order,
so results are reduction-order deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .beam import element_pattern
from .constants import wavelength
from .errors import DomainError


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        return -math.inf
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class RadioParams:
    """Transmit power, antenna gains, and the noise reference."""

    p_t_dbm: float = 6.0
    g_t_dbi: float = 25.0
    g_r_dbi: float = 15.0
    freq: float = 24.5e9
    noise_floor_dbm: float = -80.0
    element_q: float = 0.5611

    def __post_init__(self) -> None:
        if self.freq <= 0:
            raise DomainError("frequency must be positive")

    @property
    def eirp_dbm(self) -> float:
        return self.p_t_dbm + self.g_t_dbi

    @property
    def wavelength(self) -> float:
        return wavelength(self.freq)


def _unit(vec: np.ndarray, name: str) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise DomainError(f"{name} vector must be non-zero")
    return vec / norm


@dataclass
class LinkGeometry:
    """Tx/surface/Rx placement in 3-D; the surface is a planar grid.

    Columns run along ``column_axis``, rows along normal x column (vertical
    for a wall-mounted surface in plan view).
    """

    tx: np.ndarray
    rx: np.ndarray
    surface_origin: np.ndarray
    surface_normal: np.ndarray
    column_axis: np.ndarray

    def __post_init__(self) -> None:
        self.tx = np.asarray(self.tx, dtype=float)
        self.rx = np.asarray(self.rx, dtype=float)
        self.surface_origin = np.asarray(self.surface_origin, dtype=float)
        self.surface_normal = _unit(np.asarray(self.surface_normal, dtype=float), "normal")
        column = np.asarray(self.column_axis, dtype=float)
        column = column - np.dot(column, self.surface_normal) * self.surface_normal
        self.column_axis = _unit(column, "column axis")
        if np.allclose(self.tx, self.surface_origin) or np.allclose(self.rx, self.surface_origin):
            raise DomainError("tx/rx must not coincide with the surface origin")

    @property
    def row_axis(self) -> np.ndarray:
        return np.cross(self.surface_normal, self.column_axis)

    def element_positions(self, array) -> np.ndarray:
        n = (np.arange(array.n_cols) - (array.n_cols - 1) / 2.0) * array.col_spacing
        m = (np.arange(array.m_rows) - (array.m_rows - 1) / 2.0) * array.row_spacing
        return (
            self.surface_origin[None, None, :]
            + n[:, None, None] * self.column_axis[None, None, :]
            + m[None, :, None] * self.row_axis[None, None, :]
        )

    def element_distances(self, array) -> tuple[np.ndarray, np.ndarray]:
        pos = self.element_positions(array)
        d_i = np.linalg.norm(self.tx[None, None, :] - pos, axis=-1)
        d_s = np.linalg.norm(self.rx[None, None, :] - pos, axis=-1)
        if np.any(d_i == 0) or np.any(d_s == 0):
            raise DomainError("tx/rx coincides with a surface element")
        return d_i, d_s

    def element_angles_deg(self, array) -> tuple[np.ndarray, np.ndarray]:
        """Per-element angles from the surface normal line (0..90 deg)."""
        pos = self.element_positions(array)
        to_tx = self.tx[None, None, :] - pos
        to_rx = self.rx[None, None, :] - pos
        d_i = np.linalg.norm(to_tx, axis=-1)
        d_s = np.linalg.norm(to_rx, axis=-1)
        cos_i = np.abs(to_tx @ self.surface_normal) / d_i
        cos_s = np.abs(to_rx @ self.surface_normal) / d_s
        return np.degrees(np.arccos(np.clip(cos_i, 0, 1))), np.degrees(np.arccos(np.clip(cos_s, 0, 1)))

    def center_geometry(self) -> tuple[float, float, float, float]:
        """(d_i, d_s, theta_i, theta_s) at the surface origin."""
        to_tx = self.tx - self.surface_origin
        to_rx = self.rx - self.surface_origin
        d_i = float(np.linalg.norm(to_tx))
        d_s = float(np.linalg.norm(to_rx))
        theta_i = math.degrees(math.acos(min(1.0, abs(np.dot(to_tx, self.surface_normal)) / d_i)))
        theta_s = math.degrees(math.acos(min(1.0, abs(np.dot(to_rx, self.surface_normal)) / d_s)))
        return d_i, d_s, theta_i, theta_s


def friis(params: RadioParams, distance: float) -> float:
    """Free-space received power (dBm) at the given distance."""
    if distance <= 0:
        raise DomainError("distance must be positive")
    p_r = (
        dbm_to_watts(params.p_t_dbm)
        * db_to_linear(params.g_t_dbi)
        * db_to_linear(params.g_r_dbi)
        * (params.wavelength / (4.0 * math.pi * distance)) ** 2
    )
    return watts_to_dbm(p_r)


def element_gain(array, theta_deg, q: float = 0.5611):
    """Meta-atom gain toward ``theta``: (4 pi / lambda^2) x y F(theta), linear."""
    aperture = array.col_spacing * array.row_spacing
    lam = wavelength(array.center_freq)
    return 4.0 * math.pi / lam**2 * aperture * element_pattern(theta_deg, q)


def received_power_exact(
    params: RadioParams,
    geom: LinkGeometry,
    array,
    coefficients: np.ndarray,
) -> float:
    """Coherent per-element sum with true 3-D distances and angles (dBm).

    P = | sum_nm C_nm sqrt(P_R,nm) e^{j 2 pi (d_i + d_s)/lambda} |^2 with the
    per-element two-hop power P_R,nm carrying one element gain per direction.
    """
    coefficients = np.broadcast_to(np.asarray(coefficients, dtype=complex), (array.n_cols, array.m_rows))
    d_i, d_s = geom.element_distances(array)
    theta_i, theta_s = geom.element_angles_deg(array)
    lam = params.wavelength
    amp = (
        math.sqrt(
            dbm_to_watts(params.p_t_dbm)
            * db_to_linear(params.g_t_dbi)
            * db_to_linear(params.g_r_dbi)
        )
        * (lam / (4.0 * math.pi)) ** 2
        * np.sqrt(element_gain(array, theta_i, params.element_q) * element_gain(array, theta_s, params.element_q))
        / (d_i * d_s)
    )
    phases = 2.0 * math.pi * (d_i + d_s) / lam
    total = np.sum(coefficients * amp * np.exp(1j * phases))
    return watts_to_dbm(float(np.abs(total) ** 2))


def _farfield_phase_sum(array, coefficients: np.ndarray, theta_i: float, theta_s: float) -> complex:
    """Planar-wave column phases; rows are coherent for in-plane endpoints."""
    coefficients = np.broadcast_to(np.asarray(coefficients, dtype=complex), (array.n_cols, array.m_rows))
    lam = wavelength(array.center_freq)
    n = np.arange(array.n_cols)
    phase = 2.0 * math.pi * array.col_spacing / lam * n * (
        math.sin(math.radians(theta_i)) + math.sin(math.radians(theta_s))
    )
    return complex(np.sum(coefficients * np.exp(1j * phase)[:, None]))


def received_power_farfield(
    params: RadioParams,
    d_i: float,
    d_s: float,
    theta_i: float,
    theta_s: float,
    array,
    coefficients: np.ndarray,
    phase_sum: Optional[complex] = None,
) -> float:
    """Far-field two-hop power (dBm); symmetric under endpoint swap.

    ``phase_sum`` overrides the default planar-phase column sum when the
    caller has already evaluated sum C_nm e^{j phi_nm} (e.g. matched phases).
    """
    if d_i <= 0 or d_s <= 0:
        raise DomainError("distances must be positive")
    aperture = array.col_spacing * array.row_spacing
    extent = max(array.width, array.height)
    if min(d_i, d_s) < 10.0 * extent:
        warnings.warn(
            f"far-field form at {min(d_i, d_s):.2f} m is inside 10x the "
            f"{extent:.2f} m aperture; accuracy degrades",
            stacklevel=2,
        )
    if phase_sum is None:
        phase_sum = _farfield_phase_sum(array, coefficients, theta_i, theta_s)
    p_r = (
        dbm_to_watts(params.p_t_dbm)
        * db_to_linear(params.g_t_dbi)
        * db_to_linear(params.g_r_dbi)
        * (aperture / (4.0 * math.pi * d_i * d_s)) ** 2
        * element_pattern(theta_i, params.element_q)
        * element_pattern(theta_s, params.element_q)
        * abs(phase_sum) ** 2
    )
    return watts_to_dbm(p_r)


def surface_path_loss(
    d_i: float,
    d_s: float,
    theta_i: float,
    theta_s: float,
    array,
    coefficients: np.ndarray,
    q: float = 0.5611,
) -> float:
    """Path loss (positive dB) of a correctly reconfigured surface.

    1/L = (xy / (4 pi d_i d_s))^2 F(th_i) F(th_s) |sum |C_nm||^2
    """
    if d_i <= 0 or d_s <= 0:
        raise DomainError("distances must be positive")
    coefficients = np.broadcast_to(np.asarray(coefficients, dtype=complex), (array.n_cols, array.m_rows))
    aperture = array.col_spacing * array.row_spacing
    inv_loss = (
        (aperture / (4.0 * math.pi * d_i * d_s)) ** 2
        * element_pattern(theta_i, q)
        * element_pattern(theta_s, q)
        * float(np.sum(np.abs(coefficients))) ** 2
    )
    if inv_loss <= 0:
        return math.inf
    return -10.0 * math.log10(inv_loss)


def aperture_capacity_dbi(area: float, lam: float) -> float:
    """Gain upper bound of a lossless aperture of the given area."""
    if area <= 0 or lam <= 0:
        raise DomainError("area and wavelength must be positive")
    return 10.0 * math.log10(4.0 * math.pi * area / lam**2)


def synthesized_gain_dbi(
    array,
    coefficients: np.ndarray,
    theta_i: float,
    theta_s: float,
    q: float = 0.5611,
    phase_sum: Optional[complex] = None,
) -> float:
    """Per-hop surface gain implied by the far-field budget (dBi)."""
    aperture = array.col_spacing * array.row_spacing
    lam = wavelength(array.center_freq)
    if phase_sum is None:
        phase_sum = _farfield_phase_sum(array, coefficients, theta_i, theta_s)
    gain = (
        4.0 * math.pi / lam**2 * aperture
        * math.sqrt(element_pattern(theta_i, q) * element_pattern(theta_s, q))
        * abs(phase_sum)
    )
    if gain <= 0:
        return -math.inf
    return 10.0 * math.log10(gain)


def matched_coefficients(geom: LinkGeometry, array, magnitude: float = 1.0) -> np.ndarray:
    """Conjugate-matched coefficients for the exact-sum upper bound."""
    d_i, d_s = geom.element_distances(array)
    lam = wavelength(array.center_freq)
    return magnitude * np.exp(-1j * 2.0 * math.pi * (d_i + d_s) / lam)
