"""Synthetic indoor / outdoor-to-indoor coverage scenarios.

Plan-view geometry (meters): walls and windows attenuate or block,
environment reflectors give single-bounce specular paths via the image
method, relay surfaces contribute steered lens/mirror paths evaluated
through the full element-sum budget, and a fixed metal sheet provides the
non-steerable specular baseline.  Blockage is Monte-Carlo with one
uniform draw per (trial, path), shared across beta values and surface
configurations so monotonicity comparisons are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .beam import SurfaceArray, steering_command
from .budget import LinkGeometry, RadioParams, friis, received_power_exact
from .config import (
    RootConfig,
    ScenarioConfig,
    ScenarioReflector,
    ScenarioSegment,
    ScenarioSheet,
    ScenarioSurface,
    row_spacing_of,
)
from .errors import DomainError
from .lut import BeamMode, PhaseLookupTable


class PathKind(str, Enum):
    LOS = "los"
    ENV_REFLECTION = "env_reflection"
    SURFACE_LENS = "surface_lens"
    SURFACE_MIRROR = "surface_mirror"
    METAL_SHEET = "metal_sheet"


@dataclass
class PathCandidate:
    kind: PathKind
    key: str                   # stable id, aligns blockage draws across configs
    snr_db: float
    blocked: bool = False
    detail: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# 2-D geometry helpers

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def segments_intersect(p1, p2, q1, q2, eps: float = 1e-9) -> bool:
    """Proper crossing of open segments; shared endpoints do not count."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return (d1 * d2 < -eps) and (d3 * d4 < -eps)


def reflect_across_line(point, a, b) -> np.ndarray:
    """Mirror image of ``point`` across the infinite line through a-b."""
    point = np.asarray(point, dtype=float)
    a = np.asarray(a, dtype=float)
    direction = np.asarray(b, dtype=float) - a
    norm2 = float(direction @ direction)
    if norm2 == 0:
        raise DomainError("degenerate reflector segment")
    t = float((point - a) @ direction) / norm2
    foot = a + t * direction
    return 2.0 * foot - point


def _specular_bounce(tx, rx, a, b) -> Optional[np.ndarray]:
    """Reflection point on segment a-b for the tx->rx bounce, if valid."""
    side_tx = _cross(a, b, tx)
    side_rx = _cross(a, b, rx)
    if side_tx * side_rx <= 0:
        return None                      # opposite sides or on the line
    image = reflect_across_line(tx, a, b)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = rx - image
    e = b - a
    denom = d[0] * e[1] - d[1] * e[0]
    if abs(denom) < 1e-12:
        return None
    t = ((a[0] - image[0]) * e[1] - (a[1] - image[1]) * e[0]) / denom
    s = ((a[0] - image[0]) * d[1] - (a[1] - image[1]) * d[0]) / denom
    if not (0.0 < s < 1.0 and 0.0 < t < 1.0):
        return None
    return image + t * d


def _to3(p) -> np.ndarray:
    return np.array([p[0], p[1], 0.0])


class ScenarioEngine:
    """Path enumeration, coverage maps, and blockage Monte-Carlo."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        array: SurfaceArray,
        radio: RadioParams,
        luts: dict[BeamMode, PhaseLookupTable],
    ) -> None:
        self.scenario = scenario
        self.array = array
        self.radio = radio
        self.luts = luts
        if not scenario.rx:
            raise DomainError("scenario needs a non-empty rx grid")
        for seg in scenario.segments:
            if seg.loss_db is not None and seg.loss_db < 0:
                raise DomainError("segment penetration loss must be >= 0 dB")

    # -- propagation pieces -------------------------------------------------

    def _crossing_loss(self, p, q) -> Optional[float]:
        """Sum of penetration losses along p->q; None if an opaque segment blocks."""
        total = 0.0
        for seg in self.scenario.segments:
            if segments_intersect(p, q, seg.p1, seg.p2):
                if seg.loss_db is None:
                    return None
                total += seg.loss_db
        return total

    def _los_path(self, tx, rx) -> Optional[PathCandidate]:
        loss = self._crossing_loss(tx, rx)
        if loss is None:
            return None
        dist = float(np.hypot(rx[0] - tx[0], rx[1] - tx[1]))
        snr = friis(self.radio, dist) - loss - self.radio.noise_floor_dbm
        return PathCandidate(
            kind=PathKind.LOS, key="los", snr_db=snr,
            detail={"distance_m": dist, "penetration_db": loss},
        )

    def _bounce_path(
        self, tx, rx, p1, p2, reflection_loss_db: float, kind: PathKind, key: str
    ) -> Optional[PathCandidate]:
        hit = _specular_bounce(tx, rx, p1, p2)
        if hit is None:
            return None
        loss1 = self._crossing_loss(tx, hit)
        loss2 = self._crossing_loss(hit, rx)
        if loss1 is None or loss2 is None:
            return None
        d1 = float(np.linalg.norm(hit - np.asarray(tx, dtype=float)))
        d2 = float(np.linalg.norm(np.asarray(rx, dtype=float) - hit))
        snr = (
            friis(self.radio, d1 + d2)
            - reflection_loss_db - loss1 - loss2
            - self.radio.noise_floor_dbm
        )
        incident = _angle_about_normal(tx, hit, p1, p2)
        reflected = _angle_about_normal(rx, hit, p1, p2)
        return PathCandidate(
            kind=kind, key=key, snr_db=snr,
            detail={
                "bounce_point": [float(hit[0]), float(hit[1])],
                "incident_deg": incident,
                "reflected_deg": reflected,
                "reflection_loss_db": reflection_loss_db,
            },
        )

    def _surface_paths(self, tx, rx, surface: ScenarioSurface, index: int) -> list[PathCandidate]:
        origin = np.asarray(surface.origin, dtype=float)
        normal = np.array([math.cos(math.radians(surface.normal_deg)),
                           math.sin(math.radians(surface.normal_deg))])
        column = np.array([-normal[1], normal[0]])
        to_tx = np.asarray(tx, dtype=float) - origin
        to_rx = np.asarray(rx, dtype=float) - origin
        d_i = float(np.linalg.norm(to_tx))
        d_s = float(np.linalg.norm(to_rx))
        if d_i < 1e-6 or d_s < 1e-6:
            return []
        side_tx = float(to_tx @ normal)
        side_rx = float(to_rx @ normal)
        if side_tx == 0 or side_rx == 0:
            return []
        theta_i = math.degrees(math.asin(max(-1, min(1, float(to_tx @ column) / d_i))))
        theta_s = math.degrees(math.asin(max(-1, min(1, float(to_rx @ column) / d_s))))
        mode = BeamMode.LENS if side_tx * side_rx < 0 else BeamMode.MIRROR
        if mode.value not in surface.modes:
            return []
        if abs(theta_s) > surface.steer_range_deg:
            return []
        loss1 = self._crossing_loss(tx, tuple(origin))
        loss2 = self._crossing_loss(tuple(origin), rx)
        if loss1 is None or loss2 is None:
            return []
        lut = self.luts[mode]
        command = steering_command(self.array, lut, theta_s, incident_angle=theta_i)
        geom = LinkGeometry(
            tx=_to3(tx), rx=_to3(rx), surface_origin=_to3(origin),
            surface_normal=np.array([normal[0], normal[1], 0.0]),
            column_axis=np.array([column[0], column[1], 0.0]),
        )
        # Beam synthesis propagates phases as e^{-jkd}; the element-sum budget
        # books them as e^{+j phi}, so command coefficients enter conjugated.
        coefficients = np.repeat(np.conj(command.coefficients)[:, None], self.array.m_rows, axis=1)
        power = received_power_exact(self.radio, geom, self.array, coefficients)
        snr = power - loss1 - loss2 - self.radio.noise_floor_dbm
        kind = PathKind.SURFACE_LENS if mode is BeamMode.LENS else PathKind.SURFACE_MIRROR
        return [
            PathCandidate(
                kind=kind, key=f"surface{index}", snr_db=snr,
                detail={
                    "theta_i_deg": theta_i, "theta_s_deg": theta_s,
                    "d_i_m": d_i, "d_s_m": d_s, "mode": mode.value,
                    "penetration_db": loss1 + loss2,
                },
            )
        ]

    # -- public operations ---------------------------------------------------

    def enumerate_paths(
        self, tx, rx,
        with_surfaces: bool = True,
        with_sheets: bool = True,
        surface_count: Optional[int] = None,
    ) -> list[PathCandidate]:
        paths: list[PathCandidate] = []
        los = self._los_path(tx, rx)
        if los is not None:
            paths.append(los)
        for i, refl in enumerate(self.scenario.reflectors):
            p = self._bounce_path(
                tx, rx, refl.p1, refl.p2, refl.reflection_loss_db,
                PathKind.ENV_REFLECTION, f"reflector{i}",
            )
            if p is not None:
                paths.append(p)
        if with_sheets:
            for i, sheet in enumerate(self.scenario.sheets):
                p = self._bounce_path(
                    tx, rx, sheet.p1, sheet.p2, sheet.reflection_loss_db,
                    PathKind.METAL_SHEET, f"sheet{i}",
                )
                if p is not None:
                    paths.append(p)
        if with_surfaces:
            surfaces = self.scenario.surfaces
            if surface_count is not None:
                surfaces = surfaces[:surface_count]
            for i, surface in enumerate(surfaces):
                paths.extend(self._surface_paths(tx, rx, surface, i))
        return paths

    def best_link_snr(
        self, tx, rx, with_surfaces: bool = True, with_sheets: bool = True,
        surface_count: Optional[int] = None,
    ) -> tuple[float, Optional[PathCandidate]]:
        candidates = [
            c for c in self.enumerate_paths(
                tx, rx, with_surfaces=with_surfaces, with_sheets=with_sheets,
                surface_count=surface_count,
            )
            if not c.blocked
        ]
        if not candidates:
            return -math.inf, None
        best = max(candidates, key=lambda c: c.snr_db)
        return best.snr_db, best

    def coverage_map(
        self, tx, with_surfaces: bool = True, with_sheets: bool = False,
        surface_count: Optional[int] = None,
    ) -> list[dict]:
        tiers = sorted(self.scenario.modulation_tiers.items(), key=lambda kv: -kv[1])
        records = []
        for rx in self.scenario.rx:
            snr, best = self.best_link_snr(
                tx, rx, with_surfaces=with_surfaces, with_sheets=with_sheets,
                surface_count=surface_count,
            )
            tier = "outage"
            for name, threshold in tiers:
                if snr >= threshold:
                    tier = name
                    break
            records.append({
                "rx": [float(rx[0]), float(rx[1])],
                "snr_db": snr,
                "tier": tier,
                "kind": best.kind.value if best else None,
            })
        return records

    def blockage_failure_rate(
        self,
        betas,
        trials: int,
        seed: int,
        surface_counts: tuple[int, ...] = (0, 1, 2),
        with_sheets: bool = False,
    ) -> dict:
        """Failure probability per beta per surface count, with 95% CI.

        Per trial each candidate path is independently blocked with
        probability beta; a link fails when no unblocked path stays at or
        above the scenario blockage threshold.  One uniform array drawn per
        (trial, path key) is reused across betas and surface counts.
        """
        if trials < 1:
            raise DomainError("need at least one Monte-Carlo trial")
        betas = [float(b) for b in np.atleast_1d(np.asarray(betas, dtype=float))]
        if any(b < 0 or b > 1 for b in betas):
            raise DomainError("blockage probabilities must lie in [0, 1]")
        threshold = self.scenario.blockage_threshold_db
        links: list[dict[int, list[tuple[str, float]]]] = []
        key_set: set[str] = set()
        max_count = max(surface_counts)
        for tx in self.scenario.tx:
            for rx in self.scenario.rx:
                per_config: dict[int, list[tuple[str, float]]] = {}
                all_paths = self.enumerate_paths(
                    tx, rx, with_surfaces=True, with_sheets=with_sheets,
                    surface_count=max_count,
                )
                for count in surface_counts:
                    kept = [
                        (f"{tx}|{rx}|{p.key}", p.snr_db)
                        for p in all_paths
                        if not p.key.startswith("surface") or int(p.key[7:]) < count
                    ]
                    per_config[count] = kept
                    key_set.update(k for k, _ in kept)
                links.append(per_config)
        keys = sorted(key_set)
        key_index = {k: i for i, k in enumerate(keys)}
        rng = np.random.default_rng(seed)
        draws = rng.random((trials, len(keys))) if keys else np.zeros((trials, 0))

        results = {"betas": betas, "trials": trials, "seed": seed, "configs": {}}
        for count in surface_counts:
            rates, ci_low, ci_high = [], [], []
            for beta in betas:
                blocked = draws < beta
                per_trial_failures = np.zeros(trials)
                for link in links:
                    usable = [key_index[k] for k, snr in link[count] if snr >= threshold]
                    if not usable:
                        per_trial_failures += 1.0
                    else:
                        survived = ~blocked[:, usable].all(axis=1)
                        per_trial_failures += ~survived
                n_links = max(len(links), 1)
                per_trial = per_trial_failures / n_links
                rate = float(per_trial.mean())
                half = 1.959963984540054 * float(per_trial.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
                rates.append(rate)
                ci_low.append(max(0.0, rate - half))
                ci_high.append(min(1.0, rate + half))
            results["configs"][count] = {
                "failure_rate": rates, "ci_low": ci_low, "ci_high": ci_high,
            }
        return results


def _angle_about_normal(point, hit, a, b) -> float:
    """Unsigned angle (deg) between hit->point and the segment normal."""
    direction = np.asarray(point, dtype=float) - np.asarray(hit, dtype=float)
    tangent = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    tangent = tangent / np.linalg.norm(tangent)
    normal = np.array([-tangent[1], tangent[0]])
    d = np.linalg.norm(direction)
    if d == 0:
        return 0.0
    return math.degrees(math.acos(max(-1.0, min(1.0, abs(float(direction @ normal)) / d))))


def office_testbed() -> ScenarioConfig:
    """Bundled 10 x 8 m office layout with 23 receiver points.

    The exterior wall (y = 8) carries three windows separated by brick;
    a server room blocks the south-east corner.  Receiver positions
    approximate the measured layout on a coarse grid.  Transmitters:
    index 0/1 outdoors (perpendicular, 30 deg off), 2/3 indoors.
    """
    windows = [(1.2, 2.8), (4.2, 5.8), (7.2, 8.8)]
    segments = [
        # exterior north wall pieces between windows (brick)
        ScenarioSegment(p1=(0.0, 8.0), p2=(windows[0][0], 8.0), loss_db=40.0),
        ScenarioSegment(p1=(windows[0][1], 8.0), p2=(windows[1][0], 8.0), loss_db=40.0),
        ScenarioSegment(p1=(windows[1][1], 8.0), p2=(windows[2][0], 8.0), loss_db=40.0),
        ScenarioSegment(p1=(windows[2][1], 8.0), p2=(10.0, 8.0), loss_db=40.0),
        # windows
        ScenarioSegment(p1=(windows[0][0], 8.0), p2=(windows[0][1], 8.0), loss_db=4.5, kind="window"),
        ScenarioSegment(p1=(windows[1][0], 8.0), p2=(windows[1][1], 8.0), loss_db=4.5, kind="window"),
        ScenarioSegment(p1=(windows[2][0], 8.0), p2=(windows[2][1], 8.0), loss_db=4.5, kind="window"),
        # remaining exterior walls
        ScenarioSegment(p1=(0.0, 0.0), p2=(10.0, 0.0), loss_db=40.0),
        ScenarioSegment(p1=(0.0, 0.0), p2=(0.0, 8.0), loss_db=40.0),
        ScenarioSegment(p1=(10.0, 0.0), p2=(10.0, 8.0), loss_db=40.0),
        # opaque server room in the south-east corner
        ScenarioSegment(p1=(8.0, 0.0), p2=(8.0, 2.7), loss_db=None, kind="obstacle"),
        ScenarioSegment(p1=(8.0, 2.7), p2=(10.0, 2.7), loss_db=None, kind="obstacle"),
        # interior partition shadowing the north-west quadrant
        ScenarioSegment(p1=(1.5, 4.5), p2=(4.5, 4.5), loss_db=None, kind="wall"),
    ]
    reflectors = [
        ScenarioReflector(p1=(0.0, 0.0), p2=(0.0, 8.0), reflection_loss_db=10.0),
        ScenarioReflector(p1=(10.0, 2.7), p2=(10.0, 8.0), reflection_loss_db=10.0),
        ScenarioReflector(p1=(0.0, 0.0), p2=(8.0, 0.0), reflection_loss_db=10.0),
    ]
    surfaces = [
        ScenarioSurface(origin=(5.0, 7.9), normal_deg=-90.0, steer_range_deg=60.0),
        ScenarioSurface(origin=(8.0, 7.9), normal_deg=-90.0, steer_range_deg=60.0),
    ]
    sheets = [ScenarioSheet(p1=(4.7, 7.9), p2=(5.3, 7.9), reflection_loss_db=0.0)]
    tx = [
        (5.0, 14.2),                                   # outdoor, perpendicular, 6.3 m
        (5.0 + 6.8 * math.sin(math.radians(30.0)),     # outdoor, 30 deg off, 6.8 m
         7.9 + 6.8 * math.cos(math.radians(30.0))),
        (5.0, 1.6),                                    # indoor, perpendicular, 6.3 m
        (5.0 - 6.8 * math.sin(math.radians(30.0)),
         7.9 - 6.8 * math.cos(math.radians(30.0))),    # indoor, 30 deg off
    ]
    rx_grid = [
        (x, y)
        for y in (1.0, 2.5, 4.0, 5.5, 7.0)
        for x in (1.0, 3.0, 5.0, 7.0, 9.0)
        if not (x > 8.0 and y < 2.7)                   # drop points inside the server room
    ]
    return ScenarioConfig(
        bounds=(10.0, 8.0),
        segments=segments,
        reflectors=reflectors,
        sheets=sheets,
        surfaces=surfaces,
        tx=tx,
        rx=rx_grid,
    )


def scenario_from_config(cfg: RootConfig) -> ScenarioConfig:
    return cfg.scenario if cfg.scenario is not None else office_testbed()


def build_engine(cfg: RootConfig, luts: dict[BeamMode, PhaseLookupTable]) -> ScenarioEngine:
    scenario = scenario_from_config(cfg)
    array = SurfaceArray(
        n_cols=cfg.surface.n_cols, m_rows=cfg.surface.m_rows,
        col_spacing=cfg.surface.col_spacing, row_spacing=row_spacing_of(cfg.surface),
        center_freq=cfg.surface.center_freq,
    )
    radio = RadioParams(
        p_t_dbm=cfg.radio.p_t_dbm, g_t_dbi=cfg.radio.g_t_dbi, g_r_dbi=cfg.radio.g_r_dbi,
        freq=cfg.surface.center_freq, noise_floor_dbm=cfg.radio.noise_floor_dbm,
        element_q=cfg.radio.element_q,
    )
    return ScenarioEngine(scenario, array, radio, luts)
