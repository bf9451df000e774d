"""Link-layer beam management over the relay: sweeps, refinement, multi-arm.

The channel oracle computes every probe's SNR from the beam-synthesis and
link-budget stack (no stochastic fading by default; optional dB-domain
Gaussian noise for robustness runs), so protocol logic is testable in
isolation from channel randomness.  Time is counted in probes.  The
surface changes mode only on UE control messages, and every probe lands
in a replayable trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .beam import SurfaceArray, multibeam_command, region_pair_command, steering_command
from .budget import RadioParams, received_power_farfield
from .errors import DomainError
from .lut import BeamMode, PhaseLookupTable, wrap_degrees


class Role(str, Enum):
    ENODEB = "enodeb"
    SURFACE = "surface"
    UE = "ue"


@dataclass(frozen=True)
class ControlMessage:
    sender: Role
    kind: str                  # "set_mode" | "set_beam"
    payload: dict


@dataclass
class NodeState:
    role: Role
    codebook: np.ndarray
    current_beam: Optional[float] = None
    mode: Optional[BeamMode] = None     # surface only
    inbox: list[ControlMessage] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.codebook = np.sort(np.asarray(self.codebook, dtype=float))

    def deliver(self, message: ControlMessage) -> None:
        """Reliable, instantaneous control channel."""
        self.inbox.append(message)
        if self.role is Role.SURFACE and message.kind == "set_mode":
            if message.sender is not Role.UE:
                raise DomainError("surface mode changes only on UE control messages")
            self.mode = BeamMode(message.payload["mode"])


@dataclass
class AlignmentResult:
    enodeb_angle: float
    surface_angle: float
    ue_angle: float
    probes_used: int
    achieved_snr: float
    success: bool
    oracle_snr: float
    ground_truth: tuple[float, float, float]
    flags: list[str] = field(default_factory=list)


def pointing_loss_db(offset_deg, beamwidth_deg: float, floor_db: float = 30.0):
    """Parabolic main-lobe rolloff with a side-lobe floor (positive dB)."""
    offset = np.asarray(offset_deg, dtype=float)
    return np.minimum(12.0 * (offset / beamwidth_deg) ** 2, floor_db)


def beam_codebook(n: int, span_deg: float = 120.0) -> np.ndarray:
    """n beams uniformly covering [-span/2, +span/2]."""
    if n < 1:
        raise DomainError("codebook needs at least one beam")
    if n == 1:
        return np.array([0.0])
    return np.linspace(-span_deg / 2.0, span_deg / 2.0, n)


class RelayChannel:
    """Deterministic probe oracle built on the surface's actual patterns.

    Ground truth: the ENodeB sees the surface at ``enodeb_truth`` in its own
    beam coordinates, the UE sees it at ``ue_truth``, and the UE sits at
    angular position ``ue_position`` from the surface normal (the steer
    angle a perfect alignment commands).  The ENodeB illuminates the
    surface from ``incident_angle``.
    """

    def __init__(
        self,
        array: SurfaceArray,
        luts: dict[BeamMode, PhaseLookupTable],
        radio: RadioParams,
        d_tx: float = 6.3,
        d_rx: float = 3.0,
        incident_angle: float = 0.0,
        ue_position: float = 20.0,
        enodeb_truth: float = 0.0,
        ue_truth: float = 0.0,
        enodeb_beamwidth: float = 10.0,
        ue_beamwidth: float = 15.0,
        noise_sigma_db: float = 0.0,
        seed: int = 0,
        mode: BeamMode = BeamMode.LENS,
        surface_enabled: bool = True,
    ) -> None:
        self.array = array
        self.luts = luts
        self.radio = radio
        self.d_tx = d_tx
        self.d_rx = d_rx
        self.incident_angle = incident_angle
        self.ue_position = ue_position
        self.enodeb_truth = enodeb_truth
        self.ue_truth = ue_truth
        self.enodeb_beamwidth = enodeb_beamwidth
        self.ue_beamwidth = ue_beamwidth
        self.noise_sigma_db = noise_sigma_db
        self.rng = np.random.default_rng(seed)
        self.mode = mode
        self.surface_enabled = surface_enabled
        self._power_cache: dict = {}

    def ground_truth(self) -> tuple[float, float, float]:
        return (self.enodeb_truth, self.ue_position, self.ue_truth)

    def _surface_power_dbm(
        self,
        steer_deg: float,
        arms: Optional[Sequence[tuple[float, float]]],
        regions: Optional[Sequence[tuple[float, float]]] = None,
    ) -> float:
        if not self.surface_enabled:
            return -math.inf
        if regions is not None:
            key = (self.mode, "regions", tuple(map(tuple, regions)))
        elif arms is not None:
            key = (self.mode, "arms", tuple(map(tuple, arms)))
        else:
            key = (self.mode, "steer", steer_deg)
        cached = self._power_cache.get(key)
        if cached is not None:
            return cached
        lut = self.luts[self.mode]
        if regions is not None:
            command = region_pair_command(self.array, lut, list(regions), self.incident_angle)
        elif arms is not None:
            command = multibeam_command(self.array, lut, list(arms), self.incident_angle)
        else:
            command = steering_command(self.array, lut, steer_deg, self.incident_angle)
        # Column sum evaluated toward the UE's true angular position.
        n = np.arange(self.array.n_cols)
        k_d = 2.0 * math.pi * self.array.col_spacing / self.array.wavelength
        sin_sum = math.sin(math.radians(self.ue_position)) + math.sin(math.radians(self.incident_angle))
        column_sum = complex(np.sum(command.coefficients * np.exp(1j * k_d * n * sin_sum)))
        phase_sum = column_sum * self.array.m_rows
        power = received_power_farfield(
            self.radio, self.d_tx, self.d_rx,
            self.incident_angle, self.ue_position,
            self.array, None, phase_sum=phase_sum,
        )
        self._power_cache[key] = power
        return power

    def probe(
        self,
        enodeb_beam: float,
        surface_steer: float,
        ue_beam: float,
        arms: Optional[Sequence[tuple[float, float]]] = None,
        regions: Optional[Sequence[tuple[float, float]]] = None,
        deterministic: bool = False,
    ) -> float:
        """SNR (dB) of one probe.

        ``arms`` replaces the single steer beam with a two-armed split;
        ``regions`` (center, width pairs) probes widened region-covering
        beams for the hierarchical search.
        """
        power = self._surface_power_dbm(surface_steer, arms, regions)
        snr = (
            power
            - float(pointing_loss_db(enodeb_beam - self.enodeb_truth, self.enodeb_beamwidth))
            - float(pointing_loss_db(ue_beam - self.ue_truth, self.ue_beamwidth))
            - self.radio.noise_floor_dbm
        )
        if self.noise_sigma_db > 0 and not deterministic:
            snr += float(self.rng.normal(0.0, self.noise_sigma_db))
        return snr

    def oracle_snr(self) -> float:
        e, w, u = self.ground_truth()
        return self.probe(e, w, u, deterministic=True)


class AlignmentSession:
    """Runs the search protocols, counting probes and recording a trace."""

    def __init__(
        self,
        channel: RelayChannel,
        tolerance_deg: float = 3.0,
        detection_threshold_db: float = 10.0,
        record_trace: bool = True,
    ) -> None:
        self.channel = channel
        self.tolerance_deg = tolerance_deg
        self.detection_threshold_db = detection_threshold_db
        self.record_trace = record_trace
        self.trace: list[dict] = []
        self.enodeb = NodeState(Role.ENODEB, codebook=np.array([0.0]))
        self.surface = NodeState(Role.SURFACE, codebook=np.array([0.0]))
        self.ue = NodeState(Role.UE, codebook=np.array([0.0]))
        self.ue_sets_mode(channel.mode)

    def ue_sets_mode(self, mode: BeamMode) -> None:
        message = ControlMessage(Role.UE, "set_mode", {"mode": mode.value})
        self.surface.deliver(message)
        if self.record_trace:
            self.trace.append({"event": "set_mode", "sender": "ue", "mode": mode.value})

    def _probe(self, e: float, w: float, u: float, arms=None, regions=None) -> float:
        snr = self.channel.probe(e, w, u, arms=arms, regions=regions)
        if self.record_trace:
            self.trace.append({
                "event": "probe",
                "enodeb_beam": float(e),
                "surface_angle": float(w),
                "surface_mode": self.surface.mode.value if self.surface.mode else None,
                "ue_beam": float(u),
                "arms": [list(a) for a in arms] if arms else None,
                "regions": [list(r) for r in regions] if regions else None,
                "snr_db": float(snr),
            })
        return snr

    def _result(self, e: float, w: float, u: float, snr: float, probes: int, flags: list[str]) -> AlignmentResult:
        gt = self.channel.ground_truth()
        within = (
            abs(wrap_degrees(e - gt[0])) <= self.tolerance_deg
            and abs(wrap_degrees(w - gt[1])) <= self.tolerance_deg
            and abs(wrap_degrees(u - gt[2])) <= self.tolerance_deg
        )
        success = within and snr >= self.detection_threshold_db
        if snr < self.detection_threshold_db:
            flags = flags + ["below_threshold"]
        return AlignmentResult(
            enodeb_angle=float(e), surface_angle=float(w), ue_angle=float(u),
            probes_used=probes, achieved_snr=float(snr), success=success,
            oracle_snr=self.channel.oracle_snr(), ground_truth=gt, flags=flags,
        )

    # -- the searches --------------------------------------------------------

    def cold_start_align(
        self, enodeb_cb: np.ndarray, surface_cb: np.ndarray, ue_cb: np.ndarray
    ) -> AlignmentResult:
        """Exhaustive triple sweep: exactly n_e * n_w * n_u probes."""
        best = (-math.inf, None)
        probes = 0
        for e in enodeb_cb:
            for w in surface_cb:
                for u in ue_cb:
                    snr = self._probe(e, w, u)
                    probes += 1
                    if best[1] is None or snr > best[0]:
                        best = (snr, (float(e), float(w), float(u)))
        snr, angles = best
        if angles is None:
            raise DomainError("empty codebook")
        return self._result(*angles, snr=snr, probes=probes, flags=[])

    def steady_state_align(
        self, enodeb_beam: float, surface_cb: np.ndarray, ue_cb: np.ndarray
    ) -> AlignmentResult:
        """Surface/UE double sweep with the ENodeB leg fixed: n_w * n_u probes."""
        best = (-math.inf, None)
        probes = 0
        for w in surface_cb:
            for u in ue_cb:
                snr = self._probe(enodeb_beam, w, u)
                probes += 1
                if best[1] is None or snr > best[0]:
                    best = (snr, (float(enodeb_beam), float(w), float(u)))
        snr, angles = best
        if angles is None:
            raise DomainError("empty codebook")
        return self._result(*angles, snr=snr, probes=probes, flags=[])

    def refine_align(
        self,
        coarse: AlignmentResult,
        levels: int = 2,
        beams: int = 5,
        legs: Sequence[str] = ("enodeb", "surface", "ue"),
        initial_span: Optional[float] = None,
        require_success: bool = True,
    ) -> AlignmentResult:
        """Per level, halve the swept span around the current estimate.

        Legs sweep sequentially with the UE receive beam last.  Probe count
        is exactly levels * beams * len(legs).  If refinement loses more
        than 3 dB against the coarse result it reverts and flags.
        ``require_success=False`` lets internal callers refine a coarse
        region estimate whose midpoint may sit just outside tolerance.
        """
        if require_success and not coarse.success:
            raise DomainError("refine requires a successful coarse alignment")
        if beams < 2 or levels < 1:
            raise DomainError("refine needs at least 1 level of 2 beams")
        estimate = {
            "enodeb": coarse.enodeb_angle,
            "surface": coarse.surface_angle,
            "ue": coarse.ue_angle,
        }
        span = initial_span if initial_span is not None else 10.0
        best_snr = coarse.achieved_snr
        probes = 0
        for level in range(levels):
            span /= 2.0
            for leg in legs:
                center = estimate[leg]
                # candidates sorted center-out so ties keep the current estimate
                offsets = np.linspace(-span / 2.0, span / 2.0, beams)
                candidates = sorted(center + offsets, key=lambda a: (abs(a - center), a))
                leg_best = (-math.inf, center)
                for angle in candidates:
                    trial = dict(estimate); trial[leg] = angle
                    snr = self._probe(trial["enodeb"], trial["surface"], trial["ue"])
                    probes += 1
                    if snr > leg_best[0]:
                        leg_best = (snr, float(angle))
                best_snr, estimate[leg] = leg_best[0], leg_best[1]
        flags: list[str] = []
        if best_snr < coarse.achieved_snr - 3.0:
            estimate = {
                "enodeb": coarse.enodeb_angle,
                "surface": coarse.surface_angle,
                "ue": coarse.ue_angle,
            }
            best_snr = coarse.achieved_snr
            flags.append("refine_reverted")
        result = self._result(
            estimate["enodeb"], estimate["surface"], estimate["ue"],
            snr=best_snr, probes=probes, flags=flags,
        )
        result.probes_used = coarse.probes_used + probes
        return result

    def uplink_from_downlink(self, downlink: AlignmentResult) -> AlignmentResult:
        """Reciprocity: reuse the downlink angles with zero extra probes."""
        if not downlink.success:
            raise DomainError("uplink derivation requires a successful downlink")
        uplink_snr = self.channel.probe(
            downlink.enodeb_angle, downlink.surface_angle, downlink.ue_angle,
            deterministic=True,
        )
        if self.record_trace:
            self.trace.append({"event": "uplink_from_downlink", "snr_db": float(uplink_snr)})
        result = self._result(
            downlink.enodeb_angle, downlink.surface_angle, downlink.ue_angle,
            snr=uplink_snr, probes=0, flags=["uplink"],
        )
        return result

    def multiarm_search(
        self,
        surface_cb: np.ndarray,
        enodeb_beam: float,
        ue_beam: float,
        refine_levels: int = 2,
        refine_beams: int = 5,
    ) -> AlignmentResult:
        """Hierarchical bisection with two-armed region beams on the surface leg.

        Each stage illuminates the two halves of the candidate region with a
        two-armed widened beam, then disambiguates with the left half alone,
        so the bisection costs at most 2*ceil(log2(n_w)) probes before
        refinement.  With full transmit power on one covered half, the
        half containing the path reports several dB more than the split
        probe, which makes the comparison robust without narrow-beam
        sidelobe ambiguity.  A two-armed probe under the detection
        threshold falls back to the exhaustive sweep, flagged.
        """
        from .beam import natural_beamwidth_deg

        cb = np.sort(np.asarray(surface_cb, dtype=float))
        if cb.size < 2:
            raise DomainError("multiarm search needs at least two candidate beams")
        step = float(cb[1] - cb[0])
        # Stop splitting once halves would be unresolvable against the
        # surface's own beamwidth; refinement covers the remaining region.
        stop_width = 2.0 * natural_beamwidth_deg(self.channel.array)
        lo, hi = 0, cb.size - 1
        probes = 0
        flags: list[str] = []
        fallback = False
        last_snr = -math.inf          # best available estimate of the kept region's SNR
        overlap = 0.5 * stop_width     # arms overrun their halves by a beamwidth
        while hi - lo > 0 and float(cb[hi] - cb[lo]) > stop_width:
            mid = (lo + hi) // 2
            left = (
                float(cb[lo] + cb[mid]) / 2.0,
                float(cb[mid] - cb[lo]) + step + overlap,
            )
            right = (
                float(cb[mid + 1] + cb[hi]) / 2.0,
                float(cb[hi] - cb[mid + 1]) + step + overlap,
            )
            snr_both = self._probe(enodeb_beam, left[0], ue_beam, regions=[left, right])
            probes += 1
            if snr_both < self.detection_threshold_db:
                fallback = True
                flags.append("fallback_exhaustive")
                break
            snr_left = self._probe(enodeb_beam, left[0], ue_beam, regions=[left])
            probes += 1
            if snr_left > snr_both:
                lo, hi = lo, mid
                last_snr = snr_left
            else:
                lo, hi = mid + 1, hi
                last_snr = snr_both
        region_width = float(cb[hi] - cb[lo])
        if fallback:
            best = (-math.inf, float(cb[0]))
            for w in cb:
                snr = self._probe(enodeb_beam, w, ue_beam)
                probes += 1
                if snr > best[0]:
                    best = (snr, float(w))
            steer, last_snr = best[1], best[0]
            region_width = step
        else:
            steer = float(cb[lo] + cb[hi]) / 2.0
        coarse = self._result(enodeb_beam, steer, ue_beam, snr=last_snr, probes=probes, flags=flags)
        if last_snr < self.detection_threshold_db and not fallback:
            return coarse
        refined = self.refine_align(
            coarse, levels=refine_levels, beams=refine_beams,
            legs=("surface",),
            initial_span=2.0 * max(region_width + step, 2.0 * step),
            require_success=False,
        )
        refined.flags = sorted(set(refined.flags + flags))
        return refined
