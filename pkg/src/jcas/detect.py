"""Peak extraction from range-Doppler maps and scoring against truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .channel import Target, target_to_delay_doppler
from .receiver import RdMatrix
from .util import SPEED_OF_LIGHT, mps_to_kmh
from .waveform import WaveformConfig


@dataclass
class Detection:
    range_m: float
    velocity_kmh: float
    normalized_power: float       # |peak|^2 / |global max|^2
    cell: tuple[int, int]         # (range bin, doppler column)
    range_bin: int                # global range bin (far offset applied)
    doppler_bin: int              # signed doppler bin
    map_tag: str = "single"

    def to_dict(self) -> dict:
        return {"range_m": self.range_m, "velocity_kmh": self.velocity_kmh,
                "normalized_power": self.normalized_power,
                "cell": list(self.cell), "range_bin": self.range_bin,
                "doppler_bin": self.doppler_bin, "map_tag": self.map_tag}


def find_peaks(rd: RdMatrix, rel_threshold: float = 0.05,
               max_peaks: int | None = None, guard: int = 2
               ) -> list[Detection]:
    """Local maxima above a relative power threshold, strongest first.

    A cell is a peak when it dominates its (2*guard+1)^2 neighborhood
    (Doppler wraps, range clips) and its normalized power exceeds
    rel_threshold. Ties break toward lower range bin, then lower signed
    Doppler bin.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must be in (0, 1)")
    power = np.abs(rd.values) ** 2
    if power.size == 0:
        raise ValueError("empty matrix")
    peak_max = power.max()
    if peak_max == 0:
        return []
    size = 2 * guard + 1
    local_max = power >= maximum_filter(power, size=size,
                                        mode=("nearest", "wrap"))
    hits = np.argwhere(local_max & (power >= rel_threshold * peak_max))
    dets = []
    for d, c in hits:
        dets.append(Detection(
            range_m=rd.range_m_of(int(d)),
            velocity_kmh=mps_to_kmh(rd.velocity_mps_of(int(c))),
            normalized_power=float(power[d, c] / peak_max),
            cell=(int(d), int(c)),
            range_bin=int(d) + (rd.cfg.l_occ if rd.far_offset else 0),
            doppler_bin=rd.signed_bin(int(c)),
            map_tag=rd.tag))
    dets.sort(key=lambda p: (-p.normalized_power, p.range_bin, p.doppler_bin))
    return dets[:max_peaks] if max_peaks is not None else dets


def cell_to_physical(cell: tuple[int, int], cfg: WaveformConfig,
                     n_grid: int, far_offset: bool = False,
                     n_doppler: int | None = None) -> tuple[float, float]:
    """Map an RD cell to (range in m, velocity in km/h).

    The Doppler column wraps to a signed bin within n_doppler (defaults
    to the full grid); the bin width is always 1/(n_grid * T_chirp).
    """
    d, c = cell
    n_dop = n_doppler if n_doppler is not None else n_grid
    signed = c - n_dop if c >= n_dop - n_dop // 2 else c
    range_m = (d + (cfg.l_occ if far_offset else 0)) * SPEED_OF_LIGHT * cfg.t_s / 2
    freq = signed / (n_grid * cfg.t_chirp)
    return range_m, mps_to_kmh(freq * cfg.wavelength_m / 2)


def truth_cell(t: Target, cfg: WaveformConfig, n_grid: int
               ) -> tuple[int, int]:
    """Expected (global range bin, signed Doppler bin) for a target."""
    delay, doppler = target_to_delay_doppler(t, cfg.carrier_hz, cfg.t_s)
    return int(round(delay)), int(round(doppler * n_grid * cfg.t_chirp))


@dataclass
class EvalReport:
    matched: list[dict] = field(default_factory=list)
    misses: list[int] = field(default_factory=list)
    false_alarms: list[Detection] = field(default_factory=list)
    peak_to_interference_db: float | None = None

    def to_dict(self) -> dict:
        return {"matched": self.matched, "misses": self.misses,
                "false_alarms": [d.to_dict() for d in self.false_alarms],
                "peak_to_interference_db": self.peak_to_interference_db}


def _circ_dist(a: int, b: int, n: int) -> int:
    d = (a - b) % n
    return min(d, n - d)


def evaluate(dets: list[Detection], truth: list[Target], cfg: WaveformConfig,
             n_grid: int, tol_bins: tuple[int, int] = (1, 1),
             rd: RdMatrix | None = None) -> EvalReport:
    """Greedy nearest matching of detections to truth within a bin tolerance.

    Unmatched truths are misses; unmatched detections are false alarms.
    When the RD map is supplied, peak-to-interference compares the weakest
    matched peak against the strongest cell outside every truth
    neighborhood (tol_bins radius); otherwise the strongest unmatched
    detection stands in for the interference.
    """
    tol_d, tol_v = tol_bins
    cells = [truth_cell(t, cfg, n_grid) for t in truth]
    taken = [False] * len(truth)
    report = EvalReport()
    for det in sorted(dets, key=lambda p: -p.normalized_power):
        best, best_cost = None, None
        for i, (td, tv) in enumerate(cells):
            if taken[i]:
                continue
            dd = abs(det.range_bin - td)
            dv = _circ_dist(det.doppler_bin % n_grid, tv % n_grid, n_grid)
            if dd <= tol_d and dv <= tol_v:
                cost = (dd + dv, dd)
                if best_cost is None or cost < best_cost:
                    best, best_cost = i, cost
        if best is None:
            report.false_alarms.append(det)
        else:
            taken[best] = True
            td, tv = cells[best]
            report.matched.append({
                "truth_index": best, "detection": det.to_dict(),
                "range_bin_error": det.range_bin - td,
                "doppler_bin_error": _circ_dist(det.doppler_bin % n_grid,
                                                tv % n_grid, n_grid)})
    report.misses = [i for i, t in enumerate(taken) if not t]

    if rd is not None and report.matched:
        power = np.abs(rd.values) ** 2
        n_dop = rd.n_doppler
        offset = rd.cfg.l_occ if rd.far_offset else 0
        mask = np.ones_like(power, dtype=bool)
        peak_powers = []
        for i, (td, tv) in enumerate(cells):
            d0 = td - offset
            cols = [(tv + t) % n_dop for t in range(-tol_v, tol_v + 1)]
            lo, hi = max(0, d0 - tol_d), min(power.shape[0], d0 + tol_d + 1)
            if lo < hi:
                mask[lo:hi, cols] = False
                if i not in report.misses:
                    peak_powers.append(power[lo:hi, cols].max())
        interference = power[mask].max() if mask.any() else 0.0
        if peak_powers and interference > 0:
            report.peak_to_interference_db = float(
                10 * np.log10(min(peak_powers) / interference))
    elif report.matched and report.false_alarms:
        worst = max(fa.normalized_power for fa in report.false_alarms)
        best = min(m["detection"]["normalized_power"] for m in report.matched)
        report.peak_to_interference_db = float(10 * np.log10(best / worst))
    return report
