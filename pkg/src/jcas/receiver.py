"""FMCW sensing receiver: dechirp mixing, code-domain SI cancellation,
range/Doppler processing, and the dual-window super-distance solve.

Mixer convention (used everywhere): beat = reference * conj(received).
A delay of d samples then lands on fast-time bin +d, and a physical
Doppler +f_D appears with flipped sign in slow time; the matched filter
steers with e^{+j 2 pi g_k nu / G} so +f_D still peaks at the bin whose
signed frequency is +f_D.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import fftconvolve

from .scheduler import Schedule, Scheme, grid_size, occasion_grid_indices, \
    unambiguous_band
from .waveform import ChirpSpec, Frame, WaveformConfig, assemble_frame, \
    make_base_set, make_chirp, make_code_matrix, make_sensing_waveforms, \
    unitary_dft


class WindowKind(str, Enum):
    STANDARD = "standard"   # symbol body, CP skipped
    SHIFTED = "shifted"     # starts N_CP earlier, covering the CP


@dataclass
class RdMatrix:
    """Range-Doppler map with axis metadata.

    ``values`` is (L x n_doppler) complex. Doppler columns are in FFT
    order; the signed bin of column c is c - n_doppler*(c >= n_doppler/2).
    ``grid_size`` is the full slow-time grid length G, which fixes the
    Doppler bin width 1/(G*T_chirp) even for band-restricted maps.
    """

    values: np.ndarray
    grid_size: int
    cfg: WaveformConfig
    tag: str = "single"
    far_offset: bool = False

    @property
    def n_doppler(self) -> int:
        return self.values.shape[1]

    def signed_bin(self, col: int) -> int:
        n = self.n_doppler
        return col - n if col >= n - n // 2 else col

    def range_m_of(self, d: int) -> float:
        from .util import SPEED_OF_LIGHT
        offset = self.cfg.l_occ if self.far_offset else 0
        return (d + offset) * SPEED_OF_LIGHT * self.cfg.t_s / 2

    def velocity_mps_of(self, col: int) -> float:
        freq = self.signed_bin(col) / (self.grid_size * self.cfg.t_chirp)
        return freq * self.cfg.wavelength_m / 2


def capture_windows(rx: np.ndarray, cfg: WaveformConfig, k: int,
                    kind: WindowKind) -> np.ndarray:
    """Per-symbol length-N receive windows, shape (K, N)."""
    s = cfg.symbol_len
    start = cfg.n_cp if kind is WindowKind.STANDARD else 0
    if len(rx) < (k - 1) * s + start + cfg.n_fft:
        raise ValueError("frame too short for the requested windows")
    offsets = np.arange(k) * s + start
    return rx[offsets[:, None] + np.arange(cfg.n_fft)[None, :]]


def mix(window: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Dechirp: reference times conjugated received window."""
    window = np.asarray(window)
    reference = np.asarray(reference)
    if window.shape[-1] != reference.shape[-1]:
        raise ValueError("window/reference length mismatch")
    return reference * np.conj(window)


def delay_and_sum(beat: np.ndarray, m: int) -> np.ndarray:
    """Fold the M length-L segments of the beat; data-SI cancels exactly."""
    n = beat.shape[-1]
    if n % m != 0:
        raise ValueError("beat length not divisible by M")
    return beat.reshape(*beat.shape[:-1], m, n // m).sum(axis=-2)


def fast_time_fft(y: np.ndarray) -> np.ndarray:
    """Unitary fast-time DFT; an echo at integer delay d peaks at bin d."""
    return unitary_dft(y)


def si_filter(y: np.ndarray, n_guard: int = 1) -> np.ndarray:
    """Fast-time DFT with the lowest bins notched out.

    The delay-and-sum output of the total SI is a constant vector, so an
    ideal DC notch (the discrete stand-in for the receiver's analog
    high-pass) removes it exactly. Returns the frequency-domain profile.
    """
    if n_guard < 1:
        raise ValueError("n_guard must be >= 1")
    if n_guard >= y.shape[-1]:
        raise ValueError("n_guard must be smaller than the profile length")
    prof = fast_time_fft(y)
    prof[..., :n_guard] = 0
    return prof


def slow_time_matched_filter(profiles: np.ndarray, grid_indices: np.ndarray,
                             n_grid: int, cfg: WaveformConfig,
                             tag: str = "single") -> RdMatrix:
    """Nonuniform slow-time matched filter across the occasion grid.

    RD[d, nu] = (1/K) sum_k profiles[k, d] * e^{+j 2 pi g_k nu / G}.
    """
    g = np.asarray(grid_indices)
    if len(np.unique(g)) != len(g):
        raise ValueError("duplicate grid indices")
    if profiles.shape[0] != len(g):
        raise ValueError("one profile per scheduled occasion required")
    steer = np.exp(2j * np.pi * np.outer(g, np.arange(n_grid)) / n_grid)
    rd = profiles.T @ steer / len(g)
    return RdMatrix(values=rd, grid_size=n_grid, cfg=cfg, tag=tag)


def _fsi_references(cfg: WaveformConfig, schedule: Schedule,
                    kind: WindowKind) -> np.ndarray:
    """Mixer references per symbol, (K, N).

    The shifted window sees the body cyclically advanced by N_CP, which
    by the code-shift identity turns code alpha into code
    (alpha + N_CP/L) mod M.
    """
    chirp = make_chirp(ChirpSpec.default(cfg), cfg.t_s)
    codes = make_code_matrix(cfg.m_codes)
    waves = make_sensing_waveforms(make_base_set(cfg, chirp), codes)
    shift = 0 if kind is WindowKind.STANDARD else cfg.cp_occasions
    rotate = schedule.scheme is Scheme.FSI_TAIL
    refs = np.empty((schedule.k, cfg.n_fft), dtype=complex)
    for k, a in enumerate(schedule.alpha):
        rho = np.exp(2j * np.pi * k / cfg.m_codes) if rotate else 1.0
        refs[k] = rho * waves.b[(a + shift) % cfg.m_codes]
    return refs


def process_sensing(rx: Frame, cfg: WaveformConfig, schedule: Schedule,
                    kind: WindowKind = WindowKind.STANDARD,
                    n_guard: int = 1) -> RdMatrix:
    """Full sensing chain from receive stream to range-Doppler map."""
    samples = rx.samples if isinstance(rx, Frame) else np.asarray(rx)
    g = occasion_grid_indices(schedule, cfg)
    n_grid = grid_size(schedule, cfg)

    if schedule.scheme.is_fsi:
        windows = capture_windows(samples, cfg, schedule.k, kind)
        refs = _fsi_references(cfg, schedule, kind)
        beat = mix(windows, refs)
        folded = delay_and_sum(beat, cfg.m_codes)
        profiles = si_filter(folded, n_guard)
    else:
        if kind is not WindowKind.STANDARD:
            raise ValueError("slotted schemes have a single window kind")
        chirp = make_chirp(ChirpSpec.default(cfg), cfg.t_s)
        l = cfg.l_occ
        if len(samples) < n_grid * l:
            raise ValueError("frame too short")
        slots = samples[g[:, None] * l + np.arange(l)[None, :]]
        beat = mix(slots, chirp)
        profiles = si_filter(beat, n_guard)

    return slow_time_matched_filter(profiles, g, n_grid, cfg,
                                    tag=kind.value if schedule.scheme.is_fsi else "single")


def extract_band(rd: RdMatrix, band: int) -> RdMatrix:
    """Restrict a full map to the scheme's unambiguous Doppler band.

    Keeps columns whose signed bin lies in [-band/2, band/2), re-indexed
    in FFT order of the band. The bin width is unchanged.
    """
    if band > rd.n_doppler:
        raise ValueError("band wider than the map")
    cols = [(((c + band // 2) % band) - band // 2) % rd.n_doppler
            for c in range(band)]
    return RdMatrix(values=rd.values[:, cols], grid_size=rd.grid_size,
                    cfg=rd.cfg, tag=rd.tag, far_offset=rd.far_offset)


# ---------------------------------------------------------------------------
# dual-window super-distance processing
# ---------------------------------------------------------------------------

@dataclass
class PatternTensor:
    """Calibrated near/far responses of both receive windows.

    ``p[d, c, w, h]`` is the complex RD value at cell (range bin d,
    band column c) produced by a unit-amplitude on-grid calibration echo
    of hypothesis h (0 = near, delay d; 1 = far, delay d + L) observed in
    window w (0 = standard, 1 = shifted). ``p_sol`` holds the per-cell
    2x2 inverses with rows normalized to unit norm. Cells whose 2x2 is
    ill-conditioned (or notched by the SI guard) are flagged unresolvable.
    """

    p: np.ndarray          # (L, band, 2, 2)
    p_sol: np.ndarray      # (L, band, 2, 2)
    cond: np.ndarray       # (L, band)
    resolvable: np.ndarray  # (L, band) bool
    band: int
    grid_size: int
    n_guard: int
    k: int
    validation_error: float | None = None


def _twisted_correlations(ref: np.ndarray, probe: np.ndarray, l_occ: int,
                          offset: int) -> np.ndarray:
    """corr[d] = sum_n ref[n] * conj(probe[offset + n - d]) * e^{-j2pi d n / L}
    for d = 0..L-1, via the chirp (Bluestein) factorization
    e^{-j2pi dn/L} = e^{-jpi d^2/L} e^{-jpi n^2/L} e^{+jpi (n-d)^2/L}.
    """
    n_len = len(ref)
    n = np.arange(n_len)
    a = ref * np.exp(-1j * np.pi * n * n / l_occ)
    m = np.arange(-(l_occ - 1), n_len)
    idx = offset + m
    b = np.zeros(len(m), dtype=complex)
    ok = (idx >= 0) & (idx < len(probe))
    b[ok] = np.conj(probe[idx[ok]])
    b *= np.exp(1j * np.pi * m * m / l_occ)
    conv = fftconvolve(a, b[::-1])
    d = np.arange(l_occ)
    return np.exp(-1j * np.pi * d * d / l_occ) * conv[n_len - 1 + d]


def build_pattern(cfg: WaveformConfig, schedule: Schedule, n_guard: int = 1,
                  cond_threshold: float = 1e6) -> PatternTensor:
    """Calibrate the 2x2 near/far response per (range bin, Doppler bin).

    Runs noiseless unit-amplitude calibration echoes through the exact
    receive chain. The tail schedule is strictly periodic, so every
    interior symbol contributes identically once the matched filter
    aligns it; a three-symbol zero-data frame therefore yields the exact
    K-symbol response as (z_boundary + (K-1) z_interior) / K. The heavy
    all-range-bins sweep collapses into one chirp-factorized correlation
    per (window, hypothesis, symbol, Doppler bin).
    """
    if schedule.scheme is not Scheme.FSI_TAIL:
        raise ValueError("pattern calibration applies to tail-mode schedules")
    m, l, s = cfg.m_codes, cfg.l_occ, cfg.symbol_len
    k_full = schedule.k
    n_grid = grid_size(schedule, cfg)
    band = unambiguous_band(schedule, cfg)
    period = m + cfg.cp_occasions

    cal_sched = Schedule(Scheme.FSI_TAIL, m, 3, alpha=(m - 1,) * 3)
    tx3 = assemble_frame(cfg, cal_sched).samples
    refs = {WindowKind.STANDARD: _fsi_references(cfg, cal_sched, WindowKind.STANDARD),
            WindowKind.SHIFTED: _fsi_references(cfg, cal_sched, WindowKind.SHIFTED)}
    g3 = occasion_grid_indices(cal_sched, cfg)

    d = np.arange(l)
    nfrm = np.arange(len(tx3))
    p = np.zeros((l, band, 2, 2), dtype=complex)
    for col in range(band):
        bs = col - band if col >= band - band // 2 else col
        f_b = bs / (n_grid * cfg.t_chirp)
        probe = tx3 * np.exp(2j * np.pi * f_b * nfrm * cfg.t_s)
        steer = np.exp(2j * np.pi * g3 * (bs % n_grid) / n_grid)
        for hyp in (0, 1):
            delta = d + hyp * l
            const = np.exp(-2j * np.pi * f_b * delta * cfg.t_s) / np.sqrt(l)
            for wi, kind in enumerate((WindowKind.STANDARD, WindowKind.SHIFTED)):
                start = cfg.n_cp if kind is WindowKind.STANDARD else 0
                z = []
                for k in range(3):
                    corr = _twisted_correlations(refs[kind][k], probe, l,
                                                 offset=k * s + start - hyp * l)
                    z.append(steer[k] * corr)
                interior_dev = np.max(np.abs(z[1] - z[2]))
                if interior_dev > 1e-6 * max(np.max(np.abs(z[1])), 1e-30):
                    raise RuntimeError("steady-state calibration assumption broken")
                p[:, col, wi, hyp] = const * (z[0] + (k_full - 1) * z[1]) / k_full

    cond = np.linalg.cond(p.reshape(-1, 2, 2)).reshape(l, band)
    resolvable = np.isfinite(cond) & (cond <= cond_threshold)
    resolvable[:n_guard, :] = False
    p_sol = np.zeros_like(p)
    ok = resolvable.reshape(-1)
    inv = np.linalg.inv(p.reshape(-1, 2, 2)[ok])
    inv /= np.linalg.norm(inv, axis=2, keepdims=True)
    p_sol.reshape(-1, 2, 2)[ok] = inv
    return PatternTensor(p=p, p_sol=p_sol, cond=cond, resolvable=resolvable,
                         band=band, grid_size=n_grid, n_guard=n_guard, k=k_full)


def pattern_cell_direct(cfg: WaveformConfig, schedule: Schedule, d_bin: int,
                        signed_bin: int, hyp: int,
                        n_guard: int = 1) -> np.ndarray:
    """Independent calibration of one pattern cell via the full pipeline.

    Synthesizes the complete K-symbol zero-data frame and an on-grid
    calibration echo, runs both windows through process_sensing, and
    reads the cell. Used to validate the fast calibration path.
    """
    from .channel import echo_component
    n_grid = grid_size(schedule, cfg)
    f_b = signed_bin / (n_grid * cfg.t_chirp)
    tx = assemble_frame(cfg, schedule)
    delta = d_bin + hyp * cfg.l_occ
    rx = Frame(samples=echo_component(tx.samples, delta, f_b, 1.0, cfg.t_s),
               scheme=tx.scheme, k=tx.k, cfg=cfg, rotated=tx.rotated)
    out = []
    for kind in (WindowKind.STANDARD, WindowKind.SHIFTED):
        rd = process_sensing(rx, cfg, schedule, kind, n_guard)
        out.append(rd.values[d_bin, signed_bin % n_grid])
    return np.array(out)


def validate_pattern(pat: PatternTensor, cfg: WaveformConfig,
                     schedule: Schedule, n_cells: int = 3,
                     rng: np.random.Generator | None = None,
                     tol: float = 1e-6) -> float:
    """Spot-check the fast calibration against the direct pipeline.

    Returns the worst relative deviation over the sampled cells and
    records it on the tensor.
    """
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for _ in range(n_cells):
        d_bin = int(rng.integers(pat.n_guard, cfg.l_occ))
        col = int(rng.integers(0, pat.band))
        hyp = int(rng.integers(0, 2))
        signed = col - pat.band if col >= pat.band - pat.band // 2 else col
        direct = pattern_cell_direct(cfg, schedule, d_bin, signed, hyp,
                                     pat.n_guard)
        fast = pat.p[d_bin, col, :, hyp]
        worst = max(worst, float(np.max(np.abs(direct - fast))
                                 / max(np.max(np.abs(direct)), 1e-30)))
    pat.validation_error = worst
    if worst > tol:
        raise RuntimeError(f"pattern validation failed: deviation {worst:.2e}")
    return worst


def solve_windows(rd_std: RdMatrix, rd_shift: RdMatrix, pat: PatternTensor
                  ) -> tuple[RdMatrix, RdMatrix]:
    """Disambiguate near/far returns by inverting the 2x2 per cell.

    Operates on the unambiguous band; unresolvable cells come out zero.
    The far map's range axis is offset by +L bins.
    """
    if rd_std.values.shape != rd_shift.values.shape:
        raise ValueError("window maps must have identical shapes")
    std_b = extract_band(rd_std, pat.band)
    shf_b = extract_band(rd_shift, pat.band)
    obs = np.stack([std_b.values, shf_b.values], axis=-1)
    out = np.einsum('dcij,dcj->dci', pat.p_sol, obs)
    out[~pat.resolvable] = 0
    near = RdMatrix(values=out[..., 0], grid_size=rd_std.grid_size,
                    cfg=rd_std.cfg, tag="near")
    far = RdMatrix(values=out[..., 1], grid_size=rd_std.grid_size,
                   cfg=rd_std.cfg, tag="far", far_offset=True)
    return near, far


def stack_solved(near: RdMatrix, far: RdMatrix) -> RdMatrix:
    """Concatenate the solved maps into one 2L-bin extended range axis."""
    if near.values.shape != far.values.shape:
        raise ValueError("near/far maps must have identical shapes")
    return RdMatrix(values=np.vstack([near.values, far.values]),
                    grid_size=near.grid_size, cfg=near.cfg, tag="combined")


def peak_cleanup(rd: RdMatrix, peaks, radius: int = 2) -> RdMatrix:
    """Zero the neighborhood of each detected peak, keeping the peak cell.

    Mops up the straddle shoulders that the per-cell 2x2 solve cannot
    combine for off-grid targets. ``peaks`` is a list of (d, col) cells
    or of Detection objects.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    vals = rd.values.copy()
    n_dop = rd.n_doppler
    for pk in peaks:
        d0, c0 = pk.cell if hasattr(pk, "cell") else pk
        keep = vals[d0, c0]
        lo, hi = max(0, d0 - radius), min(vals.shape[0], d0 + radius + 1)
        cols = [(c0 + t) % n_dop for t in range(-radius, radius + 1)]
        vals[lo:hi, cols] = 0
        vals[d0, c0] = keep
    return RdMatrix(values=vals, grid_size=rd.grid_size, cfg=rd.cfg,
                    tag=rd.tag, far_offset=rd.far_offset)


def quantize(v: np.ndarray, bits: int, full_scale: float) -> np.ndarray:
    """Uniform mid-rise quantizer on real and imaginary parts, clipped.

    Models the ADC: placed on the raw receive stream it demonstrates how
    un-cancelled SI eats the dynamic range; placed after delay-and-sum it
    models the analog-cancellation receiver.
    """
    if not 4 <= bits <= 16:
        raise ValueError("bits must be in [4, 16]")
    step = 2 * full_scale / (1 << bits)
    top = full_scale - step / 2

    def q(x):
        return np.clip((np.floor(x / step) + 0.5) * step, -top, top)

    return q(np.real(v)) + 1j * q(np.imag(v))
