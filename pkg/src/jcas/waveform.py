"""Transmit-side waveform synthesis.

Builds chirps, the frequency-shifted tiled-chirp base set, the DFT-like
spreading code set, per-code sensing waveforms, and complete transmit frames
for both the slotted (time-division) schemes and the chirp-implanted OFDM
scheme.

Conventions used everywhere in this package:
  * all indices are 0-based,
  * DFTs are unitary (1/sqrt(size) both directions),
  * complex samples are numpy complex128.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scheduler import Schedule, Scheme


@dataclass(frozen=True)
class WaveformConfig:
    """All grid constants of the simulation.

    Attributes
    ----------
    n_fft : int
        OFDM FFT size (number of subcarriers).
    m_codes : int
        Number of spreading codes == chirp repetitions per symbol.
    n_cp : int
        Cyclic prefix length in samples. Must be a multiple of the
        occasion length so the slow-time occasion grid stays uniform.
    scs_hz : float
        Subcarrier spacing in Hz.
    carrier_hz : float
        RF carrier, used only for Doppler/velocity conversion.
    """

    n_fft: int = 2048
    m_codes: int = 4
    n_cp: int = 512
    scs_hz: float = 60e3
    carrier_hz: float = 60e9

    def __post_init__(self):
        if self.m_codes < 2:
            raise ValueError("m_codes must be >= 2")
        if self.n_fft % self.m_codes != 0:
            raise ValueError("n_fft must be divisible by m_codes")
        if self.n_cp % (self.n_fft // self.m_codes) != 0:
            raise ValueError("n_cp must be a multiple of the occasion length")
        if self.scs_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("scs_hz and carrier_hz must be positive")

    @property
    def l_occ(self) -> int:
        """Occasion (single chirp) length in samples."""
        return self.n_fft // self.m_codes

    @property
    def t_s(self) -> float:
        """Sample period in seconds."""
        return 1.0 / (self.n_fft * self.scs_hz)

    @property
    def b_hz(self) -> float:
        """Occupied bandwidth in Hz."""
        return self.n_fft * self.scs_hz

    @property
    def t_chirp(self) -> float:
        """Duration of one chirp / occasion in seconds."""
        return self.l_occ * self.t_s

    @property
    def cp_occasions(self) -> int:
        """How many occasions the cyclic prefix spans."""
        return self.n_cp // self.l_occ

    @property
    def symbol_len(self) -> int:
        """OFDM symbol length including CP, in samples."""
        return self.n_fft + self.n_cp

    @property
    def wavelength_m(self) -> float:
        from .util import SPEED_OF_LIGHT
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ChirpSpec:
    """Linear chirp parameters: start frequency, rate, and length in samples."""

    f0_hz: float
    kc_hz_per_s: float
    length: int

    @classmethod
    def default(cls, cfg: WaveformConfig) -> "ChirpSpec":
        """Full-band sweep from -B/2 to +B/2 over one occasion."""
        return cls(f0_hz=-cfg.b_hz / 2,
                   kc_hz_per_s=cfg.b_hz / cfg.t_chirp,
                   length=cfg.l_occ)


def unitary_dft(v: np.ndarray) -> np.ndarray:
    """Unitary DFT along the last axis (Parseval-preserving)."""
    v = np.asarray(v)
    if v.shape[-1] == 0:
        raise ValueError("empty input")
    return np.fft.fft(v, axis=-1) / np.sqrt(v.shape[-1])


def unitary_idft(v: np.ndarray) -> np.ndarray:
    """Unitary inverse DFT along the last axis."""
    v = np.asarray(v)
    if v.shape[-1] == 0:
        raise ValueError("empty input")
    return np.fft.ifft(v, axis=-1) * np.sqrt(v.shape[-1])


def make_chirp(spec: ChirpSpec, t_s: float) -> np.ndarray:
    """Complex baseband chirp exp(j2pi(f0*n*Ts + kc*(n*Ts)^2/2))."""
    n = np.arange(spec.length)
    phase = 2 * np.pi * (spec.f0_hz * n * t_s
                         + 0.5 * spec.kc_hz_per_s * (n * t_s) ** 2)
    return np.exp(1j * phase)


@dataclass(frozen=True)
class BaseSet:
    """M frequency-shifted copies of the M-fold tiled chirp.

    Row m occupies exactly the subcarriers congruent to m (mod M); the
    modulation ramps exp(j2pi*m*n/N) are regenerated, never stored.
    """

    rows: np.ndarray  # (M, N) complex, unit modulus everywhere


def make_base_set(cfg: WaveformConfig, chirp: np.ndarray) -> BaseSet:
    if len(chirp) != cfg.l_occ:
        raise ValueError(f"chirp length {len(chirp)} != occasion length {cfg.l_occ}")
    n = np.arange(cfg.n_fft)
    tiled = np.tile(chirp, cfg.m_codes)
    rows = np.stack([tiled * np.exp(2j * np.pi * m * n / cfg.n_fft)
                     for m in range(cfg.m_codes)])
    return BaseSet(rows=rows)


@dataclass(frozen=True)
class CodeMatrix:
    """Unitary spreading code set: DFT kernel with a half-bin phase ramp.

    u[m, k] = exp(-j2pi*m*k/M) * exp(-j*pi*k/M) / sqrt(M)

    The half-bin ramp is what time-localizes sensing waveform m at
    occasion m and yields the cyclic code-shift identity
    roll(b_m, L) == b_{(m+1) mod M}.
    """

    u: np.ndarray  # (M, M) complex, rows orthonormal

    @property
    def m(self) -> int:
        return self.u.shape[0]


def make_code_matrix(m: int) -> CodeMatrix:
    if m < 1:
        raise ValueError("need at least one code")
    mm, kk = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    u = np.exp(-2j * np.pi * mm * kk / m) * np.exp(-1j * np.pi * kk / m) / np.sqrt(m)
    return CodeMatrix(u=u)


@dataclass(frozen=True)
class SensingWaveforms:
    """Time-domain sensing waveforms b_m = sum_i u[m,i] * base_row_i."""

    b: np.ndarray  # (M, N) complex


def make_sensing_waveforms(base: BaseSet, codes: CodeMatrix) -> SensingWaveforms:
    if base.rows.shape[0] != codes.m:
        raise ValueError("base set and code matrix disagree on M")
    return SensingWaveforms(b=codes.u @ base.rows)


@dataclass(frozen=True)
class FreqGrid:
    """One OFDM symbol in the frequency domain.

    Subcarrier g*M + k (group g, in-group position k) holds
    sqrt(M)*P[g]*u[m,k] + sum_{i != m} d_i[g]*u[i,k].
    """

    s: np.ndarray  # (N,) complex
    sensing_code: int

    def groups(self, m_codes: int) -> np.ndarray:
        """View as (N/M groups) x (M in-group positions)."""
        return self.s.reshape(-1, m_codes)


def spread_and_assemble(cfg: WaveformConfig, sensing_code: int,
                        chirp_spectrum: np.ndarray, data: np.ndarray,
                        codes: CodeMatrix) -> FreqGrid:
    """Place the chirp on one code and data on the remaining M-1 codes.

    Parameters
    ----------
    chirp_spectrum : (L,) unitary L-point DFT of the chirp.
    data : (M-1, L) frequency-domain data, rows ordered by ascending
        code index skipping the sensing code. May be all zeros.
    """
    m = cfg.m_codes
    if not 0 <= sensing_code < m:
        raise ValueError("sensing code out of range")
    if len(chirp_spectrum) != cfg.l_occ:
        raise ValueError("chirp spectrum must have one entry per group")
    data = np.asarray(data, dtype=complex)
    if data.shape != (m - 1, cfg.l_occ):
        raise ValueError(f"data must be shaped ({m - 1}, {cfg.l_occ})")

    grid = np.sqrt(m) * chirp_spectrum[:, None] * codes.u[sensing_code][None, :]
    others = [i for i in range(m) if i != sensing_code]
    for row, i in enumerate(others):
        grid += data[row][:, None] * codes.u[i][None, :]
    return FreqGrid(s=grid.reshape(-1), sensing_code=sensing_code)


def assemble_symbol(grid: FreqGrid, cfg: WaveformConfig, symbol_index: int,
                    rotate: bool) -> np.ndarray:
    """IDFT, per-symbol rotation, and CP prepend. Returns N + N_CP samples."""
    body = unitary_idft(grid.s)
    rho = np.exp(2j * np.pi * symbol_index / cfg.m_codes) if rotate else 1.0
    body = rho * body
    return np.concatenate([body[-cfg.n_cp:], body]) if cfg.n_cp else body


@dataclass
class Frame:
    """Complex baseband sample stream plus layout metadata."""

    samples: np.ndarray
    scheme: Scheme
    k: int
    cfg: WaveformConfig
    rotated: bool = False

    def __len__(self):
        return len(self.samples)


def random_qpsk(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-power QPSK symbols for frame payloads (no bit bookkeeping)."""
    re = rng.integers(0, 2, size) * 2 - 1
    im = rng.integers(0, 2, size) * 2 - 1
    return (re + 1j * im) / np.sqrt(2)


def assemble_frame(cfg: WaveformConfig, schedule: Schedule,
                   payload: np.ndarray | None = None,
                   rng: np.random.Generator | None = None,
                   sensing_scale: float = 1.0) -> Frame:
    """Build the full transmit frame for any scheme.

    Chirp-implanted symbols carry the sensing chirp on code alpha_k and
    QPSK data on the other codes. Slotted schemes place a plain chirp in
    scheduled slots and CP-less length-L OFDM data symbols elsewhere
    (sensing-only fills every slot with the chirp).

    payload : optional pre-modulated data symbols; drawn from rng when
        omitted. Shape (K, M-1, L) for the implanted scheme, or
        (n_data_slots, L) for slotted schemes.
    sensing_scale : extra amplitude on the sensing term (default 1,
        i.e. the implanted chirp carries sqrt(M) per occupied subcarrier).
    """
    if schedule.m_codes != cfg.m_codes:
        raise ValueError("schedule and config disagree on M")
    chirp = make_chirp(ChirpSpec.default(cfg), cfg.t_s)
    scheme = schedule.scheme

    if scheme.is_fsi:
        codes = make_code_matrix(cfg.m_codes)
        spectrum = sensing_scale * unitary_dft(chirp)
        k_syms = schedule.k
        if payload is None:
            if rng is None:
                payload = np.zeros((k_syms, cfg.m_codes - 1, cfg.l_occ), dtype=complex)
            else:
                payload = random_qpsk(rng, (k_syms, cfg.m_codes - 1, cfg.l_occ))
        payload = np.asarray(payload, dtype=complex)
        if payload.shape != (k_syms, cfg.m_codes - 1, cfg.l_occ):
            raise ValueError("payload shape mismatch for implanted-OFDM frame")
        rotate = scheme is Scheme.FSI_TAIL
        out = np.empty(k_syms * cfg.symbol_len, dtype=complex)
        for k in range(k_syms):
            grid = spread_and_assemble(cfg, schedule.alpha[k], spectrum,
                                       payload[k], codes)
            out[k * cfg.symbol_len:(k + 1) * cfg.symbol_len] = \
                assemble_symbol(grid, cfg, k, rotate)
        return Frame(samples=out, scheme=scheme, k=k_syms, cfg=cfg, rotated=rotate)

    # slotted schemes: M*K slots of length L
    n_slots = cfg.m_codes * schedule.k
    scheduled = np.zeros(n_slots, dtype=bool)
    scheduled[list(schedule.slots)] = True
    n_data = int(n_slots - scheduled.sum())
    if payload is None:
        if rng is None or scheme is Scheme.SENSING_ONLY:
            payload = np.zeros((n_data, cfg.l_occ), dtype=complex)
        else:
            payload = random_qpsk(rng, (n_data, cfg.l_occ))
    payload = np.asarray(payload, dtype=complex)
    if payload.shape != (n_data, cfg.l_occ):
        raise ValueError("payload shape mismatch for slotted frame")

    out = np.empty(n_slots * cfg.l_occ, dtype=complex)
    di = 0
    for g in range(n_slots):
        if scheduled[g]:
            out[g * cfg.l_occ:(g + 1) * cfg.l_occ] = chirp
        else:
            out[g * cfg.l_occ:(g + 1) * cfg.l_occ] = unitary_idft(payload[di])
            di += 1
    return Frame(samples=out, scheme=scheme, k=schedule.k, cfg=cfg)
