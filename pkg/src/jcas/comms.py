"""Communications side of the chirp-implanted OFDM link.

Data rides on the M-1 spreading codes the sensing chirp does not use;
(M-1)/M of the resource elements therefore carry payload. The receiver
despreads each group of M consecutive subcarriers with the code
conjugates, which separates data from the implanted chirp exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scheduler import Schedule
from .waveform import CodeMatrix, FreqGrid, WaveformConfig, assemble_frame, \
    make_code_matrix, unitary_dft

QPSK_SCALE = 1 / np.sqrt(2)


@dataclass(frozen=True)
class CommsLink:
    """Flat known-gain link parameters for a loopback measurement."""

    cfg: WaveformConfig
    gain: complex = 1.0
    snr_db: float | None = None   # Es/N0 on despread data symbols; None = noiseless

    @property
    def bits_per_symbol(self) -> int:
        return 2 * (self.cfg.m_codes - 1) * self.cfg.l_occ


def modulate(bits: np.ndarray) -> np.ndarray:
    """Gray-coded QPSK, unit average power. 00 -> (1+j)/sqrt(2)."""
    bits = np.asarray(bits).ravel()
    if bits.size % 2:
        raise ValueError("bit count must be even")
    b = bits.reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) * QPSK_SCALE


def demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision QPSK demapping (inverse of modulate, noiselessly)."""
    s = np.asarray(symbols).ravel()
    bits = np.empty((s.size, 2), dtype=np.int64)
    bits[:, 0] = (s.real < 0).astype(np.int64)
    bits[:, 1] = (s.imag < 0).astype(np.int64)
    return bits.ravel()


def despread(grid: np.ndarray | FreqGrid, codes: CodeMatrix,
             sensing_code: int) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Per-group code-domain despreading of one received symbol spectrum.

    Returns ({code i != m: estimates d_i of length N/M}, sensing-spectrum
    estimate), where the sensing estimate equals sqrt(M) times the chirp
    spectrum for a clean symbol.
    """
    s = grid.s if isinstance(grid, FreqGrid) else np.asarray(grid)
    m = codes.m
    groups = s.reshape(-1, m)
    est = groups @ np.conj(codes.u.T)   # column i: inner products with u_i
    data = {i: est[:, i] for i in range(m) if i != sensing_code}
    return data, est[:, sensing_code]


def run_link(cfg: WaveformConfig, schedule: Schedule, bits: np.ndarray,
             gain: complex = 1.0, snr_db: float | None = None,
             rng: np.random.Generator | None = None
             ) -> tuple[float, float]:
    """Loopback BER/EVM through a flat known-gain channel.

    Transmit frame -> gain + AWGN -> CP removal -> DFT -> single-tap
    equalization with the known gain -> despread -> demodulate.
    snr_db is Es/N0 per despread data symbol (noise is white in time, so
    the per-subcarrier variance equals the per-sample variance).
    """
    bits = np.asarray(bits).ravel()
    m, l = cfg.m_codes, cfg.l_occ
    per_symbol = 2 * (m - 1) * l
    if bits.size % per_symbol:
        raise ValueError("bit count must fill whole symbols")
    k = bits.size // per_symbol
    if k != schedule.k:
        raise ValueError("payload does not match the schedule length")

    payload = modulate(bits).reshape(k, m - 1, l)
    tx = assemble_frame(cfg, schedule, payload=payload)
    rx = gain * tx.samples
    if snr_db is not None:
        if rng is None:
            raise ValueError("noise requires a random source")
        sigma2 = abs(gain) ** 2 * 10 ** (-snr_db / 10)
        rx = rx + rng.normal(0, np.sqrt(sigma2 / 2), rx.shape) \
            + 1j * rng.normal(0, np.sqrt(sigma2 / 2), rx.shape)

    codes = make_code_matrix(m)
    rotate = tx.rotated
    err = 0
    evm_num = 0.0
    s_len = cfg.symbol_len
    for ks in range(k):
        body = rx[ks * s_len + cfg.n_cp:(ks + 1) * s_len]
        spec = unitary_dft(body) / gain
        if rotate:
            spec = spec * np.exp(-2j * np.pi * ks / m)
        data, _ = despread(spec, codes, schedule.alpha[ks])
        sent = payload[ks]
        others = [i for i in range(m) if i != schedule.alpha[ks]]
        for row, i in enumerate(others):
            est = data[i]
            err += int(np.count_nonzero(demodulate(est) != demodulate(sent[row])))
            evm_num += float(np.sum(np.abs(est - sent[row]) ** 2))
    n_data = k * (m - 1) * l
    ber = err / (2 * n_data)
    evm = np.sqrt(evm_num / n_data)   # reference power is 1
    return ber, evm


def qpsk_ber_awgn(snr_db: float) -> float:
    """Analytic Gray-QPSK bit error rate at Es/N0 = snr_db (AWGN)."""
    from math import erfc, sqrt
    es_n0 = 10 ** (snr_db / 10)
    return 0.5 * erfc(sqrt(es_n0 / 2))
