"""Scenario configuration, experiment orchestration, and artifact output.

Verbs:
    simulate <scenario.json>   run one scenario, write RD artifacts + report
    preset fig6|fig7           run the bundled reproduction scenarios
    calibrate <scenario.json>  build and cache the dual-window pattern
    selftest                   run the invariant suite

Exit codes: 0 success, 1 selftest failure, 2 scenario validation error,
3 unresolvable pattern bins.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import struct
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import comms, detect, receiver
from .channel import ChannelConfig, Target, synthesize_rx
from .scheduler import Schedule, Scheme, grid_size, make_schedule, \
    unambiguous_band
from .util import kmh_to_mps, substream
from .waveform import WaveformConfig, assemble_frame

MAGIC = b"RDMX"
FORMAT_VERSION = 1


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    """One fully-resolved simulation run (paper defaults baked in)."""

    scheme: str = "rtd"
    k: int | None = None              # defaults: 80 slotted, 64 implanted
    n_fft: int = 2048
    m_codes: int = 4
    n_cp: int = 512
    scs_hz: float = 60e3
    carrier_hz: float = 60e9
    targets: list = field(default_factory=list)   # dicts: range_m, velocity_kmh, amplitude
    si_over_echo_db: float = 100.0
    echo_snr_db: float = -10.0
    si_enabled: bool = True
    noise_enabled: bool = True
    fractional_delay: bool = False
    rel_threshold: float = 0.05
    guard: int = 2
    max_peaks: int | None = None
    n_guard: int = 1
    peak_cleanup: bool = False
    cleanup_radius: int = 2
    comms_enabled: bool = False
    comms_snr_db: float | None = None
    rtd_one_per_group: bool = False
    seed: int = 2026
    tag: str | None = None

    def __post_init__(self):
        try:
            self.scheme_enum = Scheme(self.scheme)
        except ValueError:
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        if self.k is None:
            self.k = 64 if self.scheme_enum.is_fsi else 80
        if self.k < 1:
            raise ScenarioError("k must be >= 1")
        for t in self.targets:
            if not isinstance(t, dict) or "range_m" not in t \
                    or "velocity_kmh" not in t:
                raise ScenarioError("each target needs range_m and velocity_kmh")
        try:
            self.waveform_config()
        except ValueError as e:
            raise ScenarioError(str(e))

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("scheme_enum", None)
        return d

    def waveform_config(self) -> WaveformConfig:
        return WaveformConfig(n_fft=self.n_fft, m_codes=self.m_codes,
                              n_cp=self.n_cp, scs_hz=self.scs_hz,
                              carrier_hz=self.carrier_hz)

    def target_list(self) -> list[Target]:
        return [Target(range_m=float(t["range_m"]),
                       velocity_mps=kmh_to_mps(float(t["velocity_kmh"])),
                       amplitude=float(t.get("amplitude", 1.0)))
                for t in self.targets]

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(si_over_echo_db=self.si_over_echo_db,
                             echo_snr_db=self.echo_snr_db,
                             si_enabled=self.si_enabled,
                             noise_enabled=self.noise_enabled,
                             fractional_delay=self.fractional_delay)


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as f:
        return Scenario.from_dict(json.load(f))


# ---------------------------------------------------------------------------
# artifact IO
# ---------------------------------------------------------------------------

def write_rd_binary(path: Path, rd: receiver.RdMatrix) -> None:
    """RDMX format: magic, u16 version, u32 rows, u32 cols, row-major
    little-endian complex float64."""
    rows, cols = rd.values.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HII", FORMAT_VERSION, rows, cols))
        f.write(np.ascontiguousarray(rd.values, dtype="<c16").tobytes())


def read_rd_binary(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError("not an RDMX file")
        version, rows, cols = struct.unpack("<HII", f.read(10))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported RDMX version {version}")
        data = np.frombuffer(f.read(), dtype="<c16")
    return data.reshape(rows, cols)


def write_rd_csv(path: Path, rd: receiver.RdMatrix) -> None:
    """Normalized magnitude, one row of the RD matrix per line."""
    mag = np.abs(rd.values)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    with open(path, "w") as f:
        for row in mag:
            f.write(",".join(f"{v:.7e}" for v in row) + "\n")


def pattern_cache_key(scn: Scenario) -> str:
    rel = {k: getattr(scn, k) for k in
           ("n_fft", "m_codes", "n_cp", "scs_hz", "carrier_hz", "k",
            "n_guard", "scheme")}
    return hashlib.sha256(json.dumps(rel, sort_keys=True).encode()).hexdigest()[:16]


def cache_dir() -> Path:
    d = os.environ.get("JCAS_CACHE_DIR")
    if d:
        return Path(d)
    return Path.home() / ".cache" / "jcas"


def load_or_build_pattern(scn: Scenario, schedule: Schedule,
                          validate: bool = False) -> receiver.PatternTensor:
    cfg = scn.waveform_config()
    key = pattern_cache_key(scn)
    path = cache_dir() / f"pattern_{key}.npz"
    if path.exists():
        z = np.load(path)
        return receiver.PatternTensor(
            p=z["p"], p_sol=z["p_sol"], cond=z["cond"],
            resolvable=z["resolvable"], band=int(z["band"]),
            grid_size=int(z["grid_size"]), n_guard=int(z["n_guard"]),
            k=int(z["k"]),
            validation_error=float(z["validation_error"]) if z["validation_error"] >= 0 else None)
    pat = receiver.build_pattern(cfg, schedule, n_guard=scn.n_guard)
    if validate:
        receiver.validate_pattern(pat, cfg, schedule)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, p=pat.p, p_sol=pat.p_sol, cond=pat.cond,
             resolvable=pat.resolvable, band=pat.band,
             grid_size=pat.grid_size, n_guard=pat.n_guard, k=pat.k,
             validation_error=pat.validation_error
             if pat.validation_error is not None else -1.0)
    return pat


# ---------------------------------------------------------------------------
# simulation runner
# ---------------------------------------------------------------------------

def run_simulate(scn: Scenario, out_dir: str | Path) -> dict:
    """Run one scenario end to end; writes artifacts, returns the report."""
    t_start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = scn.waveform_config()
    scheme = scn.scheme_enum
    tag = scn.tag or scheme.value

    schedule = make_schedule(scheme, cfg.m_codes, scn.k,
                             rng=substream(scn.seed, f"{tag}/schedule"),
                             one_per_group=scn.rtd_one_per_group,
                             seed=scn.seed)
    tx = assemble_frame(cfg, schedule, rng=substream(scn.seed, f"{tag}/payload"))
    rx = synthesize_rx(tx, scn.target_list(), scn.channel_config(), cfg,
                       rng=substream(scn.seed, f"{tag}/noise"))

    n_grid = grid_size(schedule, cfg)
    band = unambiguous_band(schedule, cfg)
    maps: dict[str, receiver.RdMatrix] = {}
    flagged_bins = 0

    rd = receiver.process_sensing(rx, cfg, schedule,
                                  receiver.WindowKind.STANDARD, scn.n_guard)
    if scheme is Scheme.FSI_TAIL:
        rd_shift = receiver.process_sensing(rx, cfg, schedule,
                                            receiver.WindowKind.SHIFTED,
                                            scn.n_guard)
        pat = load_or_build_pattern(scn, schedule)
        flagged_bins = int((~pat.resolvable[scn.n_guard:]).sum())
        maps["std"] = receiver.extract_band(rd, band)
        maps["shift"] = receiver.extract_band(rd_shift, band)
        if scn.peak_cleanup:
            solve_in = []
            for name in ("std", "shift"):
                peaks = detect.find_peaks(maps[name], scn.rel_threshold,
                                          scn.max_peaks, scn.guard)
                solve_in.append(receiver.peak_cleanup(maps[name], peaks,
                                                      scn.cleanup_radius))
            near, far = receiver.solve_windows(solve_in[0], solve_in[1], pat)
        else:
            near, far = receiver.solve_windows(maps["std"], maps["shift"], pat)
        maps["near"], maps["far"] = near, far
        # present the solved pair on one extended range axis;
        # detect on the stacked map so both share a single normalization
        maps["combined"] = receiver.stack_solved(near, far)
        detect_maps = ["combined"]
    else:
        maps["single"] = receiver.extract_band(rd, band) if band else rd
        maps["single"].tag = "single"
        detect_maps = ["single"]

    detections = {}
    evals = {}
    truths = scn.target_list()
    for name in detect_maps:
        dets = detect.find_peaks(maps[name], scn.rel_threshold,
                                 scn.max_peaks, scn.guard)
        detections[name] = dets
        evals[name] = detect.evaluate(dets, truths, cfg, n_grid,
                                      rd=maps[name])

    ber = evm = None
    if scn.comms_enabled and scheme.is_fsi:
        link_bits = substream(scn.seed, f"{tag}/bits").integers(
            0, 2, 2 * (cfg.m_codes - 1) * cfg.l_occ * scn.k)
        ber, evm = comms.run_link(cfg, schedule, link_bits, gain=1.0,
                                  snr_db=scn.comms_snr_db,
                                  rng=substream(scn.seed, f"{tag}/comms-noise"))

    for name, m in maps.items():
        stem = f"rd_{name}" if len(maps) > 1 else f"rd_{tag}"
        write_rd_binary(out / f"{stem}.bin", m)
        write_rd_csv(out / f"{stem}.csv", m)

    report = {
        "scenario": scn.to_dict(),
        "schedule": schedule.to_dict(),
        "grid_size": n_grid,
        "unambiguous_band": band,
        "detections": {k: [d.to_dict() for d in v] for k, v in detections.items()},
        "evaluation": {k: v.to_dict() for k, v in evals.items()},
        "ber": ber,
        "evm": evm,
        "flagged_pattern_bins": flagged_bins,
        "elapsed_s": time.perf_counter() - t_start,
    }
    with open(out / f"report_{tag}.json", "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    return report


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

FIG6_TARGETS = [{"range_m": 200.0, "velocity_kmh": -250.0},
                {"range_m": 400.0, "velocity_kmh": 500.0}]
FIG7_TARGETS = [{"range_m": 100.0, "velocity_kmh": 100.0},
                {"range_m": 900.0, "velocity_kmh": -100.0}]
FIG7_OFFGRID_TARGETS = [{"range_m": 400.0, "velocity_kmh": 100.0},
                        {"range_m": 500.0, "velocity_kmh": 100.0}]


def preset_scenarios(name: str, seed: int = 2026) -> list[Scenario]:
    if name == "fig6":
        return [Scenario(scheme=s, targets=list(FIG6_TARGETS), seed=seed)
                for s in ("sensing_only", "periodic_td", "rtd", "fsi_random")]
    if name == "fig7":
        return [Scenario(scheme="fsi_tail", targets=list(FIG7_TARGETS),
                         seed=seed)]
    if name == "fig7_offgrid":
        return [Scenario(scheme="fsi_tail", targets=list(FIG7_OFFGRID_TARGETS),
                         peak_cleanup=True, seed=seed)]
    raise ScenarioError(f"unknown preset {name!r}")


def run_preset(name: str, out_dir: str | Path, seed: int = 2026,
               threads: int = 1) -> list[dict]:
    scns = preset_scenarios(name, seed)
    if threads > 1 and len(scns) > 1:
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(lambda s: run_simulate(s, out_dir), scns))
    else:
        reports = [run_simulate(s, out_dir) for s in scns]
    summary = {
        "preset": name,
        "runs": [{"scheme": r["scenario"]["scheme"],
                  "detections": r["detections"],
                  "evaluation": r["evaluation"]} for r in reports],
    }
    with open(Path(out_dir) / f"report_{name}.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return reports


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def run_selftest(inject_fault: str | None = None) -> int:
    """Quick invariant sweep across the modules; returns failure count."""
    from . import selftest
    checks = selftest.all_checks(inject_fault)
    failures = 0
    for name, fn in checks:
        try:
            fn()
            print(f"PASS {name}")
        except Exception as e:
            failures += 1
            print(f"FAIL {name}: {e}")
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return failures


def run_calibrate(scn: Scenario) -> Path:
    if scn.scheme_enum is not Scheme.FSI_TAIL:
        raise ScenarioError("calibration applies to the fsi_tail scheme")
    schedule = make_schedule(scn.scheme_enum, scn.m_codes, scn.k, seed=scn.seed)
    pat = load_or_build_pattern(scn, schedule, validate=True)
    n_bad = int((~pat.resolvable[scn.n_guard:]).sum())
    key = pattern_cache_key(scn)
    path = cache_dir() / f"pattern_{key}.npz"
    print(f"pattern cached at {path}")
    print(f"validation error: {pat.validation_error}")
    if n_bad:
        print(f"unresolvable bins: {n_bad}")
    return path


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="jcas",
                                 description="Joint communications and sensing simulator")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the scenario seed")
    ap.add_argument("--out-dir", default="out", help="artifact directory")
    ap.add_argument("--threads", type=int, default=1,
                    help="parallel runs inside a preset")
    sub = ap.add_subparsers(dest="verb", required=True)
    p_sim = sub.add_parser("simulate", help="run one scenario file")
    p_sim.add_argument("scenario")
    p_pre = sub.add_parser("preset", help="run a bundled reproduction")
    p_pre.add_argument("name", choices=["fig6", "fig7", "fig7_offgrid"])
    p_cal = sub.add_parser("calibrate", help="build the dual-window pattern cache")
    p_cal.add_argument("scenario")
    p_self = sub.add_parser("selftest", help="run the invariant suite")
    p_self.add_argument("--inject-fault", default=None,
                        help="test hook: corrupt a named invariant")
    args = ap.parse_args(argv)

    try:
        if args.verb == "simulate":
            scn = load_scenario(args.scenario)
            if args.seed is not None:
                scn.seed = args.seed
            report = run_simulate(scn, args.out_dir)
            if report["flagged_pattern_bins"]:
                return 3
            return 0
        if args.verb == "preset":
            reports = run_preset(args.name, args.out_dir,
                                 seed=args.seed if args.seed is not None else 2026,
                                 threads=args.threads)
            if any(r["flagged_pattern_bins"] for r in reports):
                return 3
            return 0
        if args.verb == "calibrate":
            scn = load_scenario(args.scenario)
            if args.seed is not None:
                scn.seed = args.seed
            run_calibrate(scn)
            return 0
        if args.verb == "selftest":
            return 1 if run_selftest(args.inject_fault) else 0
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
