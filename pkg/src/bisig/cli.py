"""Command-line front end.

Subcommands:

* ``simulate-md``   synthesize slow-time cubes for one or more bistatic angles
* ``process-md``    run the micro-Doppler chain on cube files, export CSVs
* ``simulate-vna``  synthesize the DUT+background / background sweep pair
* ``process-refl``  calibrate, subtract, gate and normalize sweep files
* ``verify``        run the built-in verification suite and print the report

Exit codes: 0 success, 2 configuration error, 3 numerical or validation
failure.  The only environment variable honored is ``BISIG_THREADS``,
which caps the BLAS thread count (set before numpy initializes its
backend for full effect).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import SPEED_OF_LIGHT, __version__
from .config import ConfigError, RunConfig, default_config_dict, load_config, parse_config
from .geometry import bistatic_angle, bistatic_bisector, micro_doppler_spread
from .io import (
    load_cube,
    load_sweep,
    read_system_response_csv,
    save_cube,
    save_sweep,
    write_lines_csv,
    write_map_csv,
    write_spectrogram_csv,
    write_spectrum_csv,
    write_system_response_csv,
)
from .mdproc import (
    detect_lines,
    doppler_spectrum,
    estimate_channel,
    measure_spread,
    range_profile,
    slow_time_extract,
    spectrogram,
)
from .reflproc import GateSpec, auto_gate, background_subtract, calibrate, reflectivity_map
from .scene import rotate_target_about_z
from .simulate import default_system_response, flyover_sweep, simulate_slow_time, simulate_vna_sweep
from .verify import format_report, run_verification
from .waveform import build_reference

_EXIT_CONFIG = 2
_EXIT_NUMERIC = 3


def _apply_thread_env() -> None:
    threads = os.environ.get("BISIG_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = parse_config(default_config_dict())
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "symbols", None) is not None:
        if args.symbols < 1:
            raise ConfigError("--symbols: must be >= 1")
        cfg.n_symbols = args.symbols
    if getattr(args, "subsample", None) is not None:
        if args.subsample < 1:
            raise ConfigError("--subsample: must be >= 1")
        cfg.processing.subsample_factor = args.subsample
    if getattr(args, "beta_list", None):
        try:
            betas = tuple(float(b) for b in args.beta_list.split(","))
        except ValueError:
            raise ConfigError("--beta-list: expected comma-separated angles in degrees") from None
        for b in betas:
            if not 0.0 < b <= 180.0:
                raise ConfigError(f"--beta-list: angle {b} outside (0, 180]")
        cfg.beta_list_deg = betas
        if cfg.scenario == "micro-doppler":
            cfg.scenario = "flyover"
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _file_header(cfg: RunConfig) -> dict[str, str]:
    return {"config_sha256": cfg.sha256(), "seed": str(cfg.seed)}


def _write_sidecar(path: Path, cfg: RunConfig, payload: dict) -> None:
    payload = dict(payload)
    payload["tool_version"] = __version__
    payload["config_sha256"] = cfg.sha256()
    with open(path, "w") as f:
        yaml.safe_dump(payload, f, sort_keys=True)


def _ground_truth(cfg: RunConfig, beta_deg: float) -> dict:
    """Scene ground truth and closed-form predictions for one geometry."""
    geom = cfg.md_geometry(beta_deg)
    beta = bistatic_angle(geom)
    wavelength = SPEED_OF_LIGHT / cfg.ofdm.center_freq_hz
    bisector = bistatic_bisector(geom)
    propellers = []
    spreads = []
    for p in cfg.scene.propellers:
        cos_theta = float(np.clip(np.dot(p.rotation_axis, bisector), -1.0, 1.0))
        theta = math.acos(cos_theta)
        spread = micro_doppler_spread(p.omega, p.radius_m, beta, theta, wavelength)
        spreads.append(spread)
        propellers.append(
            {
                "n_blades": p.n_blades,
                "f_rot_hz": p.f_rot_hz,
                "radius_m": p.radius_m,
                "theta_rad": theta,
                "predicted_spacing_hz": p.n_blades * p.f_rot_hz,
                "predicted_spread_hz": spread,
                "predicted_max_doppler_hz": spread / 2.0,
            }
        )
    return {
        "beta_deg": beta_deg,
        "tx_pos_m": [float(v) for v in geom.tx_pos],
        "rx_pos_m": [float(v) for v in geom.rx_pos],
        "target_pos_m": [float(v) for v in geom.target_pos],
        "wavelength_m": wavelength,
        "n_symbols": cfg.n_symbols,
        "noise_sigma": cfg.noise_sigma,
        "seed": cfg.seed,
        "propellers": propellers,
        "predicted_spread_hz": max(spreads, default=0.0),
    }


def _cube_stem(beta_deg: float) -> str:
    return f"cube_beta{beta_deg:06.2f}"


def cmd_simulate_md(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    betas = cfg.beta_list_deg if cfg.scenario == "flyover" else (cfg.beta_deg,)
    for beta_deg in betas:
        geom = cfg.md_geometry(beta_deg)
        cube = simulate_slow_time(cfg.scene, geom, cfg.ofdm, cfg.n_symbols, noise=cfg.noise())
        stem = _cube_stem(beta_deg)
        save_cube(out / f"{stem}.stc", cube)
        _write_sidecar(out / f"{stem}.yaml", cfg, _ground_truth(cfg, beta_deg))
        print(f"wrote {out / (stem + '.stc')} ({cube.n_symbols} symbols)")
    return 0


def _read_sidecar(cube_path: Path) -> dict:
    sidecar = cube_path.with_suffix(".yaml")
    if sidecar.exists():
        with open(sidecar) as f:
            return yaml.safe_load(f) or {}
    return {}


def cmd_process_md(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    pr = cfg.processing
    summary_rows = []
    for cube_path in map(Path, args.cubes):
        cube = load_cube(cube_path)
        truth = _read_sidecar(cube_path)
        ref = build_reference(cube.config)
        est = estimate_channel(cube, ref)
        bins, rbin = range_profile(est)
        predicted = truth.get("predicted_spread_hz")
        profile = slow_time_extract(
            est, rbin, subsample=pr.subsample_factor, expected_spread_hz=predicted
        )
        n_fft = pr.n_fft if pr.n_fft else len(profile.samples)
        spec = doppler_spectrum(profile, n_fft=n_fft, window=pr.line_window)
        lines = detect_lines(
            spec, threshold_db_above_noise=pr.line_threshold_db, line_rel_db=pr.line_rel_db
        )
        # a spread estimate is only meaningful once the line comb is resolved
        spread = (
            measure_spread(
                spec,
                noise_floor_percentile=pr.noise_floor_percentile,
                margin_db=pr.spread_margin_db,
                line_rel_db=pr.line_rel_db,
            )
            if lines.resolved
            else float("nan")
        )
        frame_len = min(pr.spectrogram_frame_len, len(profile.samples))
        overlap = min(pr.spectrogram_overlap, frame_len - 1)
        sgram = spectrogram(profile, frame_len, overlap, window=pr.spectrogram_window)

        stem = cube_path.stem
        header = _file_header(cfg)
        header["source_cube"] = cube_path.name
        header["range_bin"] = str(rbin)
        write_spectrum_csv(out / f"{stem}_spectrum.csv", spec, header)
        write_spectrogram_csv(out / f"{stem}_spectrogram.csv", sgram, header)
        write_lines_csv(out / f"{stem}_lines.csv", lines, header)

        beta_deg = truth.get("beta_deg", float("nan"))
        summary_rows.append(
            {
                "cube": cube_path.name,
                "beta_deg": beta_deg,
                "resolved": lines.resolved,
                "spacing_hz": lines.spacing_hz,
                "spread_hz": spread,
                "predicted_spread_hz": predicted if predicted is not None else float("nan"),
                "range_bin": rbin,
            }
        )
        if lines.resolved:
            print(f"{cube_path.name}: bin {rbin}, spacing {lines.spacing_hz:.2f} Hz, "
                  f"spread {spread:.1f} Hz")
        else:
            print(f"{cube_path.name}: bin {rbin}, unresolved")

    with open(out / "spreads.csv", "w") as f:
        f.write(f"# tool: bisig {__version__}\n# config_sha256: {cfg.sha256()}\n")
        f.write("cube,beta_deg,resolved,spacing_hz,spread_hz,predicted_spread_hz,range_bin\n")
        for row in summary_rows:
            f.write(
                f"{row['cube']},{row['beta_deg']:.9g},{str(row['resolved']).lower()},"
                f"{row['spacing_hz']:.9g},{row['spread_hz']:.9g},"
                f"{row['predicted_spread_hz']:.9g},{row['range_bin']}\n"
            )
    return 0


def cmd_simulate_vna(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    vna = cfg.vna
    freqs = vna.freqs_hz()
    betas = vna.betas_deg()
    geometries = flyover_sweep(betas, range_m=vna.range_m)
    scene = rotate_target_about_z(cfg.scene, math.radians(vna.turntable_deg))
    response = default_system_response(freqs) if vna.system_ripple else np.ones(len(freqs), dtype=complex)
    dut, bg = simulate_vna_sweep(scene, geometries, freqs, response, noise=cfg.noise())
    save_sweep(out / "vna_dut_bg.swp", dut)
    save_sweep(out / "vna_bg.swp", bg)
    write_system_response_csv(out / "system_response.csv", freqs, response, _file_header(cfg))
    _write_sidecar(
        out / "vna_sidecar.yaml",
        cfg,
        {
            "n_freq": len(freqs),
            "freq_start_hz": float(freqs[0]),
            "freq_stop_hz": float(freqs[-1]),
            "betas_deg": [float(b) for b in betas],
            "turntable_deg": vna.turntable_deg,
            "range_m": vna.range_m,
            "seed": cfg.seed,
            "noise_sigma": cfg.noise_sigma,
        },
    )
    print(f"wrote {out / 'vna_dut_bg.swp'} and {out / 'vna_bg.swp'} "
          f"({len(freqs)} freqs x {len(betas)} angles x 4 pols)")
    return 0


def cmd_process_refl(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    base = Path(args.dut).parent if args.dut else out
    dut_path = Path(args.dut) if args.dut else base / "vna_dut_bg.swp"
    bg_path = Path(args.bg) if args.bg else base / "vna_bg.swp"
    resp_path = Path(args.response) if args.response else base / "system_response.csv"

    dut = load_sweep(dut_path)
    bg = load_sweep(bg_path)
    freqs, response = read_system_response_csv(resp_path)
    if len(freqs) != len(dut.freqs_hz) or not np.allclose(freqs, dut.freqs_hz):
        raise ValueError("system response grid does not match the sweep grid")

    target = background_subtract(calibrate(dut, response), calibrate(bg, response))
    gp = cfg.gate
    if args.gate_center is not None:
        gate = GateSpec(center_s=args.gate_center, width_s=args.gate_width or gp.width_s,
                        taper_fraction=gp.taper_fraction)
    elif gp.auto:
        gate = auto_gate(target, args.gate_width or gp.width_s, gp.taper_fraction)
    else:
        gate = GateSpec(center_s=gp.center_s, width_s=args.gate_width or gp.width_s,
                        taper_fraction=gp.taper_fraction)
    rmap = reflectivity_map(target, gate=gate)

    header = _file_header(cfg)
    header["gate_center_s"] = f"{gate.center_s:.6g}"
    header["gate_width_s"] = f"{gate.width_s:.6g}"
    write_map_csv(out / "reflectivity_map.csv", rmap, header)
    print(f"wrote {out / 'reflectivity_map.csv'} (gate center {gate.center_s:.3e} s)")
    return 0


def cmd_verify(args) -> int:
    report = run_verification(seed=args.seed if args.seed is not None else 0)
    text = format_report(report)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.txt").write_text(text)
    return 0 if report.all_passed else _EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisig",
        description="Bistatic reflectivity and micro-Doppler simulation/processing toolkit",
    )
    parser.add_argument("--version", action="version", version=f"bisig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=True):
        p.add_argument("--config", help="YAML run configuration (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="override the configured RNG seed")
        if out_default:
            p.add_argument("--out", help="output directory (overrides config out_dir)")

    p = sub.add_parser("simulate-md", help="simulate slow-time cubes")
    common(p)
    p.add_argument("--symbols", type=int, help="number of symbols to simulate")
    p.add_argument("--beta-list", help="comma-separated bistatic angles in degrees")
    p.set_defaults(func=cmd_simulate_md)

    p = sub.add_parser("process-md", help="process slow-time cubes")
    common(p)
    p.add_argument("--subsample", type=int, help="slow-time decimation factor")
    p.add_argument("cubes", nargs="+", help="cube files from simulate-md")
    p.set_defaults(func=cmd_process_md)

    p = sub.add_parser("simulate-vna", help="simulate the VNA sweep pair")
    common(p)
    p.set_defaults(func=cmd_simulate_vna)

    p = sub.add_parser("process-refl", help="run the reflectivity chain on sweep files")
    common(p)
    p.add_argument("--dut", help="DUT+background sweep file")
    p.add_argument("--bg", help="background sweep file")
    p.add_argument("--response", help="system response CSV")
    p.add_argument("--gate-center", type=float, help="gate center in seconds (disables auto gate)")
    p.add_argument("--gate-width", type=float, help="gate width in seconds")
    p.set_defaults(func=cmd_process_refl)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--seed", type=int, help="seed stamped into the verification run")
    p.add_argument("--out", help="directory to write verify_report.txt")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
