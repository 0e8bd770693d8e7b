"""Command-line entry points.

Subcommands: calibrate, target, track, verify-filter, noise, spectrum,
sweep.  Exit codes: 0 = completed with all configured bounds met,
2 = completed but a bound was exceeded, 1 = error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SdmError
from .noise import NoiseModel, contaminate_field, noise_study, write_noise_csv
from .potentials import EV_PER_HARTREE, calibrate_radius
from .scenarios import (
    ScenarioConfig,
    config_hash,
    generate_target,
    load_config,
    load_tracking_result,
    run_scenario,
    write_manifest,
)
from .signals import (
    fourier_spectrum,
    read_timeseries_csv,
    relative_distance,
    write_spectrum_csv,
)
from .states import init_state
from .tracking import verify_bandlimited


class _Parser(argparse.ArgumentParser):
    # spec'd exit codes: argparse's default usage-error code of 2 is
    # reserved for "bounds exceeded"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdm", description=__doc__)
    p.add_argument("--version", action="version", version=f"sdm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", type=Path, help="scenario config (JSON)")
        sp.add_argument("--out", type=Path, help="output directory override")
        sp.add_argument("--seed", type=int, help="override the scenario's seeds")
        sp.add_argument("--threads", type=int, default=1,
                        help="parallel workers for sweeps/noise realizations")

    sp = sub.add_parser("calibrate", help="fit the softening a^2 to an ionization potential")
    sp.add_argument("--z", type=float, default=1.0, help="effective charge")
    sp.add_argument("--ip", type=float, required=True, help="target ionization potential")
    sp.add_argument("--ip-ev", action="store_true", help="interpret --ip in eV")
    sp.add_argument("--out", type=Path, help="write the result as JSON here")

    sp = sub.add_parser("target", help="generate the target dipole signal")
    add_common(sp)

    sp = sub.add_parser("track", help="synthesize the tracking field for a scenario")
    add_common(sp)

    sp = sub.add_parser("verify-filter",
                        help="band-limit the stored field and re-simulate")
    add_common(sp)
    sp.add_argument("--cut-harmonic", type=float, default=23.0,
                    help="cutoff in units of the carrier frequency")
    sp.add_argument("--bound", type=float, default=1e-2,
                    help="filtered-residual bound for the exit code")

    sp = sub.add_parser("noise", help="multiplicative-noise robustness study")
    add_common(sp)
    sp.add_argument("--sigma", type=float, help="override the config's noise sigma")
    sp.add_argument("--realizations", type=int, help="override the realization count")

    sp = sub.add_parser("spectrum", help="export the spectrum of a series CSV")
    sp.add_argument("--in", dest="infile", type=Path, required=True)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--omega0", type=float, default=0.06)

    sp = sub.add_parser("sweep", help="re-run a scenario over a parameter sweep")
    add_common(sp)
    sp.add_argument("--param", choices=["dt"], default="dt")
    sp.add_argument("--values", required=True,
                    help="comma-separated values, e.g. 0.08,0.04,0.02")
    return p


def _load(args) -> ScenarioConfig:
    if args.config is None:
        raise SdmError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        doc = json.loads(json.dumps(cfg.raw))
        if doc.get("initial_state", {}).get("kind") == "normal-ensemble":
            doc["initial_state"]["seed"] = args.seed
        if "noise" in doc:
            doc["noise"]["seed"] = args.seed
        from .scenarios import parse_config

        cfg = parse_config(doc, name_hint=args.config.stem)
    return cfg


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    return Path(args.out) if args.out is not None else Path(cfg.output_dir)


def _ensure_tracked(cfg: ScenarioConfig, out_dir: Path):
    if (out_dir / "tracking.csv").exists():
        return load_tracking_result(out_dir, residual_bound=cfg.residual_bound)
    return run_scenario(cfg, out_dir)


def _noise_realization(payload):
    """Worker for parallel noise realizations (module-level for pickling)."""
    from .propagators import run_driven

    kind, state0, model, stepper_cfg, e_field, target, nm, r = payload
    noisy = contaminate_field(e_field, nm, r)
    rerun = run_driven(kind, state0, model, noisy, stepper_cfg)
    return r, relative_distance(rerun.y, target)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except SdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command

    if cmd == "calibrate":
        ip = args.ip / EV_PER_HARTREE if args.ip_ev else args.ip
        a2 = calibrate_radius(args.z, ip)
        print(f"a2 = {a2!r}  (z_e = {args.z}, ip = {ip!r} a.u.)")
        if args.out:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(json.dumps(
                {"z_e": args.z, "ip_au": ip, "a2": a2}, indent=2) + "\n")
        return 0

    if cmd == "spectrum":
        series = read_timeseries_csv(args.infile)
        write_spectrum_csv(fourier_spectrum(series), args.out, omega0=args.omega0)
        print(f"wrote {args.out}")
        return 0

    cfg = _load(args)
    out_dir = _out_dir(args, cfg)

    if cmd == "target":
        target = generate_target(cfg, out_dir=out_dir)
        write_manifest(out_dir, {
            "config_hash": config_hash(cfg.raw),
            "code_version": __version__,
            "command": "target",
            "samples": len(target),
            "dt": target.dt,
            "t_f": target.duration,
            "outputs": ["target.csv", "spectrum_target.csv"],
        })
        print(f"target written to {out_dir} ({len(target)} samples, "
              f"duration {target.duration:.6g} a.u.)")
        return 0

    if cmd == "track":
        result = run_scenario(cfg, out_dir)
        print(f"residual d2 = {result.residual:.6e} "
              f"(bound {cfg.residual_bound:.1e}) -> "
              f"{'ok' if result.success else 'bound exceeded'}")
        return 0 if result.success else 2

    if cmd == "verify-filter":
        result = _ensure_tracked(cfg, out_dir)
        omega_cut = args.cut_harmonic * cfg.target.omega0
        state0 = init_state(cfg.system, cfg.model, cfg.initial_state, cfg.grid)
        d2 = verify_bandlimited(result, cfg.system, state0, cfg.model,
                                cfg.stepper_config(), omega_cut)
        payload = {
            "omega_cut": omega_cut,
            "cut_harmonic": args.cut_harmonic,
            "d2_unfiltered": result.residual,
            "d2_filtered": d2,
            "bound": args.bound,
        }
        (out_dir / "verify_filter.json").write_text(json.dumps(payload, indent=2) + "\n")
        print(f"d2 filtered at {args.cut_harmonic} w0: {d2:.6e} "
              f"(unfiltered {result.residual:.6e})")
        return 0 if d2 <= args.bound else 2

    if cmd == "noise":
        if cfg.noise_sigma is None and args.sigma is None:
            raise SdmError("scenario has no noise block; pass --sigma")
        sigma = args.sigma if args.sigma is not None else cfg.noise_sigma
        realizations = (args.realizations if args.realizations is not None
                        else cfg.noise_realizations)
        nm = NoiseModel(sigma=sigma, seed=cfg.noise_seed, realizations=realizations)
        result = _ensure_tracked(cfg, out_dir)
        state0 = init_state(cfg.system, cfg.model, cfg.initial_state, cfg.grid)
        if args.threads > 1:
            payloads = [(cfg.system, state0, cfg.model, cfg.stepper_config(),
                         result.e_field, result.target, nm, r)
                        for r in range(nm.realizations)]
            d2 = np.full(nm.realizations, np.nan)
            with concurrent.futures.ProcessPoolExecutor(args.threads) as ex:
                for r, value in ex.map(_noise_realization, payloads):
                    d2[r] = value
            from .noise import NoiseStudyResult

            study = NoiseStudyResult(sigma=sigma, seed=nm.seed, d2_values=d2,
                                     d2_noise_free=result.residual)
        else:
            study = noise_study(cfg.system, state0, cfg.model, cfg.stepper_config(),
                                result, nm)
        write_noise_csv(study, out_dir / "noise_d2.csv")
        print(f"sigma={sigma}: mean d2 = {study.mean:.6e} over "
              f"{nm.realizations} realizations "
              f"(noise-free {study.d2_noise_free:.6e})")
        return 0

    if cmd == "sweep":
        values = [float(v) for v in args.values.split(",")]
        doc0 = cfg.raw
        rows = []
        from .scenarios import parse_config

        def one(value: float):
            doc = json.loads(json.dumps(doc0))
            doc["numerics"]["dt"] = value
            sub_cfg = parse_config(doc, name_hint=f"{cfg.name}-dt-{value}")
            sub_dir = out_dir / f"dt_{value:g}"
            res = run_scenario(sub_cfg, sub_dir)
            return value, res.residual, res.success

        if args.threads > 1:
            with concurrent.futures.ProcessPoolExecutor(args.threads) as ex:
                rows = list(ex.map(one, values))
        else:
            rows = [one(v) for v in values]
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "sweep.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "value", "residual_d2", "success"])
            for value, residual, ok in rows:
                w.writerow([args.param, repr(value), repr(residual), ok])
        print(f"{'dt':>10} {'residual d2':>14} ok")
        for value, residual, ok in rows:
            print(f"{value:10g} {residual:14.6e} {ok}")
        return 0 if all(ok for _, _, ok in rows) else 2

    raise SdmError(f"unhandled command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
