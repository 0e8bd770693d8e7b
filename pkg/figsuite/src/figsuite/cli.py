"""figsuite render <figure> --runs <dirs> --out <path>

Figures: time-panels (per-run fields over the shared target), spectra
(log-scale field/target transforms vs omega/omega0), noise (residuals per
realization, optionally with a clean-vs-noisy response overlay).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import RunDataError, load_run
from .render import render_noise, render_spectra, render_time_panels


def _build_parser():
    p = argparse.ArgumentParser(prog="figsuite", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render a figure from run exports")
    r.add_argument("figure", choices=["time-panels", "spectra", "noise"])
    r.add_argument("--runs", nargs="+", required=True, type=Path,
                   help="run directories (primary pipeline exports)")
    r.add_argument("--out", required=True, type=Path,
                   help="output path; .png and .svg are written")
    r.add_argument("--noisy-run", type=Path,
                   help="run directory with the noisy response (noise figure)")
    r.add_argument("--no-rescale", action="store_true",
                   help="time panels: do not rescale fields for comparison")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        runs = [load_run(p) for p in args.runs]
        if args.figure == "time-panels":
            written = render_time_panels(runs, args.out, rescale=not args.no_rescale)
        elif args.figure == "spectra":
            written = render_spectra(runs, args.out)
        else:
            noisy = load_run(args.noisy_run) if args.noisy_run else None
            written = render_noise(runs, args.out, noisy_run=noisy)
    except (RunDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
