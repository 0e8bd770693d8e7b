"""Figures from tracking-run CSV exports (read-only, reproducible)."""

from .io import RunData, RunDataError, load_run
from .render import render_noise, render_spectra, render_time_panels

__version__ = "0.1.0"
