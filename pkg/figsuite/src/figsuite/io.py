"""Read-only access to tracking-run export directories.

A run directory is the primary pipeline's CSV/JSON product: tracking.csv
(`t,E,y,Y,abs_err`), field.csv / target.csv (`t,value`), spectrum_*.csv
(`omega_over_omega0,abs_amplitude`), manifest.json, and optionally
noise_d2.csv (`realization,d2`) with its JSON summary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class RunDataError(ValueError):
    """A run directory is missing files or columns."""


def _load_csv(path: Path, expected: list[str]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise RunDataError(f"{path} is missing")
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    missing = [c for c in expected if c not in header]
    if missing:
        raise RunDataError(f"{path} lacks column(s) {missing}; found {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise RunDataError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(header)}


@dataclass(frozen=True)
class RunData:
    path: Path
    name: str
    config_hash: str
    tracking: dict = field(repr=False)
    spectrum_field: dict | None = field(default=None, repr=False)
    spectrum_response: dict | None = field(default=None, repr=False)
    spectrum_target: dict | None = field(default=None, repr=False)
    noise_d2: dict | None = field(default=None, repr=False)
    noise_summary: dict | None = None

    @property
    def t(self) -> np.ndarray:
        return self.tracking["t"]


def load_run(path) -> RunData:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise RunDataError(f"{manifest_path} is missing")
    manifest = json.loads(manifest_path.read_text())
    tracking = _load_csv(path / "tracking.csv", ["t", "E", "y", "Y", "abs_err"])

    def optional(name, cols):
        p = path / name
        return _load_csv(p, cols) if p.exists() else None

    noise_summary = None
    summary_path = path / "noise_d2.json"
    if summary_path.exists():
        noise_summary = json.loads(summary_path.read_text())

    return RunData(
        path=path,
        name=str(manifest.get("scenario", path.name)),
        config_hash=str(manifest.get("config_hash", "")),
        tracking=tracking,
        spectrum_field=optional("spectrum_field.csv",
                                ["omega_over_omega0", "abs_amplitude"]),
        spectrum_response=optional("spectrum_response.csv",
                                   ["omega_over_omega0", "abs_amplitude"]),
        spectrum_target=optional("spectrum_target.csv",
                                 ["omega_over_omega0", "abs_amplitude"]),
        noise_d2=optional("noise_d2.csv", ["realization", "d2"]),
        noise_summary=noise_summary,
    )
