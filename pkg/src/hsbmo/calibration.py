"""Committed calibration bands for the constant-type acceptance checks.

The file maps ``"d|system|statistic"`` to ``[lower, upper]`` and carries a
sha256 of its own canonical content, so a hand-edited or truncated file
is rejected before any band is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Optional

from .exceptions import CalibrationError
from .io import canonical_json, sha256_bytes

__all__ = [
    "Calibration",
    "band_key",
    "default_calibration_path",
    "load_calibration",
    "save_calibration",
    "MARGIN",
]

MARGIN = 1.25
FORMAT_VERSION = 1


def band_key(d: int, system: str, statistic: str) -> str:
    return f"{int(d)}|{system}|{statistic}"


def default_calibration_path() -> Path:
    return Path(str(resources.files("hsbmo") / "data" / "calibration.json"))


@dataclass
class Calibration:
    bands: Dict[str, list] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    path: Optional[Path] = None

    def band(self, d: int, system: str, statistic: str):
        key = band_key(d, system, statistic)
        try:
            lo, hi = self.bands[key]
        except KeyError:
            raise CalibrationError(f"calibration has no band for {key!r}") from None
        return float(lo), float(hi)

    def contains(self, d: int, system: str, statistic: str, value: float) -> bool:
        lo, hi = self.band(d, system, statistic)
        return lo <= value <= hi

    def payload(self) -> dict:
        return {"version": FORMAT_VERSION, "margin": MARGIN, "bands": self.bands, "meta": self.meta}

    @property
    def digest(self) -> str:
        return sha256_bytes(canonical_json(self.payload()).encode())


def save_calibration(cal: Calibration, path=None) -> Path:
    path = Path(path) if path is not None else default_calibration_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = cal.payload()
    doc["sha256"] = cal.digest
    path.write_text(canonical_json(doc))
    cal.path = path
    return path


def load_calibration(path=None) -> Calibration:
    path = Path(path) if path is not None else default_calibration_path()
    if not path.exists():
        raise CalibrationError(f"calibration file {path} not found; run verify with --calibrate")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"{path}:{exc.lineno}: malformed calibration JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or "sha256" not in doc or "bands" not in doc:
        raise CalibrationError(f"{path}: missing bands or sha256")
    if doc.get("version") != FORMAT_VERSION:
        raise CalibrationError(f"{path}: unsupported calibration version {doc.get('version')!r}")
    cal = Calibration(dict(doc["bands"]), dict(doc.get("meta", {})), path)
    if cal.digest != doc["sha256"]:
        raise CalibrationError(f"{path}: sha256 mismatch (file {doc['sha256'][:12]}..., content {cal.digest[:12]}...)")
    for key, band in cal.bands.items():
        if (not isinstance(band, list) or len(band) != 2 or not all(isinstance(v, (int, float)) for v in band)
                or band[0] > band[1]):
            raise CalibrationError(f"{path}: band {key!r} is not an ordered [lower, upper] pair")
    return cal
