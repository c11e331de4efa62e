"""Run configuration: parsing and validation of the JSON config file."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import ConfigError, EllipticityError
from .extension import default_ladder
from .grid import GENERATORS, BoundaryGrid, generate, geometric_ladder, make_grid
from .io import canonical_json, read_field, read_field_csv, sha256_bytes
from .kernels import SYSTEMS, EllipticSystem, named_system, system_from_coefficients

__all__ = ["RunConfig", "load_config", "parse_config", "OPERATIONS"]

OPERATIONS = {
    "bmo_norm", "osc_curve", "carleson_norm", "carleson_profile", "vanishing_carleson_test",
    "morrey_campanato", "holder_seminorm", "fractional_carleson", "area_function", "carleson_operator",
    "vmo_approximation_run", "mollifier_convergence", "translation_test",
}


def _line_of(text: str, key: str) -> int:
    """1-based line of the first occurrence of ``"key"`` in the raw text (0 if absent)."""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 0


@dataclass
class RunConfig:
    grid: BoundaryGrid
    system: EllipticSystem
    raw: dict
    source: str = "<dict>"
    text: str = ""
    kappa: float = 1.0
    ladder: Optional[np.ndarray] = None
    operations: list = field(default_factory=list)
    seed: Optional[int] = None
    calibration: Optional[str] = None
    field_spec: Optional[dict] = None
    dims: tuple = (1, 2)
    base_dir: Path = Path(".")

    @property
    def digest(self) -> str:
        return sha256_bytes(canonical_json(self.raw).encode())

    def t_levels(self) -> np.ndarray:
        return self.ladder if self.ladder is not None else default_ladder(self.grid)

    def input_paths(self) -> list:
        if self.field_spec and "path" in self.field_spec:
            return [self.base_dir / self.field_spec["path"]]
        return []

    def load_field(self):
        fs = self.field_spec
        if fs is None:
            raise self.error("field", "this command needs a 'field' entry")
        if "path" in fs:
            path = self.base_dir / fs["path"]
            f = read_field_csv(path, self.grid) if str(path).endswith(".csv") else read_field(path)
            if f.grid != self.grid:
                raise self.error("field", f"field file grid {f.grid.to_dict()} differs from config grid")
            return f
        params = dict(fs.get("params", {}))
        params.setdefault("M", self.system.M)
        return generate(fs["generator"], params, self.grid, self.seed or 0)

    def error(self, key: str, msg: str) -> ConfigError:
        line = _line_of(self.text, key)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {msg}")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})") from None
    return parse_config(raw, source=str(path), text=text, base_dir=path.parent)


def parse_config(raw: dict, source: str = "<dict>", text: str = "", base_dir=Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    text = text or json.dumps(raw, indent=1)

    def err(key, msg):
        line = _line_of(text, key)
        return ConfigError(f"{source}:{line}: {msg}" if line else f"{source}: {msg}")

    g = raw.get("grid")
    if not isinstance(g, dict):
        raise err("grid", "missing 'grid' object with d, N, h")
    try:
        grid = make_grid(int(g["d"]), int(g["N"]), float(g["h"]))
    except KeyError as exc:
        raise err("grid", f"grid is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise err("grid", f"invalid grid: {exc}") from None

    s = raw.get("system", {"name": "laplacian"})
    if not isinstance(s, dict):
        raise err("system", "'system' must be an object")
    try:
        if "coeff" in s:
            coeff = np.asarray(s["coeff"], dtype=complex) if not isinstance(s["coeff"], dict) else (
                np.asarray(s["coeff"]["re"]) + 1j * np.asarray(s["coeff"]["im"]))
            system = system_from_coefficients(coeff)
        else:
            name = s.get("name")
            if name not in SYSTEMS:
                raise err("system", f"unknown system {name!r}; expected one of {sorted(SYSTEMS)}")
            system = named_system(name, grid.n, **s.get("params", {}))
    except ConfigError:
        raise
    except EllipticityError as exc:
        raise err("system", f"system is not elliptic: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise err("system", f"invalid system: {exc}") from None
    if system.n != grid.n:
        raise err("system", f"system acts in n={system.n} but the grid has n={grid.n}")

    kappa = raw.get("kappa", 1.0)
    if not isinstance(kappa, (int, float)) or not kappa > 0:
        raise err("kappa", "kappa must be a positive number")

    ladder = None
    if "ladder" in raw:
        lad = raw["ladder"]
        try:
            if isinstance(lad, list):
                ladder = np.asarray(lad, float)
                if ladder.ndim != 1 or ladder.size == 0 or np.any(np.diff(ladder) <= 0) or ladder[0] <= 0:
                    raise ValueError("explicit ladder must be positive and increasing")
            else:
                ladder = geometric_ladder(float(lad.get("t_min", grid.h / 2)), float(lad.get("ratio", 2 ** 0.25)),
                                          float(lad.get("t_max", grid.S)))
        except (TypeError, ValueError, AttributeError) as exc:
            raise err("ladder", f"invalid ladder: {exc}") from None

    seed = raw.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64):
        raise err("seed", "seed must be an unsigned 64-bit integer")

    field_spec = raw.get("field")
    if field_spec is not None:
        if not isinstance(field_spec, dict) or ("generator" not in field_spec and "path" not in field_spec):
            raise err("field", "'field' needs either 'generator' or 'path'")
        if "generator" in field_spec and field_spec["generator"] not in GENERATORS:
            raise err("field", f"unknown generator {field_spec['generator']!r}; expected one of {sorted(GENERATORS)}")

    ops = raw.get("operations", [])
    if not isinstance(ops, list):
        raise err("operations", "'operations' must be a list")
    randomized, where = False, "operations"
    for op in ops:
        name = op.get("op") if isinstance(op, dict) else None
        if name not in OPERATIONS:
            raise err("operations", f"unknown operation {name!r}; expected one of {sorted(OPERATIONS)}")
        randomized |= name in ("holder_seminorm",) or (name == "vmo_approximation_run" and op.get("etas"))
    if field_spec and field_spec.get("generator") == "lacunary_bmo":
        randomized, where = True, "field"
    if randomized and seed is None:
        raise err(where, "a seed is required when randomized sampling is requested")

    dims = raw.get("dims", [1, 2])
    if not isinstance(dims, list) or not dims or any(d not in (1, 2) for d in dims):
        raise err("dims", "dims must be a non-empty list drawn from [1, 2]")

    return RunConfig(grid=grid, system=system, raw=raw, source=source, text=text, kappa=float(kappa),
                     ladder=ladder, operations=ops, seed=seed, calibration=raw.get("calibration"),
                     field_spec=field_spec, dims=tuple(dims), base_dir=Path(base_dir))
