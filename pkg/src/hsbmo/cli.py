"""Command-line driver: ``hsbmo {kernel,extend,norms,approx,verify}``.

Exit codes: 0 success, 1 criterion failure, 2 configuration error,
3 numerical fault.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import acceptance
from .approx import default_scale_ladder, mollifier_convergence, translation_test, vmo_approximation_run
from .calibration import Calibration, default_calibration_path, load_calibration, save_calibration
from .config import RunConfig, load_config
from .exceptions import CalibrationError, ConfigError, EllipticityError, NumericalFault
from .extension import extend
from .io import canonical_json, write_field, write_halfspace, write_json, write_manifest, write_rows_csv
from .kernels import (
    RESIDUAL_TOL,
    build_propagator,
    decay_constants,
    fd_pde_residual,
    homogeneity_error,
    kernel_field,
    normalization_error,
    semigroup_error,
)
from .seminorms import (
    bmo_norm,
    carleson_profile,
    fractional_carleson,
    holder_seminorm,
    morrey_campanato,
    osc_curve,
    vanishing_carleson_test,
)
from .squarefun import area_function, carleson_operator, molecule_check

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FAIL", "EXIT_CONFIG", "EXIT_NUMERIC"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Run:
    """Collects output files of one command and writes the manifest last."""

    def __init__(self, cfg: Optional[RunConfig], out: Path, command: str, calibration: Optional[Calibration] = None):
        self.cfg = cfg
        self.out = out
        self.command = command
        self.calibration = calibration
        self.files: List[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def stamp(self, doc: dict) -> dict:
        doc = dict(doc)
        doc["config_sha256"] = self.cfg.digest if self.cfg is not None else ""
        doc["calibration_sha256"] = self.calibration.digest if self.calibration is not None else None
        return doc

    def finish(self, extra: Optional[dict] = None) -> Path:
        meta = {"command": self.command}
        if self.cfg is not None:
            meta.update(grid=self.cfg.grid.to_dict(), system=self.cfg.system.describe(),
                        config_sha256=self.cfg.digest, seed=self.cfg.seed)
        if self.calibration is not None:
            meta["calibration_sha256"] = self.calibration.digest
        meta.update(extra or {})
        inputs = self.cfg.input_paths() if self.cfg is not None else []
        return write_manifest(self.out, meta, self.files, inputs)


def _optional_calibration(cfg: RunConfig) -> Optional[Calibration]:
    try:
        return load_calibration(cfg.calibration and cfg.base_dir / cfg.calibration)
    except CalibrationError:
        return None


# ---------------------------------------------------------------------------
# kernel


def cmd_kernel(cfg: RunConfig, out: Path) -> int:
    grid, system = cfg.grid, cfg.system
    prop = build_propagator(system, grid)
    opts = cfg.raw.get("kernel", {})
    times = [float(t) for t in opts.get("times", (grid.S / 32, grid.S / 16, grid.S / 8))]
    if not times or min(times) <= 0:
        raise cfg.error("kernel", "kernel times must be positive")
    run = _Run(cfg, out, "kernel")
    rows = []
    for i, t in enumerate(times):
        write_field(run.path(f"kernel_{i}.bin"), kernel_field(prop, t))
        dc = decay_constants(prop, t)
        rows.append({
            "t": t,
            "normalization_error": normalization_error(prop, t),
            "decay_C0": dc["C0"],
            "decay_C1": dc["C1"],
            "fd_pde_residual": fd_pde_residual(prop, t),
        })
    semigroup = [{"t1": a, "t2": b, "error": semigroup_error(prop, a, b)}
                 for a in times for b in times if a <= b]
    mol_t = float(opts.get("molecule_t", acceptance.molecule_time(grid)))
    mol = molecule_check(prop, mol_t)
    report = {
        "system": system.describe(),
        "grid": grid.to_dict(),
        "residual_ratio": prop.max_residual_ratio(),
        "residual_max": prop.info["residual_max"],
        # |R| / ((1 + |xi|^2) |A|), the scale-free residual
        "residual_relative_max": prop.max_residual_ratio() * RESIDUAL_TOL,
        "decay_rate": prop.decay_rate,
        "levels": rows,
        # one dilation check suffices: it rebuilds solvents on a rescaled grid
        "homogeneity": {"t": times[len(times) // 2],
                        "error": homogeneity_error(system, grid, times[len(times) // 2])},
        "semigroup": semigroup,
        "semigroup_max": max(r["error"] for r in semigroup),
        "molecule": {"t": mol_t, **mol},
    }
    write_json(run.path("kernel_report.json"), run.stamp(report))
    run.finish({"times": times})
    print(f"kernel: semigroup max {report['semigroup_max']:.3e}, relative residual {report['residual_relative_max']:.3e}, "
          f"molecule slope {mol['slope']:.3f} (expected {mol['expected_slope']:.3f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# extend


def cmd_extend(cfg: RunConfig, out: Path) -> int:
    f = cfg.load_field()
    prop = build_propagator(cfg.system, cfg.grid)
    u = extend(f, prop, cfg.t_levels(), with_gradient=True)
    run = _Run(cfg, out, "extend")
    write_halfspace(run.path("halfspace.bin"), u, include_gradient=True)
    run.finish({"levels": u.t_levels, "kappa": cfg.kappa})
    print(f"extend: {u.K} levels from t={u.t_levels[0]:.4g} to {u.t_levels[-1]:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# norms

DEFAULT_NORM_OPS = [{"op": "bmo_norm"}, {"op": "osc_curve"}, {"op": "carleson_norm"}, {"op": "carleson_profile"}]


def _norm_handlers(cfg: RunConfig, run: _Run, f, u_lazy: Callable) -> Dict[str, Callable]:
    grid = cfg.grid

    def _bmo(op):
        return bmo_norm(f, float(op.get("p", 1.0)))

    def _osc(op):
        c = osc_curve(f, float(op.get("p", 1.0)))
        write_rows_csv(run.path(op.get("file", "osc_curve.csv")), ["radius", "osc"], c.to_rows())
        return {"bmo": c.bmo, "vmo_verdict": c.vmo_verdict(float(op.get("threshold", 0.05)))}

    def _carleson(op):
        return carleson_profile(u_lazy(), op.get("channels")).norm

    def _profile(op):
        prof = carleson_profile(u_lazy(), op.get("channels"))
        write_rows_csv(run.path(op.get("file", "carleson_profile.csv")), ["radius", "carleson"], prof.to_rows())
        return prof.norm

    def _vanishing(op):
        res = vanishing_carleson_test(u_lazy(), float(op.get("threshold", 0.1)), float(op.get("persist", 0.5)),
                                      op.get("r_min"), op.get("channels"))
        return {"verdict": res.verdict, "ratio": res.ratio, "r_min": res.r_min}

    def _morrey(op):
        return morrey_campanato(f, float(op["eta"]), float(op.get("p", 1.0)))

    def _holder(op):
        return holder_seminorm(f, float(op["eta"]), seed=cfg.seed)

    def _fractional(op):
        return fractional_carleson(u_lazy(), float(op["eta"]), float(op.get("q", 2.0)), op.get("channels"))

    def _area(op):
        u = u_lazy()
        g = u.gradient[grid.d] * u.t_levels.reshape((-1,) + (1,) * (grid.d + 1))
        A = area_function(g, u.t_levels, grid, float(op.get("kappa", cfg.kappa)))
        write_field(run.path(op.get("file", "area_function.bin")), A)
        return float(np.abs(A.values).max())

    def _operator(op):
        u = u_lazy()
        g = u.gradient[grid.d] * u.t_levels.reshape((-1,) + (1,) * (grid.d + 1))
        C = carleson_operator(g, u.t_levels, grid)
        write_field(run.path(op.get("file", "carleson_operator.bin")), C)
        return float(np.abs(C.values).max())

    return {"bmo_norm": _bmo, "osc_curve": _osc, "carleson_norm": _carleson, "carleson_profile": _profile,
            "vanishing_carleson_test": _vanishing, "morrey_campanato": _morrey, "holder_seminorm": _holder,
            "fractional_carleson": _fractional, "area_function": _area, "carleson_operator": _operator}


def _ratio_entry(cfg: RunConfig, f, u_lazy, calibration: Optional[Calibration]) -> dict:
    bmo = bmo_norm(f, 1.0)
    car = carleson_profile(u_lazy()).norm
    degenerate = bmo == 0.0
    ratio = 0.0 if degenerate else car / bmo
    entry = {"bmo": bmo, "carleson": car, "ratio": ratio, "degenerate": degenerate, "band": None, "in_band": None}
    if calibration is not None and cfg.system.name in acceptance.SYSTEMS:
        try:
            lo, hi = calibration.band(cfg.grid.d, cfg.system.name, "carleson_bmo")
        except CalibrationError:
            return entry
        entry["band"] = [lo, hi]
        entry["in_band"] = bool(degenerate and car == 0.0) or bool(lo <= ratio <= hi)
    return entry


def _check_ops(cfg: RunConfig, ops, allowed):
    for op in ops:
        if op["op"] not in allowed:
            raise cfg.error("operations", f"operation {op['op']!r} does not belong to this command")


def cmd_norms(cfg: RunConfig, out: Path) -> int:
    f = cfg.load_field()
    calibration = _optional_calibration(cfg)
    run = _Run(cfg, out, "norms", calibration)
    cache = {}

    def u_lazy():
        if "u" not in cache:
            prop = build_propagator(cfg.system, cfg.grid)
            cache["u"] = extend(f, prop, cfg.t_levels(), with_gradient=True)
        return cache["u"]

    handlers = _norm_handlers(cfg, run, f, u_lazy)
    ops = [o for o in cfg.operations if o["op"] in handlers] or DEFAULT_NORM_OPS
    _check_ops(cfg, cfg.operations, set(handlers) | APPROX_OPS)
    results = []
    for op in ops:
        results.append({"op": op["op"], "params": {k: v for k, v in op.items() if k != "op"},
                        "value": handlers[op["op"]](op)})
    report = {"system": cfg.system.describe(), "grid": cfg.grid.to_dict(), "results": results,
              "ratio": _ratio_entry(cfg, f, u_lazy, calibration)}
    write_json(run.path("norms.json"), run.stamp(report))
    run.finish()
    r = report["ratio"]
    print(f"norms: bmo {r['bmo']:.4g}, carleson {r['carleson']:.4g}, ratio {r['ratio']:.4g}, in band: {r['in_band']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# approx

APPROX_OPS = {"vmo_approximation_run", "mollifier_convergence", "translation_test"}
DEFAULT_APPROX_OPS = [{"op": "vmo_approximation_run"}, {"op": "mollifier_convergence"}, {"op": "translation_test"}]


def cmd_approx(cfg: RunConfig, out: Path) -> int:
    f = cfg.load_field()
    grid = cfg.grid
    run = _Run(cfg, out, "approx")
    ops = [o for o in cfg.operations if o["op"] in APPROX_OPS] or DEFAULT_APPROX_OPS
    results = []
    for op in ops:
        name = op["op"]
        vanish, persist = float(op.get("vanish", 0.1)), float(op.get("persist", 0.5))
        if name == "vmo_approximation_run":
            prop = build_propagator(cfg.system, grid)
            eps = op.get("eps", acceptance.vertical_ladder(grid))
            table = vmo_approximation_run(f, prop, eps, op.get("etas", ()), float(op.get("p", 2.0)),
                                          vanish, persist, seed=cfg.seed or 0)
        elif name == "mollifier_convergence":
            table = mollifier_convergence(f, op.get("kernel", "gaussian"),
                                          op.get("t", default_scale_ladder(grid)), float(op.get("p", 2.0)),
                                          vanish, persist)
        else:
            table = translation_test(f, op.get("z"), float(op.get("p", 2.0)), vanish, persist)
        header = ["scale", "bmo_distance"] + sorted(table.columns)
        write_rows_csv(run.path(op.get("file", f"{name}.csv")), header, table.to_rows())
        vals = table.values
        results.append({"op": name, "verdict": table.verdict, "ratio": table.ratio,
                        "slope": table.slope() if np.all(vals > 0) else None,
                        "monotone": bool(np.all(np.diff(vals) >= -1e-12 * max(vals.max(), 1e-300)))})
    report = {"system": cfg.system.describe(), "grid": grid.to_dict(), "results": results}
    write_json(run.path("approx.json"), run.stamp(report))
    run.finish()
    for r in results:
        print(f"approx {r['op']}: verdict {r['verdict']}, ratio {r['ratio']:.4g}, monotone {r['monotone']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(cfg: Optional[RunConfig], out: Path, seed: int, filter_: Optional[str], calibrate: bool) -> int:
    dims = cfg.dims if cfg is not None else (1, 2)
    cal_path = (cfg.base_dir / cfg.calibration) if (cfg is not None and cfg.calibration) else default_calibration_path()
    if calibrate:
        t0 = time.perf_counter()
        cal = acceptance.calibrate(dims, seed, log=lambda s: print(s, flush=True))
        save_calibration(cal, cal_path)
        print(f"calibration written to {cal_path} ({time.perf_counter() - t0:.1f} s)")
    cal = load_calibration(cal_path)
    results = acceptance.run_suite(dims, filter_, seed, cal,
                                   on_result=lambda r: print(acceptance.format_line(r), flush=True))
    run = _Run(cfg, out, "verify", cal)
    doc = acceptance.report_document(results, seed, cal, cfg.digest if cfg is not None else "")
    write_json(run.path("report.json"), doc)
    run.finish({"dims": list(dims), "filter": filter_})
    failed = [r for r in results if not r.passed]
    print(f"verify: {len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsbmo", description="Half-space Poisson extension and BMO/Carleson functionals.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [("kernel", "build the propagator and report kernel properties"),
                       ("extend", "extend a boundary field to the half-space ladder"),
                       ("norms", "BMO, Carleson and related functionals of a field"),
                       ("approx", "VMO approximation, mollifier and translation tables"),
                       ("verify", "run the acceptance suite")]:
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, required=name != "verify", help="JSON run configuration")
        s.add_argument("--out", type=Path, default=Path("hsbmo_out"), help="output directory")
        s.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides the config)")
        if name == "verify":
            s.add_argument("--filter", default=None, help="criterion number, key or group (kernel, norms, ...)")
            s.add_argument("--calibrate", action="store_true", help="regenerate the calibration file first")
    return p


def _seed(args, cfg: Optional[RunConfig]) -> int:
    seed = args.seed if args.seed is not None else (cfg.seed if cfg is not None else None)
    seed = 0 if seed is None else seed
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return seed


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config is not None else None
        seed = _seed(args, cfg)
        if cfg is not None:
            cfg.seed = seed
        if args.command == "verify":
            return cmd_verify(cfg, args.out, seed, args.filter, args.calibrate)
        handler = {"kernel": cmd_kernel, "extend": cmd_extend, "norms": cmd_norms, "approx": cmd_approx}
        return handler[args.command](cfg, args.out)
    except (ConfigError, CalibrationError) as exc:
        print(f"hsbmo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EllipticityError as exc:
        print(f"hsbmo: error: system is not elliptic: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFault as exc:
        print(f"hsbmo: numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"hsbmo: error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
