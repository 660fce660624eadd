"""Command-line front end: build or load a part, evolve it, export model and support.

Exit codes: 0 printable, 1 configuration or I/O error, 2 stopped on the step
or time cap (artifacts still written), 3 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import plotting
from .cases import CASES, REPRODUCE_CASES, SHAPES
from .evolution import EvolveConfig, NumericalInstabilityError, StopReason, run
from .grid import GridSpec, ScalarField, make_field
from .mesh import MeshParseError, read_mesh, write_obj, write_stl, write_svg
from .mesh_sdf import WatertightError, mesh_to_sdf
from .printability import SpeedParams, surface_printable
from .reinit import NoSurfaceError, reinitialize
from .surface import NoCrossingError, naive_projection_support, split_support
from .vtk import write_vtk

log = logging.getLogger("overhang_forge")

SCHEMA_VERSION = 1
DEFAULT_SNAPSHOT_EVERY = 25
BOX_MARGIN = 0.15
THREADS_ENV = "OVERHANG_FORGE_THREADS"

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    shape: Optional[str] = None
    mesh: Optional[str] = None
    counts: Optional[tuple[int, ...]] = None
    box: Optional[tuple[float, ...]] = None
    A: float = 1.0
    B: float = 0.5
    alpha_deg: float = 45.0
    z_min: Optional[float] = None
    cfl: float = 0.5
    max_steps: int = 20000
    t_final_cap: float = math.inf
    reinit_every: int = 20
    check_every: int = 1
    snapshots: Optional[str] = None
    snapshot_every: int = DEFAULT_SNAPSHOT_EVERY
    out_model: Optional[str] = None
    out_support: Optional[str] = None
    report: Optional[str] = None
    threads: Optional[int] = None
    deterministic: bool = False
    case: Optional[str] = None

    def validate(self) -> None:
        if (self.shape is None) == (self.mesh is None):
            raise ConfigError("give exactly one input: a mesh path or a builtin shape name")
        if self.shape is not None and self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}; choose from {', '.join(SHAPES)}")
        if self.mesh is not None and not Path(self.mesh).is_file():
            raise ConfigError(f"input mesh not found: {self.mesh}")
        if self.A < 0 or self.B < 0:
            raise ConfigError("A and B must be non-negative")
        if not 0.0 < self.alpha_deg < 90.0:
            raise ConfigError("alpha-deg must lie strictly between 0 and 90")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot cadence must be at least 1 step")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")


# ------------------------------------------------------------- config parsing


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


# (section, key) in the config file -> RunConfig attribute and parser
CONFIG_KEYS = {
    ("input", "shape"): ("shape", str),
    ("input", "mesh"): ("mesh", str),
    ("grid", "counts"): ("counts", _ints),
    ("grid", "box"): ("box", _floats),
    ("params", "A"): ("A", float),
    ("params", "B"): ("B", float),
    ("params", "alpha_deg"): ("alpha_deg", float),
    ("params", "z_min"): ("z_min", float),
    ("evolve", "cfl"): ("cfl", float),
    ("evolve", "max_steps"): ("max_steps", int),
    ("evolve", "t_final_cap"): ("t_final_cap", float),
    ("evolve", "reinit_every"): ("reinit_every", int),
    ("evolve", "check_every"): ("check_every", int),
    ("output", "model"): ("out_model", str),
    ("output", "support"): ("out_support", str),
    ("output", "report"): ("report", str),
    ("output", "snapshots"): ("snapshots", str),
    ("output", "snapshot_every"): ("snapshot_every", int),
}


def read_config(text: str, base: Optional[RunConfig] = None, source: str = "<config>") -> RunConfig:
    """Parse an INI document into a :class:`RunConfig` (on top of ``base``)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    cfg = replace(base) if base else RunConfig()
    known = {}
    for (sec, key), target in CONFIG_KEYS.items():
        known.setdefault(sec, {})[key.lower()] = (key, target)
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, value in cp.items(sec):
            if key.lower() not in known[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            _, (attr, conv) = known[sec][key.lower()]
            try:
                setattr(cfg, attr, conv(value))
            except ValueError as e:
                raise ConfigError(f"{source}: bad value for {key} in [{sec}]: {value!r}") from e
    return cfg


def case_config(name: str) -> RunConfig:
    """Bundled configuration of a reproduction case (``sphere``, ``cross``, ``dog``, ``2d``)."""
    if name not in REPRODUCE_CASES:
        raise ConfigError(f"unknown case {name!r}; valid cases: {', '.join(REPRODUCE_CASES)}")
    text = resources.files("overhang_forge").joinpath("configs", f"{name}.ini").read_text()
    cfg = read_config(text, source=f"{name}.ini")
    cfg.case = name
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--input", dest="mesh", metavar="PATH", help="STL or OBJ mesh of the part")
    src.add_argument("--shape", help=f"builtin shape: {', '.join(SHAPES)}")
    common.add_argument("--config", metavar="FILE", help="INI file; flags override its values")
    common.add_argument("--grid", metavar="NX[,NY[,NZ]]", type=_ints)
    common.add_argument("--box", metavar="x0,x1,y0,y1[,z0,z1]", type=_floats)
    common.add_argument("--A", type=float)
    common.add_argument("--B", type=float)
    common.add_argument("--alpha-deg", type=float)
    common.add_argument("--zmin", type=float)
    common.add_argument("--cfl", type=float)
    common.add_argument("--max-steps", type=int)
    common.add_argument("--t-cap", type=float, help="stop once simulated time reaches this")
    common.add_argument("--reinit-every", type=int)
    common.add_argument("--check-every", type=int)
    common.add_argument("--snapshots", metavar="DIR", help="write VTK field snapshots here")
    common.add_argument("--snapshot-every", type=int)
    common.add_argument("--out-model", metavar="PATH")
    common.add_argument("--out-support", metavar="PATH")
    common.add_argument("--report", metavar="PATH")
    common.add_argument("--threads", type=int)
    common.add_argument("--deterministic", action="store_true", default=None,
                        help="single-threaded, bit-reproducible run")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="overhang-forge",
                                description="Grow printable support onto overhanging parts by level-set evolution.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run on a mesh or builtin shape")
    rp = sub.add_parser("reproduce", parents=[common], help="run a bundled reference case")
    rp.add_argument("case", help=f"one of: {', '.join(REPRODUCE_CASES)}")
    rp.add_argument("--out-dir", default=None, help="directory for default output paths")
    return p


FLAG_TARGETS = {
    "mesh": "mesh", "shape": "shape", "grid": "counts", "box": "box", "A": "A", "B": "B",
    "alpha_deg": "alpha_deg", "zmin": "z_min", "cfl": "cfl", "max_steps": "max_steps",
    "t_cap": "t_final_cap", "reinit_every": "reinit_every", "check_every": "check_every",
    "snapshots": "snapshots", "snapshot_every": "snapshot_every", "out_model": "out_model",
    "out_support": "out_support", "report": "report", "threads": "threads",
    "deterministic": "deterministic",
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "reproduce":
        cfg = case_config(args.case)
        out = Path(args.out_dir or f"out-{args.case}")
        cfg.report = str(out / "report.json")
        cfg.out_model = str(out / "model")
        cfg.out_support = str(out / "support")
    else:
        cfg = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = read_config(path.read_text(), cfg, source=str(path))
    for flag, attr in FLAG_TARGETS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if args.mesh is not None:
        cfg.shape = None
    if args.shape is not None:
        cfg.mesh = None
    return cfg


# ------------------------------------------------------------------ pipeline


def _box_pairs(box, dim):
    if len(box) != 2 * dim:
        raise ConfigError(f"box needs {2 * dim} numbers for a {dim}D grid, got {len(box)}")
    lo = tuple(box[0::2])
    hi = tuple(box[1::2])
    if any(h <= l for l, h in zip(lo, hi)):
        raise ConfigError(f"box bounds must increase: {box}")
    return lo, hi


def _check_enclosed(f0: ScalarField) -> None:
    u = f0.values
    for axis in range(u.ndim):
        for end in (0, -1):
            face = np.take(u, end, axis=axis)
            if np.any(face < 0):
                raise ConfigError("the domain box cuts through the part; enlarge --box")


def build_initial_field(cfg: RunConfig) -> tuple[ScalarField, float]:
    """Initial signed distance field and the plate height."""
    if cfg.shape is not None:
        preset = CASES[cfg.shape]
        dim = len(preset.counts)
        counts = tuple(cfg.counts or preset.counts)
        if len(counts) == 1:
            counts = counts * dim
        if cfg.box is not None:
            lo, hi = _box_pairs(cfg.box, dim)
        else:
            lo, hi = preset.lo, preset.hi
        if len(counts) != dim:
            raise ConfigError(f"shape {cfg.shape} is {dim}D but the grid has {len(counts)} axes")
        grid = GridSpec.from_box(lo, hi, counts)
        f0 = make_field(grid, SHAPES[cfg.shape]())
        if cfg.shape != "sphere":
            f0 = reinitialize(f0)
        z_min = preset.z_min if cfg.z_min is None else cfg.z_min
    else:
        mesh = read_mesh(cfg.mesh)
        if mesh.dropped_degenerate:
            log.warning("dropped %d degenerate triangles from %s", mesh.dropped_degenerate, cfg.mesh)
        mlo, mhi = mesh.bounds()
        z_min = float(mlo[2]) if cfg.z_min is None else cfg.z_min
        if cfg.box is not None:
            lo, hi = _box_pairs(cfg.box, 3)
            if np.any(np.asarray(lo) >= mlo) or np.any(np.asarray(hi) <= mhi):
                raise ConfigError(f"box {cfg.box} does not enclose the mesh bounds {mlo}..{mhi} with a margin")
        else:
            pad = BOX_MARGIN * (mhi - mlo).max()
            lo = mlo - pad
            hi = mhi + pad
            lo[2] = min(lo[2], z_min - pad)
        counts = tuple(cfg.counts or (100,))
        if len(counts) == 1:
            counts = counts * 3
        if len(counts) != 3:
            raise ConfigError("a mesh input needs a 3D grid")
        grid = GridSpec.from_box(tuple(lo), tuple(hi), counts)
        f0 = mesh_to_sdf(mesh, grid)
    _check_enclosed(f0)
    return f0, z_min


def set_threads(cfg: RunConfig) -> int:
    """Cap numba's worker count from the flag, the environment or determinism."""
    import numba

    n = cfg.threads
    if n is None and os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from e
    if cfg.deterministic:
        n = 1
    if n is None:
        return numba.config.NUMBA_NUM_THREADS
    with warnings.catch_warnings():
        # numba complains about an old TBB while picking a threading layer
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
        return numba.get_num_threads()


def _write_geometry(cfg: RunConfig, f0: ScalarField, f1: ScalarField, z_min: float) -> dict:
    model, support = split_support(f0, f1)
    files = {}
    base_model = Path(cfg.out_model) if cfg.out_model else None
    base_support = Path(cfg.out_support) if cfg.out_support else None
    if f0.grid.dim == 3:
        for base, mesh in ((base_model, model), (base_support, support)):
            if base is None:
                continue
            path = base if base.suffix else base.with_suffix(".stl")
            path.parent.mkdir(parents=True, exist_ok=True)
            if path.suffix.lower() == ".obj":
                write_obj(path, {mesh.region.value: mesh})
            else:
                write_stl(mesh, path)
            files[mesh.region.value] = str(path)
        if base_model is not None:
            combined = base_model.with_name(base_model.stem + "_with_support.obj")
            write_obj(combined, {"model": model, "support": support})
            files["combined"] = str(combined)
        support_volume = float(abs(support.volume())) if len(support) else 0.0
    else:
        for base, contour in ((base_model, model), (base_support, support)):
            if base is None:
                continue
            path = base if base.suffix else base.with_suffix(".obj")
            path.parent.mkdir(parents=True, exist_ok=True)
            write_obj(path, {contour.region.value: contour})
            files[contour.region.value] = str(path)
        if base_model is not None:
            svg = base_model.with_name(base_model.stem + "_with_support.svg")
            g = f0.grid
            write_svg(svg, {"support": (support, "#d62728"), "model": (model, "black")},
                      (g.origin, g.upper))
            files["svg"] = str(svg)
        support_volume = float(abs(support.area())) if not support.is_empty else 0.0
    return {"files": files, "support_mesh_volume": support_volume}


def run_pipeline(cfg: RunConfig) -> int:
    """Run the whole pipeline; returns the process exit status."""
    cfg.validate()
    threads = set_threads(cfg)
    f0, z_min = build_initial_field(cfg)
    params = SpeedParams(A=cfg.A, B=cfg.B, alpha=math.radians(cfg.alpha_deg), z_min=z_min).with_top_from(f0)
    evolve = EvolveConfig(params=params, cfl=cfg.cfl, max_steps=cfg.max_steps, t_final_cap=cfg.t_final_cap,
                          reinit_every=cfg.reinit_every, check_every=cfg.check_every,
                          snapshot_every=cfg.snapshot_every if cfg.snapshots else 0)
    log.info("grid %s, spacing %s, A=%g B=%g alpha=%g deg z_min=%g z_max=%.4g",
             f0.grid.counts, tuple(round(s, 5) for s in f0.grid.spacing), cfg.A, cfg.B,
             cfg.alpha_deg, z_min, params.z_max)

    snap_dir = Path(cfg.snapshots) if cfg.snapshots else None
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)
    plate = f0.grid.vertical() <= z_min
    track = {"prev": f0.values, "monotone_breaks": 0}

    def observer(k, t, f, viol):
        if k > 0 and np.any(f.values > track["prev"]):
            track["monotone_breaks"] += 1
        track["prev"] = f.values
        if snap_dir is not None and k % evolve.snapshot_every == 0:
            write_vtk(f, snap_dir / f"u_{k:06d}.vtk")
        if k % 500 == 0:
            log.info("step %d  t=%.4g  max violation %.4g", k, t, viol)

    f1, rep = run(f0, evolve, observer=observer)
    if snap_dir is not None and rep.steps_taken % evolve.snapshot_every != 0:
        write_vtk(f1, snap_dir / f"u_{rep.steps_taken:06d}.vtk")

    printable, recheck, _ = surface_printable(f1, params)
    naive = naive_projection_support(f0, params)
    geometry = _write_geometry(cfg, f0, f1, z_min)
    plate_mask = np.broadcast_to(plate, f0.values.shape)
    report = {
        "schema_version": SCHEMA_VERSION,
        "case": cfg.case,
        "input": cfg.mesh or cfg.shape,
        "grid": f0.grid.to_dict(),
        "params": params.to_dict(),
        "evolve": {"cfl": evolve.cfl, "max_steps": evolve.max_steps,
                   "t_final_cap": evolve.t_final_cap if math.isfinite(evolve.t_final_cap) else None,
                   "reinit_every": evolve.reinit_every, "check_every": evolve.check_every},
        **rep.to_dict(),
        "naive_projection_support": naive,
        "added_over_naive": rep.added_volume / naive if naive > 0 else None,
        "recheck_max_violation": recheck,
        "recheck_printable": bool(printable),
        "superset_of_initial": bool(np.all(f1.values[f0.values < 0] < 0)),
        "monotone_breaks": track["monotone_breaks"],
        "plate_clamp_intact": bool(np.array_equal(f0.values[plate_mask], f1.values[plate_mask])),
        "threads": threads,
        "deterministic": bool(cfg.deterministic),
        **geometry,
    }
    if cfg.report:
        _write_report(Path(cfg.report), report, rep, f0, f1, params)
    log.info("%s after %d steps, max violation %.4g, added %.4g, naive %.4g",
             rep.stop_reason.value, rep.steps_taken, rep.final_violation, rep.added_volume, naive)
    return EXIT_OK if rep.stop_reason is StopReason.PRINTABLE else EXIT_CAP


def _write_report(path: Path, report: dict, rep, f0, f1, params) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    stem = path.with_suffix("")
    hist = rep.max_violation_history
    stride = max(1, round(rep.steps_taken / max(len(hist) - 1, 1)))
    with open(f"{stem}_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "max_violation"])
        for k, v in enumerate(hist):
            w.writerow([min(k * stride, rep.steps_taken), repr(v)])
    plotting.violation_history(rep.max_violation_history, params.eps_print, f"{stem}_violation.png")
    if f0.grid.dim == 2:
        plotting.contours_2d(f0, f1, f"{stem}_contours.png", params.z_min)
    else:
        plotting.slices_3d(f0, f1, f"{stem}_slices.png", params.z_min)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.ndarray, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return run_pipeline(cfg)
    except NumericalInstabilityError as e:
        print(f"error: numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, MeshParseError, WatertightError, NoSurfaceError, NoCrossingError,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
