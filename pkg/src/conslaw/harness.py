"""Experiment orchestration: configs, run directories, reports.

A run directory is produced from one validated JSON config and contains
every artifact of the requested pipeline stages plus a manifest listing
content hashes, so re-running the same config reproduces the directory
bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .decay import decay_experiment, fit_decay_exponent, suggested_box_halfwidth
from .degiorgi import truncation_ladder
from .errors import ConslawError, InputError
from .fields import (
    ScalarField,
    Trajectory,
    field_from_function,
    read_field_bin,
    write_field_bin,
    write_field_csv,
)
from .fluxes import estimate_alpha, get_flux
from .kinetic import default_level_grid, entropy_dissipation, write_measure_csv
from .characteristics import backward_characteristic
from .scaling import apply_scaling, build_scaling
from .solver import exact_decay_solution, solve
from .structure import auto_threshold, jump_set

_STAGES = ("dissipation", "structure", "degiorgi", "char", "decay", "scale")


# -- initial conditions -------------------------------------------------------


def make_initial_condition(key: str, params: dict, n, box) -> ScalarField:
    """Build a named initial profile on the given box.

    Keys: decay_example(m), riemann(uL, uR, x0), tophat(height, lo, hi),
    bump(amp, width), sine(amp, mean), smooth_rarefaction(width).
    """
    p = dict(params or {})
    n = [int(k) for k in (n if isinstance(n, (list, tuple)) else [n])]
    lo = [b[0] for b in box]
    hi = [b[1] for b in box]
    if len(n) != len(lo):
        raise InputError("grid rank does not match the box rank")

    def build(fn):
        return field_from_function(fn, n, lo, hi)

    if key == "decay_example":
        m = int(p.get("m", 1))
        if len(n) != 1:
            raise InputError("decay_example is one-dimensional")
        return build(lambda x: exact_decay_solution(m, 0.0, x))
    if key == "riemann":
        uL, uR, x0 = p.get("uL", 1.0), p.get("uR", 0.0), p.get("x0", 0.0)
        if len(n) == 1:
            return build(lambda x: np.where(x < x0, uL, uR))
        return build(lambda x, y: np.where(x < x0, uL, uR))
    if key == "tophat":
        h, a, b = p.get("height", 1.0), p.get("lo", -0.5), p.get("hi", 0.5)
        if len(n) == 1:
            return build(lambda x: np.where((x >= a) & (x <= b), h, 0.0))
        return build(lambda x, y: np.where((x >= a) & (x <= b) & (y >= a) & (y <= b), h, 0.0))
    if key == "bump":
        amp, w = p.get("amp", 1.0), p.get("width", 1.0)
        if len(n) == 1:
            return build(lambda x: amp * np.exp(-((x / w) ** 2)))
        return build(lambda x, y: amp * np.exp(-(x**2 + y**2) / w**2))
    if key == "sine":
        amp, mean = p.get("amp", 0.5), p.get("mean", 0.0)
        if len(n) == 1:
            length = hi[0] - lo[0]
            return build(lambda x: mean + amp * np.sin(2 * np.pi * (x - lo[0]) / length))
        raise InputError("sine profile is one-dimensional")
    if key == "smooth_rarefaction":
        w = p.get("width", 0.1)
        if len(n) != 1:
            raise InputError("smooth_rarefaction is one-dimensional")
        return build(lambda x: 0.5 * (1 + np.tanh(x / w)))
    raise InputError(f"unknown initial condition {key!r}")


# -- config -------------------------------------------------------------------


def _is_pow2(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one run; see README for the JSON schema."""

    name: str
    flux: str
    ic: str
    n: tuple[int, ...]
    box: tuple[tuple[float, float], ...] | None = None
    ic_params: dict = field(default_factory=dict)
    cfl: float = 0.45
    boundary: str = "outflow"
    scheme: str = "eo"
    t_end: float = 1.0
    snapshots: tuple[float, ...] = ()
    stages: tuple[str, ...] = ()
    stage_params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(k) for k in np.atleast_1d(self.n)))
        if self.box is not None:
            object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        object.__setattr__(self, "snapshots", tuple(float(t) for t in self.snapshots))
        object.__setattr__(self, "stages", tuple(self.stages))
        get_flux(self.flux)  # must resolve
        if len(self.n) == 1:
            if not (_is_pow2(self.n[0]) and 2**6 <= self.n[0] <= 2**14):
                raise InputError("1D grid size must be a power of two in 2^6..2^14")
        elif len(self.n) == 2:
            for k in self.n:
                if not (_is_pow2(k) and 2**5 <= k <= 2**10):
                    raise InputError("2D grid sizes must be powers of two in 2^5..2^10")
        else:
            raise InputError("only 1D/2D grids supported")
        for s in self.stages:
            if s not in _STAGES:
                raise InputError(f"unknown stage {s!r}")
        if not (0 < self.cfl <= 0.5):
            raise InputError("cfl must be in (0, 0.5]")

    def resolved_box(self) -> tuple[tuple[float, float], ...]:
        if self.box is not None:
            return self.box
        flux = get_flux(self.flux)
        half = suggested_box_halfwidth(flux, 1.0, self.t_end)
        return tuple((-half, half) for _ in self.n)

    def to_json(self) -> str:
        d = {
            "name": self.name,
            "flux": self.flux,
            "ic": self.ic,
            "ic_params": self.ic_params,
            "n": list(self.n),
            "box": [list(b) for b in self.box] if self.box else None,
            "cfl": self.cfl,
            "boundary": self.boundary,
            "scheme": self.scheme,
            "t_end": self.t_end,
            "snapshots": list(self.snapshots),
            "stages": list(self.stages),
            "stage_params": self.stage_params,
            "seed": self.seed,
        }
        return json.dumps(d, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        box = d.get("box")
        return cls(
            name=d["name"],
            flux=d["flux"],
            ic=d["ic"],
            n=tuple(d["n"]),
            box=tuple(tuple(b) for b in box) if box else None,
            ic_params=d.get("ic_params", {}),
            cfl=d.get("cfl", 0.45),
            boundary=d.get("boundary", "outflow"),
            scheme=d.get("scheme", "eo"),
            t_end=d.get("t_end", 1.0),
            snapshots=tuple(d.get("snapshots", [])),
            stages=tuple(d.get("stages", [])),
            stage_params=d.get("stage_params", {}),
            seed=d.get("seed", 0),
        )


PRESETS: dict[str, dict] = {
    "shock_dissipation": {
        "name": "shock_dissipation",
        "flux": "burgers",
        "ic": "riemann",
        "ic_params": {"uL": 1.0, "uR": 0.0, "x0": 0.0},
        "n": [2048],
        "box": [[-0.5, 1.5]],
        "t_end": 1.0,
        "snapshots": [k / 8 for k in range(9)],
        "stages": ["dissipation", "structure"],
        "stage_params": {"dissipation": {"levels": 64}},
    },
    "decay_burgers": {
        "name": "decay_burgers",
        "flux": "burgers",
        "ic": "decay_example",
        "ic_params": {"m": 1},
        "n": [4096],
        "box": [[-1.0, 5.0]],
        "t_end": 15.0,
        "snapshots": [15.0],
        "stages": ["decay"],
        "stage_params": {"decay": {"t_min": 2.0}},
    },
    "rarefaction": {
        "name": "rarefaction",
        "flux": "burgers",
        "ic": "smooth_rarefaction",
        "ic_params": {"width": 0.1},
        "n": [1024],
        "box": [[-1.0, 2.0]],
        "t_end": 1.0,
        "snapshots": [k / 16 for k in range(17)],
        "stages": ["dissipation", "structure", "degiorgi", "char"],
        "stage_params": {"char": {"x0": 0.5, "v0": 0.5, "k": 16}},
    },
}


# -- run pipeline -------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.to_json().encode()).hexdigest()


def load_trajectory(run_dir) -> Trajectory:
    run_dir = Path(run_dir)
    cfg = ExperimentConfig.from_json((run_dir / "config.json").read_text())
    frames = sorted((run_dir / "frames").glob("frame_*.bin"))
    if not frames:
        raise InputError(f"{run_dir}: no frames found")
    return Trajectory(
        [read_field_bin(p) for p in frames],
        cfg.flux,
        {
            "flux": cfg.flux,
            "cfl": cfg.cfl,
            "boundary": cfg.boundary,
            "scheme": cfg.scheme,
            "t_end": cfg.t_end,
        },
    )


def run_experiment(config: ExperimentConfig, outdir) -> Path:
    """Execute solve plus the requested stages, writing all artifacts.

    Any stage error is recorded in the manifest and aborts the remaining
    stages; the directory always ends in a consistent state with hashes
    for everything written so far.
    """
    run_dir = Path(outdir) / config.name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(config.to_json())
    manifest = {
        "config_hash": _config_hash(config),
        "version": __version__,
        "stages": {},
        "files": {},
    }
    flux = get_flux(config.flux)
    box = config.resolved_box()

    def record(status: dict):
        for p in sorted(run_dir.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                manifest["files"][str(p.relative_to(run_dir))] = _sha256(p)
        (run_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))

    try:
        u0 = make_initial_condition(config.ic, config.ic_params, config.n, box)
        snaps = config.snapshots or (config.t_end,)
        if snaps[0] > u0.time:
            snaps = (u0.time,) + tuple(snaps)
        traj = solve(
            u0, flux, config.t_end, snaps,
            cfl=config.cfl, bc=config.boundary, scheme=config.scheme,
        )
        fdir = run_dir / "frames"
        fdir.mkdir(exist_ok=True)
        for i, fr in enumerate(traj.frames):
            write_field_bin(fr, fdir / f"frame_{i:04d}.bin")
        write_field_csv(traj.frames[-1], run_dir / "final.csv")
        manifest["stages"]["solve"] = {
            "status": "ok",
            "frames": len(traj.frames),
            "sup_nonincreasing": bool(
                np.all(np.diff([f.sup_norm() for f in traj.frames]) <= 1e-12)
            ),
        }
    except ConslawError as e:
        manifest["stages"]["solve"] = {"status": "error", "error": str(e)}
        record(manifest)
        return run_dir

    measure = None
    for stage in config.stages:
        params = dict(config.stage_params.get(stage, {}))
        try:
            if stage == "dissipation":
                lo = min(f.bounds[0] for f in traj.frames)
                hi = max(f.bounds[1] for f in traj.frames)
                levels = default_level_grid(lo, hi, int(params.get("levels", 64)))
                measure = entropy_dissipation(traj, flux, levels)
                write_measure_csv(measure, run_dir / "mu.csv")
                manifest["stages"][stage] = {
                    "status": "ok",
                    "total": measure.total,
                    "clipped_positive": measure.clipped_positive,
                }
            elif stage == "structure":
                if measure is None:
                    raise InputError("structure stage needs the dissipation stage")
                dx = min(traj.grid.spacing)
                radii = [c * dx for c in params.get("radii_cells", [1, 2])]
                thr = params.get("threshold", "auto")
                rng = max(f.bounds[1] for f in traj.frames) - min(
                    f.bounds[0] for f in traj.frames
                )
                thr = auto_threshold(rng) if thr == "auto" else float(thr)
                mask = jump_set(measure, radii, thr)
                (run_dir / "jump_mask.json").write_text(mask.to_json())
                with open(run_dir / "jump_mask.csv", "w") as fh:
                    fh.write("t_index,cell_index\n")
                    for ij in mask.flagged_indices():
                        fh.write(",".join(str(int(v)) for v in ij) + "\n")
                manifest["stages"][stage] = {
                    "status": "ok",
                    "n_flagged": int(mask.flagged.sum()),
                    "threshold": thr,
                }
            elif stage == "degiorgi":
                fr = traj.frames[-1]
                U = params.get("U", "auto")
                ctr = [0.5 * (a + b) for a, b in fr.domain()]
                if U == "auto":
                    U = 2.0 * max(fr.sup_norm_ball(ctr, 1.0), 1e-12)
                ladder = truncation_ladder(fr, float(U), int(params.get("K", 25)))
                with open(run_dir / "ladder.csv", "w") as fh:
                    fh.write("k,ell_k,r_k,A_k\n")
                    for row in ladder.to_rows():
                        fh.write(",".join(repr(v) for v in row) + "\n")
                manifest["stages"][stage] = {
                    "status": "ok",
                    "A_last": float(ladder.A[-1]),
                    "monotone": bool(np.all(np.diff(ladder.A) <= 1e-12)),
                }
            elif stage == "char":
                poly = backward_characteristic(
                    traj, flux,
                    float(params.get("x0", 0.0)),
                    float(params.get("v0", 0.5)),
                    int(params.get("k", 16)),
                )
                with open(run_dir / "polygon.csv", "w") as fh:
                    fh.write("t,x,value_lo,value_hi\n")
                    rows = zip(poly.times, poly.points, poly.segment_hulls + ((np.nan, np.nan),))
                    for t, xx, (vl, vh) in rows:
                        fh.write(f"{t!r},{xx!r},{vl!r},{vh!r}\n")
                manifest["stages"][stage] = {
                    "status": "ok",
                    "endpoint": float(poly.points[0]),
                    "chord_deviation": poly.chord_deviation(),
                }
            elif stage == "decay":
                ser = decay_experiment(
                    flux, u0, config.t_end, n_samples=int(params.get("n_samples", 24))
                )
                with open(run_dir / "decay.csv", "w") as fh:
                    fh.write("t,sup_norm\n")
                    for t, s in ser.to_rows():
                        fh.write(f"{t!r},{s!r}\n")
                gam, c = fit_decay_exponent(
                    ser, float(params.get("t_min", config.t_end / 8))
                )
                manifest["stages"][stage] = {"status": "ok", "gamma_hat": gam, "C_hat": c}
            elif stage == "scale":
                lam = float(params.get("lambda", 0.5))
                r = float(params.get("r", 1.0))
                smap = build_scaling(flux, lam)
                scaled = apply_scaling(traj.frames[-1], r, smap)
                write_field_csv(scaled, run_dir / "scaled.csv")
                manifest["stages"][stage] = {"status": "ok", "det": smap.det}
        except ConslawError as e:
            manifest["stages"][stage] = {"status": "error", "error": str(e)}
            record(manifest)
            return run_dir
    record(manifest)
    return run_dir


def flux_report(flux_key: str, xi_samples: int = 61, v_samples: int = 50_000) -> str:
    return estimate_alpha(get_flux(flux_key), xi_samples=xi_samples, v_samples=v_samples).to_json()


# -- report emission -----------------------------------------------------------


def emit_report(run_dir, fmt: str = "md") -> Path:
    """Consolidate the manifest's per-stage checks into one report file."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    rows = []
    for stage, info in manifest["stages"].items():
        status = info.get("status")
        detail = {k: v for k, v in info.items() if k != "status"}
        rows.append((stage, status, detail))
    requested = ["solve"] + list(
        ExperimentConfig.from_json((run_dir / "config.json").read_text()).stages
    )
    missing = [s for s in requested if s not in manifest["stages"]]
    complete = not missing and all(r[1] == "ok" for r in rows)
    if fmt == "json":
        out = run_dir / "report.json"
        out.write_text(
            json.dumps(
                {"complete": complete, "missing": missing, "stages": manifest["stages"]},
                sort_keys=True,
                indent=1,
            )
        )
    elif fmt == "csv":
        out = run_dir / "report.csv"
        with open(out, "w") as fh:
            fh.write("stage,status,detail\n")
            for stage, status, detail in rows:
                fh.write(f'{stage},{status},"{json.dumps(detail, sort_keys=True)}"\n')
            for s in missing:
                fh.write(f"{s},absent,\n")
    elif fmt == "md":
        out = run_dir / "report.md"
        lines = [f"# Run report: {run_dir.name}", ""]
        lines.append(f"complete: **{complete}**")
        lines.append("")
        lines.append("| stage | status | detail |")
        lines.append("|---|---|---|")
        for stage, status, detail in rows:
            lines.append(f"| {stage} | {status} | `{json.dumps(detail, sort_keys=True)}` |")
        for s in missing:
            lines.append(f"| {s} | absent | |")
        out.write_text("\n".join(lines) + "\n")
    else:
        raise InputError(f"unknown report format {fmt!r}")
    return out
