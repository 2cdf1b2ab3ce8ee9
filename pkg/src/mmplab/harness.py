"""Run orchestration: configs, manifests, CSV persistence, paired runs.

A run is described by a flat INI config (section.key = value) and executes
into a run directory containing the config copy, a manifest and the norm
series CSV.  Identical config + seed produce byte-identical CSV artifacts
for any worker-thread count; the manifest carries timestamps and is
excluded from that guarantee.
"""

from __future__ import annotations

import configparser
import datetime as _dt
import hashlib
import json
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import theorem_report
from .decay_character import generate_data_with_character
from .fields import Grid, PhysParams, StateField
from .snapshots import write_snapshot
from .solver import BlowupError, SolverConfig, Trajectory, simulate

CSV_COLUMNS = ("t", "l2_z_sq", "l2_u_sq", "l2_w_sq", "l2_b_sq", "h1_z_sq",
               "h1_w_sq", "h2_z_sq", "ball_integral", "l2_diff_z_sq",
               "l2_diff_w_sq")

LINEAR_CSV_COLUMNS = ("t", "l2_z_sq", "l2_u_sq", "l2_w_sq", "l2_b_sq", "h1_z_sq")

_DEFAULTS = {
    ("grid", "n"): "32",
    ("grid", "length"): str(2.0 * np.pi),
    ("params", "mu"): "1.0",
    ("params", "gamma"): "1.0",
    ("params", "chi"): "0.5",
    ("params", "nu"): "1.0",
    ("init", "kind"): "power",
    ("init", "r_star"): "0.0",
    ("init", "seed"): "1",
    ("init", "amplitude"): "0.01",
    ("time", "dt"): "0.05",
    ("time", "t_end"): "1.0",
    ("time", "output_every"): "1",
    ("time", "scheme"): "etd-rk2",
    ("output", "dir"): "run",
    ("output", "save_snapshots"): "false",
    ("analysis", "ball_a"): "1.0",
    ("analysis", "fit_t_lo"): "",
    ("analysis", "fit_t_hi"): "",
}


def format_float(x: float) -> str:
    """Locale-independent rendering with 17 significant digits."""
    return f"{x:.17g}"


@dataclass
class RunConfig:
    """Parsed flat config; `raw` keeps every section.key = value string."""

    raw: dict[tuple[str, str], str]

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        raw = dict(_DEFAULTS)
        for section in parser.sections():
            for key, value in parser.items(section):
                raw[(section.lower(), key.lower())] = value.strip()
        return cls(raw=raw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def get(self, section: str, key: str) -> str:
        return self.raw[(section, key)]

    def getfloat(self, section, key):
        return float(self.get(section, key))

    def getint(self, section, key):
        return int(self.get(section, key))

    def getbool(self, section, key):
        return self.get(section, key).lower() in ("1", "true", "yes", "on")

    def canonical_text(self) -> str:
        lines = [f"{sec}.{key}={val}" for (sec, key), val in sorted(self.raw.items())]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def grid(self) -> Grid:
        return Grid(n=self.getint("grid", "n"), length=self.getfloat("grid", "length"))

    def params(self) -> PhysParams:
        return PhysParams(mu=self.getfloat("params", "mu"),
                          gamma=self.getfloat("params", "gamma"),
                          chi=self.getfloat("params", "chi"),
                          nu=self.getfloat("params", "nu"))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            grid=self.grid(), params=self.params(),
            dt=self.getfloat("time", "dt"),
            t_end=self.getfloat("time", "t_end"),
            output_every=self.getint("time", "output_every"),
            scheme=self.get("time", "scheme"),
            ball_A=self.getfloat("analysis", "ball_a"),
        )

    def initial_state(self) -> StateField:
        kind = self.get("init", "kind")
        grid = self.grid()
        if kind == "zero":
            return StateField.zero(grid)
        if kind == "power":
            return generate_data_with_character(
                grid, r=self.getfloat("init", "r_star"),
                seed=self.getint("init", "seed"),
                amplitude=self.getfloat("init", "amplitude"))
        raise ValueError(f"unknown init kind {kind!r}")

    def fit_window(self, t_end: float) -> tuple[float, float]:
        """Fit window; defaults to the last two decades of the run."""
        lo_s = self.get("analysis", "fit_t_lo")
        hi_s = self.get("analysis", "fit_t_hi")
        hi = float(hi_s) if hi_s else t_end
        lo = float(lo_s) if lo_s else max(hi / 100.0, 0.0)
        return lo, hi


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    code_version: str
    started: str
    finished: str = ""
    artifacts: dict = dc_field(default_factory=dict)
    summary: dict = dc_field(default_factory=dict)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def write_series_csv(path, traj: Trajectory, columns=CSV_COLUMNS) -> None:
    lines = [",".join(columns)]
    for row in traj.norm_rows:
        cells = []
        for col in columns:
            val = row.get(col)
            cells.append("" if val is None else format_float(val))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_columns_csv(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    rows = zip(*(columns[name] for name in names))
    lines = [",".join(names)]
    for row in rows:
        lines.append(",".join(format_float(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    names = lines[0].split(",")
    cols: dict[str, list] = {name: [] for name in names}
    for line in lines[1:]:
        for name, cell in zip(names, line.split(",")):
            cols[name].append(float(cell) if cell else np.nan)
    return {name: np.array(vals) for name, vals in cols.items()}


def execute_run(config: RunConfig, out_dir=None, pair_linear: bool = False,
                record_tensor: bool = False) -> tuple[Path, Trajectory]:
    """Run a simulation into a run directory; returns (dir, trajectory)."""
    out = Path(out_dir) if out_dir is not None else Path(config.get("output", "dir"))
    out.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest(config_hash=config.config_hash(),
                           seed=config.getint("init", "seed"),
                           code_version=__version__, started=_now())
    (out / "config.ini").write_text(_to_ini(config))

    z0 = config.initial_state()
    solver_cfg = config.solver_config()
    save_snaps = config.getbool("output", "save_snapshots")
    try:
        traj = simulate(solver_cfg, z0, pair_linear=pair_linear,
                        record_tensor=record_tensor, save_snapshots=save_snaps)
    except BlowupError as exc:
        # preserve the rows recorded before the failure, then propagate
        if exc.trajectory is not None:
            write_series_csv(out / "series.csv", exc.trajectory)
            manifest.summary = {"error": str(exc), "blowup_t": exc.t}
            manifest.finished = _now()
            manifest.write(out / "manifest.json")
        raise

    write_series_csv(out / "series.csv", traj)
    manifest.artifacts["series"] = "series.csv"
    manifest.artifacts["config"] = "config.ini"
    if pair_linear:
        extra = {"t": np.array(traj.times),
                 "h1_diff_z_sq": traj.column("h1_diff_z_sq")}
        write_columns_csv(out / "extra_series.csv", extra)
        manifest.artifacts["extra_series"] = "extra_series.csv"
    manifest.summary = {
        "paired_linear": pair_linear,
        "monotone_energy": bool(np.all(np.diff(traj.column("l2_z_sq")) <= 0.0)),
        "max_divergence": traj.diagnostics["max_divergence"],
        "cfl_halvings": traj.diagnostics["cfl_halvings"],
        "bound_valid": traj.diagnostics["bound_valid"],
        "r_star": config.getfloat("init", "r_star")
        if config.get("init", "kind") == "power" else None,
        "t_end": float(traj.times[-1]) if traj.times else 0.0,
    }
    if save_snaps:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        try:
            for t, snap in zip(traj.times, traj.snapshots):
                write_snapshot(snap_dir / f"state_{t:012.5f}.snap", snap)
            manifest.artifacts["snapshots"] = "snapshots/"
        except OSError as exc:
            # norm series and manifest still land; the failure is surfaced
            warnings.warn(f"snapshot write failed: {exc}", stacklevel=2)
            manifest.summary["snapshot_error"] = str(exc)

    manifest.finished = _now()
    manifest.write(out / "manifest.json")
    return out, traj


def compare_linear(config: RunConfig, out_dir=None) -> tuple[Path, Trajectory]:
    """Nonlinear and exact linear evolution from the same datum on the same
    grid, with the difference norms recorded alongside the usual columns."""
    return execute_run(config, out_dir=out_dir, pair_linear=True)


def _to_ini(config: RunConfig) -> str:
    sections: dict[str, list[tuple[str, str]]] = {}
    for (sec, key), val in sorted(config.raw.items()):
        sections.setdefault(sec, []).append((key, val))
    chunks = []
    for sec, items in sections.items():
        chunks.append(f"[{sec}]")
        chunks.extend(f"{key} = {val}" for key, val in items)
        chunks.append("")
    return "\n".join(chunks)


def report_from_run(run_dir, r_star: float | None = None,
                    window: tuple[float, float] | None = None) -> dict:
    """Offline theorem report from a run directory's artifacts."""
    run_dir = Path(run_dir)
    cols = read_series_csv(run_dir / "series.csv")
    manifest = json.loads((run_dir / "manifest.json").read_text())
    config = RunConfig.from_file(run_dir / "config.ini")
    if r_star is None:
        r_star = manifest.get("summary", {}).get("r_star")
    if r_star is None:
        raise ValueError("r_star unknown: pass it explicitly for this run")

    t = cols["t"]
    if window is None:
        window = config.fit_window(float(t[-1]))

    from .analysis import NormSeries
    series_map = {}
    for name in ("l2_z_sq", "l2_w_sq", "h1_z_sq", "h1_w_sq", "h2_z_sq",
                 "l2_diff_z_sq", "l2_diff_w_sq"):
        vals = cols.get(name)
        if vals is None or np.all(np.isnan(vals)):
            continue
        series_map[name] = NormSeries(name=name, times=t, values=vals)
    extra_path = run_dir / "extra_series.csv"
    if extra_path.exists():
        extra = read_series_csv(extra_path)
        series_map["h1_diff_z_sq"] = NormSeries(
            name="h1_diff_z_sq", times=extra["t"], values=extra["h1_diff_z_sq"])

    report = theorem_report(series_map, float(r_star), window, quantitative=False)
    report["run_dir"] = str(run_dir)
    report["config_hash"] = manifest["config_hash"]
    report["bound_valid"] = bool(manifest.get("summary", {}).get("bound_valid", True))
    if not report["bound_valid"]:
        # decay-rate hypotheses do not apply; keep the numbers, drop the claims
        for row in report["rows"] + report["gap_rows"]:
            row["pass"] = None
        report["overall_pass"] = None
        report["note"] = "32 chi (mu+chi+gamma) <= 1 for this run: rate claims disabled"
    return report
