"""Run configurations, figure presets and artifact writers behind the CLI."""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import EnsembleAccumulator, detect_jumps, pooled_jump_statistics
from .errors import ConfigurationError
from .mme import propagate
from .qops import BlochVector, density_from_bloch, state_from_bloch
from .traj import BINNED, SCHEMES, TrajectoryConfig, iter_ensemble, run_ensemble, run_trajectory
from .twolevel import AtomParams, analytic_bloch_series, gamma_of

MASTER = "master-equation"
TRAJECTORY = "trajectory"
ENSEMBLE = "ensemble"
SWEEP = "sweep"
MODES = (MASTER, TRAJECTORY, ENSEMBLE, SWEEP)

OUTPUT_ROOT_ENV = "MMEQ_OUTPUT_ROOT"
ENSEMBLE_TOLERANCE = 0.05


@dataclass
class RunConfig:
    mode: str = TRAJECTORY
    p: float = 0.0
    rate: float = 0.0
    omega: float = 1.0
    initial: str = "2"
    t_final: float = 20.0
    dt: float | None = None
    scheme: str = "event-driven"
    sample_interval: float = 0.01
    seed: int = 0
    n: int = 100
    band: float = 0.1
    out: str | None = None
    preset: str | None = None
    caption_gamma: float | None = None
    window_feature: str | None = None
    grid: list = field(default_factory=list)
    workers: int = 1

    def validate(self) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode: must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.p <= 0.5:
            problems.append(f"p: must lie in [0, 0.5], got {self.p}")
        if not self.rate >= 0:
            problems.append(f"rate: must be >= 0, got {self.rate}")
        if not self.t_final > 0:
            problems.append(f"t_final: must be > 0, got {self.t_final}")
        if self.scheme not in SCHEMES:
            problems.append(f"scheme: must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.sample_interval > 0:
            problems.append(f"sample_interval: must be > 0, got {self.sample_interval}")
        if self.dt is not None and not self.dt > 0:
            problems.append(f"dt: must be > 0, got {self.dt}")
        if not 0 < self.band < 1:
            problems.append(f"band: must lie in (0, 1), got {self.band}")
        if self.n < 1:
            problems.append(f"n: must be >= 1, got {self.n}")
        if self.mode in (TRAJECTORY, ENSEMBLE, SWEEP) and self.seed is None:
            problems.append("seed: required for stochastic modes")
        if self.mode == SWEEP and not self.grid:
            problems.append("grid: sweep needs at least one (R, p) point")
        try:
            initial_bloch(self.initial)
        except (ValueError, ConfigurationError) as exc:
            problems.append(f"initial: {exc}")
        if problems:
            raise ConfigurationError("invalid configuration: " + "; ".join(problems))

    @property
    def atom(self) -> AtomParams:
        return AtomParams(self.omega, self.p, self.rate)

    @property
    def metadata(self) -> dict:
        """Decay rate recomputed from (R, p), next to the caption value for presets."""
        meta = {"gamma_recomputed": gamma_of(self.rate, self.p)}
        if self.preset is not None:
            meta["preset"] = self.preset
            meta["caption_gamma"] = self.caption_gamma
        return meta


# Caption (R, p) pairs; fig1 has no measurement parameters of its own and is
# stored as the perfect-measurement pair with the caption's decay rate.
_PRESETS = {
    "fig1": dict(mode=MASTER, p=0.0, rate=0.2828, t_final=20.0, caption_gamma=0.1414),
    "fig2": dict(mode=TRAJECTORY, p=0.49, rate=20.0, t_final=30.0, caption_gamma=0.1414),
    "fig3": dict(mode=TRAJECTORY, p=0.36, rate=1.414, t_final=30.0, caption_gamma=0.1414),
    "fig4": dict(mode=TRAJECTORY, p=0.49, rate=258.8, t_final=30.0, caption_gamma=18.30),
    "fig5": dict(mode=TRAJECTORY, p=0.0, rate=100.0, t_final=2000.0, caption_gamma=50.0),
    "fig6": dict(mode=TRAJECTORY, p=0.16, rate=70.86, t_final=200.0, caption_gamma=18.30, seed=6),
    "fig7": dict(mode=TRAJECTORY, p=0.16, rate=70.86, t_final=200.0, caption_gamma=18.30, seed=6,
                 sample_interval=0.001, window_feature="jump"),
    "fig8": dict(mode=TRAJECTORY, p=0.16, rate=70.86, t_final=200.0, caption_gamma=18.30, seed=6,
                 sample_interval=0.001, window_feature="filament"),
}
PRESET_NAMES = tuple(_PRESETS)
_PRESET_DESCRIPTIONS = {
    "fig1": "master-equation inversion, decay rate 0.1414",
    "fig2": "weak measurements, p=0.49, R=20",
    "fig3": "weak measurements, p=0.36, R=1.414",
    "fig4": "frequent weak measurements, p=0.49, R=258.8",
    "fig5": "perfect measurements (Zeno telegraph), p=0, R=100",
    "fig6": "strong imperfect measurements (filaments), p=0.16, R=70.86",
    "fig7": "fig6 run zoomed on a full jump",
    "fig8": "fig6 run zoomed on a filament",
}


def preset(name: str) -> RunConfig:
    return apply_preset(RunConfig(), name, keep_mode=False)


def apply_preset(cfg: RunConfig, name: str, keep_mode: bool = True) -> RunConfig:
    """Overwrite the atom and trajectory fields of ``cfg`` with preset ``name``."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    values = dict(_PRESETS[name])
    if keep_mode:
        values.pop("mode")
    return dataclasses.replace(cfg, preset=name, initial="2", **values)


def initial_bloch(label) -> BlochVector:
    """Parse ``"1"``/``"2"`` (energy levels) or ``"u,v,w"``."""
    if isinstance(label, (tuple, list)):
        return BlochVector(*map(float, label))
    text = str(label).strip()
    if text in ("1", "2"):
        return BlochVector(0.0, 0.0, -1.0 if text == "1" else 1.0)
    parts = [x for x in text.replace(";", ",").split(",") if x.strip()]
    if len(parts) != 3:
        raise ConfigurationError(f"initial state must be '1', '2' or 'u,v,w', got {label!r}")
    return BlochVector(*(float(x) for x in parts))


def _auto_master_dt(cfg: RunConfig) -> float:
    scale = max(cfg.rate, 0.5 * cfg.omega, 1e-12)
    dt = 1e-3
    while dt * scale > 0.1:
        dt /= 10
    return dt


def _auto_bin_width(cfg: RunConfig) -> float:
    return 0.01 / cfg.rate if cfg.rate > 0 else cfg.sample_interval


def _fmt(x: float) -> str:
    # + 0.0 turns -0.0 into 0.0
    return format(float(x) + 0.0, ".12g")


def _write_csv(path: Path, header: list[str], columns: list) -> None:
    n = len(columns[0])
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) if not isinstance(c[i], (int, np.integer)) else str(int(c[i]))
                              for c in columns))
    path.write_text("\n".join(lines) + "\n")


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return float(_fmt(x)) if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_plot(path: Path, title: str, window=None, extra_series: str = "") -> None:
    lines = [
        "# gnuplot script: inversion w against Omega t",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel '{/Symbol W}t'",
        "set ylabel 'w'",
        "set yrange [-1.05:1.05]",
        f"set title '{title}'",
    ]
    if window is not None:
        lines.append(f"set xrange [{_fmt(window[0])}:{_fmt(window[1])}]")
    lines.append("plot 'bloch.csv' using 1:4 with lines lw 1.5" + extra_series)
    path.write_text("\n".join(lines) + "\n")


def default_out_dir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "mmeq-runs"))
    return root / (cfg.preset or cfg.mode)


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out) if cfg.out else default_out_dir(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _base_summary(cfg: RunConfig) -> dict:
    atom = cfg.atom
    summary = {
        "software": {"package": "mmeq", "version": __version__},
        "mode": cfg.mode,
        "params": {"omega": atom.omega, "p": atom.p, "rate": atom.rate},
        "gamma_recomputed": atom.gamma,
        "omega_prime": atom.omega_prime,
        "regime": atom.regime,
        "initial": list(initial_bloch(cfg.initial)),
        "t_final": cfg.t_final,
        "sample_interval": cfg.sample_interval,
    }
    if cfg.preset is not None:
        summary["preset"] = cfg.preset
        summary["caption_gamma"] = cfg.caption_gamma
    return summary


def _finish(out: Path, summary: dict) -> dict:
    (out / "summary.json").write_text(json.dumps(_json_ready(summary), indent=2, sort_keys=True) + "\n")
    return summary


def run_master(cfg: RunConfig, out: Path) -> dict:
    atom = cfg.atom
    dt = cfg.dt or _auto_master_dt(cfg)
    b0 = initial_bloch(cfg.initial)
    prop = propagate(atom.model(), density_from_bloch(b0), cfg.t_final, dt, cfg.sample_interval)
    bloch = prop.bloch()
    analytic = analytic_bloch_series(b0, prop.times, atom.omega, atom.gamma)
    _write_csv(out / "bloch.csv", ["t", "u", "v", "w"], [prop.times, bloch[:, 0], bloch[:, 1], bloch[:, 2]])
    herm, tr, min_eig = prop.violations()
    summary = _base_summary(cfg)
    summary.update(
        dt=dt,
        max_abs_deviation_from_analytic=float(np.max(np.abs(bloch - analytic))),
        structure={"hermiticity_error": herm, "trace_error": tr, "min_eigenvalue": min_eig},
        integrator_warnings=list(prop.warnings),
    )
    _write_plot(out / "plot.gp", f"master equation, gamma = {_fmt(atom.gamma)}")
    return _finish(out, summary)


def _trajectory_config(cfg: RunConfig, record_events: bool = True) -> TrajectoryConfig:
    dt = cfg.dt
    if cfg.scheme == BINNED and dt is None:
        dt = _auto_bin_width(cfg)
    return TrajectoryConfig(
        t_final=cfg.t_final, scheme=cfg.scheme, dt=dt, sample_interval=cfg.sample_interval,
        seed=int(cfg.seed), record_events=record_events,
    )


def _feature_window(report, feature: str, t_final: float):
    if feature == "jump" and report.jumps:
        t = report.jumps[0][0]
        return max(0.0, t - 1.0), min(t_final, t + 0.5)
    if feature == "filament" and report.filaments:
        # the longest filament shows the most mini-jumps
        start, end, _ = max(report.filaments, key=lambda f: f[1] - f[0])
        pad = max(0.1, end - start)
        return max(0.0, start - pad), min(t_final, end + pad)
    return None


def run_single(cfg: RunConfig, out: Path) -> dict:
    atom = cfg.atom
    tcfg = _trajectory_config(cfg)
    rec = run_trajectory(atom, state_from_bloch(initial_bloch(cfg.initial)), tcfg)
    report = detect_jumps(rec, cfg.band)
    times, bloch, ev = rec.times, rec.bloch, rec.events
    window = None
    if cfg.window_feature:
        window = _feature_window(report, cfg.window_feature, cfg.t_final)
    rows = np.ones(len(times), dtype=bool)
    ev_rows = np.ones(len(ev), dtype=bool)
    if window is not None:
        rows = (times >= window[0]) & (times <= window[1])
        ev_rows = (ev.time >= window[0]) & (ev.time <= window[1])
    _write_csv(out / "bloch.csv", ["t", "u", "v", "w"],
               [times[rows], bloch[rows, 0], bloch[rows, 1], bloch[rows, 2]])
    _write_csv(out / "events.csv", ["t", "outcome", "w_before", "w_after", "gap"],
               [ev.time[ev_rows], ev.outcome[ev_rows], ev.w_before[ev_rows], ev.w_after[ev_rows],
                ev.gap[ev_rows]])
    summary = _base_summary(cfg)
    summary.update(
        scheme=tcfg.scheme,
        dt=tcfg.dt,
        seed=tcfg.seed,
        band=cfg.band,
        n_events=rec.n_events,
        event_rate=rec.n_events / cfg.t_final,
        statistics=_report_stats(report),
        max_pure_state_norm_error=float(np.max(np.abs(np.sum(bloch**2, axis=1) - 1.0))),
    )
    if cfg.window_feature:
        summary["window_feature"] = cfg.window_feature
        summary["window"] = list(window) if window is not None else None
    _write_plot(out / "plot.gp", f"single trajectory, p = {_fmt(atom.p)}, R = {_fmt(atom.rate)}", window)
    return _finish(out, summary)


def _report_stats(report) -> dict:
    return {
        "jumps": len(report.jumps),
        "jump_rate": report.jump_rate,
        "mean_dwell": report.mean_dwell if report.dwell_times else None,
        "dwell_times": len(report.dwell_times),
        "filaments": len(report.filaments),
        "filament_rate": report.filament_rate,
    }


def run_ensemble_mode(cfg: RunConfig, out: Path) -> dict:
    atom = cfg.atom
    tcfg = _trajectory_config(cfg, record_events=False)
    b0 = initial_bloch(cfg.initial)
    s0 = state_from_bloch(b0)
    if cfg.workers > 1:
        records = run_ensemble(atom, s0, tcfg, cfg.n, workers=cfg.workers)
    else:
        records = iter_ensemble(atom, s0, tcfg, cfg.n)
    acc = EnsembleAccumulator()
    reports, n_events = [], 0
    for rec in records:
        acc.add(rec)
        reports.append(detect_jumps(rec, cfg.band))
        n_events += rec.n_events
    stats = acc.result()
    analytic = analytic_bloch_series(b0, stats.times, atom.omega, atom.gamma)
    dev = np.abs(stats.mean[:, 2] - analytic[:, 2])
    _write_csv(
        out / "bloch.csv", ["t", "u", "v", "w", "u_se", "v_se", "w_se"],
        [stats.times, *stats.mean.T, *stats.stderr.T],
    )
    summary = _base_summary(cfg)
    summary.update(
        scheme=tcfg.scheme,
        dt=tcfg.dt,
        seed=tcfg.seed,
        n=cfg.n,
        band=cfg.band,
        mean_event_rate=n_events / (cfg.n * cfg.t_final),
        max_abs_mean_w_deviation=float(dev.max()),
        fraction_within_tolerance=float(np.mean(dev <= ENSEMBLE_TOLERANCE)),
        tolerance=ENSEMBLE_TOLERANCE,
        fraction_within_3se=float(np.mean(dev <= 3 * stats.stderr[:, 2] + 1e-12)),
        statistics=pooled_jump_statistics(reports),
    )
    _write_plot(out / "plot.gp", f"ensemble mean of {cfg.n} trajectories",
                extra_series=", '' using 1:4:7 with yerrorbars pt 0 notitle")
    return _finish(out, summary)


def run(cfg: RunConfig) -> dict:
    """Execute ``cfg`` and write its artifacts; returns the summary dictionary."""
    cfg.validate()
    out = _prepare_out(cfg)
    if cfg.mode == MASTER:
        return run_master(cfg, out)
    if cfg.mode == TRAJECTORY:
        return run_single(cfg, out)
    if cfg.mode == ENSEMBLE:
        return run_ensemble_mode(cfg, out)
    return sweep(cfg, cfg.grid)


def _is_monotone(values) -> bool | None:
    vals = [v for v in values if v is not None]
    if len(vals) < 2:
        return None
    diffs = np.diff(vals)
    return bool(np.all(diffs >= 0) or np.all(diffs <= 0))


def sweep(cfg: RunConfig, grid) -> dict:
    """Master-equation and trajectory runs for every ``(R, p)`` grid point."""
    grid = [(float(r), float(p)) for r, p in grid]
    if not grid:
        raise ConfigurationError("grid: sweep needs at least one (R, p) point")
    base = dataclasses.replace(cfg, mode=TRAJECTORY, grid=[])
    base.validate()
    out = _prepare_out(dataclasses.replace(cfg, grid=grid))
    rows = []
    for i, (rate, p) in enumerate(grid):
        point_dir = out / f"point_{i:03d}"
        point = dataclasses.replace(base, rate=rate, p=p)
        master = run_master(dataclasses.replace(point, mode=MASTER), _prepare_out(
            dataclasses.replace(point, out=str(point_dir / "master"))))
        traj = run_single(point, _prepare_out(dataclasses.replace(point, out=str(point_dir / "trajectory"))))
        st = traj["statistics"]
        rows.append({
            "R": rate, "p": p, "gamma": master["gamma_recomputed"],
            "jump_rate": st["jump_rate"], "mean_dwell": st["mean_dwell"],
            "filament_rate": st["filament_rate"], "event_rate": traj["event_rate"],
        })
    header = ["R", "p", "gamma", "jump_rate", "mean_dwell", "filament_rate", "event_rate"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if row[h] is None else _fmt(row[h]) for h in header))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    by_p = sorted(rows, key=lambda r: r["p"])
    summary = {
        "software": {"package": "mmeq", "version": __version__},
        "mode": SWEEP,
        "points": rows,
        "seed": int(cfg.seed),
        "band": cfg.band,
        "t_final": cfg.t_final,
        "filament_rate_monotone_in_p": _is_monotone([r["filament_rate"] for r in by_p]),
    }
    if cfg.preset is not None:
        summary["preset"] = cfg.preset
    return _finish(out, summary)


def parse_grid(text: str) -> list[tuple[float, float]]:
    """Parse ``"R:p, R:p, ..."``."""
    points = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        try:
            r, p = item.split(":")
            points.append((float(r), float(p)))
        except ValueError as exc:
            raise ConfigurationError(f"grid: cannot parse point {item!r}; expected R:p") from exc
    return points


_FILE_FIELDS = {
    "run": {"mode": str, "preset": str, "seed": int, "out": str, "workers": int},
    "atom": {"p": float, "rate": float, "initial": str},
    "trajectory": {"t_final": float, "scheme": str, "dt": float, "sample_interval": float,
                   "n": int, "band": float},
    "sweep": {"grid": parse_grid},
}


def load_config_file(path) -> dict:
    """Read an INI-style run file into a flat ``{field: value}`` mapping."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read config file {path}")
    values = {}
    for section in parser.sections():
        if section not in _FILE_FIELDS:
            raise ConfigurationError(f"unknown section [{section}] in {path}")
        for key, raw in parser[section].items():
            key_norm = key.replace("-", "_")
            if key_norm not in _FILE_FIELDS[section]:
                raise ConfigurationError(f"{section}.{key}: unknown field")
            try:
                values[key_norm] = _FILE_FIELDS[section][key_norm](raw)
            except (ValueError, ConfigurationError) as exc:
                raise ConfigurationError(f"{section}.{key}: {exc}") from exc
    return values
