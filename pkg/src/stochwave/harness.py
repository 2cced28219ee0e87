"""Experiment harness: configuration, named experiments, statistics, CSV.

Every acceptance property of the package is runnable as a named
experiment.  A run is deterministic given the master seed: random
streams are counter-based (Philox), keyed by

    SeedSequence(master_seed, spawn_key=(experiment_index, case_index,
                                         replica_index)),

with the experiment indices listed in ``EXPERIMENT_INDEX``; within one
stream, noise slices are drawn in time order.  Two runs of the same
experiment at replica offsets 0..a and a..b therefore draw exactly the
replicas of one run over 0..b, which is what makes result aggregation
exact rather than approximate.

Config files are INI-style (see ``parse_config``); results are CSV rows
(experiment, case, quantity, value, std_error, replicas, verdict) with
'.' decimals and no locale dependence.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .covariance import SpectralMeasure, admissibility_integral
from .greens import GreenMultiplier
from .lattice import Grid, LatticeField, l2_norm, write_field
from .noise import sample_path
from .solver import (
    Nonlinearity,
    SolveConfig,
    deterministic_part,
    energy_trajectory,
    explicit_sweep,
    moment_track,
    picard_iterate,
)
from .stochint import (
    IntegrandProcess,
    convolution_moment_mc,
    isometry_alternative,
    isometry_bound,
    isometry_functional,
    ladder_distance,
    truncation_distance,
)
from .weighted import (
    Weight,
    annuli_norms,
    equivalence_constants,
    weighted_isometry_bound,
    weighted_moment_track,
    weighted_wave_solve,
)

__all__ = [
    "EXPERIMENT_INDEX",
    "EXPERIMENT_CRITERIA",
    "ExperimentConfig",
    "Row",
    "ResultTable",
    "parse_config",
    "parse_config_file",
    "serialize_config",
    "replica_generator",
    "run",
    "aggregate",
    "list_experiments",
    "solve_report_csv",
]

EXPERIMENT_INDEX = {
    "admissibility": 0,
    "isometry": 1,
    "mollifier-ladder": 2,
    "picard": 3,
    "energy": 4,
    "support": 5,
    "weighted": 6,
    "refinement": 7,
}

EXPERIMENT_CRITERIA = {
    "admissibility": "admissibility verdicts match analytic thresholds",
    "isometry": "second-moment identity, modulation equivalence, bound chain",
    "mollifier-ladder": "smoothing and truncation ladders decrease to < 5%",
    "picard": "fixed-point agreement, contraction ratios, moment envelope",
    "energy": "noise-free spectral energy conservation",
    "support": "finite propagation speed with masked noise (k = 1, d = 1)",
    "weighted": "weight sandwich, shell equivalence, weighted bound, affine envelope",
    "refinement": "moment of time increments decreases under step halving",
}

DEFAULT_SEED = 20260810
OUTPUT_ENV_VAR = "STOCHWAVE_OUTPUT"


def replica_generator(master_seed: int, experiment: str, case_index: int,
                      replica_index: int) -> np.random.Generator:
    """Counter-based stream for one (experiment, case, replica) triple."""
    ss = np.random.SeedSequence(
        master_seed, spawn_key=(EXPERIMENT_INDEX[experiment], case_index, replica_index)
    )
    return np.random.Generator(np.random.Philox(ss))


def _replica_generators(cfg: "ExperimentConfig", case_index: int, count: int) -> list:
    off = cfg.replica_offset
    return [replica_generator(cfg.seed, cfg.name, case_index, off + r) for r in range(count)]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Typed view over the flat INI key tree; raw strings are canonical."""

    raw: dict

    def get(self, section: str, key: str, default=None) -> str | None:
        return self.raw.get(section, {}).get(key, default)

    def get_int(self, section: str, key: str, default: int) -> int:
        v = self.get(section, key)
        return default if v is None else int(v)

    def get_float(self, section: str, key: str, default: float) -> float:
        v = self.get(section, key)
        return default if v is None else float(v)

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        v = self.get(section, key)
        if v is None:
            return default
        if v.lower() in ("true", "yes", "1", "on"):
            return True
        if v.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"[{section}] {key}: cannot parse boolean from {v!r}")

    @property
    def name(self) -> str:
        return self.raw["experiment"]["name"]

    @property
    def seed(self) -> int:
        return self.get_int("experiment", "seed", DEFAULT_SEED)

    @property
    def replicas(self) -> int | None:
        v = self.get("experiment", "replicas")
        return None if v is None else int(v)

    @property
    def replica_offset(self) -> int:
        return self.get_int("experiment", "replica_offset", 0)

    @property
    def threads(self) -> int:
        return self.get_int("experiment", "threads", 1)

    @property
    def output_dir(self) -> Path:
        v = self.get("experiment", "output")
        if v is None:
            v = os.environ.get(OUTPUT_ENV_VAR, "results")
        return Path(v)

    @property
    def write_snapshots(self) -> bool:
        return self.get_bool("experiment", "snapshots", False)

    def override(self, **updates) -> "ExperimentConfig":
        raw = {s: dict(kv) for s, kv in self.raw.items()}
        raw.setdefault("experiment", {})
        for key, value in updates.items():
            if value is not None:
                raw["experiment"][key] = str(value)
        return ExperimentConfig(raw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment config.

    Schema (INI sections; unknown keys are preserved but unused):

    [experiment]  name (required, one of the registered experiments),
                  seed, replicas, replica_offset, threads, output,
                  snapshots (bool)
    [grid]        d, n, length
    [measure]     kind = white | riesz | radial-table, alpha, scale,
                  table_path, tail_exponent
    [green]       k, horizon
    [solver]      dt, nonlinearity = identity | sine | one-minus-exp |
                  affine, lipschitz, affine_a, affine_b, picard_tol,
                  picard_max_iter, snapshot_stride,
                  v0_kind = zero | gaussian | bump | wavepacket,
                  v0_amplitude, v0_width, v0_center, v0_mode,
                  v0_dot_kind, v0_dot_amplitude, v0_dot_width,
                  v0_dot_center, v0_dot_mode
    [weight]      exponent, radius
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc
    raw = {section: dict(parser.items(section)) for section in parser.sections()}
    cfg = ExperimentConfig(raw)
    if "experiment" not in raw or "name" not in raw["experiment"]:
        raise ValueError("malformed config: missing [experiment] name")
    if cfg.name not in EXPERIMENT_INDEX:
        raise ValueError(f"unknown experiment {cfg.name!r}; see list-experiments")
    if cfg.replicas is not None and cfg.replicas < 1:
        raise ValueError("[experiment] replicas: must be >= 1")
    _ = (cfg.threads, cfg.seed, cfg.replica_offset)  # force early type errors
    return cfg


def parse_config_file(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(x))) == parse(x)."""
    out = io.StringIO()
    for section in cfg.raw:
        out.write(f"[{section}]\n")
        for key, value in cfg.raw[section].items():
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# result rows
# ---------------------------------------------------------------------------


@dataclass
class Row:
    experiment: str
    case: str
    quantity: str
    value: float
    std_error: float | None
    replicas: int
    verdict: bool


_CSV_HEADER = ["experiment", "case", "quantity", "value", "std_error", "replicas", "verdict"]


@dataclass
class ResultTable:
    rows: list

    @property
    def all_pass(self) -> bool:
        return all(r.verdict for r in self.rows)

    def failing(self) -> list:
        return [r for r in self.rows if not r.verdict]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for r in self.rows:
            writer.writerow([
                r.experiment,
                r.case,
                r.quantity,
                repr(float(r.value)),
                "" if r.std_error is None else repr(float(r.std_error)),
                r.replicas,
                "pass" if r.verdict else "fail",
            ])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValueError("schema mismatch: unexpected CSV header")
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append(Row(
                experiment=rec[0],
                case=rec[1],
                quantity=rec[2],
                value=float(rec[3]),
                std_error=None if rec[4] == "" else float(rec[4]),
                replicas=int(rec[5]),
                verdict=rec[6] == "pass",
            ))
        return cls(rows)


def _pool(stats: list[tuple[float, float, int]]) -> tuple[float, float, int]:
    """Exact pooling of (mean, std error, count) groups.

    Sums of squares are reconstructed from each group's moments, so the
    pooled statistics equal a single run over the union of replicas up
    to floating-point associativity.
    """
    stats = sorted(stats, key=lambda s: (s[2], s[0], s[1]))
    total_n = sum(s[2] for s in stats)
    mean = sum(s[2] * s[0] for s in stats) / total_n
    ss = 0.0
    for m, se, n in stats:
        sd_sq = (se * math.sqrt(n)) ** 2 if n > 1 else 0.0
        ss += (n - 1) * sd_sq + n * m * m
    if total_n > 1:
        var = max(ss - total_n * mean * mean, 0.0) / (total_n - 1)
        se = math.sqrt(var / total_n)
    else:
        se = 0.0
    return mean, se, total_n


def aggregate(tables: list[ResultTable]) -> ResultTable:
    """Merge result tables: replica-weighted pooling of MC rows.

    Groups rows by (experiment, case, quantity); Monte Carlo rows
    (std_error present) pool exactly; deterministic rows keep their
    value (which must agree across tables) with AND-combined verdicts.
    The reduction is canonicalized by sorting, so the merge is
    associative and commutative.
    """
    groups: dict[tuple, list[Row]] = {}
    order: list[tuple] = []
    for table in tables:
        for row in table.rows:
            key = (row.experiment, row.case, row.quantity)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(row)
    order.sort()
    merged = []
    for key in order:
        rows = groups[key]
        verdict = all(r.verdict for r in rows)
        mc = [r for r in rows if r.std_error is not None]
        if mc:
            mean, se, n = _pool([(r.value, r.std_error, r.replicas) for r in mc])
            merged.append(Row(*key, value=mean, std_error=se, replicas=n, verdict=verdict))
        else:
            values = {repr(r.value) for r in rows}
            if len(values) > 1:
                raise ValueError(f"deterministic rows disagree for {key}: {sorted(values)}")
            merged.append(replace(rows[0], verdict=verdict))
    return ResultTable(merged)


def _map_indexed(fn, count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def solve_report_csv(report, summary=None) -> str:
    """Trajectory CSV for one solve: t, iteration, m_n, moment, band, space.

    Iteration 0 rows carry the moment trajectory (the Monte Carlo band
    3 s.e. when a pooled summary is given, empty otherwise); iteration
    n >= 1 rows carry the squared update distances of the n-th Picard
    sweep at each step time.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "iteration", "m_n", "moment", "band", "space"])
    moments = summary.mean if summary is not None else report.moments
    bands = 3.0 * summary.std_error if summary is not None else None
    for j, t in enumerate(report.times):
        writer.writerow([repr(float(t)), 0, "", repr(float(moments[j])),
                         "" if bands is None else repr(float(bands[j])), report.space])
    for n, dist_sq in enumerate(report.m_table, start=1):
        for j, t in enumerate(report.times):
            writer.writerow([repr(float(t)), n, repr(float(dist_sq[j])), "", "", report.space])
    return out.getvalue()


# ---------------------------------------------------------------------------
# config-driven object builders
# ---------------------------------------------------------------------------


def _build_grid(cfg: ExperimentConfig, d: int, n: int, length: float) -> Grid:
    return Grid(
        cfg.get_int("grid", "d", d),
        cfg.get_int("grid", "n", n),
        cfg.get_float("grid", "length", length),
    )


def _build_measure(cfg: ExperimentConfig, d: int) -> SpectralMeasure:
    kind = cfg.get("measure", "kind", "white")
    scale = cfg.get_float("measure", "scale", 1.0)
    if kind == "white":
        return SpectralMeasure.white(d, scale=scale)
    if kind == "riesz":
        return SpectralMeasure.riesz(d, cfg.get_float("measure", "alpha", 0.5), scale=scale)
    if kind == "radial-table":
        path = cfg.get("measure", "table_path")
        if path is None:
            raise ValueError("[measure] table_path required for radial-table")
        data = np.loadtxt(path, delimiter=",")
        tail = cfg.get("measure", "tail_exponent")
        return SpectralMeasure.radial_table(
            d, data[:, 0], data[:, 1],
            tail_exponent=None if tail is None else float(tail), scale=scale)
    raise ValueError(f"unknown measure kind {kind!r}")


def _build_nonlinearity(cfg: ExperimentConfig, default: str = "sine") -> Nonlinearity:
    name = cfg.get("solver", "nonlinearity", default)
    if name == "identity":
        return Nonlinearity.identity()
    if name == "sine":
        return Nonlinearity.sine()
    if name == "one-minus-exp":
        return Nonlinearity.one_minus_exp()
    if name == "affine":
        return Nonlinearity.affine(
            cfg.get_float("solver", "affine_a", 0.0),
            cfg.get_float("solver", "affine_b", 1.0),
        )
    raise ValueError(f"unknown nonlinearity {name!r}")


def _initial_field(grid: Grid, kind: str, amplitude: float, width: float,
                   center: float, mode: float) -> LatticeField:
    if kind == "zero":
        return LatticeField.zeros(grid)
    shifted_sq = np.zeros(grid.shape)
    for ax in range(grid.dimension):
        coord = grid._axis_array(grid.axis_coords, ax)
        shifted_sq = shifted_sq + (coord - (center if ax == 0 else 0.0)) ** 2
    if kind == "gaussian":
        return LatticeField(grid, amplitude * np.exp(-shifted_sq / width**2))
    if kind == "bump":
        r_sq = shifted_sq / width**2
        vals = np.zeros(grid.shape)
        inside = r_sq < 1.0
        vals[inside] = amplitude * np.exp(-1.0 / (1.0 - r_sq[inside]))
        return LatticeField(grid, vals)
    if kind == "wavepacket":
        x0 = grid._axis_array(grid.axis_coords, 0) - center
        env = amplitude * np.exp(-shifted_sq / width**2)
        return LatticeField(grid, env * np.cos(mode * (x0 + np.zeros(grid.shape))))
    raise ValueError(f"unknown initial-field kind {kind!r}")


def _build_initial(cfg: ExperimentConfig, grid: Grid, prefix: str, kind: str,
                   amplitude: float, width: float, center: float = 0.0,
                   mode: float = 0.0) -> LatticeField:
    return _initial_field(
        grid,
        cfg.get("solver", f"{prefix}_kind", kind),
        cfg.get_float("solver", f"{prefix}_amplitude", amplitude),
        cfg.get_float("solver", f"{prefix}_width", width),
        cfg.get_float("solver", f"{prefix}_center", center),
        cfg.get_float("solver", f"{prefix}_mode", mode),
    )


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _exp_admissibility(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    rows = []
    dims = (1, 2, 3, 4)
    orders = (1, 2)
    alphas = [0.5 * j for j in range(1, 8)]
    for d in dims:
        for k in orders:
            report = admissibility_integral(SpectralMeasure.white(d), k)
            expected = d < 2 * k
            rows.append(Row("admissibility", f"white-d{d}-k{k}", "integral",
                            report.value, None, 0, report.finite == expected))
    for d in dims:
        for alpha in alphas:
            if not alpha < d:
                continue
            for k in orders:
                report = admissibility_integral(SpectralMeasure.riesz(d, alpha), k)
                expected = alpha < 2 * k
                rows.append(Row("admissibility", f"riesz{alpha}-d{d}-k{k}", "integral",
                                report.value, None, 0, report.finite == expected))
    return rows


_ISOMETRY_CASES = [
    ("white-d1-k1", "white", None, 1, 1),
    ("white-d1-k2", "white", None, 1, 2),
    ("white-d2-k2", "white", None, 2, 2),
    ("riesz0.5-d1-k1", "riesz", 0.5, 1, 1),
    ("riesz1.0-d2-k1", "riesz", 1.0, 2, 1),
    ("riesz1.5-d2-k2", "riesz", 1.5, 2, 2),
]


def _exp_isometry(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    replicas = cfg.replicas or 1000
    n = cfg.get_int("grid", "n", 64)
    length = cfg.get_float("grid", "length", 16.0)
    horizon, steps = 0.5, 8
    dt = horizon / steps
    rows = []
    for case_index, (case, kind, alpha, d, k) in enumerate(_ISOMETRY_CASES):
        grid = Grid(d, n, length)
        measure = SpectralMeasure.white(d) if kind == "white" else SpectralMeasure.riesz(d, alpha)
        g = GreenMultiplier(k, horizon)
        z_vals = np.exp(-grid.coord_norm_sq)
        Z = IntegrandProcess.constant(grid, z_vals, steps, dt)

        ival = isometry_functional(g, Z, measure)
        ialt = isometry_alternative(g, Z, measure)
        itil = isometry_bound(g, Z, measure)
        rngs = _replica_generators(cfg, case_index, replicas)
        mc, se = convolution_moment_mc(g, Z, measure, replicas, rngs)

        dev = abs(mc - ival) / se if se > 0 else 0.0
        alt_rel = abs(ialt - ival) / ival
        excess = itil - ival
        rows.append(Row("isometry", case, "functional", ival, None, 0, True))
        rows.append(Row("isometry", case, "bound", itil, None, 0, True))
        rows.append(Row("isometry", case, "mc_moment", mc, se, replicas, dev <= 3.0))
        rows.append(Row("isometry", case, "mc_deviation_se", dev, None, 0, dev <= 3.0))
        rows.append(Row("isometry", case, "alternative_rel_err", alt_rel, None, 0, alt_rel <= 1e-8))
        rows.append(Row("isometry", case, "bound_excess", excess, None, 0,
                        excess >= -1e-12 * max(ival, 1.0)))
        if kind == "white":
            eq_rel = abs(itil - ival) / ival
            rows.append(Row("isometry", case, "white_equality_rel", eq_rel, None, 0,
                            eq_rel <= 1e-12))
    return rows


def _exp_mollifier_ladder(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    grid = _build_grid(cfg, 1, 512, 48.0)
    measure = _build_measure(cfg, grid.dimension)
    g = GreenMultiplier(cfg.get_int("green", "k", 1), 1.0)
    steps, dt = 4, 0.25
    Z = IntegrandProcess.constant(grid, np.exp(-grid.coord_norm_sq / 2.0), steps, dt)
    scales = (1, 2, 4, 8, 16)

    rows = []
    green_ladder = [ladder_distance(g, s, Z, measure) for s in scales]
    trunc_ladder = [truncation_distance(g, Z, measure, float(s)) for s in scales]
    for name, ladder in (("green", green_ladder), ("truncation", trunc_ladder)):
        for s, val in zip(scales, ladder):
            rows.append(Row("mollifier-ladder", name, f"distance_n{s}", val, None, 0, True))
        monotone = all(a > b for a, b in zip(ladder, ladder[1:]))
        ratio = ladder[-1] / ladder[0]
        rows.append(Row("mollifier-ladder", name, "strictly_decreasing",
                        1.0 if monotone else 0.0, None, 0, monotone))
        rows.append(Row("mollifier-ladder", name, "final_over_initial", ratio, None, 0,
                        ratio < 0.05))
    return rows


def _picard_config(cfg: ExperimentConfig) -> SolveConfig:
    grid = _build_grid(cfg, 1, 128, 16.0)
    measure = _build_measure(cfg, grid.dimension)
    v0 = _build_initial(cfg, grid, "v0", "wavepacket", 1.0, 2.0, mode=2.0)
    v0_dot_kind = cfg.get("solver", "v0_dot_kind", "zero")
    v0_dot = None if v0_dot_kind == "zero" else _build_initial(cfg, grid, "v0_dot", v0_dot_kind, 1.0, 1.0)
    return SolveConfig(
        grid=grid,
        measure=measure,
        k=cfg.get_int("green", "k", 1),
        horizon=cfg.get_float("green", "horizon", 1.0),
        dt=cfg.get_float("solver", "dt", 1.0 / 128.0),
        nonlinearity=_build_nonlinearity(cfg, "sine"),
        v0=v0,
        v0_dot=v0_dot,
        picard_tol=cfg.get_float("solver", "picard_tol", 1e-13),
        snapshot_stride=1,
    )


def _exp_picard(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    solve_cfg = _picard_config(cfg)
    grid, measure = solve_cfg.grid, solve_cfg.measure
    rows = []

    # fixed-point agreement and uniqueness surrogate on one fixed path
    path = sample_path(grid, measure, solve_cfg.horizon, solve_cfg.dt,
                       replica_generator(cfg.seed, "picard", 0, cfg.replica_offset))
    sweep = explicit_sweep(solve_cfg, path)
    pic = picard_iterate(solve_cfg, path)
    pic0 = picard_iterate(solve_cfg, path, initial="zero")
    gap = max(l2_norm(sweep.snapshot_at(j) - pic.snapshot_at(j)) for j in sweep.snapshots)
    gap0 = max(l2_norm(pic0.snapshot_at(j) - pic.snapshot_at(j)) for j in pic.snapshots)
    rows.append(Row("picard", "fixed-point", "sweep_vs_picard_sup", gap, None, 0, gap <= 1e-10))
    rows.append(Row("picard", "fixed-point", "two_guess_gap", gap0, None, 0, gap0 <= 1e-10))
    rows.append(Row("picard", "fixed-point", "picard_iterations", float(pic.iterations),
                    None, 0, pic.converged))

    # contraction-ratio decay of the replica-averaged squared distances
    ratio_replicas = cfg.get_int("experiment", "ratio_replicas", 20)
    fixed_iters = 10
    ratio_cfg = replace(solve_cfg, picard_tol=0.0, picard_max_iter=fixed_iters)

    def _table(r: int) -> np.ndarray:
        p = sample_path(grid, measure, solve_cfg.horizon, solve_cfg.dt,
                        replica_generator(cfg.seed, "picard", 1, cfg.replica_offset + r))
        rep = picard_iterate(ratio_cfg, p)
        return np.array([m[-1] for m in rep.m_table])

    tables = _map_indexed(_table, ratio_replicas, cfg.threads)
    mbar = np.mean(np.stack(tables), axis=0)
    floor = 1e-20 * mbar[0]
    usable = [i for i in range(len(mbar)) if mbar[i] > floor]
    ratios = [mbar[i] / mbar[i - 1] for i in usable[1:]]
    monotone = all(a > b for a, b in zip(ratios, ratios[1:])) and len(ratios) >= 3
    for i, r in enumerate(ratios):
        rows.append(Row("picard", "contraction", f"mhat_ratio_{i + 1}", r, None, 0, True))
    rows.append(Row("picard", "contraction", "ratios_decreasing",
                    1.0 if monotone else 0.0, None, 0, monotone))

    # moment envelope
    replicas = cfg.replicas or 100
    moment_cfg = replace(solve_cfg, snapshot_stride=10**9)

    def _moments(r: int):
        p = sample_path(grid, measure, solve_cfg.horizon, solve_cfg.dt,
                        replica_generator(cfg.seed, "picard", 2, cfg.replica_offset + r))
        return explicit_sweep(moment_cfg, p)

    reports = _map_indexed(_moments, replicas, cfg.threads)
    summary = moment_track(reports, moment_cfg)
    t_index = len(summary.times) - 1
    rows.append(Row("picard", "moment", "moment_at_T", summary.mean[t_index],
                    summary.std_error[t_index], replicas, summary.within_envelope))
    excess = np.max(summary.mean - summary.envelope - 3.0 * summary.std_error)
    rows.append(Row("picard", "moment", "envelope_excess", float(excess), None, 0,
                    summary.within_envelope))
    (out_dir / "picard_trajectory.csv").write_text(solve_report_csv(pic, summary))
    return rows


def _exp_energy(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    rows = []
    grid = _build_grid(cfg, 1, 128, 16.0)
    steps = cfg.get_int("solver", "steps", 256)
    horizon = cfg.get_float("green", "horizon", 1.0)
    v0 = _build_initial(cfg, grid, "v0", "gaussian", 1.0, 1.0)
    v0_dot = _build_initial(cfg, grid, "v0_dot", "gaussian", 0.3, 1.4, center=1.0)
    for k in (1, 2):
        solve_cfg = SolveConfig(
            grid=grid, measure=SpectralMeasure.white(grid.dimension), k=k,
            horizon=horizon, dt=horizon / steps,
            nonlinearity=Nonlinearity.affine(0.0, 0.0), v0=v0, v0_dot=v0_dot,
        )
        energy = energy_trajectory(solve_cfg)
        drift = float((energy.max() - energy.min()) / energy.mean())
        rows.append(Row("energy", f"k{k}", "energy_rel_drift", drift, None, 0, drift <= 1e-10))
    return rows


def _exp_support(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    grid = _build_grid(cfg, 1, 512, 16.0)
    h = grid.spacing
    measure = _build_measure(cfg, 1)
    v0 = _build_initial(cfg, grid, "v0", "bump", 1.0, 1.0)
    mask = (np.sqrt(grid.coord_norm_sq) <= 1.0).astype(float)
    solve_cfg = SolveConfig(
        grid=grid, measure=measure, k=1,
        horizon=cfg.get_float("green", "horizon", 1.0), dt=h,
        nonlinearity=_build_nonlinearity(cfg, "sine"), v0=v0,
        noise_mask=mask, snapshot_stride=1, support_radius_hint=1.0,
    )
    path = sample_path(grid, measure, solve_cfg.horizon, h,
                       replica_generator(cfg.seed, "support", 0, cfg.replica_offset))
    report = explicit_sweep(solve_cfg, path)
    radius = np.sqrt(grid.coord_norm_sq)
    worst = 0.0
    for j, fld in report.snapshots.items():
        outside = radius > 1.0 + j * solve_cfg.dt + 2.0 * h
        if np.any(outside):
            worst = max(worst, float(np.abs(fld.values[outside]).max()))
    if cfg.write_snapshots:
        with open(out_dir / "support_final.field", "wb") as fh:
            write_field(report.snapshot_at(solve_cfg.steps), fh)
    inside_scale = float(np.abs(report.snapshot_at(solve_cfg.steps).values).max())
    return [
        Row("support", "wave-d1", "max_outside_cone", worst, None, 0, worst <= 1e-10),
        Row("support", "wave-d1", "inside_scale", inside_scale, None, 0, inside_scale > 0.0),
    ]


def _exp_weighted(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    rows = []
    grid = _build_grid(cfg, 1, 256, 16.0)
    d = grid.dimension
    w = Weight(cfg.get_float("weight", "exponent", float(d + 1)),
               cfg.get_float("weight", "radius", 1.0))
    theta = w.theta_on(grid)

    # pointwise sandwich with the exact constants: base = 1 and |x|**(-K)
    radius = np.sqrt(grid.coord_norm_sq)
    base = np.ones(grid.shape)
    far = radius > 1.0
    base[far] = radius[far] ** (-w.exponent)
    lower_ok = np.all(theta >= w.sandwich_lower * base * (1.0 - 1e-12))
    upper_ok = np.all(theta <= w.sandwich_upper * base * (1.0 + 1e-12))
    rows.append(Row("weighted", "sandwich", "pointwise_ok",
                    1.0 if (lower_ok and upper_ok) else 0.0, None, 0,
                    bool(lower_ok and upper_ok)))

    # shell equivalence on random fields with the computed discrete constants
    c_disc, big_c = equivalence_constants(grid, w)
    rng = replica_generator(cfg.seed, "weighted", 0, cfg.replica_offset)
    n_fields = cfg.get_int("experiment", "equivalence_fields", 50)
    violations = 0
    for _ in range(n_fields):
        f = LatticeField(grid, rng.standard_normal(grid.shape))
        wn_sq = grid.cell_volume * float(np.sum(f.values**2 * theta))
        shells = annuli_norms(f, w)
        weights_n = np.array([float(max(n, 1)) ** (-w.exponent) for n in range(shells.size)])
        shell_sum = float(np.sum(weights_n * shells))
        if not (c_disc * shell_sum <= wn_sq * (1.0 + 1e-12)
                and wn_sq <= big_c * shell_sum * (1.0 + 1e-12)):
            violations += 1
    rows.append(Row("weighted", "equivalence", "violations", float(violations), None, 0,
                    violations == 0))
    rows.append(Row("weighted", "equivalence", "lower_constant", c_disc, None, 0, True))
    rows.append(Row("weighted", "equivalence", "upper_constant", big_c, None, 0, True))

    # weighted second-moment bound, ball-supported integrand
    replicas = cfg.replicas or 1000
    steps, horizon = 8, 1.0
    g = GreenMultiplier(1, horizon)
    ball = (np.sqrt(grid.coord_norm_sq) <= 1.0).astype(float)
    Z = IntegrandProcess.constant(grid, ball, steps, horizon / steps)
    measure = _build_measure(cfg, d)
    rngs = _replica_generators(cfg, 1, replicas)
    res = weighted_isometry_bound(g, Z, measure, w, replicas, rngs)
    rows.append(Row("weighted", "moment-bound", "quadrature_bound", res.bound, None, 0, True))
    rows.append(Row("weighted", "moment-bound", "mc_moment", res.mc_estimate, res.std_error,
                    replicas, res.within))
    rows.append(Row("weighted", "moment-bound", "locality_constant", res.locality, None, 0, True))

    # linear-growth solver (alpha does not vanish at zero) under its envelope
    solver_replicas = cfg.get_int("experiment", "envelope_replicas", 100)
    v0 = _build_initial(cfg, grid, "v0", "wavepacket", 1.0, 2.0, mode=1.0)
    solve_cfg = SolveConfig(
        grid=grid, measure=measure, k=1, horizon=1.0,
        dt=cfg.get_float("solver", "dt", 1.0 / 64.0),
        nonlinearity=_build_nonlinearity(cfg, "affine"), v0=v0,
        snapshot_stride=10**9,
    )

    def _solve(r: int):
        p = sample_path(grid, measure, solve_cfg.horizon, solve_cfg.dt,
                        replica_generator(cfg.seed, "weighted", 2, cfg.replica_offset + r))
        return weighted_wave_solve(solve_cfg, p, w)

    reports = _map_indexed(_solve, solver_replicas, cfg.threads)
    summary = weighted_moment_track(reports, solve_cfg, w)
    t_index = len(summary.times) - 1
    rows.append(Row("weighted", "linear-growth", "moment_at_T", summary.mean[t_index],
                    summary.std_error[t_index], solver_replicas, summary.within_envelope))
    excess = float(np.max(summary.mean - summary.envelope - 3.0 * summary.std_error))
    rows.append(Row("weighted", "linear-growth", "envelope_excess", excess, None, 0,
                    summary.within_envelope))
    (out_dir / "weighted_trajectory.csv").write_text(solve_report_csv(reports[0], summary))
    return rows


def _exp_refinement(cfg: ExperimentConfig, out_dir: Path) -> list[Row]:
    grid = _build_grid(cfg, 1, 64, 16.0)
    measure = _build_measure(cfg, grid.dimension)
    v0 = _build_initial(cfg, grid, "v0", "gaussian", 1.0, 1.0)
    t0 = cfg.get_float("experiment", "base_time", 0.5)
    dts = [1.0 / 16.0 / 2**level for level in range(4)]
    replicas = cfg.replicas or 100
    rows = []
    means = []
    for level, dt in enumerate(dts):
        horizon = t0 + dt
        solve_cfg = SolveConfig(
            grid=grid, measure=measure, k=1, horizon=horizon, dt=dt,
            nonlinearity=_build_nonlinearity(cfg, "sine"), v0=v0, snapshot_stride=1,
        )
        j0 = int(round(t0 / dt))

        def _increment(r: int) -> float:
            p = sample_path(grid, measure, horizon, dt,
                            replica_generator(cfg.seed, "refinement", level,
                                              cfg.replica_offset + r))
            rep = explicit_sweep(solve_cfg, p)
            return l2_norm(rep.snapshot_at(j0 + 1) - rep.snapshot_at(j0)) ** 2

        vals = np.array(_map_indexed(_increment, replicas, cfg.threads))
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(replicas))
        means.append(mean)
        rows.append(Row("refinement", f"dt_1over{int(round(1 / dt))}", "increment_moment",
                        mean, se, replicas, True))
    monotone = all(a > b for a, b in zip(means, means[1:]))
    rows.append(Row("refinement", "summary", "decreasing_under_halving",
                    1.0 if monotone else 0.0, None, 0, monotone))
    return rows


_EXPERIMENTS = {
    "admissibility": _exp_admissibility,
    "isometry": _exp_isometry,
    "mollifier-ladder": _exp_mollifier_ladder,
    "picard": _exp_picard,
    "energy": _exp_energy,
    "support": _exp_support,
    "weighted": _exp_weighted,
    "refinement": _exp_refinement,
}


def list_experiments() -> list[str]:
    return list(EXPERIMENT_INDEX)


def run(cfg: ExperimentConfig, out_dir: Path | None = None) -> ResultTable:
    """Execute one experiment and write its CSV into the output directory."""
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    table = ResultTable(_EXPERIMENTS[cfg.name](cfg, out))
    (out / f"{cfg.name}.csv").write_text(table.to_csv())
    return table
