"""Per-frame orchestration, parameter validation and the command line.

Per frame: normalize -> mixture fit -> weighted flow -> metric transform
-> change thresholding -> lag buffer -> ICM layer models -> importance
subsample -> (optional CV) -> flow-constrained fit -> extrapolation ->
integration -> outputs.  Models trained at frame k are tested against
the vectors selected at frame k + lag; within a frame the sampled rows
split 75/25 into fit and validation parts.

Stage timings go to ``timings.csv``; that is the one output file that is
not reproducible bit-for-bit across runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import atmosphere, bemm, fieldviz, imaging, optflow, regression, selection, synth
from .errors import (
    ConfigError,
    DataError,
    IRWindError,
    NumericalFailure,
    SequenceError,
)
from .layers import fit_layers
from .sampling import build_training_set, layer_posteriors

log = logging.getLogger("irwind")

VAL_DELTA_GRID = (1.0, 2.29, 4.0)
VAL_TAU_GRID = (0.85, 0.95)
VAL_LAG_GRID = (3, 6)
VAL_NSTAR_GRID = (100, 200)


@dataclass
class PipelineConfig:
    """Flat configuration mirroring the key=value config file."""

    layer_count: int = 1
    mode: str = "fixed-params"  # or "online-cv"
    seed: int = 0
    lag: int = 6
    threshold_tau: float = 0.95
    n_samples: int = 200
    delta_scale: float = 2.29
    frame_rate_hz: float = 1.0 / 15.0
    fov_diag_deg: float = 60.0
    lapse_rate_k_per_m: float = 6.5e-3
    height_ceiling_m: float = 12_000.0
    wlk_window_area: float = 16.0
    wlk_window_side: int = 0  # 0 derives an odd side from the area
    wlk_tau_reg: float = 1e-8
    wlk_sigma: float = 1.0
    kernel: str = "linear"
    degree: int = 2
    c_reg: float = 38.50
    epsilon: float = 0.19
    gamma: float = 1.0
    beta_off: float = 1.0
    c_grid: tuple = regression.C_GRID
    eps_grid: tuple = regression.EPS_GRID
    gamma_grid: tuple = regression.GAMMA_GRID
    beta_grid: tuple = regression.BETA_GRID
    mu0: float = 1e-2
    mu_factor: float = 10.0
    mu_rounds: int = 4
    tol_flow: float = 1e-3
    penalty_step: int = 2
    solver_tol: float = 1e-6
    solver_max_iter: int = 200_000
    train_fraction: float = 0.75
    val_delta_grid: tuple = VAL_DELTA_GRID
    val_tau_grid: tuple = VAL_TAU_GRID
    val_lag_grid: tuple = VAL_LAG_GRID
    val_nstar_grid: tuple = VAL_NSTAR_GRID

    def __post_init__(self):
        if self.mode not in ("fixed-params", "online-cv"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.delta_scale <= 0 or not 0.0 <= self.threshold_tau < 1.0:
            raise ConfigError("require delta_scale > 0 and tau in [0, 1)")
        if self.lag < 1 or self.n_samples < self.layer_count:
            raise ConfigError("require lag >= 1 and n_samples >= layer_count")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")

    def wlk_params(self) -> optflow.WLKParams:
        if self.wlk_window_side:
            return optflow.WLKParams(
                window=self.wlk_window_side, tau_reg=self.wlk_tau_reg, sigma=self.wlk_sigma
            )
        return optflow.WLKParams.from_area(
            self.wlk_window_area, tau_reg=self.wlk_tau_reg, sigma=self.wlk_sigma
        )

    def kernel_spec(self) -> regression.KernelSpec:
        return regression.KernelSpec(
            kind=self.kernel, gamma=self.gamma, beta_off=self.beta_off, degree=self.degree
        )

    def schedule(self) -> regression.PenaltySchedule:
        return regression.PenaltySchedule(
            mu0=self.mu0, factor=self.mu_factor, rounds=self.mu_rounds, tol_flow=self.tol_flow
        )

    def solver_options(self) -> regression.SolverOptions:
        return regression.SolverOptions(tol=self.solver_tol, max_iter=self.solver_max_iter)


def parse_kv_file(path) -> list[tuple[str, str]]:
    """Flat key=value lines, ``#`` comments, repeats preserved."""
    pairs = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def _coerce(text: str, template):
    if isinstance(template, tuple):
        return tuple(float(v) for v in text.split(","))
    if isinstance(template, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    return text


def load_config(path) -> PipelineConfig:
    """Build a PipelineConfig from a flat key=value file."""
    defaults = PipelineConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(PipelineConfig)}
    values = {}
    for key, text in parse_kv_file(path):
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(text, known[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    if "val_lag_grid" in values:
        values["val_lag_grid"] = tuple(int(v) for v in values["val_lag_grid"])
    if "val_nstar_grid" in values:
        values["val_nstar_grid"] = tuple(int(v) for v in values["val_nstar_grid"])
    return PipelineConfig(**values)


@dataclass(frozen=True)
class GroundTruthStats:
    """Per-layer reference statistics, ordered highest layer first."""

    heights: np.ndarray
    speeds: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        if np.any(self.heights <= 0):
            raise ConfigError("truth heights must be positive")


def load_truth_stats(path) -> GroundTruthStats:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(rows[:, 0])
    rows = rows[order]
    return GroundTruthStats(heights=rows[:, 1], speeds=rows[:, 2], angles=rows[:, 3])


@dataclass
class FrameRecord:
    """Everything produced while processing one frame."""

    index: int
    fields: list  # FieldGrid per layer
    layer_mu: np.ndarray  # (C, 2)
    layer_cov: np.ndarray  # (C, 2, 2)
    heights: np.ndarray  # (C,)
    pred_stats: list  # (height, speed, angle) per layer
    val_mae: float
    val_wmae: float
    cv_calls: int
    timings: dict
    report: fieldviz.MetricsReport | None = None


@dataclass
class RunResult:
    records: list
    aggregate: fieldviz.MetricsReport
    cv_calls: int
    frames_processed: int
    frames_skipped: int
    mean_frame_seconds: float


def _frame_seed(seed: int, index: int, stage: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((seed, index, stage))


def _process_frame(config, prev, curr, mask, wx, buffer, warm_mixture):
    """Run all per-frame stages; returns (record, dataset rows, mixture)."""
    timings = {}
    t0 = time.perf_counter()
    shape = curr.shape
    lapse = atmosphere.LapseRateModel(gamma=config.lapse_rate_k_per_m)
    geom = atmosphere.GeometryModel(
        sun_elevation=curr.sun_elevation,
        sun_azimuth=curr.sun_azimuth,
        fov_diag=config.fov_diag_deg,
        frame_rate=config.frame_rate_hz,
        delta=config.delta_scale,
    )
    dims = atmosphere.pixel_dims(geom, shape)
    tbar = imaging.normalize(curr)
    height_grid = atmosphere.height_map(curr, wx, lapse)
    timings["prep"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mixture, gamma, _ = bemm.em_fit(tbar, config.layer_count, init=warm_mixture)
    if mask is None:
        mask = imaging.fallback_cloud_mask(tbar, height_grid, config.height_ceiling_m)
    layer_heights = bemm.layer_mean_heights(gamma, height_grid, mask)
    timings["bemm"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    i_prev = imaging.to_intensity(prev)
    i_curr = imaging.to_intensity(curr)
    flow = optflow.wlk_flow(i_prev, i_curr, gamma, config.wlk_params())
    u_ms, v_ms = atmosphere.transform_velocity(
        flow.u, flow.v, gamma, layer_heights, dims, geom
    )
    timings["flow"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    d = selection.diff_map(i_prev, i_curr)
    sel = selection.threshold_mask(d, config.threshold_tau)
    rows = selection.selected_vectors(sel, u_ms, v_ms)
    dataset = selection.push_and_collect(buffer, rows)
    timings["select"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    icm_seed = _frame_seed(config.seed, curr.index, 0).generate_state(1)[0]
    layer_models, _, hfit = fit_layers(
        dataset[:, 2:4], height_grid, mask, u_ms, v_ms, config.layer_count, seed=int(icm_seed)
    )
    mu = np.stack([l.mu_v for l in layer_models])
    cov = np.stack([l.cov_v for l in layer_models])
    ordered_heights = hfit.mean_heights
    timings["icm"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sample_seed = int(_frame_seed(config.seed, curr.index, 1).generate_state(1)[0])
    training = build_training_set(dataset, mu, cov, config.n_samples, seed=sample_seed)
    n_rows = training.coords.shape[0]
    split_rng = np.random.default_rng(_frame_seed(config.seed, curr.index, 2))
    perm = split_rng.permutation(n_rows)
    n_train = max(int(np.ceil(config.train_fraction * n_rows)), 2)
    train_idx, val_idx = perm[:n_train], perm[n_train:]
    timings["sample"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    options = config.solver_options()
    cv_calls = 0
    spec = config.kernel_spec()
    c_reg, epsilon = config.c_reg, config.epsilon
    if config.mode == "online-cv":
        z_cv = training.posteriors[train_idx].max(axis=1)
        cv = regression.cross_validate(
            training.coords[train_idx],
            training.velocities[train_idx],
            z_cv,
            kind=config.kernel,
            c_grid=config.c_grid,
            eps_grid=config.eps_grid,
            gamma_grid=config.gamma_grid,
            beta_grid=config.beta_grid,
            degree=config.degree,
            seed=int(_frame_seed(config.seed, curr.index, 3).generate_state(1)[0]),
            options=options,
        )
        cv_calls = 1
        spec, c_reg, epsilon = cv.spec, cv.c_reg, cv.epsilon
    timings["cv"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fields_out = []
    pred_stats = []
    val_scores = []
    for c in range(config.layer_count):
        z_c = training.posteriors[:, c]
        model = regression.solve_mo_wsvm_fc(
            training.coords[train_idx],
            training.velocities[train_idx],
            z_c[train_idx],
            c_reg,
            epsilon,
            spec,
            shape,
            schedule=config.schedule(),
            penalty_step=config.penalty_step,
            options=options,
        )
        u_grid, v_grid = regression.extrapolate(model, shape)
        grid = fieldviz.build_field(u_grid, v_grid, dims, float(ordered_heights[c]))
        fields_out.append(grid)
        pred_stats.append(fieldviz.field_stats(u_grid, v_grid, float(ordered_heights[c])))
        if val_idx.size:
            pred = regression.predict(model, training.coords[val_idx])
            val_scores.append(
                (
                    fieldviz.mae_rows(pred, training.velocities[val_idx]),
                    fieldviz.wmae_rows(pred, training.velocities[val_idx], z_c[val_idx]),
                )
            )
    timings["fit"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())

    val_mae, val_wmae = (map(float, np.mean(val_scores, axis=0)) if val_scores else (np.nan, np.nan))
    record = FrameRecord(
        index=curr.index,
        fields=fields_out,
        layer_mu=mu,
        layer_cov=cov,
        heights=np.asarray(ordered_heights, dtype=float),
        pred_stats=pred_stats,
        val_mae=float(val_mae) if val_scores else float("nan"),
        val_wmae=float(val_wmae) if val_scores else float("nan"),
        cv_calls=cv_calls,
        timings=timings,
    )
    return record, rows, mixture


def _test_metrics(record: FrameRecord, test_rows: np.ndarray):
    """Evaluate a frame's per-layer fields on lookahead rows (MAP-routed)."""
    post = layer_posteriors(test_rows[:, 2:4], record.layer_mu, record.layer_cov)
    labels = post.argmax(axis=1)
    z = post.max(axis=1)
    preds = np.empty((test_rows.shape[0], 2))
    for c, grid in enumerate(record.fields):
        sel = labels == c
        if sel.any():
            preds[sel] = fieldviz.sample_field(grid.u, grid.v, test_rows[sel, 0:2])
    mae = fieldviz.mae_rows(preds, test_rows[:, 2:4])
    wmae = fieldviz.wmae_rows(preds, test_rows[:, 2:4], z)
    return mae, wmae


def _frame_report(record: FrameRecord, test_rows, truth: GroundTruthStats | None):
    report = fieldviz.MetricsReport(runtime=record.timings.get("total", 0.0))
    report.div_sum = float(sum(np.abs(g.div).sum() for g in record.fields))
    report.curl_sum = float(sum(np.abs(g.curl).sum() for g in record.fields))
    if test_rows is not None and len(test_rows):
        report.mae, report.wmae = _test_metrics(record, test_rows)
    if truth is not None and len(truth.heights) >= len(record.pred_stats):
        mapes = [
            fieldviz.mape_stats(
                record.pred_stats[c],
                (float(truth.heights[c]), float(truth.speeds[c]), float(truth.angles[c])),
            )
            for c in range(len(record.pred_stats))
        ]
        report.mape_height, report.mape_speed, report.mape_angle = (
            float(np.mean([m[i] for m in mapes])) for i in range(3)
        )
    return report


def run_sequence(
    config: PipelineConfig,
    input_dir,
    output_dir=None,
    truth: GroundTruthStats | None = None,
) -> RunResult:
    """Process a sequence end to end; optionally write per-frame outputs.

    Frames failing with a data/numerical error are skipped and logged;
    more than half skipped aborts the run.
    """
    input_dir = Path(input_dir)
    frames, masks = imaging.load_sequence(input_dir)
    weather_path = input_dir / "weather.csv"
    if not weather_path.is_file():
        raise SequenceError(f"weather.csv missing in {input_dir}")
    weather = imaging.load_weather(weather_path)

    buffer = selection.LagBuffer(config.lag)
    records: dict[int, FrameRecord] = {}
    rows_by_frame: dict[int, np.ndarray] = {}
    warm_mixture = None
    skipped = 0
    for k in range(1, len(frames)):
        curr = frames[k]
        try:
            wx = imaging.interpolate_weather(weather, curr.timestamp)
            record, rows, warm_mixture = _process_frame(
                config,
                frames[k - 1],
                curr,
                masks[k] if masks is not None else None,
                wx,
                buffer,
                warm_mixture,
            )
        except (DataError, NumericalFailure) as exc:
            skipped += 1
            log.warning("frame %d skipped: %s", curr.index, exc)
            continue
        records[k] = record
        rows_by_frame[k] = rows
        log.info(
            "frame %d ok: %s",
            curr.index,
            " ".join(f"{name}={sec:.3f}s" for name, sec in record.timings.items()),
        )
    total = len(frames) - 1
    if total > 0 and skipped > 0.5 * total:
        raise SequenceError(f"{skipped}/{total} frames failed")

    for k, record in records.items():
        test_rows = rows_by_frame.get(k + config.lag)
        record.report = _frame_report(record, test_rows, truth)

    aggregate = _aggregate_reports([r.report for r in records.values()])
    result = RunResult(
        records=list(records.values()),
        aggregate=aggregate,
        cv_calls=sum(r.cv_calls for r in records.values()),
        frames_processed=len(records),
        frames_skipped=skipped,
        mean_frame_seconds=(
            float(np.mean([r.timings["total"] for r in records.values()]))
            if records
            else 0.0
        ),
    )
    if output_dir is not None:
        _write_outputs(Path(output_dir), result)
    return result


def _aggregate_reports(reports) -> fieldviz.MetricsReport:
    agg = fieldviz.MetricsReport()
    if not reports:
        return agg

    def mean_of(name):
        vals = [getattr(r, name) for r in reports if np.isfinite(getattr(r, name))]
        return float(np.mean(vals)) if vals else float("nan")

    for name in ("mae", "wmae", "div_sum", "curl_sum", "mape_height", "mape_speed", "mape_angle"):
        setattr(agg, name, mean_of(name))
    agg.runtime = float(sum(r.runtime for r in reports))
    return agg


def _write_outputs(out_dir: Path, result: RunResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for record in result.records:
        for c, grid in enumerate(record.fields):
            fieldviz.write_field_csv(out_dir / f"field_{record.index}_{c}.csv", grid)
        fieldviz.write_metrics(out_dir / f"metrics_{record.index}.json", record.report)
    fieldviz.write_metrics(out_dir / "aggregate.json", result.aggregate)
    # wall-clock timings: deliberately separate, not reproducible run-to-run
    with open(out_dir / "timings.csv", "w") as fh:
        fh.write("frame,stage,seconds\n")
        for record in result.records:
            for stage, sec in record.timings.items():
                fh.write(f"{record.index},{stage},{sec:.6f}\n")


@dataclass(frozen=True)
class ValidationResult:
    best: dict
    score: float
    table: tuple


def _sequence_mapes(result: RunResult) -> list[float]:
    mapes = []
    for record in result.records:
        r = record.report
        vals = [v for v in (r.mape_height, r.mape_speed, r.mape_angle) if np.isfinite(v)]
        if vals:
            mapes.append(float(np.mean(vals)))
    return mapes


def selection_score(mapes: list[float]) -> float:
    """Mean MAPE plus total difference of MAPE between consecutive frames."""
    if not mapes:
        return float("inf")
    arr = np.asarray(mapes)
    return float(arr.mean() + np.abs(np.diff(arr)).sum())


def validate_selection_params(
    config: PipelineConfig,
    sequences: list[tuple],
    delta_grid=None,
    tau_grid=None,
    lag_grid=None,
    nstar_grid=None,
    n_jobs: int = 1,
) -> ValidationResult:
    """Grid-search delta/tau/lag/n* on labelled validation sequences.

    ``sequences`` is a list of (sequence_dir, GroundTruthStats).  Ties
    resolve to the smaller lag, then the smaller sample budget.
    """
    if not sequences:
        raise ConfigError("no validation sequences given")
    delta_grid = config.val_delta_grid if delta_grid is None else delta_grid
    tau_grid = config.val_tau_grid if tau_grid is None else tau_grid
    lag_grid = config.val_lag_grid if lag_grid is None else lag_grid
    nstar_grid = config.val_nstar_grid if nstar_grid is None else nstar_grid
    if not (len(delta_grid) and len(tau_grid) and len(lag_grid) and len(nstar_grid)):
        raise ConfigError("empty validation grid")

    combos = [
        {"lag": int(lag), "n_samples": int(nstar), "delta_scale": float(d), "threshold_tau": float(t)}
        for lag in sorted(lag_grid)
        for nstar in sorted(nstar_grid)
        for d in sorted(delta_grid)
        for t in sorted(tau_grid)
    ]

    def evaluate(combo):
        cfg = replace(config, **combo)
        seq_scores = []
        for seq_dir, truth in sequences:
            result = run_sequence(cfg, seq_dir, output_dir=None, truth=truth)
            seq_scores.append(selection_score(_sequence_mapes(result)))
        return float(np.mean(seq_scores))

    if n_jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(evaluate, combos))
    else:
        scores = [evaluate(c) for c in combos]

    table = []
    best = None
    best_score = float("inf")
    for combo, score in zip(combos, scores):
        table.append({**combo, "score": score})
        if score < best_score:
            best, best_score = combo, score
    if best is None:
        raise ConfigError("validation produced no finite scores")
    return ValidationResult(best=best, score=best_score, table=tuple(table))


def _load_synth_spec(path, n_frames_cli=None, shape=(60, 80)) -> synth.SynthSpec:
    layers = []
    scalars = {}
    for key, value in parse_kv_file(path):
        if key == "layer":
            parts = [float(v) for v in value.split(",")]
            if len(parts) < 3:
                raise ConfigError(f"layer needs height,speed,angle, got {value!r}")
            defaults = [8.0, 10.0]
            parts = parts + defaults[len(parts) - 3 :]
            layers.append(
                synth.SynthLayer(
                    height_m=parts[0],
                    speed=parts[1],
                    angle_rad=parts[2],
                    texture_scale_px=parts[3],
                    contrast_k=parts[4],
                )
            )
        else:
            scalars[key] = value
    known = {
        "frames": int,
        "air_temp_k": float,
        "sky_temp_k": float,
        "sun_elevation_deg": float,
        "sun_azimuth_deg": float,
        "fov_diag_deg": float,
        "frame_rate_hz": float,
        "delta_scale": float,
        "lapse_rate_k_per_m": float,
    }
    kwargs = {}
    for key, value in scalars.items():
        if key not in known:
            raise ConfigError(f"unknown synth key {key!r}")
        kwargs["n_frames" if key == "frames" else key] = known[key](value)
    if n_frames_cli is not None:
        kwargs["n_frames"] = n_frames_cli
    return synth.SynthSpec(layers=tuple(layers), shape=shape, **kwargs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="irwind", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="process a sequence directory")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--input", required=True)
    p_run.add_argument("--output", required=True)
    p_run.add_argument("--mode", choices=("online-cv", "fixed-params"))
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--truth", help="optional ground-truth stats CSV")

    p_val = sub.add_parser("validate", help="grid-search selection parameters")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--input", required=True, nargs="+", help="sequence dirs with truth.csv")
    p_val.add_argument("--truth", help="truth CSV override (single sequence)")
    p_val.add_argument("--output", help="where to write validation.csv")

    p_syn = sub.add_parser("synth", help="generate a synthetic sequence")
    p_syn.add_argument("--spec", required=True)
    p_syn.add_argument("--output", required=True)
    p_syn.add_argument("--frames", type=int)
    p_syn.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.mode:
                config = replace(config, mode=args.mode)
            if args.seed is not None:
                config = replace(config, seed=args.seed)
            truth = load_truth_stats(args.truth) if args.truth else None
            result = run_sequence(config, args.input, args.output, truth=truth)
            print(
                f"processed {result.frames_processed} frames "
                f"({result.frames_skipped} skipped), cv_calls={result.cv_calls}, "
                f"mean {result.mean_frame_seconds:.3f}s/frame"
            )
        elif args.command == "validate":
            config = load_config(args.config)
            sequences = []
            for seq_dir in args.input:
                truth_path = Path(args.truth) if args.truth else Path(seq_dir) / "truth.csv"
                sequences.append((seq_dir, load_truth_stats(truth_path)))
            result = validate_selection_params(config, sequences)
            print(f"best: {result.best} score={result.score:.4f}")
            if args.output:
                out = Path(args.output)
                out.mkdir(parents=True, exist_ok=True)
                with open(out / "validation.csv", "w") as fh:
                    fh.write("lag,n_samples,delta_scale,threshold_tau,score\n")
                    for row in result.table:
                        fh.write(
                            f"{row['lag']},{row['n_samples']},{row['delta_scale']},"
                            f"{row['threshold_tau']},{fieldviz.format_sig(row['score'])}\n"
                        )
        else:
            spec = _load_synth_spec(args.spec, args.frames)
            out = synth.generate(spec, args.output, seed=args.seed)
            print(f"wrote {spec.n_frames} frames to {out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except IRWindError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
