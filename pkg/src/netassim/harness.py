"""Experiment orchestration: config ingestion, deterministic seed
derivation, parallel (size, replication) grids, CSV/JSON persistence, CLI.

Seed discipline: the stream for a unit of work is
``derive_stream(base_seed, [kind_code, n, rep])``; every piece of
randomness inside the unit comes from substreams of it.  Results are
collected and written in canonical row order, so the emitted files are
byte-identical across reruns and across ``--threads`` settings.  The
``wall_ms`` column is reserved (always 0) to keep result files
deterministic; measured timings go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assimilate import EnkfConfig, enkf_run, grid_minimize, noisy_observe
from .core import HyperBox, HyperParams, ObservationSeries, derive_stream
from .metrics import final_rae, loglog_slope, rae, rrmse, spearman
from .sis import H_GAMMA, H_LAMBDA, SisSimulator, sis_model_factory
from .snn import G_NMDA_MEAN, SnnConstants, SnnModelConfig, SnnSimulator, snn_model_factory

KIND_CODES = {"identifiability": 1, "scaling": 2, "rate": 3, "simulate": 4}

_TAG_TRUTH = 601
_TAG_OBS = 602
_TAG_FILTER = 603
_TAG_MINIMIZE = 605
_TAG_SUPDEV = 606

CSV_HEADER = "experiment,model,n,rep,seed,metric,value,wall_ms"
SCHEMA_LINE = "# schema_version=1"

_ENKF_KEYS = {"m", "R", "inflation", "prior_mean", "prior_std", "clip"}
_CONFIG_KEYS = {
    "kind", "model", "truth", "box", "sizes", "reps", "T", "base_seed", "enkf",
    "noise_sigma", "out_dir", "p_init", "D", "e_fraction", "dt", "alpha",
    "record_every_ms", "amplitudes", "n", "resolution", "replicates",
    "scaling_csv", "raster", "graph_model",
}

_R_FLOOR = {"sis": 1e-6, "snn": 1e-2}
_DEFAULT_M = {"sis": 100, "snn": 40}


class ConfigError(ValueError):
    """Invalid experiment configuration (field-level message)."""


@dataclass
class ExperimentConfig:
    kind: str
    model: str = "sis"
    truth: dict[str, float] | None = None
    box: dict[str, list[float]] | None = None
    sizes: list[int] | None = None
    reps: int = 10
    T: int | None = None
    base_seed: int = 0
    enkf: dict | None = None
    noise_sigma: float | None = None
    out_dir: str = "results"
    p_init: float = 0.1
    D: int = 10
    e_fraction: float = 0.8
    dt: float = 0.1
    alpha: float = 5.0
    record_every_ms: float = 1.0
    amplitudes: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.3, 0.5])
    n: int = 1000
    resolution: int = 301
    replicates: int = 2
    scaling_csv: str | None = None
    raster: bool = False
    graph_model: str = "fixed"

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ConfigError(f"kind: expected one of {sorted(KIND_CODES)}, got {self.kind!r}")
        if self.model not in ("sis", "snn", "synthetic"):
            raise ConfigError(f"model: expected 'sis', 'snn' or 'synthetic', got {self.model!r}")
        if self.model == "synthetic" and self.kind != "rate":
            raise ConfigError("model: 'synthetic' is only valid for kind 'rate'")
        if self.truth is None:
            self.truth = dict(_default_truth(self.model))
        if self.noise_sigma is None:
            self.noise_sigma = 0.1 if self.kind == "rate" else 0.0
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma: must be nonnegative")
        if self.T is None:
            self.T = {"sis": 1500, "snn": 4000, "synthetic": 8}[self.model]
        if self.T < 1:
            raise ConfigError("T: must be >= 1")
        if self.reps < 1:
            raise ConfigError("reps: must be >= 1")
        if self.sizes is None and self.kind in ("scaling", "rate"):
            self.sizes = [100, 400, 1600, 6400] if self.kind == "rate" else [400, 800, 1600, 3200]
        if self.sizes is not None:
            if len(self.sizes) == 0:
                raise ConfigError("sizes: must be nonempty")
            if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
                raise ConfigError("sizes: must be strictly increasing")
        if self.box is None:
            label = _estimated_label(self.model)
            center = self.truth[label]
            self.box = {label: [center / 4.0, center * 4.0]}
        for label, bounds in self.box.items():
            if len(bounds) != 2 or not bounds[0] < bounds[1]:
                raise ConfigError(f"box[{label}]: need [lower, upper] with lower < upper")
        if not 0.0 <= self.p_init <= 1.0:
            raise ConfigError("p_init: must lie in [0, 1]")
        if self.D < 1:
            raise ConfigError("D: must be >= 1")
        if not 0.0 < self.e_fraction < 1.0:
            raise ConfigError("e_fraction: must lie strictly inside (0, 1)")
        if self.dt <= 0:
            raise ConfigError("dt: must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha: must be positive")
        if self.graph_model not in ("fixed", "bernoulli"):
            raise ConfigError(f"graph_model: expected 'fixed' or 'bernoulli', got {self.graph_model!r}")
        if self.enkf is not None:
            unknown = set(self.enkf) - _ENKF_KEYS
            if unknown:
                raise ConfigError(f"enkf: unknown keys {sorted(unknown)}")
        if self.kind == "identifiability":
            if any(a < 0 for a in self.amplitudes):
                raise ConfigError("amplitudes: must be nonnegative")


def _default_truth(model: str) -> dict[str, float]:
    if model == "sis":
        return {H_GAMMA: 0.0015, H_LAMBDA: 0.0025}
    if model == "snn":
        return {G_NMDA_MEAN: 4.86e-6}
    return {"h0": 1.0}


def _estimated_label(model: str) -> str:
    return {"sis": H_GAMMA, "snn": G_NMDA_MEAN, "synthetic": "h0"}[model]


def _no_duplicates_hook(pairs):
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        dup = sorted({k for k in keys if keys.count(k) > 1})
        raise ConfigError(f"duplicated key(s) in config: {dup}")
    return dict(pairs)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    Unknown keys are rejected; duplicated keys are a parse error; omitted
    optional fields take the documented defaults.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh, object_pairs_hook=_no_duplicates_hook)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config parse error: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "kind" not in raw:
        raise ConfigError("kind: required field missing")
    return ExperimentConfig(**raw)


# ---------------------------------------------------------------------------
# Model plumbing shared by the runners
# ---------------------------------------------------------------------------


def _truth_hparams(cfg: ExperimentConfig) -> HyperParams:
    return HyperParams.from_dict(cfg.truth)


def _hyper_box(cfg: ExperimentConfig) -> HyperBox:
    return HyperBox({k: (v[0], v[1]) for k, v in cfg.box.items()})


def _build_truth_sim(cfg: ExperimentConfig, n: int, h: HyperParams, stream):
    if cfg.model == "sis":
        return SisSimulator.build(n, h, cfg.p_init, cfg.D, stream, graph_model=cfg.graph_model)
    snn_cfg = SnnModelConfig(d=cfg.D, e_fraction=cfg.e_fraction, alpha=cfg.alpha, dt=cfg.dt)
    return SnnSimulator.build(n, h, SnnConstants(), snn_cfg, stream, cfg.record_every_ms)


def _model_factory(cfg: ExperimentConfig, n: int):
    truth = _truth_hparams(cfg)
    if cfg.model == "sis":
        return sis_model_factory(n, cfg.p_init, cfg.D, h_known=truth, graph_model=cfg.graph_model)
    snn_cfg = SnnModelConfig(d=cfg.D, e_fraction=cfg.e_fraction, alpha=cfg.alpha, dt=cfg.dt)
    return snn_model_factory(n, SnnConstants(), snn_cfg, cfg.record_every_ms)


def _obs_steps(cfg: ExperimentConfig) -> int:
    if cfg.model == "snn":
        return int(round(cfg.T / cfg.record_every_ms))
    return int(cfg.T)


def _record_truth_series(cfg: ExperimentConfig, n: int, stream) -> ObservationSeries:
    """Simulate the truth system and record the (optionally noisy) mean-type
    observation at every interval."""
    sim = _build_truth_sim(cfg, n, _truth_hparams(cfg), stream.child(_TAG_TRUTH))
    obs_gen = stream.child(_TAG_OBS).generator()
    steps = _obs_steps(cfg)
    ys = np.empty(steps)
    for k in range(steps):
        sim.advance()
        ys[k] = noisy_observe(sim.node_values(), cfg.noise_sigma, obs_gen)
    return ObservationSeries.from_scalars(ys)


def resolve_enkf(cfg: ExperimentConfig, n: int) -> EnkfConfig:
    """Fill EnkfConfig defaults: R = sigma^2/n plus a per-model
    representativeness floor; prior centered in the box with std = width/6."""
    box = _hyper_box(cfg)
    user = dict(cfg.enkf or {})
    floor = _R_FLOOR.get(cfg.model, 1e-6)
    r_default = cfg.noise_sigma**2 / n + floor
    prior_mean = user.get("prior_mean") or {
        lab: 0.5 * (box.bounds(lab)[0] + box.bounds(lab)[1]) for lab in box.labels
    }
    prior_std = user.get("prior_std") or {
        lab: (box.bounds(lab)[1] - box.bounds(lab)[0]) / 6.0 for lab in box.labels
    }
    return EnkfConfig(
        m=int(user.get("m", _DEFAULT_M.get(cfg.model, 100))),
        R=float(user.get("R", r_default)),
        inflation=float(user.get("inflation", 1.02)),
        prior_mean={k: float(v) for k, v in prior_mean.items()},
        prior_std={k: float(v) for k, v in prior_std.items()},
        clip=user.get("clip", "box"),
    )


def _drop_leading_zero_steps(Y: ObservationSeries, Y_star: ObservationSeries):
    """RRMSE divides by the truth; leading steps where the truth has a zero
    coordinate are dropped (the epidemic observation can start at 0)."""
    keep = 0
    while keep < len(Y_star) and np.any(Y_star.values[keep] == 0.0):
        keep += 1
    if keep >= len(Y_star):
        raise ValueError("truth series is identically zero; rrmse undefined")
    return (
        ObservationSeries(Y.times[keep:], Y.values[keep:]),
        ObservationSeries(Y_star.times[keep:], Y_star.values[keep:]),
    )


def _rrmse_dropping_leading_zeros(Y: ObservationSeries, Y_star: ObservationSeries) -> float:
    return rrmse(*_drop_leading_zero_steps(Y, Y_star))


# ---------------------------------------------------------------------------
# Result persistence
# ---------------------------------------------------------------------------


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_result_csv(path: str, rows: list[tuple], comments: tuple[str, ...] = ()) -> None:
    """Rows are (experiment, model, n, rep, seed, metric, value); written in
    canonical sorted order with the fixed schema header.  Extra metadata
    comment lines (starting with '#') go right after the header."""
    rows = sorted(rows, key=lambda r: (r[2], r[3], r[5]))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(CSV_HEADER + "\n")
        for line in comments:
            fh.write(line + "\n")
        for experiment, model, n, rep, seed, metric, value in rows:
            fh.write(f"{experiment},{model},{n},{rep},{seed},{metric},{_fmt_value(value)},0\n")


def read_result_csv(path: str) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("experiment,"):
                continue
            experiment, model, n, rep, seed, metric, value, wall = line.split(",")
            out.append(
                dict(experiment=experiment, model=model, n=int(n), rep=int(rep),
                     seed=int(seed), metric=metric, value=float(value), wall_ms=int(wall))
            )
    return out


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _run_tasks(task_fn, tasks: list, threads: int):
    """Run tasks (picklable tuples) either serially or in a process pool;
    result order follows the task list, so scheduling never matters."""
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(tasks) <= 1:
        return [task_fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(task_fn, tasks))


# ---------------------------------------------------------------------------
# Identifiability sweep
# ---------------------------------------------------------------------------


def _sweep_task(args) -> list[tuple]:
    cfg, rep = args
    n = cfg.n
    stream = derive_stream(cfg.base_seed, [KIND_CODES["identifiability"], n, rep])
    t0 = time.monotonic()
    truth_h = _truth_hparams(cfg)
    label = _estimated_label(cfg.model)
    Y_star = _record_truth_series(cfg, n, stream)
    rows = []
    for amp in cfg.amplitudes:
        h_pert = truth_h.replace(**{label: truth_h[label] * (1.0 + amp)})
        # Paired streams: the perturbed system reuses the truth's substream,
        # so amplitude 0 reproduces the truth run exactly.
        sim = _build_truth_sim(cfg, n, h_pert, stream.child(_TAG_TRUTH))
        steps = _obs_steps(cfg)
        ys = np.empty(steps)
        for k in range(steps):
            sim.advance()
            ys[k] = sim.observe()
        Y = ObservationSeries.from_scalars(ys)
        value = _rrmse_dropping_leading_zeros(Y, Y_star)
        rows.append(("identifiability", cfg.model, n, rep, stream.stream_id,
                     f"rrmse[amp={amp:g}]", value))
    _progress(f"sweep rep={rep} done in {time.monotonic() - t0:.1f}s")
    return rows


def run_identifiability_sweep(cfg: ExperimentConfig, threads: int = 1) -> str:
    """Perturb the estimated hyperparameter by each relative amplitude,
    simulate, and record the RRMSE against the truth series per replicate;
    mean/std summaries and a monotonicity check are appended."""
    if cfg.kind != "identifiability":
        raise ConfigError(f"kind: expected 'identifiability', got {cfg.kind!r}")
    rows = []
    for chunk in _run_tasks(_sweep_task, [(cfg, rep) for rep in range(cfg.reps)], threads):
        rows.extend(chunk)

    by_amp: dict[float, list[float]] = {a: [] for a in cfg.amplitudes}
    for row in rows:
        amp = float(row[5].split("=")[1].rstrip("]"))
        by_amp[amp].append(row[6])
    for amp, vals in by_amp.items():
        arr = np.asarray(vals)
        rows.append(("identifiability", cfg.model, cfg.n, -1, cfg.base_seed,
                     f"rrmse_mean[amp={amp:g}]", float(arr.mean())))
        rows.append(("identifiability", cfg.model, cfg.n, -1, cfg.base_seed,
                     f"rrmse_std[amp={amp:g}]", float(arr.std(ddof=0))))
    positive = sorted(a for a in by_amp if a > 0)
    if len(positive) >= 2:
        rho = spearman(positive, [float(np.mean(by_amp[a])) for a in positive])
        rows.append(("identifiability", cfg.model, cfg.n, -1, cfg.base_seed,
                     "sweep_spearman", rho))

    path = os.path.join(cfg.out_dir, "identifiability_results.csv")
    write_result_csv(path, rows,
                     comments=("# note=rrmse drops leading zero-observation truth steps",))
    return path


# ---------------------------------------------------------------------------
# Scaling experiment
# ---------------------------------------------------------------------------


def _scaling_task(args) -> list[tuple]:
    cfg, n, rep = args
    stream = derive_stream(cfg.base_seed, [KIND_CODES["scaling"], n, rep])
    t0 = time.monotonic()
    Y_star = _record_truth_series(cfg, n, stream)
    box = _hyper_box(cfg)
    factory = _model_factory(cfg, n)
    ecfg = resolve_enkf(cfg, n)
    trace = enkf_run(ecfg, factory, Y_star, box, stream.child(_TAG_FILTER))
    truth = _truth_hparams(cfg)
    h_star = HyperParams(box.labels, np.array([truth[lab] for lab in box.labels]))
    window = min(100, len(trace))
    fr = final_rae(trace, window, h_star)
    ir = rae(HyperParams(box.labels, trace.mean[0]), h_star)
    _progress(f"scale n={n} rep={rep} final_rae={fr:.4f} ({time.monotonic() - t0:.1f}s)")
    return [
        ("scaling", cfg.model, n, rep, stream.stream_id, "final_rae", fr),
        ("scaling", cfg.model, n, rep, stream.stream_id, "initial_rae", ir),
    ]


def run_scaling_experiment(cfg: ExperimentConfig, threads: int = 1):
    """EnKF estimation across network sizes; persists per-run final/initial
    RAE, per-size medians, and the fitted log-log rate.  Returns
    (csv_path, RateFit)."""
    if cfg.kind != "scaling":
        raise ConfigError(f"kind: expected 'scaling', got {cfg.kind!r}")
    tasks = [(cfg, n, rep) for n in cfg.sizes for rep in range(cfg.reps)]
    rows = []
    for chunk in _run_tasks(_scaling_task, tasks, threads):
        rows.extend(chunk)

    medians = {}
    for n in cfg.sizes:
        finals = [r[6] for r in rows if r[2] == n and r[5] == "final_rae"]
        medians[n] = float(np.median(finals))
        rows.append(("scaling", cfg.model, n, -1, cfg.base_seed, "median_final_rae", medians[n]))
    fit = loglog_slope(cfg.sizes, [medians[n] for n in cfg.sizes])
    rho = spearman(cfg.sizes, [medians[n] for n in cfg.sizes])
    rows.append(("scaling", cfg.model, 0, -1, cfg.base_seed, "scaling_slope", fit.slope))
    rows.append(("scaling", cfg.model, 0, -1, cfg.base_seed, "scaling_spearman", rho))
    rows.append(("scaling", cfg.model, 0, -1, cfg.base_seed, "scaling_r_squared", fit.r_squared))

    path = os.path.join(cfg.out_dir, "scaling_results.csv")
    write_result_csv(path, rows)
    _write_json(
        os.path.join(cfg.out_dir, "scaling_fit.json"),
        {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "spearman": rho,
            "theoretical_reference": -0.5,
            "pass": bool(fit.slope < 0),
        },
    )
    return path, fit


# ---------------------------------------------------------------------------
# Synthetic rate fit (i.i.d. mean-observation toy model)
# ---------------------------------------------------------------------------


def _toy_objective(n: int, T: int, y_star: np.ndarray):
    """Empirical objective of the toy model: nodes i.i.d. U(0,1), per-node
    observable h*x, observation the node mean."""

    def objective(h: HyperParams, stream) -> float:
        gen = stream.generator()
        x = gen.random((T, n))
        y = h.values[0] * x.mean(axis=1)
        return float(np.mean((y - y_star) ** 2))

    return objective


def _toy_deterministic_objective(h: float, h_star: float, n: int, sigma: float) -> float:
    # E[(h xbar - h* xbar* - wbar)^2] for x ~ U(0,1)
    var_mean = 1.0 / (12.0 * n)
    return (0.5 * (h - h_star)) ** 2 + (h * h + h_star * h_star) * var_mean + sigma**2 / n


def _rate_task(args) -> tuple:
    cfg, n, rep = args
    stream = derive_stream(cfg.base_seed, [KIND_CODES["rate"], n, rep])
    label = "h0"
    h_star = cfg.truth[label]
    box = _hyper_box(cfg)
    T = int(cfg.T)
    gen = stream.child(_TAG_TRUTH).generator()
    x_star = gen.random((T, n))
    noise = gen.standard_normal((T, n))
    y_star = (h_star * x_star + cfg.noise_sigma * noise).mean(axis=1)

    objective = _toy_objective(n, T, y_star)
    h_hat = grid_minimize(objective, box, cfg.resolution, cfg.replicates, stream.child(_TAG_MINIMIZE))
    err = rae(h_hat, HyperParams.single(label, h_star))

    sup_stream = stream.child(_TAG_SUPDEV)
    sup_dev = 0.0
    for gi, h in enumerate(box.grid(cfg.resolution)):
        vals = [objective(h, sup_stream.child(gi, r)) for r in range(cfg.replicates)]
        dev = abs(float(np.mean(vals)) - _toy_deterministic_objective(h.values[0], h_star, n, cfg.noise_sigma))
        sup_dev = max(sup_dev, dev)
    return ("rate", "synthetic", n, rep, stream.stream_id, err, sup_dev)


def run_rate_fit(cfg: ExperimentConfig, threads: int = 1) -> str:
    """Grid-minimizer estimation on the synthetic i.i.d. mean-observation
    model across population sizes; writes the JSON rate report (plus an
    optional re-fit of an existing scaling CSV)."""
    if cfg.kind != "rate":
        raise ConfigError(f"kind: expected 'rate', got {cfg.kind!r}")
    if len(cfg.sizes) < 2:
        raise ConfigError("sizes: need at least two sizes to fit a rate")
    tasks = [(cfg, n, rep) for n in cfg.sizes for rep in range(cfg.reps)]
    results = _run_tasks(_rate_task, tasks, threads)

    rows = []
    med_rae = {}
    med_dev = {}
    for n in cfg.sizes:
        errs = [r[5] for r in results if r[2] == n]
        devs = [r[6] for r in results if r[2] == n]
        med_rae[n] = float(np.median(errs))
        med_dev[n] = float(np.median(devs))
        for r in results:
            if r[2] == n:
                rows.append(("rate", "synthetic", n, r[3], r[4], "rae", r[5]))
                rows.append(("rate", "synthetic", n, r[3], r[4], "sup_objective_deviation", r[6]))
        rows.append(("rate", "synthetic", n, -1, cfg.base_seed, "median_rae", med_rae[n]))

    fit = loglog_slope(cfg.sizes, [max(med_rae[n], 1e-300) for n in cfg.sizes])
    report = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "theoretical_reference": -0.5,
        "pass": bool(fit.slope < 0),
        "median_rae": {str(n): med_rae[n] for n in cfg.sizes},
        "sup_objective_deviation": {str(n): med_dev[n] for n in cfg.sizes},
    }
    if cfg.scaling_csv:
        rows_prev = read_result_csv(cfg.scaling_csv)
        per_size = {}
        for r in rows_prev:
            if r["metric"] == "median_final_rae":
                per_size[r["n"]] = r["value"]
        if len(per_size) >= 2:
            sizes = sorted(per_size)
            sfit = loglog_slope(sizes, [per_size[n] for n in sizes])
            report["scaling_slope"] = sfit.slope
            report["scaling_r_squared"] = sfit.r_squared

    write_result_csv(os.path.join(cfg.out_dir, "rate_results.csv"), rows)
    path = os.path.join(cfg.out_dir, "rate_report.json")
    _write_json(path, report)
    return path


# ---------------------------------------------------------------------------
# Plain simulation (trajectory dump)
# ---------------------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig, threads: int = 1) -> str:
    """Single truth simulation; dumps the trajectory CSV (and, for the
    spiking model with raster=true, the spike raster)."""
    if cfg.kind != "simulate":
        raise ConfigError(f"kind: expected 'simulate', got {cfg.kind!r}")
    stream = derive_stream(cfg.base_seed, [KIND_CODES["simulate"], cfg.n, 0])
    sim = _build_truth_sim(cfg, cfg.n, _truth_hparams(cfg), stream.child(_TAG_TRUTH))
    if cfg.model == "snn" and cfg.raster:
        sim.record_spikes = True
    steps = _obs_steps(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "trajectory.csv")
    header = "t,infected_fraction" if cfg.model == "sis" else "t_ms,lfp_mv"
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(header + "\n")
        for k in range(steps):
            sim.advance()
            t = k + 1 if cfg.model == "sis" else (k + 1) * cfg.record_every_ms
            fh.write(f"{t:g},{sim.observe()!r}\n")
    if cfg.model == "snn" and cfg.raster:
        raster_path = os.path.join(cfg.out_dir, "spikes.csv")
        with open(raster_path, "w", newline="") as fh:
            fh.write(SCHEMA_LINE + "\n")
            fh.write("t_ms,neuron_id\n")
            for t_ms, neuron in sim.spike_log:
                fh.write(f"{t_ms:g},{neuron}\n")
    return path


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


_SUBCOMMAND_KIND = {"sweep": "identifiability", "scale": "scaling",
                    "rate": "rate", "simulate": "simulate"}


def _build_parser() -> _Parser:
    parser = _Parser(prog="netassim", description="Network dynamical system "
                     "simulation and hyperparameter estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_KIND:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="base seed (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker processes; 0 = auto")
        p.add_argument("--model", choices=["sis", "snn"], help="model (overrides config)")
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    """Entry point: returns 0 on success, 1 on validation errors, 2 on
    runtime failures.  Progress goes to stderr; results only to files."""
    try:
        args = _build_parser().parse_args(argv)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    kind = _SUBCOMMAND_KIND[args.command]
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            if cfg.kind != kind:
                raise ConfigError(f"kind: config says {cfg.kind!r} but subcommand is {args.command!r}")
        else:
            if args.command != "simulate":
                raise ConfigError(f"--config: required for the {args.command!r} subcommand")
            cfg = ExperimentConfig(kind=kind, model=args.model or "sis",
                                   n=200, T=100 if (args.model or "sis") == "sis" else 200)
        if args.model is not None:
            cfg = replace(cfg, model=args.model, truth=None, box=None)
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    t0 = time.monotonic()
    try:
        if kind == "identifiability":
            out = run_identifiability_sweep(cfg, threads=args.threads)
        elif kind == "scaling":
            out, _ = run_scaling_experiment(cfg, threads=args.threads)
        elif kind == "rate":
            out = run_rate_fit(cfg, threads=args.threads)
        else:
            out = run_simulate(cfg, threads=args.threads)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    _progress(f"wrote {out} ({time.monotonic() - t0:.1f}s)")
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
