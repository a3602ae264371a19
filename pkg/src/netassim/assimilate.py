"""Hyperparameter estimation: L2 objective, grid minimizer, ensemble Kalman
filter.

The filter is the perturbed-observation (stochastic) EnKF: each member holds
a hyperparameter candidate and its own simulator replica.  At every
observation time the members advance one interval, the Kalman gain is formed
from the ensemble's sample covariances between candidates and predicted
observations, and each candidate is nudged toward the recorded observation
(independently perturbed per member).  After the update each member's
simulator is rescaled to its new candidate; for the mean-parameterized
exponential/Gamma families used here that rescaling is an exact pushforward,
so members remain samples from the updated distribution without
re-randomizing node identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .core import HyperBox, HyperParams, ObservationSeries, RngStream

_TAG_PRIOR = 401
_TAG_SIM = 402
_TAG_ANALYSIS = 403
_TAG_GRID = 404
_TAG_OBJECTIVE = 405

ModelFactory = Callable[[HyperParams, RngStream], "SimulatorHandle"]


class SimulatorHandle(Protocol):
    """What the filter needs from a simulator replica."""

    kind: str
    h: HyperParams

    def advance(self) -> None:
        """Advance one observation interval."""

    def observe(self) -> float | np.ndarray:
        """Current (clean) observation."""

    def node_values(self) -> np.ndarray:
        """Per-node observable values, for noisy mean-type observations."""

    def rescale(self, h_new: HyperParams) -> None:
        """Move this replica to a new hyperparameter (pushforward)."""


@dataclass
class EnkfConfig:
    m: int = 100
    R: float = 1e-6  # observation-noise variance fed to the filter
    inflation: float = 1.02  # multiplicative anomaly inflation, >= 1
    prior_mean: dict[str, float] = field(default_factory=dict)
    prior_std: dict[str, float] = field(default_factory=dict)
    clip: str = "box"  # "box": clip updates into the box; "log": update log(h)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("ensemble size m must be >= 2")
        if self.R <= 0:
            raise ValueError("observation-noise variance R must be positive")
        if self.inflation < 1.0:
            raise ValueError("inflation must be >= 1")
        if self.clip not in ("box", "log"):
            raise ValueError(f"unknown clip mode {self.clip!r}")


@dataclass
class EnsembleMember:
    h: HyperParams
    sim: SimulatorHandle
    stream: RngStream


@dataclass
class Ensemble:
    members: list[EnsembleMember]
    box: HyperBox

    @property
    def size(self) -> int:
        return len(self.members)

    def h_matrix(self) -> np.ndarray:
        return np.stack([m.h.values for m in self.members])

    def mean(self) -> np.ndarray:
        return self.h_matrix().mean(axis=0)

    def spread(self) -> np.ndarray:
        return self.h_matrix().std(axis=0, ddof=1)


@dataclass
class EstimateTrace:
    """Per observation step: ensemble mean and spread of each label."""

    labels: tuple[str, ...]
    times: np.ndarray  # (T,)
    mean: np.ndarray  # (T, p)
    spread: np.ndarray  # (T, p)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def estimates(self, label: str) -> np.ndarray:
        return self.mean[:, self.labels.index(label)]

    def to_csv(self, path) -> None:
        """Dump as `t,h_hat,spread`, one (h_hat, spread) column pair per
        label (suffixed with the label when there is more than one)."""
        import os

        os.makedirs(os.path.dirname(str(path)) or ".", exist_ok=True)
        if len(self.labels) == 1:
            cols = ["h_hat", "spread"]
        else:
            cols = [f"{kind}[{lab}]" for lab in self.labels for kind in ("h_hat", "spread")]
        with open(path, "w", newline="") as fh:
            fh.write("# schema_version=1\n")
            fh.write("t," + ",".join(cols) + "\n")
            for k in range(len(self)):
                vals = []
                for p in range(len(self.labels)):
                    vals.append(repr(float(self.mean[k, p])))
                    vals.append(repr(float(self.spread[k, p])))
                fh.write(f"{int(self.times[k])}," + ",".join(vals) + "\n")


def noisy_observe(clean_per_node: np.ndarray, sigma: float, rng, r: int | None = None):
    """Mean-type noisy observation: add independent N(0, sigma^2) per node
    and coordinate, then average over nodes.  The effective noise on the
    mean has variance sigma^2 / n per coordinate.

    1-D input is treated as scalar observation (returns a float);
    (n, r) input returns an r-vector.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    clean = np.asarray(clean_per_node, dtype=float)
    scalar = clean.ndim == 1
    mat = clean.reshape(-1, 1) if scalar else clean
    if r is not None and mat.shape[1] != r:
        raise ValueError(f"expected observation dimension {r}, got {mat.shape[1]}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if sigma == 0.0:
        out = mat.mean(axis=0)
    else:
        out = (mat + sigma * gen.standard_normal(mat.shape)).mean(axis=0)
    return float(out[0]) if scalar else out


def empirical_objective(h: HyperParams, model_factory: ModelFactory,
                        Y_star: ObservationSeries, rng: RngStream) -> float:
    """Mean over observation times of the squared distance between the
    simulated observation under h and the recorded series."""
    sim = model_factory(h, rng.child(_TAG_OBJECTIVE))
    total = 0.0
    for k in range(len(Y_star)):
        sim.advance()
        y = np.atleast_1d(sim.observe())
        ref = Y_star.values[k]
        if y.shape != ref.shape:
            raise ValueError(f"observation dimension mismatch: {y.shape} vs {ref.shape}")
        total += float(np.sum((y - ref) ** 2))
    return total / len(Y_star)


def grid_minimize(objective, box: HyperBox, resolution: int, replicates: int = 1,
                  rng: RngStream | None = None) -> HyperParams:
    """Exhaustive grid argmin of `objective(h, stream)`, averaging
    `replicates` independent evaluations per grid point.  Ties break toward
    the lexicographically smallest grid point (the iteration order)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if rng is None:
        rng = RngStream(base_seed=0, stream_id=0)
    best_h = None
    best_val = np.inf
    for gi, h in enumerate(box.grid(resolution)):
        vals = [objective(h, rng.child(_TAG_GRID, gi, r)) for r in range(replicates)]
        avg = float(np.mean(vals))
        if avg < best_val:
            best_val = avg
            best_h = h
    return best_h


def enkf_init(cfg: EnkfConfig, box: HyperBox, model_factory: ModelFactory,
              base_rng: RngStream) -> Ensemble:
    """Draw m candidates from the prior truncated to the box and give each
    its own simulator replica (same structural config, independent stream)."""
    labels = box.labels
    mean = np.array([cfg.prior_mean[lab] for lab in labels])
    std = np.array([cfg.prior_std[lab] for lab in labels])
    lo, hi = box.lower(), box.upper()
    if cfg.clip == "log" and np.any(lo <= 0):
        raise ValueError("log-space updates need a strictly positive hyperparameter box")
    if np.any(mean + 6 * std < lo) or np.any(mean - 6 * std > hi):
        raise ValueError("prior lies (essentially) outside the hyperparameter box")
    if np.any(std == 0) and (np.any(mean < lo) or np.any(mean > hi)):
        raise ValueError("degenerate prior mean outside the hyperparameter box")

    members = []
    for k in range(cfg.m):
        member_stream = base_rng.child(k)
        gen = member_stream.child(_TAG_PRIOR).generator()
        for _ in range(10_000):
            vals = mean + std * gen.standard_normal(len(labels))
            if np.all(vals >= lo) and np.all(vals <= hi):
                break
        else:
            raise ValueError("could not draw a prior sample inside the box")
        h = HyperParams(labels, vals)
        sim = model_factory(h, member_stream.child(_TAG_SIM))
        members.append(EnsembleMember(h=h, sim=sim, stream=member_stream))
    return Ensemble(members=members, box=box)


def enkf_assimilate_step(ens: Ensemble, y_obs, cfg: EnkfConfig, rng: RngStream) -> Ensemble:
    """Perturbed-observation EnKF analysis.

    Anomalies are inflated before the covariances are formed; the gain is
    K = C_hy (C_yy + R I)^-1; each member moves by K (y + eps_k - yhat_k)
    with eps_k ~ N(0, R I).  Updated candidates are clipped into the box and
    pushed into the member simulators.
    """
    m = ens.size
    labels = ens.box.labels
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    r = y_obs.shape[0]

    H = ens.h_matrix()  # (m, p)
    if cfg.clip == "log":
        H = np.log(H)
    Y = np.stack([np.atleast_1d(mem.sim.observe()) for mem in ens.members])  # (m, r)

    H = H.mean(axis=0) + cfg.inflation * (H - H.mean(axis=0))
    A_h = H - H.mean(axis=0)
    A_y = Y - Y.mean(axis=0)
    C_hy = A_h.T @ A_y / (m - 1)  # (p, r)
    C_yy = A_y.T @ A_y / (m - 1)  # (r, r)
    gain = np.linalg.solve(C_yy + cfg.R * np.eye(r), C_hy.T).T  # (p, r)

    gen = rng.generator()
    eps = np.sqrt(cfg.R) * gen.standard_normal((m, r))
    H_new = H + (y_obs + eps - Y) @ gain.T  # (m, p)
    if cfg.clip == "log":
        H_new = np.exp(H_new)
    H_new = np.clip(H_new, ens.box.lower(), ens.box.upper())

    for k, mem in enumerate(ens.members):
        h_new = HyperParams(labels, H_new[k])
        mem.sim.rescale(h_new)
        mem.h = h_new
    return ens


def enkf_run(cfg: EnkfConfig, model_factory: ModelFactory, Y_star: ObservationSeries,
             box: HyperBox, rng: RngStream) -> EstimateTrace:
    """Sequential assimilation over the recorded series: advance all members
    one interval, assimilate, record the ensemble mean and spread."""
    if len(Y_star) == 0:
        raise ValueError("empty observation series")
    ens = enkf_init(cfg, box, model_factory, rng)
    T = len(Y_star)
    p = len(box.labels)
    means = np.empty((T, p))
    spreads = np.empty((T, p))
    for k in range(T):
        for mem in ens.members:
            mem.sim.advance()
        enkf_assimilate_step(ens, Y_star.values[k], cfg, rng.child(_TAG_ANALYSIS, k))
        means[k] = ens.mean()
        spreads[k] = ens.spread()
    return EstimateTrace(labels=box.labels, times=Y_star.times.copy(), mean=means, spread=spreads)
