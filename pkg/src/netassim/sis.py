"""Discrete-time stochastic SIS epidemic simulator on a directed network.

States are binary (0 susceptible, 1 infected).  All nodes update
synchronously from the previous step's snapshot:

* a susceptible node i becomes infected with probability
  ``1 - prod_k (1 - gamma_i * xi_k)`` over its in-neighbors k,
* an infected node recovers with probability ``lambda_i`` (and stays
  infected otherwise).

Per-node infection and recovery rates are exponential draws whose means are
the two hyperparameters; draws are clipped into [0, 1] since they act as
probabilities (with means around 1e-3 the clip is never hit in practice).
The observation is the infected fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (
    HyperParams,
    NetworkTopology,
    RngStream,
    gen_topology_bernoulli,
    gen_topology_fixed_indegree,
    sample_exponential_mean,
)

H_GAMMA = "h_gamma"
H_LAMBDA = "h_lambda"

# Substream tags for the phases of building one simulator instance.
_TAG_TOPOLOGY = 101
_TAG_PARAMS = 102
_TAG_INIT = 103
_TAG_DYNAMICS = 104


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


@dataclass
class SisParams:
    """Per-node infection rates gamma and recovery rates lam, both in [0,1]."""

    gamma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        if self.gamma.shape != self.lam.shape:
            raise ValueError("gamma and lambda must have equal length")
        for name, v in (("gamma", self.gamma), ("lambda", self.lam)):
            if v.size and (v.min() < 0.0 or v.max() > 1.0):
                raise ValueError(f"{name} entries must lie in [0, 1]")


@dataclass
class SisState:
    xi: np.ndarray  # uint8, shape (n,)
    t: int = 0

    @property
    def n(self) -> int:
        return int(self.xi.shape[0])

    def copy(self) -> "SisState":
        return SisState(self.xi.copy(), self.t)


def sis_init(n: int, p_init: float, rng) -> SisState:
    """Independent Bernoulli(p_init) initial infections at t = 0."""
    if not 0.0 <= p_init <= 1.0:
        raise ValueError(f"p_init={p_init} must lie in [0, 1]")
    gen = _as_generator(rng)
    xi = (gen.random(n) < p_init).astype(np.uint8)
    return SisState(xi=xi, t=0)


def sis_sample_params(n: int, h: HyperParams, rng) -> SisParams:
    """Per-node rates: gamma_i ~ Exp(mean h_gamma), lambda_i ~ Exp(mean
    h_lambda), clipped into [0,1]."""
    gen = _as_generator(rng)
    gamma = np.clip(sample_exponential_mean(h[H_GAMMA], n, gen), 0.0, 1.0)
    lam = np.clip(sample_exponential_mean(h[H_LAMBDA], n, gen), 0.0, 1.0)
    return SisParams(gamma=gamma, lam=lam)


def infection_prob(i: int, state: SisState, params: SisParams, topo: NetworkTopology) -> float:
    """Probability that susceptible node i gets infected this step:
    1 - prod over in-neighbors k of (1 - gamma_i * xi_k)."""
    acc = 1.0
    g = params.gamma[i]
    for k in range(topo.in_indptr[i], topo.in_indptr[i + 1]):
        acc *= 1.0 - g * float(state.xi[topo.in_indices[k]])
    return 1.0 - acc


def sis_step(state: SisState, params: SisParams, topo: NetworkTopology, rng) -> SisState:
    """One synchronous update.  Every node consumes exactly two fresh
    uniforms (u for infection, u' for recovery) whether or not they are
    used, so trajectories are reproducible draw-for-draw."""
    n = state.n
    gen = _as_generator(rng)
    u = gen.random(n)
    u_prime = gen.random(n)
    out = np.empty(n, dtype=np.uint8)
    kernels.sis_step(state.xi, params.gamma, params.lam, topo.in_indptr, topo.in_indices, u, u_prime, out)
    return SisState(xi=out, t=state.t + 1)


def sis_observe(state: SisState) -> float:
    """Infected fraction, the mean of xi."""
    if state.n == 0:
        raise ValueError("cannot observe an empty system")
    return float(state.xi.mean())


class SisSimulator:
    """One SIS instance bound to its own stream; the simulator handle used
    by the assimilation layer.

    Building consumes dedicated substreams for topology, parameter draws and
    the initial state, so two simulators built from the same stream but
    different hyperparameters share all underlying randomness (the paired
    construction the identifiability diagnostics rely on).
    """

    kind = "sis"

    def __init__(self, topo: NetworkTopology, params: SisParams, state: SisState,
                 h: HyperParams, dyn_gen: np.random.Generator):
        self.topo = topo
        self.params = params
        self.state = state
        self.h = h
        self._gen = dyn_gen

    @classmethod
    def build(cls, n: int, h: HyperParams, p_init: float, d: int, stream: RngStream,
              topology: NetworkTopology | None = None,
              graph_model: str = "fixed") -> "SisSimulator":
        if topology is None:
            if graph_model == "fixed":
                topology = gen_topology_fixed_indegree(n, d, stream.child(_TAG_TOPOLOGY))
            elif graph_model == "bernoulli":
                topology = gen_topology_bernoulli(n, d, stream.child(_TAG_TOPOLOGY))
            else:
                raise ValueError(f"unknown graph model {graph_model!r}")
        params = sis_sample_params(n, h, stream.child(_TAG_PARAMS))
        state = sis_init(n, p_init, stream.child(_TAG_INIT))
        return cls(topology, params, state, h, stream.child(_TAG_DYNAMICS).generator())

    @property
    def n(self) -> int:
        return self.state.n

    def advance(self) -> None:
        """Advance one observation interval (= one SIS step)."""
        self.state = sis_step(self.state, self.params, self.topo, self._gen)

    def observe(self) -> float:
        return sis_observe(self.state)

    def node_values(self) -> np.ndarray:
        """Per-node observable values (here the binary states as floats)."""
        return self.state.xi.astype(float)

    def rescale(self, h_new: HyperParams) -> None:
        """Multiplicative pushforward to new hyperparameters.

        Exponential means form a scale family, so gamma_i * h_new/h_old is an
        exact re-draw under the new mean without re-randomizing node
        identities.  Rates are re-clipped into [0,1].
        """
        for label in h_new.labels:
            ratio = h_new[label] / self.h[label]
            if label == H_GAMMA:
                self.params.gamma = np.clip(self.params.gamma * ratio, 0.0, 1.0)
            elif label == H_LAMBDA:
                self.params.lam = np.clip(self.params.lam * ratio, 0.0, 1.0)
            else:
                raise ValueError(f"unknown SIS hyperparameter {label!r}")
            self.h = self.h.replace(**{label: h_new[label]})


def sis_model_factory(n: int, p_init: float, d: int, h_known: HyperParams | None = None,
                      graph_model: str = "fixed"):
    """Factory (h, stream) -> SisSimulator for the assimilation layer.

    `h_known` supplies labels not being estimated (typically the recovery
    mean); estimated labels in `h` override it.
    """

    def factory(h: HyperParams, stream: RngStream) -> SisSimulator:
        full = dict(zip(h_known.labels, h_known.values)) if h_known is not None else {}
        full.update(zip(h.labels, h.values))
        return SisSimulator.build(n, HyperParams.from_dict(full), p_init, d, stream,
                                  graph_model=graph_model)

    return factory
