"""Leaky integrate-and-fire spiking network with four synapse types.

Membrane dynamics per neuron (forward Euler at a fixed internal substep):

    C dV/dt = -g_L (V - V_L) + I_syn + I_bg + I_ext

The synaptic current sums four conductance channels (AMPA, NMDA, GABA_A,
GABA_B): I_u = (g_u + g_sin(t)) * (V_u - V) * J_u, where J_u is the synaptic
gating variable, decaying with its channel time constant and incremented by
the weights of incoming spikes.  A sinusoidal conductance g_sin(t) =
g0*sin(pi*omega*t) modulates every channel (total channel conductance is
floored at zero); the NMDA conductance is per-neuron, Gamma-distributed with
mean equal to the hyperparameter under estimation.  The background current is
an exact-transition Ornstein-Uhlenbeck process.  Spiking: V >= V_th resets V
to V_rest, holds it there for the refractory period, and delivers the spike
to out-neighbors at the next substep.

Magnitudes follow a self-consistent nondimensional scheme (voltages in mV,
times in ms); with the defaults the noise-free resting point sits at
V_L + mu_bg/g_L ~ -51.3 mV, just below threshold, so spiking is
fluctuation-driven.

The observation is the population-average membrane voltage (the LFP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import HyperParams, NetworkTopology, RngStream, gen_topology_ei, sample_gamma
from .kernels import pure as _layout

G_NMDA_MEAN = "g_nmda_mean"

_TAG_TOPOLOGY = 201
_TAG_PARAMS = 202
_TAG_INIT = 203
_TAG_DYNAMICS = 204


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


@dataclass(frozen=True)
class SnnConstants:
    """Fixed model constants (channel order: AMPA, NMDA, GABA_A, GABA_B)."""

    C: float = 1.0
    g_L: float = 0.03
    V_L: float = -75.0
    V_th: float = -50.0
    V_rest: float = -65.0
    V_ch: tuple[float, float, float, float] = (0.0, 0.0, -70.0, -100.0)
    tau_ch: tuple[float, float, float, float] = (2.0, 40.0, 10.0, 50.0)
    g_ampa: float = 1.6e-5
    g_gaba_a: float = 3.672e-5
    g_gaba_b: float = 7.56e-6
    g0: float = 4.86e-6
    omega: float = 0.02
    T_ref: float = 5.0
    mu_bg: float = 0.71
    sigma_bg: float = 0.05
    tau_bg: float = 10.0
    I_ext: float = 0.0
    modulate_all_channels: bool = True  # False: g_sin on NMDA only

    def __post_init__(self):
        if not self.V_rest < self.V_th:
            raise ValueError("V_rest must be below V_th")
        if any(tau <= 0 for tau in self.tau_ch) or self.tau_bg <= 0:
            raise ValueError("time constants must be positive")
        if self.T_ref < 0:
            raise ValueError("refractory period must be nonnegative")

    def resting_potential(self) -> float:
        """Noise-free fixed point without synapses: V_L + mu_bg / g_L."""
        return self.V_L + self.mu_bg / self.g_L


@dataclass
class SnnParams:
    """Per-neuron NMDA conductances (edge weights live in the topology)."""

    g_nmda: np.ndarray

    def __post_init__(self):
        if self.g_nmda.size and self.g_nmda.min() <= 0:
            raise ValueError("NMDA conductances must be positive")


@dataclass
class SnnState:
    V: np.ndarray  # (n,) membrane voltage, mV
    J: np.ndarray  # (4, n) synaptic gating
    I_bg: np.ndarray  # (n,) background current
    ref_left: np.ndarray  # (n,) int32, remaining refractory substeps
    spiked: np.ndarray  # (n,) uint8, spikes of the last completed substep
    substeps: int = 0  # completed substeps since t=0
    dt: float = 0.1  # substep length, ms

    @property
    def n(self) -> int:
        return int(self.V.shape[0])

    @property
    def t(self) -> float:
        """Simulation time in ms."""
        return self.substeps * self.dt

    @property
    def refractory_until(self) -> np.ndarray:
        """Per-neuron time (ms) until which V is held at the reset value."""
        return self.t + self.ref_left * self.dt

    @property
    def spikes_this_step(self) -> np.ndarray:
        return np.flatnonzero(self.spiked)

    def copy(self) -> "SnnState":
        return SnnState(self.V.copy(), self.J.copy(), self.I_bg.copy(),
                        self.ref_left.copy(), self.spiked.copy(), self.substeps, self.dt)


@dataclass
class SnnModelConfig:
    """Structural configuration shared by all replicas of one experiment."""

    d: int = 10
    e_fraction: float = 0.8
    alpha: float = 5.0
    dt: float = 0.1


def snn_sample_conductance(n: int, h: float, alpha: float, rng) -> np.ndarray:
    """Per-neuron NMDA conductances: i.i.d. Gamma(alpha, rate alpha/h), mean h."""
    return sample_gamma(alpha, h, n, rng)


def ou_step(I, dt: float, c: SnnConstants, rng):
    """Exact Ornstein-Uhlenbeck transition over dt (scalar or per-neuron)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gen = _as_generator(rng)
    a = math.exp(-dt / c.tau_bg)
    b = c.sigma_bg * math.sqrt(1.0 - a * a)
    z = gen.standard_normal(np.shape(I)) if np.ndim(I) else gen.standard_normal()
    return c.mu_bg + (I - c.mu_bg) * a + b * z


def pack_kernel_params(c: SnnConstants, dt: float) -> np.ndarray:
    """Pack constants for the LIF kernels (layout: kernels.pure.P_*).

    All divisions and transcendentals are evaluated here, once, so the
    compiled and pure kernels consume identical doubles.
    """
    p = np.zeros(_layout.N_PARAMS)
    p[_layout.P_DT_OVER_C] = dt / c.C
    p[_layout.P_G_L] = c.g_L
    p[_layout.P_V_L] = c.V_L
    p[_layout.P_V_TH] = c.V_th
    p[_layout.P_V_REST] = c.V_rest
    for ch in range(4):
        p[_layout.P_V_CH + ch] = c.V_ch[ch]
        p[_layout.P_DECAY_CH + ch] = 1.0 - dt / c.tau_ch[ch]
        p[_layout.P_MOD_CH + ch] = 1.0 if (c.modulate_all_channels or ch == _layout.CH_NMDA) else 0.0
    p[_layout.P_G_AMPA] = c.g_ampa
    p[_layout.P_G_GABA_A] = c.g_gaba_a
    p[_layout.P_G_GABA_B] = c.g_gaba_b
    p[_layout.P_REF_SUBSTEPS] = int(round(c.T_ref / dt))
    a = math.exp(-dt / c.tau_bg)
    p[_layout.P_OU_A] = a
    p[_layout.P_OU_B] = c.sigma_bg * math.sqrt(1.0 - a * a)
    p[_layout.P_MU_BG] = c.mu_bg
    return p


def _run_substeps(state: SnnState, params: SnnParams, topo: NetworkTopology,
                  c: SnnConstants, n_sub: int, gen: np.random.Generator,
                  packed: np.ndarray, I_ext: np.ndarray,
                  spike_buf: tuple[np.ndarray, np.ndarray] | None = None,
                  is_exc: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Advance `n_sub` substeps in place; returns (substep_index, neuron)
    spike pairs with the substep index absolute (spikes land at the end of
    their substep)."""
    n = state.n
    out_indptr, out_indices, out_weights = topo.out_csr()
    normals = gen.standard_normal((n_sub, n))
    start = state.substeps
    gsin = np.array(
        [c.g0 * math.sin(math.pi * c.omega * ((start + k) * state.dt)) for k in range(n_sub)]
    )
    if spike_buf is None:
        spike_buf = (np.empty(n * n_sub, dtype=np.int32), np.empty(n * n_sub, dtype=np.int32))
    if is_exc is None:
        is_exc = (topo.node_types == 1).astype(np.uint8)
    spike_sub, spike_id = spike_buf
    count = kernels.lif_interval(
        state.V, state.J, state.I_bg, state.ref_left, state.spiked,
        params.g_nmda, is_exc,
        out_indptr, out_indices, out_weights, I_ext,
        normals, gsin, packed, spike_sub, spike_id,
    )
    state.substeps = start + n_sub
    return [(start + int(spike_sub[i]) + 1, int(spike_id[i])) for i in range(count)]


def snn_init(n: int, c: SnnConstants, dt: float, rng) -> SnnState:
    """Fresh state: V at the reset potential, empty gating, background
    current drawn from its stationary law (deterministic mu_bg when
    sigma_bg = 0)."""
    gen = _as_generator(rng)
    I_bg = c.mu_bg + c.sigma_bg * gen.standard_normal(n)
    return SnnState(
        V=np.full(n, float(c.V_rest)),
        J=np.zeros((4, n)),
        I_bg=I_bg,
        ref_left=np.zeros(n, dtype=np.int32),
        spiked=np.zeros(n, dtype=np.uint8),
        substeps=0,
        dt=dt,
    )


def lif_step(state: SnnState, params: SnnParams, topo: NetworkTopology,
             c: SnnConstants, dt: float, rng) -> SnnState:
    """One Euler substep, in place (returns the same state object)."""
    if abs(dt - state.dt) > 1e-12:
        raise ValueError("dt must match the state's substep length")
    gen = _as_generator(rng)
    packed = pack_kernel_params(c, dt)
    I_ext = np.full(state.n, float(c.I_ext))
    _run_substeps(state, params, topo, c, 1, gen, packed, I_ext)
    return state


def lfp_observe(state: SnnState) -> float:
    """Population-average membrane voltage."""
    if state.n == 0:
        raise ValueError("cannot observe an empty system")
    return float(state.V.mean())


class SnnSimulator:
    """One LIF network instance bound to its own stream (simulator handle).

    Substreams for topology, conductance draws and the initial state are
    derived from the build stream, so simulators built from the same stream
    under different hyperparameters are paired realizations.
    """

    kind = "snn"

    def __init__(self, topo: NetworkTopology, params: SnnParams, state: SnnState,
                 h: HyperParams, constants: SnnConstants, cfg: SnnModelConfig,
                 dyn_gen: np.random.Generator, record_every_ms: float = 1.0,
                 I_ext: np.ndarray | None = None):
        self.topo = topo
        self.params = params
        self.state = state
        self.h = h
        self.constants = constants
        self.cfg = cfg
        self._gen = dyn_gen
        self._packed = pack_kernel_params(constants, cfg.dt)
        # per-neuron external current; defaults to the scalar constant
        if I_ext is None:
            self._I_ext = np.full(state.n, float(constants.I_ext))
        else:
            self._I_ext = np.asarray(I_ext, dtype=float).copy()
            if self._I_ext.shape != (state.n,):
                raise ValueError("I_ext must have one entry per neuron")
        n_sub = record_every_ms / cfg.dt
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ValueError(f"dt={cfg.dt} must divide the observation interval {record_every_ms} ms")
        self._n_sub = int(round(n_sub))
        n = state.n
        self._spike_buf = (np.empty(n * self._n_sub, dtype=np.int32),
                           np.empty(n * self._n_sub, dtype=np.int32))
        self._is_exc = (topo.node_types == 1).astype(np.uint8)
        self.record_spikes = False
        self.spike_log: list[tuple[float, int]] = []

    @classmethod
    def build(cls, n: int, h: HyperParams, constants: SnnConstants, cfg: SnnModelConfig,
              stream: RngStream, record_every_ms: float = 1.0,
              topology: NetworkTopology | None = None,
              I_ext: np.ndarray | None = None) -> "SnnSimulator":
        if topology is None:
            topology = gen_topology_ei(n, cfg.d, cfg.e_fraction, stream.child(_TAG_TOPOLOGY))
        g_nmda = snn_sample_conductance(n, h[G_NMDA_MEAN], cfg.alpha, stream.child(_TAG_PARAMS))
        state = snn_init(n, constants, cfg.dt, stream.child(_TAG_INIT))
        return cls(topology, SnnParams(g_nmda), state, h, constants, cfg,
                   stream.child(_TAG_DYNAMICS).generator(), record_every_ms, I_ext)

    @property
    def n(self) -> int:
        return self.state.n

    def advance(self) -> None:
        """Advance one observation interval."""
        spikes = _run_substeps(self.state, self.params, self.topo, self.constants,
                               self._n_sub, self._gen, self._packed, self._I_ext,
                               self._spike_buf, self._is_exc)
        if self.record_spikes:
            dt = self.state.dt
            self.spike_log.extend((sub * dt, neuron) for sub, neuron in spikes)

    def observe(self) -> float:
        return lfp_observe(self.state)

    def node_values(self) -> np.ndarray:
        return self.state.V.copy()

    def rescale(self, h_new: HyperParams) -> None:
        """Multiplicative pushforward: Gamma with fixed shape is a scale
        family in its mean, so scaling the conductances is an exact re-draw
        under the new hyperparameter."""
        for label in h_new.labels:
            if label != G_NMDA_MEAN:
                raise ValueError(f"unknown SNN hyperparameter {label!r}")
            ratio = h_new[label] / self.h[label]
            self.params.g_nmda = self.params.g_nmda * ratio
            self.h = self.h.replace(**{label: h_new[label]})


def snn_run(n: int, h: float | HyperParams, constants: SnnConstants, cfg: SnnModelConfig,
            T_ms: float, record_every_ms: float, rng: RngStream) -> "ObservationSeries":
    """Build a network, integrate for T_ms and record the LFP every
    record_every_ms.  Returns the observation series (times are interval
    indices 1..T)."""
    from .core import ObservationSeries

    if T_ms <= 0:
        raise ValueError("T_ms must be positive")
    if isinstance(h, (int, float)):
        h = HyperParams.single(G_NMDA_MEAN, float(h))
    sim = SnnSimulator.build(n, h, constants, cfg, rng, record_every_ms)
    n_obs = int(round(T_ms / record_every_ms))
    values = np.empty(n_obs)
    for k in range(n_obs):
        sim.advance()
        values[k] = sim.observe()
    return ObservationSeries.from_scalars(values)


def snn_model_factory(n: int, constants: SnnConstants, cfg: SnnModelConfig,
                      record_every_ms: float = 1.0):
    """Factory (h, stream) -> SnnSimulator for the assimilation layer."""

    def factory(h: HyperParams, stream: RngStream) -> SnnSimulator:
        return SnnSimulator.build(n, h, constants, cfg, stream, record_every_ms)

    return factory
