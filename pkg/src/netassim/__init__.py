"""netassim: network dynamical system simulators (SIS epidemic, LIF spiking
network), hierarchical per-node parameter sampling, noisy mean-type
observations, and ensemble Kalman / grid-minimizer hyperparameter estimation
with an experiment harness that measures how the estimation error scales
with the network population size."""

from .core import (
    HyperBox,
    HyperParams,
    NetworkTopology,
    ObservationSeries,
    RngStream,
    derive_stream,
    gen_topology_ei,
    gen_topology_fixed_indegree,
    sample_exponential_mean,
    sample_gamma,
)
from .kernels import USING_COMPILED

__all__ = [
    "HyperBox",
    "HyperParams",
    "NetworkTopology",
    "ObservationSeries",
    "RngStream",
    "derive_stream",
    "gen_topology_ei",
    "gen_topology_fixed_indegree",
    "sample_exponential_mean",
    "sample_gamma",
    "USING_COMPILED",
]

__version__ = "0.1.0"
