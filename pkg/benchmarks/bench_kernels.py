#!/usr/bin/env python3
"""Benchmark: compiled extension kernels vs the pure-numpy fallback.

Times the two hot loops (SIS step, LIF substep interval) on realistic sizes
and verifies bit-identity of the outputs along the way.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from netassim.core import derive_stream, gen_topology_ei, gen_topology_fixed_indegree
from netassim.kernels import pure
from netassim.snn import SnnConstants, SnnModelConfig, pack_kernel_params, snn_init, snn_sample_conductance

try:
    from netassim.kernels import _sis_core, _snn_core

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def bench_sis(n, steps, impl, topo, state0, gamma, lam, gen):
    xi = state0.copy()
    out = np.empty(n, dtype=np.uint8)
    t0 = time.perf_counter()
    for _ in range(steps):
        u = gen.random(n)
        up = gen.random(n)
        impl(xi, gamma, lam, topo.in_indptr, topo.in_indices, u, up, out)
        xi, out = out, xi
    return time.perf_counter() - t0, xi


def bench_snn(n, intervals, impl, topo, g_nmda, gen, dt=0.1, n_sub=10):
    c = SnnConstants()
    params = pack_kernel_params(c, dt)
    state = snn_init(n, c, dt, derive_stream(1, [2]))
    oi, oidx, ow = topo.out_csr()
    is_exc = (topo.node_types == 1).astype(np.uint8)
    I_ext = np.zeros(n)
    buf = (np.empty(n * n_sub, dtype=np.int32), np.empty(n * n_sub, dtype=np.int32))
    t0 = time.perf_counter()
    for k in range(intervals):
        normals = gen.standard_normal((n_sub, n))
        base = k * n_sub * dt
        gsin = np.array([c.g0 * np.sin(np.pi * c.omega * (base + s * dt)) for s in range(n_sub)])
        impl(state.V, state.J, state.I_bg, state.ref_left, state.spiked, g_nmda, is_exc,
             oi, oidx, ow, I_ext, normals, gsin, params, *buf)
    return time.perf_counter() - t0, state.V


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller sizes")
    args = ap.parse_args()

    if not HAVE_COMPILED:
        print("compiled kernels unavailable; showing pure-numpy timings only")

    sis_cases = [(1000, 1500), (6400, 500)] if not args.quick else [(500, 200)]
    print(f"{'kernel':<28}{'n':>8}{'steps':>8}{'pure (s)':>10}{'compiled':>10}{'speedup':>9}")
    for n, steps in sis_cases:
        topo = gen_topology_fixed_indegree(n, 10, derive_stream(1, [1, n]))
        gen_p = derive_stream(1, [3, n]).generator()
        gamma = np.clip(0.0015 * gen_p.standard_exponential(n), 0, 1)
        lam = np.clip(0.0025 * gen_p.standard_exponential(n), 0, 1)
        xi0 = (gen_p.random(n) < 0.1).astype(np.uint8)
        t_pure, xi_a = bench_sis(n, steps, pure.sis_step, topo, xi0, gamma, lam,
                                 derive_stream(2, [n]).generator())
        if HAVE_COMPILED:
            t_comp, xi_b = bench_sis(n, steps, _sis_core.sis_step, topo, xi0, gamma, lam,
                                     derive_stream(2, [n]).generator())
            assert np.array_equal(xi_a, xi_b), "kernel outputs diverged"
            print(f"{'sis_step':<28}{n:>8}{steps:>8}{t_pure:>10.3f}{t_comp:>10.3f}{t_pure / t_comp:>8.1f}x")
        else:
            print(f"{'sis_step':<28}{n:>8}{steps:>8}{t_pure:>10.3f}{'-':>10}{'-':>9}")

    snn_cases = [(1000, 500), (3200, 200)] if not args.quick else [(400, 100)]
    for n, intervals in snn_cases:
        topo = gen_topology_ei(n, 10, 0.8, derive_stream(1, [4, n]))
        g_nmda = snn_sample_conductance(n, 4.86e-6, 5.0, derive_stream(1, [5, n]))
        t_pure, v_a = bench_snn(n, intervals, pure.lif_interval, topo, g_nmda,
                                derive_stream(2, [6, n]).generator())
        if HAVE_COMPILED:
            t_comp, v_b = bench_snn(n, intervals, _snn_core.lif_interval, topo, g_nmda,
                                    derive_stream(2, [6, n]).generator())
            assert np.array_equal(v_a, v_b), "kernel outputs diverged"
            print(f"{'lif_interval (1 ms)':<28}{n:>8}{intervals:>8}{t_pure:>10.3f}{t_comp:>10.3f}{t_pure / t_comp:>8.1f}x")
        else:
            print(f"{'lif_interval (1 ms)':<28}{n:>8}{intervals:>8}{t_pure:>10.3f}{'-':>10}{'-':>9}")


if __name__ == "__main__":
    main()
