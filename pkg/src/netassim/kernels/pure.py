"""Pure-numpy reference kernels for the two hot inner loops.

These are the fallback implementations used when the compiled extensions are
unavailable.  The compiled kernels in ``_sis_core.pyx`` / ``_snn_core.pyx``
replicate the arithmetic of these functions operation-for-operation (same
evaluation order, FMA contraction disabled), so both paths produce
bit-identical trajectories; ``tests/test_kernels.py`` asserts exact equality.

All randomness is drawn by the caller and passed in as arrays: the kernels
themselves are deterministic.
"""

from __future__ import annotations

import numpy as np

# Packed-constant layout for the LIF kernel (mirrored in _snn_core.pyx).
P_DT_OVER_C = 0
P_G_L = 1
P_V_L = 2
P_V_TH = 3
P_V_REST = 4
P_V_CH = 5  # 5..8: reversal potentials, channel order AMPA, NMDA, GABA_A, GABA_B
P_DECAY_CH = 9  # 9..12: per-channel Euler decay factor (1 - dt/tau)
P_G_AMPA = 13
P_G_GABA_A = 14
P_G_GABA_B = 15
P_REF_SUBSTEPS = 16
P_OU_A = 17  # exp(-dt/tau_bg)
P_OU_B = 18  # sigma_bg * sqrt(1 - a**2)
P_MU_BG = 19
P_MOD_CH = 20  # 20..23: per-channel modulation gate (1.0 = modulated)
N_PARAMS = 24

N_CHANNELS = 4
CH_AMPA, CH_NMDA, CH_GABA_A, CH_GABA_B = 0, 1, 2, 3


def sis_step(xi, gamma, lam, indptr, indices, u, u_prime, out):
    """One synchronous SIS update.

    Susceptible node i becomes infected iff u[i] <= 1 - prod_k (1 - gamma_i *
    xi_k) over its in-neighbors k; infected node i recovers iff
    u_prime[i] <= lam[i].  Reads only the previous state `xi`, writes `out`.
    """
    n = xi.shape[0]
    xif = xi.astype(np.float64)
    deg = np.diff(indptr)
    if n > 0 and deg.size and deg.min() == deg.max() and deg[0] > 0:
        d = int(deg[0])
        nbr = np.asarray(indices).reshape(n, d)
        acc = np.ones(n)
        # Sequential column product: same multiply order as the CSR loop in
        # the compiled kernel.
        for k in range(d):
            acc = acc * (1.0 - gamma * xif[nbr[:, k]])
        infect_p = 1.0 - acc
    elif n > 0:
        # Ragged in-degrees: segment products via multiply.reduceat, which
        # reduces each segment left-to-right (same order as the compiled
        # loop).  A sentinel 1.0 keeps trailing empty segments in range;
        # empty segments (reduceat returns arr[start] there) are overridden.
        factors = np.append(1.0 - np.repeat(gamma, deg) * xif[indices], 1.0)
        acc = np.multiply.reduceat(factors, indptr[:-1])
        acc[deg == 0] = 1.0
        infect_p = 1.0 - acc
    else:
        infect_p = np.empty(0)

    susceptible = xi == 0
    out[:] = np.where(susceptible, u <= infect_p, ~(u_prime <= lam)).astype(np.uint8)
    return out


def lif_interval(
    V,
    J,
    I_bg,
    ref_left,
    spiked,
    g_nmda,
    is_exc,
    out_indptr,
    out_indices,
    out_weights,
    I_ext,
    normals,
    gsin,
    params,
    spike_sub,
    spike_id,
):
    """Advance a LIF network by ``normals.shape[0]`` Euler substeps.

    Per substep, in order: synaptic gating decay plus injections from the
    spikes of the previous substep, exact OU update of the background
    current, four-channel conductance currents (modulation added to every
    channel, floored at zero), Euler voltage update for non-refractory
    neurons, threshold/reset/refractory bookkeeping.

    Spikes are recorded as (local substep index, neuron id) pairs into
    ``spike_sub``/``spike_id``; returns the number recorded.  `spiked` holds
    the spike flags of the final substep on return.
    """
    n = V.shape[0]
    n_sub = normals.shape[0]
    dt_over_c = params[P_DT_OVER_C]
    g_l = params[P_G_L]
    v_l = params[P_V_L]
    v_th = params[P_V_TH]
    v_rest = params[P_V_REST]
    v_ch = params[P_V_CH : P_V_CH + N_CHANNELS]
    decay = params[P_DECAY_CH : P_DECAY_CH + N_CHANNELS]
    g_fixed = {
        CH_AMPA: params[P_G_AMPA],
        CH_GABA_A: params[P_G_GABA_A],
        CH_GABA_B: params[P_G_GABA_B],
    }
    ref_substeps = int(params[P_REF_SUBSTEPS])
    ou_a = params[P_OU_A]
    ou_b = params[P_OU_B]
    mu_bg = params[P_MU_BG]
    mod = params[P_MOD_CH : P_MOD_CH + N_CHANNELS]

    n_spikes = 0
    for k in range(n_sub):
        # (1) synaptic decay, then inject spikes from the previous substep
        for c in range(N_CHANNELS):
            J[c] *= decay[c]
        if spiked.any():
            sources = np.flatnonzero(spiked)
            for src_exc, channels in ((1, (CH_AMPA, CH_NMDA)), (0, (CH_GABA_A, CH_GABA_B))):
                group = sources[is_exc[sources] == src_exc]
                if group.size == 0:
                    continue
                targets = np.concatenate(
                    [out_indices[out_indptr[s] : out_indptr[s + 1]] for s in group]
                )
                w = np.concatenate([out_weights[out_indptr[s] : out_indptr[s + 1]] for s in group])
                np.add.at(J[channels[0]], targets, w)
                np.add.at(J[channels[1]], targets, w)

        # (2) background current, exact OU transition
        I_bg[:] = mu_bg + (I_bg - mu_bg) * ou_a + ou_b * normals[k]

        # (3) four-channel synaptic currents; modulation on every channel,
        # total channel conductance floored at zero
        g_k = gsin[k]
        I_syn = np.zeros(n)
        for c in range(N_CHANNELS):
            if c == CH_NMDA:
                g_eff = np.maximum(g_nmda + mod[c] * g_k, 0.0)
            else:
                g_eff = max(g_fixed[c] + mod[c] * g_k, 0.0)
            I_syn = I_syn + g_eff * (v_ch[c] - V) * J[c]

        # (4) Euler voltage update outside refractory; hold V_rest inside
        free = ref_left == 0
        rhs = -g_l * (V - v_l) + I_syn + I_bg + I_ext
        V[free] = V[free] + dt_over_c * rhs[free]
        V[~free] = v_rest
        ref_left[~free] -= 1

        # (5) threshold, reset, refractory entry
        crossed = V >= v_th
        spiked[:] = 0
        if crossed.any():
            idx = np.flatnonzero(crossed)
            V[idx] = v_rest
            ref_left[idx] = ref_substeps
            spiked[idx] = 1
            m = idx.size
            spike_sub[n_spikes : n_spikes + m] = k
            spike_id[n_spikes : n_spikes + m] = idx
            n_spikes += m

    return n_spikes
