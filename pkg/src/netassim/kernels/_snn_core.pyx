# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LIF interval kernel; arithmetic mirrors kernels/pure.py exactly.

Constant layout in `params` matches the P_* indices in kernels/pure.py.
"""

cimport numpy as cnp

cnp.import_array()

def lif_interval(
    double[::1] V,
    double[:, ::1] J,
    double[::1] I_bg,
    cnp.int32_t[::1] ref_left,
    cnp.uint8_t[::1] spiked,
    double[::1] g_nmda,
    cnp.uint8_t[::1] is_exc,
    cnp.int64_t[::1] out_indptr,
    cnp.int32_t[::1] out_indices,
    double[::1] out_weights,
    double[::1] I_ext,
    double[:, ::1] normals,
    double[::1] gsin,
    double[::1] params,
    cnp.int32_t[::1] spike_sub,
    cnp.int32_t[::1] spike_id,
):
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t n_sub = normals.shape[0]
    cdef double dt_over_c = params[0]
    cdef double g_l = params[1]
    cdef double v_l = params[2]
    cdef double v_th = params[3]
    cdef double v_rest = params[4]
    cdef double v_ch[4]
    cdef double decay[4]
    cdef double g_base[4]
    cdef int ref_substeps = <int> params[16]
    cdef double ou_a = params[17]
    cdef double ou_b = params[18]
    cdef double mu_bg = params[19]
    cdef double mod[4]
    cdef Py_ssize_t k, i, c, e, tgt
    cdef double g_k, g_eff, isyn, rhs, w
    cdef int n_spikes = 0

    for c in range(4):
        v_ch[c] = params[5 + c]
        decay[c] = params[9 + c]
        mod[c] = params[20 + c]
    g_base[0] = params[13]   # AMPA
    g_base[1] = 0.0          # NMDA: per-neuron, handled below
    g_base[2] = params[14]   # GABA_A
    g_base[3] = params[15]   # GABA_B

    for k in range(n_sub):
        # (1) synaptic decay, then inject spikes of the previous substep
        for c in range(4):
            for i in range(n):
                J[c, i] = J[c, i] * decay[c]
        for i in range(n):
            if spiked[i]:
                if is_exc[i]:
                    for e in range(out_indptr[i], out_indptr[i + 1]):
                        tgt = out_indices[e]
                        w = out_weights[e]
                        J[0, tgt] = J[0, tgt] + w
                        J[1, tgt] = J[1, tgt] + w
                else:
                    for e in range(out_indptr[i], out_indptr[i + 1]):
                        tgt = out_indices[e]
                        w = out_weights[e]
                        J[2, tgt] = J[2, tgt] + w
                        J[3, tgt] = J[3, tgt] + w

        g_k = gsin[k]
        for i in range(n):
            # (2) exact OU transition of the background current
            I_bg[i] = mu_bg + (I_bg[i] - mu_bg) * ou_a + ou_b * normals[k, i]

            # (3) four-channel currents, modulation floored at zero
            isyn = 0.0
            for c in range(4):
                if c == 1:  # NMDA: per-neuron conductance
                    g_eff = g_nmda[i] + mod[c] * g_k
                else:
                    g_eff = g_base[c] + mod[c] * g_k
                if g_eff < 0.0:
                    g_eff = 0.0
                isyn = isyn + g_eff * (v_ch[c] - V[i]) * J[c, i]

            # (4) Euler update outside refractory; hold reset value inside
            if ref_left[i] == 0:
                rhs = -g_l * (V[i] - v_l) + isyn + I_bg[i] + I_ext[i]
                V[i] = V[i] + dt_over_c * rhs
            else:
                V[i] = v_rest
                ref_left[i] = ref_left[i] - 1

            # (5) threshold, reset, refractory entry
            if V[i] >= v_th:
                V[i] = v_rest
                ref_left[i] = ref_substeps
                spiked[i] = 1
                spike_sub[n_spikes] = <cnp.int32_t> k
                spike_id[n_spikes] = <cnp.int32_t> i
                n_spikes = n_spikes + 1
            else:
                spiked[i] = 0

    return n_spikes
