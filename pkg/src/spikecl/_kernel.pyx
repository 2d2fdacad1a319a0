# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-sample simulation kernel.

Mirrors spikecl._kernel_py loop for loop; that module documents the canonical
update order. Any semantic change must land in both backends.
"""

from libc.math cimport exp, fabs

cimport numpy as cnp

import numpy as np

cnp.import_array()


def run_sample(list weights, list wrefs, list ms,
               list feedback_fp, list feedback_fn,
               list v, list isyn, list u, list refrac, list traces,
               cnp.float64_t[::1] verr_fp, cnp.float64_t[::1] verr_fn,
               cnp.float64_t[::1] a_syn, cnp.float64_t[::1] a_mem, cnp.float64_t[::1] r_mem,
               cnp.float64_t[::1] v_th, cnp.float64_t[::1] v_rest, cnp.float64_t[::1] t_refrac,
               cnp.float64_t[::1] a_u, cnp.float64_t[::1] r_u, cnp.float64_t[::1] tr_decay,
               cnp.float64_t[::1] eta, cnp.float64_t[::1] alpha,
               cnp.float64_t[::1] i_min, cnp.float64_t[::1] i_max,
               cnp.float64_t[::1] consol_coeff,
               double a_me, double r_me, double v_th_err,
               const cnp.uint8_t[:, ::1] input_raster,
               const cnp.uint8_t[:, ::1] label_raster,
               double dt, bint learning, bint u_leaky,
               cnp.int64_t[::1] out_counts, cnp.int64_t[::1] h1_counts,
               dict scratch):
    cdef Py_ssize_t L = len(weights)
    if L < 1 or L > 8:
        raise ValueError(f"supported weight-block count is 1..8, got {L}")

    cdef double* Wp[8]
    cdef double* WRp[8]
    cdef double* Mp[8]
    cdef double* BFPp[8]
    cdef double* BFNp[8]
    cdef double* Vp[8]
    cdef double* Ip[8]
    cdef double* Up[8]
    cdef double* RCp[8]
    cdef double* Tp[9]
    cdef cnp.uint8_t* Sp[8]
    cdef Py_ssize_t sizes[9]

    cdef cnp.float64_t[:, ::1] m2
    cdef cnp.float64_t[::1] m1
    cdef cnp.uint8_t[::1] s1
    cdef cnp.int32_t[::1] c1
    cdef Py_ssize_t l, h, k

    for l in range(L):
        m2 = weights[l]
        Wp[l] = &m2[0, 0]
        sizes[l] = m2.shape[0]
        sizes[l + 1] = m2.shape[1]
        m2 = wrefs[l]
        WRp[l] = &m2[0, 0]
        m2 = ms[l]
        Mp[l] = &m2[0, 0]
        m1 = v[l]
        Vp[l] = &m1[0]
        m1 = isyn[l]
        Ip[l] = &m1[0]
        m1 = u[l]
        Up[l] = &m1[0]
        m1 = refrac[l]
        RCp[l] = &m1[0]
    for h in range(L - 1):
        m2 = feedback_fp[h]
        BFPp[h] = &m2[0, 0]
        m2 = feedback_fn[h]
        BFNp[h] = &m2[0, 0]
    for k in range(L + 1):
        m1 = traces[k]
        Tp[k] = &m1[0]

    cdef list spike_bufs = scratch["spikes"]
    for l in range(L):
        s1 = spike_bufs[l]
        Sp[l] = &s1[0]
    m1 = scratch["wsum"]
    cdef double* wsum = &m1[0]
    m1 = scratch["gate"]
    cdef double* gate = &m1[0]
    m1 = scratch["err_a"]
    cdef double* err_a = &m1[0]
    m1 = scratch["err_b"]
    cdef double* err_b = &m1[0]
    s1 = scratch["sfp"]
    cdef cnp.uint8_t* sfp = &s1[0]
    s1 = scratch["sfn"]
    cdef cnp.uint8_t* sfn = &s1[0]
    c1 = scratch["cols"]
    cdef cnp.int32_t* cols = &c1[0]

    cdef Py_ssize_t T = input_raster.shape[0]
    cdef Py_ssize_t n_in = sizes[0]
    cdef Py_ssize_t n_out = sizes[L]
    if input_raster.shape[1] != n_in:
        raise ValueError("input raster width does not match the input layer")
    if label_raster.shape[0] != T or label_raster.shape[1] != n_out:
        raise ValueError("label raster shape does not match (T, n_outputs)")

    cdef double* vfp_p = &verr_fp[0]
    cdef double* vfn_p = &verr_fn[0]
    cdef cnp.int64_t* oc = &out_counts[0]
    cdef cnp.int64_t* hc = &h1_counts[0]

    cdef const cnp.uint8_t* xin
    cdef const cnp.uint8_t* ylab
    cdef const cnp.uint8_t* spre
    cdef double* wrow
    cdef double* rrow
    cdef double* mrow
    cdef const double* brow
    cdef Py_ssize_t t, i, j, c, n_pre, n_post, ncols, total
    cdef double cur, vv, rr, e, uu, d, w, box, ierr, cc, mw
    cdef cnp.uint8_t spk

    with nogil:
        for t in range(T):
            xin = &input_raster[t, 0]
            ylab = &label_raster[t, 0]

            # Forward cascade: currents, membranes, spikes, traces.
            for l in range(L):
                n_pre = sizes[l]
                n_post = sizes[l + 1]
                spre = xin if l == 0 else <const cnp.uint8_t*> Sp[l - 1]
                for i in range(n_post):
                    wsum[i] = 0.0
                for j in range(n_pre):
                    if spre[j]:
                        wrow = Wp[l] + j * n_post
                        for i in range(n_post):
                            wsum[i] += wrow[i]
                for i in range(n_post):
                    cur = Ip[l][i]
                    cur = cur + a_syn[l] * (wsum[i] - cur)
                    Ip[l][i] = cur
                    rr = RCp[l][i]
                    if rr > 0:
                        rr = rr - dt
                        if rr < 0:
                            rr = 0.0
                        RCp[l][i] = rr
                        Vp[l][i] = 0.0
                        spk = 0
                    else:
                        vv = Vp[l][i]
                        vv = vv + a_mem[l] * ((v_rest[l] - vv) + cur * r_mem[l])
                        if vv >= v_th[l]:
                            spk = 1
                            vv = 0.0
                            RCp[l][i] = t_refrac[l]
                        else:
                            spk = 0
                        Vp[l][i] = vv
                    Sp[l][i] = spk
                    if learning:
                        Tp[l + 1][i] = (Tp[l + 1][i] + spk) * tr_decay[l + 1]
            if learning:
                for j in range(n_in):
                    Tp[0][j] = (Tp[0][j] + xin[j]) * tr_decay[0]

            for i in range(n_out):
                oc[i] += Sp[L - 1][i]
            for i in range(sizes[1]):
                hc[i] += Sp[0][i]

            if not learning:
                continue

            # Error-neuron pairs: fp integrates the error current, fn its negation.
            for i in range(n_out):
                ierr = (<double> Sp[L - 1][i]) - (<double> ylab[i])
                vv = vfp_p[i]
                vv = vv + a_me * (ierr * r_me - vv)
                if vv < 0:
                    vv = 0.0
                if vv >= v_th_err:
                    sfp[i] = 1
                    vv = 0.0
                else:
                    sfp[i] = 0
                vfp_p[i] = vv
                vv = vfn_p[i]
                vv = vv + a_me * ((-ierr) * r_me - vv)
                if vv < 0:
                    vv = 0.0
                if vv >= v_th_err:
                    sfn[i] = 1
                    vv = 0.0
                else:
                    sfn[i] = 0
                vfn_p[i] = vv

            # Error compartments: direct at the output, through feedback elsewhere.
            l = L - 1
            for i in range(n_out):
                e = (<double> sfp[i]) - (<double> sfn[i])
                uu = Up[l][i]
                if u_leaky:
                    uu = uu + a_u[l] * (e * r_u[l] - uu)
                else:
                    uu = uu + a_u[l] * (e * r_u[l])
                Up[l][i] = uu
            for h in range(L - 1):
                n_post = sizes[h + 1]
                for j in range(n_post):
                    err_a[j] = 0.0
                    err_b[j] = 0.0
                for i in range(n_out):
                    if sfp[i]:
                        brow = BFPp[h] + i * n_post
                        for j in range(n_post):
                            err_a[j] += brow[j]
                    if sfn[i]:
                        brow = BFNp[h] + i * n_post
                        for j in range(n_post):
                            err_b[j] += brow[j]
                for j in range(n_post):
                    e = err_a[j] - err_b[j]
                    uu = Up[h][j]
                    if u_leaky:
                        uu = uu + a_u[h] * (e * r_u[h] - uu)
                    else:
                        uu = uu + a_u[h] * (e * r_u[h])
                    Up[h][j] = uu

            # Plasticity: full rule on presynaptically active rows, decay-only
            # on remaining rows of spiking columns. Disjoint by construction.
            for l in range(L):
                n_pre = sizes[l]
                n_post = sizes[l + 1]
                spre = xin if l == 0 else <const cnp.uint8_t*> Sp[l - 1]
                for i in range(n_post):
                    cur = Ip[l][i]
                    box = 1.0 if (cur >= i_min[l] and cur <= i_max[l]) else 0.0
                    gate[i] = eta[l] * Up[l][i] * box
                # With alpha == 0 the column pass would subtract an exact zero
                # from every weight; skip it outright.
                ncols = 0
                if alpha[l] != 0.0:
                    for i in range(n_post):
                        if Sp[l][i]:
                            cols[ncols] = <cnp.int32_t> i
                            ncols += 1
                for j in range(n_pre):
                    wrow = Wp[l] + j * n_post
                    rrow = WRp[l] + j * n_post
                    mrow = Mp[l] + j * n_post
                    if spre[j]:
                        for i in range(n_post):
                            w = wrow[i]
                            d = gate[i] + alpha[l] * (w - rrow[i]) * (<double> Sp[l][i])
                            # exp(-|m w|) is exactly 1 when m w == 0; the branch
                            # dodges most exp calls while m is still small.
                            mw = mrow[i] * w
                            wrow[i] = w - d if mw == 0.0 else w - exp(-fabs(mw)) * d
                    elif ncols > 0:
                        for c in range(ncols):
                            i = cols[c]
                            w = wrow[i]
                            d = alpha[l] * (w - rrow[i])
                            mw = mrow[i] * w
                            wrow[i] = w - d if mw == 0.0 else w - exp(-fabs(mw)) * d
                cc = consol_coeff[l]
                if cc != 0.0:
                    total = n_pre * n_post
                    for c in range(total):
                        WRp[l][c] = WRp[l][c] + cc * (Wp[l][c] - WRp[l][c])
    return None
