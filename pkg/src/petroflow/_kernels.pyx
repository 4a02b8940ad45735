# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled network evaluation kernels; same contract as ``_kernels_py``."""

from libc.math cimport exp, log

cdef double FLOW_EPS = 1e-12


cdef inline void _flow_power(double Q, double m, double* q, double* dq, double* d2q) noexcept nogil:
    cdef double p, a, b
    if Q <= 0.0:
        q[0] = 0.0
        dq[0] = 0.0
        d2q[0] = 0.0
    elif Q < FLOW_EPS:
        a = (1.0 - m) * exp(-m * log(FLOW_EPS))
        b = m * exp((1.0 - m) * log(FLOW_EPS))
        q[0] = a * Q * Q + b * Q
        dq[0] = 2.0 * a * Q + b
        d2q[0] = 2.0 * a
    else:
        p = exp((1.0 - m) * log(Q))
        q[0] = Q * p
        dq[0] = (2.0 - m) * p
        d2q[0] = (2.0 - m) * (1.0 - m) * p / Q


def constraints(d, const double[::1] x, double[::1] out):
    cdef const long[::1] pq = d.pipe_q, phi = d.pipe_hi, phj = d.pipe_hj
    cdef const double[::1] pk = d.pipe_k, pdz = d.pipe_dz, pm = d.pipe_m
    cdef const long[::1] uq = d.pump_q, uhi = d.pump_hi, uhj = d.pump_hj, uw = d.pump_w, ueta = d.pump_eta
    cdef const double[::1] a0 = d.pump_a0, a1 = d.pump_a1, wn = d.pump_wnom, qn = d.pump_qnom, en = d.pump_etanom
    cdef Py_ssize_t E = d.n_pipes, P = d.n_pumps, k
    cdef Py_ssize_t r0 = d.pipe_row0, h0 = d.head_row0, e0 = d.eff_row0
    cdef double q, dq, d2q, Q, w, s, r
    with nogil:
        for k in range(E):
            _flow_power(x[pq[k]], pm[k], &q, &dq, &d2q)
            out[r0 + k] = x[phi[k]] - x[phj[k]] - pdz[k] - pk[k] * q
        for k in range(P):
            Q = x[uq[k]]
            w = x[uw[k]]
            s = w / wn[k]
            out[h0 + k] = (x[uhj[k]] - x[uhi[k]]) - a0[k] * s * s + a1[k] * Q * Q
            r = Q * wn[k] / (qn[k] * w)
            out[e0 + k] = x[ueta[k]] - en[k] * (1.0 - (r - 1.0) * (r - 1.0))


def jacobian(d, const double[::1] x, double[::1] vals):
    cdef const long[::1] pq = d.pipe_q
    cdef const double[::1] pk = d.pipe_k, pm = d.pipe_m
    cdef const long[::1] uq = d.pump_q, uw = d.pump_w
    cdef const double[::1] a0 = d.pump_a0, a1 = d.pump_a1, wn = d.pump_wnom, qn = d.pump_qnom, en = d.pump_etanom
    cdef const long[::1] pos_pq = d.pos_pipe_q, pos_hq = d.pos_head_q, pos_hw = d.pos_head_w
    cdef const long[::1] pos_eq = d.pos_eff_q, pos_ew = d.pos_eff_w
    cdef Py_ssize_t E = d.n_pipes, P = d.n_pumps, k
    cdef double q, dq, d2q, Q, w, rq, r, g
    with nogil:
        for k in range(E):
            _flow_power(x[pq[k]], pm[k], &q, &dq, &d2q)
            vals[pos_pq[k]] = -pk[k] * dq
        for k in range(P):
            Q = x[uq[k]]
            w = x[uw[k]]
            vals[pos_hq[k]] = 2.0 * a1[k] * Q
            vals[pos_hw[k]] = -2.0 * a0[k] * w / (wn[k] * wn[k])
            rq = wn[k] / (qn[k] * w)
            r = Q * rq
            g = 2.0 * en[k] * (r - 1.0)
            vals[pos_eq[k]] = g * rq
            vals[pos_ew[k]] = -g * r / w


def hessian(d, const double[::1] x, const double[::1] lam, double obj_factor, double[::1] vals):
    cdef const long[::1] pq = d.pipe_q
    cdef const double[::1] pk = d.pipe_k, pm = d.pipe_m
    cdef const long[::1] uq = d.pump_q, uhi = d.pump_hi, uhj = d.pump_hj, uw = d.pump_w, ueta = d.pump_eta
    cdef const double[::1] a0 = d.pump_a0, a1 = d.pump_a1, wn = d.pump_wnom, qn = d.pump_qnom, en = d.pump_etanom
    cdef const double[::1] kc = d.pump_kcost
    cdef const long[::1] h_pqq = d.hpos_pipe_qq, h_hqq = d.hpos_head_qq, h_hww = d.hpos_head_ww
    cdef const long[::1] h_eqq = d.hpos_eff_qq, h_ewq = d.hpos_eff_wq, h_eww = d.hpos_eff_ww
    cdef const long[::1] c_hiq, c_hjq, c_etaq, c_etahi, c_etahj, c_etaeta
    cdef Py_ssize_t E = d.n_pipes, P = d.n_pumps, k
    cdef Py_ssize_t r0 = d.pipe_row0, h0 = d.head_row0, e0 = d.eff_row0
    cdef bint with_cost = d.with_cost
    cdef double q, dq, d2q, Q, w, rq, r, rw, rqw, rww, lh, le, kk, eta, dh, inv
    if with_cost:
        c_hiq = d.hpos_cost_hi_q
        c_hjq = d.hpos_cost_hj_q
        c_etaq = d.hpos_cost_eta_q
        c_etahi = d.hpos_cost_eta_hi
        c_etahj = d.hpos_cost_eta_hj
        c_etaeta = d.hpos_cost_eta_eta
    with nogil:
        for k in range(E):
            _flow_power(x[pq[k]], pm[k], &q, &dq, &d2q)
            vals[h_pqq[k]] = -lam[r0 + k] * pk[k] * d2q
        for k in range(P):
            Q = x[uq[k]]
            w = x[uw[k]]
            lh = lam[h0 + k]
            le = lam[e0 + k]
            rq = wn[k] / (qn[k] * w)
            r = Q * rq
            rw = -r / w
            rqw = -rq / w
            rww = 2.0 * r / (w * w)
            vals[h_hqq[k]] = lh * 2.0 * a1[k]
            vals[h_hww[k]] = lh * (-2.0 * a0[k] / (wn[k] * wn[k]))
            vals[h_eqq[k]] = le * 2.0 * en[k] * rq * rq
            vals[h_ewq[k]] = le * 2.0 * en[k] * (rq * rw + (r - 1.0) * rqw)
            vals[h_eww[k]] = le * 2.0 * en[k] * (rw * rw + (r - 1.0) * rww)
            if with_cost:
                kk = obj_factor * kc[k]
                eta = x[ueta[k]]
                dh = x[uhj[k]] - x[uhi[k]]
                inv = 1.0 / eta
                vals[c_hiq[k]] = -kk * inv
                vals[c_hjq[k]] = kk * inv
                vals[c_etaq[k]] = -kk * dh * inv * inv
                vals[c_etahi[k]] = kk * Q * inv * inv
                vals[c_etahj[k]] = -kk * Q * inv * inv
                vals[c_etaeta[k]] = 2.0 * kk * Q * dh * inv * inv * inv


def pump_cost(d, const double[::1] x):
    cdef const long[::1] uq = d.pump_q, uhi = d.pump_hi, uhj = d.pump_hj, ueta = d.pump_eta
    cdef const double[::1] kc = d.pump_kcost
    cdef Py_ssize_t P = d.n_pumps, k
    cdef double total = 0.0
    with nogil:
        for k in range(P):
            total += kc[k] * x[uq[k]] * (x[uhj[k]] - x[uhi[k]]) / x[ueta[k]]
    return total


def pump_cost_gradient(d, const double[::1] x, double factor, double[::1] grad):
    cdef const long[::1] uq = d.pump_q, uhi = d.pump_hi, uhj = d.pump_hj, ueta = d.pump_eta
    cdef const double[::1] kc = d.pump_kcost
    cdef Py_ssize_t P = d.n_pumps, k
    cdef double Q, eta, dh, kk
    with nogil:
        for k in range(P):
            Q = x[uq[k]]
            eta = x[ueta[k]]
            dh = x[uhj[k]] - x[uhi[k]]
            kk = factor * kc[k] / eta
            grad[uq[k]] += kk * dh
            grad[uhj[k]] += kk * Q
            grad[uhi[k]] -= kk * Q
            grad[ueta[k]] -= kk * Q * dh / eta
