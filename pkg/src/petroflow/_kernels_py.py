"""Pure numpy implementation of the network evaluation kernels.

Mirrors ``_kernels.pyx`` function-for-function.  ``d`` is a
:class:`petroflow.formulation.KernelData` (structure of arrays over pipes
and pumps); outputs are written in place.
"""

import numpy as np

FLOW_EPS = 1e-12


def _flow_power(Q, m):
    q = np.zeros_like(Q)
    dq = np.zeros_like(Q)
    d2q = np.zeros_like(Q)
    big = Q >= FLOW_EPS
    if big.all():
        p = np.exp((1.0 - m) * np.log(Q))
        return Q * p, (2.0 - m) * p, (2.0 - m) * (1.0 - m) * p / Q
    Qb, mb = Q[big], m[big]
    p = np.exp((1.0 - mb) * np.log(Qb))
    q[big] = Qb * p
    dq[big] = (2.0 - mb) * p
    d2q[big] = (2.0 - mb) * (1.0 - mb) * p / Qb
    small = (Q > 0.0) & ~big
    if small.any():
        Qs, ms = Q[small], m[small]
        a = (1.0 - ms) * FLOW_EPS**-ms
        b = ms * FLOW_EPS ** (1.0 - ms)
        q[small] = a * Qs * Qs + b * Qs
        dq[small] = 2.0 * a * Qs + b
        d2q[small] = 2.0 * a
    return q, dq, d2q


def constraints(d, x, out):
    """Pipe, pump-head and pump-efficiency residuals into ``out[d.pipe_row0:]`` etc."""
    E, P = d.n_pipes, d.n_pumps
    if E:
        Q = x[d.pipe_q]
        q, _, _ = _flow_power(Q, d.pipe_m)
        out[d.pipe_row0:d.pipe_row0 + E] = x[d.pipe_hi] - x[d.pipe_hj] - d.pipe_dz - d.pipe_k * q
    if P:
        Q = x[d.pump_q]
        w = x[d.pump_w]
        dh = x[d.pump_hj] - x[d.pump_hi]
        s = w / d.pump_wnom
        out[d.head_row0:d.head_row0 + P] = dh - d.pump_a0 * s * s + d.pump_a1 * Q * Q
        r = Q * d.pump_wnom / (d.pump_qnom * w)
        out[d.eff_row0:d.eff_row0 + P] = x[d.pump_eta] - d.pump_etanom * (1.0 - (r - 1.0) ** 2)


def jacobian(d, x, vals):
    """Nonconstant Jacobian entries into ``vals`` at the kernel positions."""
    if d.n_pipes:
        _, dq, _ = _flow_power(x[d.pipe_q], d.pipe_m)
        vals[d.pos_pipe_q] = -d.pipe_k * dq
    if d.n_pumps:
        Q = x[d.pump_q]
        w = x[d.pump_w]
        vals[d.pos_head_q] = 2.0 * d.pump_a1 * Q
        vals[d.pos_head_w] = -2.0 * d.pump_a0 * w / d.pump_wnom**2
        rq = d.pump_wnom / (d.pump_qnom * w)
        r = Q * rq
        g = 2.0 * d.pump_etanom * (r - 1.0)
        vals[d.pos_eff_q] = g * rq
        vals[d.pos_eff_w] = -g * r / w


def hessian(d, x, lam, obj_factor, vals):
    """Nonlinear constraint and pump-cost Hessian entries (lower triangle).

    ``obj_factor`` multiplies the pumping-cost term ``J_O``; the formulation
    folds the objective sign into it.
    """
    if d.n_pipes:
        _, _, d2q = _flow_power(x[d.pipe_q], d.pipe_m)
        vals[d.hpos_pipe_qq] = -lam[d.pipe_row0:d.pipe_row0 + d.n_pipes] * d.pipe_k * d2q
    if not d.n_pumps:
        return
    P = d.n_pumps
    Q = x[d.pump_q]
    w = x[d.pump_w]
    lh = lam[d.head_row0:d.head_row0 + P]
    le = lam[d.eff_row0:d.eff_row0 + P]
    en = d.pump_etanom
    rq = d.pump_wnom / (d.pump_qnom * w)
    r = Q * rq
    rw = -r / w
    rqw = -rq / w
    rww = 2.0 * r / (w * w)
    vals[d.hpos_head_qq] = lh * 2.0 * d.pump_a1
    vals[d.hpos_head_ww] = lh * (-2.0 * d.pump_a0 / d.pump_wnom**2)
    vals[d.hpos_eff_qq] = le * 2.0 * en * rq * rq
    vals[d.hpos_eff_wq] = le * 2.0 * en * (rq * rw + (r - 1.0) * rqw)
    vals[d.hpos_eff_ww] = le * 2.0 * en * (rw * rw + (r - 1.0) * rww)
    if d.with_cost:
        k = obj_factor * d.pump_kcost
        eta = x[d.pump_eta]
        dh = x[d.pump_hj] - x[d.pump_hi]
        inv = 1.0 / eta
        vals[d.hpos_cost_hi_q] = -k * inv
        vals[d.hpos_cost_hj_q] = k * inv
        vals[d.hpos_cost_eta_q] = -k * dh * inv * inv
        vals[d.hpos_cost_eta_hi] = k * Q * inv * inv
        vals[d.hpos_cost_eta_hj] = -k * Q * inv * inv
        vals[d.hpos_cost_eta_eta] = 2.0 * k * Q * dh * inv * inv * inv


def pump_cost(d, x):
    """Total pumping cost rate ``J_O`` in $/h."""
    if not d.n_pumps:
        return 0.0
    Q = x[d.pump_q]
    dh = x[d.pump_hj] - x[d.pump_hi]
    return float(np.sum(d.pump_kcost * Q * dh / x[d.pump_eta]))


def pump_cost_gradient(d, x, factor, grad):
    """Accumulate ``factor * grad J_O`` into the dense vector ``grad``."""
    if not d.n_pumps:
        return
    Q = x[d.pump_q]
    eta = x[d.pump_eta]
    dh = x[d.pump_hj] - x[d.pump_hi]
    k = factor * d.pump_kcost / eta
    np.add.at(grad, d.pump_q, k * dh)
    np.add.at(grad, d.pump_hj, k * Q)
    np.add.at(grad, d.pump_hi, -k * Q)
    np.add.at(grad, d.pump_eta, -k * Q * dh / eta)
