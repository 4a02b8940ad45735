"""Primal-dual interior-point method with a filter line search.

The problem is first rewritten in equality form: every ranged or
one-sided constraint row gets a slack ``s`` with ``g_k(x) - s_k = 0`` and
the row bounds move onto ``s``.  With ``w = (x, s)`` the method solves

    min f(w)   s.t.  c(w) = 0,   w_L <= w <= w_U

through a sequence of log-barrier subproblems.  Each Newton step solves the
symmetric indefinite system

    [ W + Sigma + dw*I    A^T   ] [dx]     [ grad phi + A^T y ]
    [       A          -dc*I   ] [dy] = - [       c          ]

with a Bunch-Kaufman factorization; ``dw`` and ``dc`` are raised until
the inertia is ``(n, m, 0)``.  Steps are accepted by a filter on
``(||c||_1, phi)`` with second-order corrections, and a failed line search
hands over to an elastic l1 feasibility restoration, itself solved with the
same machinery.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..nlp import NlpProblem
from .linalg import SymmetricFactor
from .types import KktResiduals, SolverOptions, SolveResult, SolveStatus

_EPS = np.finfo(float).eps

# filter and line-search constants
_GAMMA_THETA = 1e-5
_GAMMA_PHI = 1e-8
_GAMMA_ALPHA = 0.05
_ETA_PHI = 1e-8
_S_THETA = 1.1
_S_PHI = 2.3
_DELTA = 1.0
_KAPPA_SOC = 0.99
_KAPPA_D = 1e-4
_RHO = 1000.0
_DIVERGE = 1e20

LOG_HEADER = "iter    objective    inf_pr   inf_du lg(mu)  ||d||  lg(rg) alpha_du alpha_pr  ls"


# --------------------------------------------------------------------------
# problem forms


class _SlackForm:
    """Scaled equality form of an :class:`NlpProblem` (minimization sense)."""

    def __init__(self, prob: NlpProblem, f_scale: float, c_scale: np.ndarray):
        self.prob = prob
        self.nx = prob.n
        self.m = prob.m
        self.sense = 1.0 if prob.sense == "minimize" else -1.0
        self.f_scale = f_scale
        self.fs = f_scale * self.sense
        self.c_scale = c_scale
        eq = prob.equality_rows
        self.ineq = np.flatnonzero(~eq)
        self.n = self.nx + self.ineq.size
        self.rhs = np.where(eq, c_scale * prob.g_lower, 0.0)
        gl = c_scale[self.ineq] * prob.g_lower[self.ineq]
        gu = c_scale[self.ineq] * prob.g_upper[self.ineq]
        self.wl = np.concatenate([prob.x_lower, gl])
        self.wu = np.concatenate([prob.x_upper, gu])
        self._jr, self._jc = prob.jac_structure

    def f(self, w):
        return self.fs * float(self.prob.objective(w[:self.nx]))

    def report(self, f):
        return f / self.fs

    def grad(self, w):
        g = np.zeros(self.n)
        g[:self.nx] = self.fs * np.asarray(self.prob.gradient(w[:self.nx]), dtype=float)
        return g

    def c(self, w):
        r = self.c_scale * np.asarray(self.prob.constraints(w[:self.nx]), dtype=float) - self.rhs
        r[self.ineq] -= w[self.nx:]
        return r

    def jac(self, w):
        J = np.zeros((self.m, self.n))
        np.add.at(J, (self._jr, self._jc), self.prob.jacobian(w[:self.nx]))
        J[:, :self.nx] *= self.c_scale[:, None]
        J[self.ineq, self.nx + np.arange(self.ineq.size)] = -1.0
        return J

    def hess(self, w, y, obj_factor):
        H = np.zeros((self.n, self.n))
        H[:self.nx, :self.nx] = self.prob.dense_hessian(w[:self.nx], self.c_scale * y, obj_factor * self.fs)
        return H


class _RestorationForm:
    """Elastic problem ``min rho*sum(p+n) + zeta/2*||D(w-w_R)||^2``
    s.t. ``c(w) - p + n = 0``, ``p, n >= 0``."""

    def __init__(self, base, w_ref: np.ndarray, zeta: float):
        self.base = base
        self.nb = base.n
        self.m = base.m
        self.n = self.nb + 2 * self.m
        self.w_ref = w_ref
        self.zeta = zeta
        self.d2 = np.minimum(1.0, 1.0 / np.maximum(np.abs(w_ref), _EPS)) ** 2
        self.wl = np.concatenate([base.wl, np.zeros(2 * self.m)])
        self.wu = np.concatenate([base.wu, np.full(2 * self.m, np.inf)])

    def f(self, v):
        d = v[:self.nb] - self.w_ref
        return _RHO * float(np.sum(v[self.nb:])) + 0.5 * self.zeta * float(np.dot(self.d2 * d, d))

    def report(self, f):
        return f

    def grad(self, v):
        g = np.full(self.n, _RHO)
        g[:self.nb] = self.zeta * self.d2 * (v[:self.nb] - self.w_ref)
        return g

    def c(self, v):
        m, nb = self.m, self.nb
        return self.base.c(v[:nb]) - v[nb:nb + m] + v[nb + m:]

    def jac(self, v):
        m, nb = self.m, self.nb
        J = np.zeros((m, self.n))
        J[:, :nb] = self.base.jac(v[:nb])
        J[:, nb:nb + m] = -np.eye(m)
        J[:, nb + m:] = np.eye(m)
        return J

    def hess(self, v, y, obj_factor):
        H = np.zeros((self.n, self.n))
        H[:self.nb, :self.nb] = self.base.hess(v[:self.nb], y, 0.0)
        H[np.arange(self.nb), np.arange(self.nb)] += obj_factor * self.zeta * self.d2
        return H


# --------------------------------------------------------------------------
# core iteration


@dataclass
class _Outcome:
    status: str
    w: np.ndarray
    y: np.ndarray
    zl: np.ndarray
    zu: np.ndarray
    mu: float
    iterations: int
    errors: tuple[float, float, float]
    detail: str = ""


class _Counters:
    def __init__(self):
        self.iterations = 0
        self.factorizations = 0
        self.restorations = 0
        self.inertia_corrections = 0
        self.trace: list[np.ndarray] | None = None


def _fraction_to_boundary(v, dv, tau):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


def _push_into_box(v, lo, hi, k1, k2):
    """Move ``v`` strictly inside ``[lo, hi]`` (bound-push rule)."""
    v = np.array(v, dtype=float)
    has_l = np.isfinite(lo)
    has_u = np.isfinite(hi)
    width = np.where(has_l & has_u, hi - lo, np.inf)
    pl = np.minimum(k1 * np.maximum(1.0, np.abs(np.where(has_l, lo, 0.0))), k2 * width)
    pu = np.minimum(k1 * np.maximum(1.0, np.abs(np.where(has_u, hi, 0.0))), k2 * width)
    fixed = has_l & has_u & (width <= 0)
    v = np.where(has_l, np.maximum(v, lo + pl), v)
    v = np.where(has_u, np.minimum(v, hi - pu), v)
    v = np.where(fixed, lo, v)
    return v


class _Ipm:
    def __init__(self, form, opts: SolverOptions, counters: _Counters, log, depth: int = 0,
                 iter_limit: int | None = None):
        self.form = form
        self.o = opts
        self.cnt = counters
        self.log = log
        self.depth = depth
        self.iter_limit = opts.max_iter if iter_limit is None else iter_limit
        self.wl = form.wl
        self.wu = form.wu
        self.has_l = np.isfinite(self.wl)
        self.has_u = np.isfinite(self.wu)
        if np.any(self.has_l & self.has_u & (self.wu <= self.wl)):
            raise ValueError("variables with equal bounds must be removed before solving")
        self.l_only = (self.has_l & ~self.has_u).astype(float)
        self.u_only = (self.has_u & ~self.has_l).astype(float)
        self.n_bounds = int(self.has_l.sum() + self.has_u.sum())
        self.mu_min = opts.tol / 10.0
        self.delta_w_last = 0.0

    # -- helpers ----------------------------------------------------------

    def _dist(self, w):
        dl = np.where(self.has_l, w - np.where(self.has_l, self.wl, 0.0), 1.0)
        du = np.where(self.has_u, np.where(self.has_u, self.wu, 0.0) - w, 1.0)
        return dl, du

    def _barrier(self, f, w, mu):
        dl, du = self._dist(w)
        if np.any(dl[self.has_l] <= 0) or np.any(du[self.has_u] <= 0):
            return math.inf
        val = f - mu * (np.sum(np.log(dl[self.has_l])) + np.sum(np.log(du[self.has_u])))
        val += _KAPPA_D * mu * (np.dot(self.l_only, dl) + np.dot(self.u_only, du))
        return float(val)

    def _grad_barrier(self, gf, dl, du, mu):
        g = gf - mu * self.has_l / dl + mu * self.has_u / du
        return g + _KAPPA_D * mu * (self.l_only - self.u_only)

    def _errors(self, gf, A, c, y, zl, zu, dl, du, mu):
        m = self.form.m
        smax = self.o.s_max
        zsum = float(np.sum(zl) + np.sum(zu))
        s_d = max(smax, (float(np.sum(np.abs(y))) + zsum) / max(m + self.n_bounds, 1)) / smax
        s_c = max(smax, zsum / max(self.n_bounds, 1)) / smax
        dual = gf + A.T @ y - zl + zu
        if mu > 0:
            dual = dual + _KAPPA_D * mu * (self.l_only - self.u_only)
        e_dual = float(np.max(np.abs(dual), initial=0.0)) / s_d
        e_prim = float(np.max(np.abs(c), initial=0.0))
        cl = np.abs(zl * dl - mu)[self.has_l]
        cu = np.abs(zu * du - mu)[self.has_u]
        e_comp = max(float(np.max(cl, initial=0.0)), float(np.max(cu, initial=0.0))) / s_c
        return e_dual, e_prim, e_comp

    def _emit(self, it, f, inf_pr, inf_du, mu, dnorm, reg, a_du, a_pr, ls, tag=""):
        if self.log is None:
            return
        rg = "-" if reg == 0 else f"{math.log10(reg):.1f}"
        line = (f"{it:4d}{tag:1s} {self.form.report(f):14.7e} {inf_pr:8.2e} {inf_du:8.2e} "
                f"{math.log10(mu):6.1f} {dnorm:8.2e} {rg:>6s} {a_du:8.2e} {a_pr:8.2e} {ls:3d}")
        self.log(line)

    def _factor(self, W, Sigma, A, mu):
        """Assemble and factor the KKT matrix, correcting its inertia."""
        n, m = self.form.n, self.form.m
        K = np.zeros((n + m, n + m))
        K[:n, :n] = W
        K[np.arange(n), np.arange(n)] += Sigma
        K[n:, :n] = A
        K[:n, n:] = A.T
        diag_n = np.arange(n)
        diag_m = np.arange(n, n + m)
        base = K[diag_n, diag_n].copy()
        scale = max(float(np.max(np.abs(K))), 1.0)

        def attempt(dw, dc):
            K[diag_n, diag_n] = base + dw
            K[diag_m, diag_m] = -dc
            self.cnt.factorizations += 1
            fac = SymmetricFactor(K, scale=scale)
            return fac, (fac.n_pos == n and fac.n_neg == m and fac.n_zero == 0)

        dw, dc = 0.0, 0.0
        fac, ok = attempt(dw, dc)
        if ok:
            return fac, K, dw
        if fac.singular:
            dc = self.o.delta_c * mu ** 0.25
        # the phase-one trial retries without a Hessian shift when only the
        # constraint block was rank deficient
        if dc > 0:
            fac, ok = attempt(0.0, dc)
            if ok:
                return fac, K, 0.0
        self.cnt.inertia_corrections += 1
        if self.delta_w_last == 0.0:
            dw = self.o.delta_w_floor
        else:
            dw = max(self.o.delta_w_floor, self.delta_w_last / 3.0)
        while dw <= self.o.delta_w_max:
            fac, ok = attempt(dw, dc)
            if ok:
                self.delta_w_last = dw
                return fac, K, dw
            if dc == 0.0 and (fac.singular or fac.n_neg < m) and dw > 1.0:
                # too few negative eigenvalues once W is dominated: A is rank deficient
                dc = self.o.delta_c * mu ** 0.25
                continue
            dw *= 2.0
        return None, K, dw

    @staticmethod
    def _solve(fac, K, rhs):
        sol = fac.solve(rhs)
        scale = max(float(np.max(np.abs(rhs), initial=0.0)), 1.0)
        for _ in range(3):
            res = rhs - K @ sol
            if float(np.max(np.abs(res), initial=0.0)) <= 1e-12 * scale:
                break
            sol = sol + fac.solve(res)
        return sol

    def least_squares_y(self, gf, A, zl, zu):
        n, m = self.form.n, self.form.m
        if m == 0:
            return np.zeros(0)
        K = np.zeros((n + m, n + m))
        K[np.arange(n), np.arange(n)] = 1.0
        K[n:, :n] = A
        K[:n, n:] = A.T
        rhs = np.concatenate([-(gf - zl + zu), np.zeros(m)])
        fac = SymmetricFactor(K)
        self.cnt.factorizations += 1
        if fac.singular or fac.n_neg != m:
            K[np.arange(n, n + m), np.arange(n, n + m)] = -1e-8
            fac = SymmetricFactor(K)
            self.cnt.factorizations += 1
        y = self._solve(fac, K, rhs)[n:]
        if not np.all(np.isfinite(y)) or float(np.max(np.abs(y))) > 1e3:
            return np.zeros(m)
        return y

    # -- main loop ----------------------------------------------------------

    def run(self, w, y, zl, zu, mu, stop=None, filter_entries=None) -> _Outcome:
        o = self.o
        form = self.form
        n = form.n
        zl = np.where(self.has_l, zl, 0.0)
        zu = np.where(self.has_u, zu, 0.0)
        tau = max(o.tau, 1.0 - mu)

        f = form.f(w)
        c = form.c(w)
        if not (np.isfinite(f) and np.all(np.isfinite(c))):
            return _Outcome("diverged", w, y, zl, zu, mu, 0, (math.inf,) * 3, "non-finite start")
        gf = form.grad(w)
        A = form.jac(w)
        if y is None:
            y = self.least_squares_y(gf, A, zl, zu)

        theta0 = float(np.sum(np.abs(c)))
        theta_max = 1e4 * max(1.0, theta0)
        theta_min = 1e-4 * max(1.0, theta0)
        filt: list[tuple[float, float]] = list(filter_entries or [])
        local_it = 0
        a_pr = a_du = 0.0
        reg = 0.0
        dnorm = 0.0
        ls_count = 0
        tiny_streak = 0
        force_mu = False
        tag = "r" if self.depth else ""

        while True:
            if not (np.all(np.isfinite(gf)) and np.all(np.isfinite(A))):
                return _Outcome("diverged", w, y, zl, zu, mu, local_it, (math.inf,) * 3,
                                "non-finite derivatives")
            if float(np.max(np.abs(w), initial=0.0)) > _DIVERGE:
                return _Outcome("diverged", w, y, zl, zu, mu, local_it, (math.inf,) * 3,
                                "iterates diverging")
            dl, du = self._dist(w)
            e0 = self._errors(gf, A, c, y, zl, zu, dl, du, 0.0)
            self._emit(self.cnt.iterations, f, e0[1], e0[0], mu, dnorm, reg, a_du, a_pr, ls_count, tag)
            if self.cnt.trace is not None and self.depth == 0:
                self.cnt.trace.append(w.copy())
            if stop is not None and local_it > 0 and stop(w, c):
                return _Outcome("stopped", w, y, zl, zu, mu, local_it, e0)
            if max(e0) <= o.tol:
                return _Outcome("optimal", w, y, zl, zu, mu, local_it, e0)
            if local_it >= self.iter_limit or self.cnt.iterations >= o.max_iter:
                return _Outcome("max_iter", w, y, zl, zu, mu, local_it, e0)

            # barrier update (monotone)
            e_mu = max(self._errors(gf, A, c, y, zl, zu, dl, du, mu))
            changed = False
            while mu > self.mu_min and (e_mu <= o.kappa_eps * mu or force_mu):
                mu = max(self.mu_min, min(o.kappa_mu * mu, mu ** o.theta_mu))
                tau = max(o.tau, 1.0 - mu)
                changed = True
                force_mu = False
                e_mu = max(self._errors(gf, A, c, y, zl, zu, dl, du, mu))
            force_mu = False
            if changed:
                filt = list(filter_entries or [])

            # Newton step
            sig_l = np.where(self.has_l, zl / dl, 0.0)
            sig_u = np.where(self.has_u, zu / du, 0.0)
            W = form.hess(w, y, 1.0)
            fac, K, reg = self._factor(W, sig_l + sig_u, A, mu)
            if fac is None:
                outcome = self._fail(w, y, zl, zu, mu, local_it, e0, f, c, filt,
                                     "inertia correction failed")
                if outcome is None:
                    return _Outcome("diverged", w, y, zl, zu, mu, local_it, e0, "inertia correction failed")
                w, y, zl, zu, f, c, gf, A = outcome
                local_it += 1
                continue
            gphi = self._grad_barrier(gf, dl, du, mu)
            rhs = -np.concatenate([gphi + A.T @ y, c])
            sol = self._solve(fac, K, rhs)
            dw, dy = sol[:n], sol[n:]
            if not np.all(np.isfinite(sol)):
                return _Outcome("diverged", w, y, zl, zu, mu, local_it, e0, "non-finite step")
            dzl = np.where(self.has_l, mu / dl - zl - sig_l * dw, 0.0)
            dzu = np.where(self.has_u, mu / du - zu + sig_u * dw, 0.0)

            a_max = min(_fraction_to_boundary(dl[self.has_l], dw[self.has_l], tau),
                        _fraction_to_boundary(du[self.has_u], -dw[self.has_u], tau))
            a_z = min(_fraction_to_boundary(zl[self.has_l], dzl[self.has_l], tau),
                      _fraction_to_boundary(zu[self.has_u], dzu[self.has_u], tau))
            dnorm = float(np.max(np.abs(dw), initial=0.0))

            # line search
            theta = float(np.sum(np.abs(c)))
            phi = self._barrier(f, w, mu)
            gd = float(np.dot(gphi, dw))
            tiny = float(np.max(np.abs(dw) / (1.0 + np.abs(w)), initial=0.0)) < 10.0 * _EPS
            accepted = None
            ls_count = 0
            if tiny:
                wt = w + a_max * dw
                accepted = (wt, form.f(wt), form.c(wt), a_max, dw, dy, dzl, dzu, a_z)
                tiny_streak += 1
                force_mu = True
            else:
                tiny_streak = 0
                accepted, ls_count, filt = self._line_search(
                    w, f, c, theta, phi, gd, dw, dy, dzl, dzu, a_max, a_z, mu, tau,
                    fac, K, gphi, A, y, dl, du, sig_l, sig_u, filt, theta_max, theta_min)
            if accepted is None:
                outcome = self._fail(w, y, zl, zu, mu, local_it, e0, f, c, filt, "line search failed")
                if outcome is None:
                    return _Outcome("ls_failure", w, y, zl, zu, mu, local_it, e0, "line search failed")
                w, y, zl, zu, f, c, gf, A = outcome
                a_pr = a_du = 0.0
                local_it += 1
                filt = list(filter_entries or []) + [(theta, phi)]
                continue
            wt, ft, ct, a_pr, dw, dy, dzl, dzu, a_du = accepted
            w = wt
            f, c = ft, ct
            y = y + a_pr * dy
            zl = zl + a_du * dzl
            zu = zu + a_du * dzu
            # keep the bound multipliers close to the primal-dual central path
            dl, du = self._dist(w)
            ks = o.kappa_sigma
            zl = np.where(self.has_l, np.clip(zl, mu / (ks * dl), ks * mu / dl), 0.0)
            zu = np.where(self.has_u, np.clip(zu, mu / (ks * du), ks * mu / du), 0.0)
            gf = form.grad(w)
            A = form.jac(w)
            local_it += 1
            self.cnt.iterations += 1

    def _line_search(self, w, f, c, theta, phi, gd, dw, dy, dzl, dzu, a_max, a_z, mu, tau,
                     fac, K, gphi, A, y, dl, du, sig_l, sig_u, filt, theta_max, theta_min):
        form = self.form
        n = form.n
        if gd < 0:
            if theta <= theta_min:
                a_min = min(_GAMMA_THETA, _GAMMA_PHI * theta / -gd,
                            _DELTA * theta ** _S_THETA / (-gd) ** _S_PHI)
            else:
                a_min = min(_GAMMA_THETA, _GAMMA_PHI * theta / -gd)
        else:
            a_min = _GAMMA_THETA
        a_min *= _GAMMA_ALPHA

        def acceptable(theta_t, phi_t, alpha):
            if not math.isfinite(phi_t) or theta_t > theta_max:
                return False, False
            for tf, pf in filt:
                if theta_t >= tf and phi_t >= pf:
                    return False, False
            switching = gd < 0 and alpha * (-gd) ** _S_PHI > _DELTA * theta ** _S_THETA
            if theta <= theta_min and switching:
                return phi_t <= phi + _ETA_PHI * alpha * gd, True
            return (theta_t <= (1.0 - _GAMMA_THETA) * theta or phi_t <= phi - _GAMMA_PHI * theta), False

        def finish(f_type, filt):
            if not f_type:
                filt = filt + [((1.0 - _GAMMA_THETA) * theta, phi - _GAMMA_PHI * theta)]
            return filt

        alpha = a_max
        count = 0
        first = True
        while alpha >= a_min:
            count += 1
            wt = w + alpha * dw
            ft = form.f(wt)
            ct = form.c(wt)
            if np.isfinite(ft) and np.all(np.isfinite(ct)):
                theta_t = float(np.sum(np.abs(ct)))
                phi_t = self._barrier(ft, wt, mu)
                ok, f_type = acceptable(theta_t, phi_t, alpha)
                if ok:
                    return (wt, ft, ct, alpha, dw, dy, dzl, dzu, a_z), count, finish(f_type, filt)
                if first and theta_t >= theta and self.o.max_soc > 0:
                    soc = self._second_order(w, c, ct, alpha, theta_t, mu, tau, fac, K, gphi, A, y,
                                             dl, du, sig_l, sig_u, acceptable)
                    if soc is not None:
                        result, f_type = soc
                        return result, count, finish(f_type, filt)
            first = False
            alpha *= 0.5
        return None, count, filt

    def _second_order(self, w, c, ct, alpha, theta_t, mu, tau, fac, K, gphi, A, y, dl, du,
                      sig_l, sig_u, acceptable):
        form = self.form
        n = form.n
        c_soc = alpha * c + ct
        theta_old = theta_t
        for _ in range(self.o.max_soc):
            rhs = -np.concatenate([gphi + A.T @ y, c_soc])
            sol = self._solve(fac, K, rhs)
            dw, dy = sol[:n], sol[n:]
            if not np.all(np.isfinite(sol)):
                return None
            a_soc = min(_fraction_to_boundary(dl[self.has_l], dw[self.has_l], tau),
                        _fraction_to_boundary(du[self.has_u], -dw[self.has_u], tau))
            wt = w + a_soc * dw
            ft = form.f(wt)
            cs = form.c(wt)
            if not (np.isfinite(ft) and np.all(np.isfinite(cs))):
                return None
            theta_s = float(np.sum(np.abs(cs)))
            phi_s = self._barrier(ft, wt, mu)
            ok, f_type = acceptable(theta_s, phi_s, alpha)
            if ok:
                return (wt, ft, cs, a_soc, dw, dy) + self._dz(dw, dl, du, sig_l, sig_u, mu, tau), f_type
            if theta_s > _KAPPA_SOC * theta_old:
                return None
            theta_old = theta_s
            c_soc = a_soc * c_soc + cs
        return None

    def _dz(self, dw, dl, du, sig_l, sig_u, mu, tau):
        zl = sig_l * dl
        zu = sig_u * du
        dzl = np.where(self.has_l, mu / dl - zl - sig_l * dw, 0.0)
        dzu = np.where(self.has_u, mu / du - zu + sig_u * dw, 0.0)
        a_z = min(_fraction_to_boundary(zl[self.has_l], dzl[self.has_l], tau),
                  _fraction_to_boundary(zu[self.has_u], dzu[self.has_u], tau))
        return dzl, dzu, a_z

    # -- restoration ----------------------------------------------------

    def _fail(self, w, y, zl, zu, mu, local_it, e0, f, c, filt, why):
        """Run feasibility restoration; ``None`` when not allowed or failed."""
        if self.depth > 0:
            return None
        self.cnt.restorations += 1
        form = self.form
        theta_r = float(np.sum(np.abs(c)))
        phi_r = self._barrier(f, w, mu)
        m = form.m
        rho = _RHO
        t = (mu - rho * c) / (2.0 * rho)
        nn = t + np.sqrt(t * t + mu * c / (2.0 * rho))
        nn = np.maximum(nn, 1e-12)
        p = np.maximum(c + nn, 1e-12)
        rform = _RestorationForm(form, w.copy(), math.sqrt(mu))
        v0 = np.concatenate([w, p, nn])
        zl_r = np.concatenate([zl, mu / p, mu / nn])
        zu_r = np.concatenate([zu, np.zeros(2 * m)])
        mu_r = max(mu, float(np.max(np.abs(c), initial=0.0)))
        filt_outer = filt + [(theta_r, phi_r)]

        def stop(v, cr):
            wv = v[:form.n]
            cv = form.c(wv)
            theta = float(np.sum(np.abs(cv)))
            if not theta <= 0.9 * theta_r:
                return False
            phi = self._barrier(form.f(wv), wv, mu)
            return all(not (theta >= tf and phi >= pf) for tf, pf in filt_outer)

        inner = _Ipm(rform, self.o, self.cnt, self.log, depth=1,
                     iter_limit=self.o.restoration_max_iter)
        out = inner.run(v0, np.zeros(m), zl_r, zu_r, mu_r, stop=stop)
        wn = out.w[:form.n]
        cn = form.c(wn)
        theta_n = float(np.sum(np.abs(cn)))
        if out.status != "stopped" and not (out.status == "optimal" and theta_n <= max(self.o.tol, 0.9 * theta_r)):
            return None
        fn = form.f(wn)
        gn = form.grad(wn)
        An = form.jac(wn)
        zln = np.where(self.has_l, out.zl[:form.n], 0.0)
        zun = np.where(self.has_u, out.zu[:form.n], 0.0)
        dl, du = self._dist(wn)
        zln = np.where(self.has_l, np.maximum(zln, mu / (self.o.kappa_sigma * dl)), 0.0)
        zun = np.where(self.has_u, np.maximum(zun, mu / (self.o.kappa_sigma * du)), 0.0)
        yn = self.least_squares_y(gn, An, zln, zun)
        return wn, yn, zln, zun, fn, cn, gn, An


# --------------------------------------------------------------------------
# public entry point


def _logger(target):
    if target is None:
        return None
    if callable(target) and not hasattr(target, "write"):
        return target

    def write(line):
        target.write(line + "\n")
    return write


def compute_scaling(prob: NlpProblem, x: np.ndarray, opts: SolverOptions) -> tuple[float, np.ndarray]:
    """Objective and per-row factors ``min(1, max_gradient/||grad||_inf)``."""
    if not opts.scaling:
        return 1.0, np.ones(prob.m)
    g = np.asarray(prob.gradient(x), dtype=float)
    gmax = float(np.max(np.abs(g), initial=0.0))
    f_scale = 1.0 if gmax == 0 else max(opts.min_scale, min(1.0, opts.max_gradient / gmax))
    c_scale = np.ones(prob.m)
    if prob.m:
        rows, _ = prob.jac_structure
        vals = np.abs(np.asarray(prob.jacobian(x), dtype=float))
        rmax = np.zeros(prob.m)
        np.maximum.at(rmax, rows, vals)
        with np.errstate(divide="ignore"):
            c_scale = np.where(rmax > 0, np.minimum(1.0, opts.max_gradient / np.where(rmax > 0, rmax, 1.0)), 1.0)
        c_scale = np.maximum(c_scale, opts.min_scale)
    return f_scale, c_scale


def _start_point(prob: NlpProblem, opts: SolverOptions) -> np.ndarray:
    return _push_into_box(prob.x0, prob.x_lower, prob.x_upper, opts.bound_push, opts.bound_frac)


def solve(problem: NlpProblem, options: SolverOptions | None = None,
          warm_start: tuple | None = None, *, record_iterates: bool = False) -> SolveResult:
    """Solve ``problem`` to local optimality.

    ``warm_start`` is ``(x,)``, ``(x, lam)`` or ``(x, lam, (z_lower, z_upper))``
    in the conventions of :class:`SolveResult`; entries may be ``None``.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    log = _logger(opts.log)
    fixed = np.isfinite(problem.x_lower) & (problem.x_lower == problem.x_upper)
    if np.any(fixed):
        from .reduce import solve_with_fixed
        return solve_with_fixed(problem, opts, warm_start, record_iterates, solve)

    x_ref = _start_point(problem, opts)
    f_scale, c_scale = compute_scaling(problem, x_ref, opts)
    form = _SlackForm(problem, f_scale, c_scale)
    cnt = _Counters()
    if record_iterates:
        cnt.trace = []
    core = _Ipm(form, opts, cnt, log)

    warm = warm_start is not None and warm_start[0] is not None
    if warm:
        x_in = np.asarray(warm_start[0], dtype=float)
        k1, k2 = opts.warm_bound_push, opts.warm_bound_push
    else:
        x_in = problem.x0
        k1, k2 = opts.bound_push, opts.bound_frac
    x = _push_into_box(x_in, problem.x_lower, problem.x_upper, k1, k2)
    gx = c_scale * np.asarray(problem.constraints(x), dtype=float)
    s = _push_into_box(gx[form.ineq], form.wl[form.nx:], form.wu[form.nx:], k1, k2)
    w = np.concatenate([x, s])

    y = None
    zl = np.where(core.has_l, 1.0, 0.0)
    zu = np.where(core.has_u, 1.0, 0.0)
    mu = opts.mu_init
    if warm:
        lam = warm_start[1] if len(warm_start) > 1 else None
        zs = warm_start[2] if len(warm_start) > 2 else None
        if lam is not None:
            y = -form.sense * np.asarray(lam, dtype=float) * f_scale / c_scale
        push = opts.warm_mult_push
        if zs is not None and zs[0] is not None:
            zl[:form.nx] = np.asarray(zs[0], dtype=float) * f_scale
            zu[:form.nx] = np.asarray(zs[1], dtype=float) * f_scale
        if y is not None:
            ys = y[form.ineq]
            zl[form.nx:] = np.maximum(-ys, 0.0)
            zu[form.nx:] = np.maximum(ys, 0.0)
        zl = np.where(core.has_l, np.maximum(zl, push), 0.0)
        zu = np.where(core.has_u, np.maximum(zu, push), 0.0)
        if zs is not None or lam is not None:
            dl, du = core._dist(w)
            prods = np.concatenate([(zl * dl)[core.has_l], (zu * du)[core.has_u]])
            avg = float(np.mean(prods)) if prods.size else opts.mu_init
            mu = min(opts.mu_init, max(opts.tol, avg))

    out = core.run(w, y, zl, zu, mu)
    status = {
        "optimal": SolveStatus.LOCALLY_OPTIMAL,
        "max_iter": SolveStatus.MAX_ITERATIONS,
        "diverged": SolveStatus.DIVERGED,
        "ls_failure": SolveStatus.INFEASIBLE,
        "stopped": SolveStatus.LOCALLY_OPTIMAL,
    }[out.status]
    if out.status == "ls_failure" or (out.status == "diverged" and "inertia" in out.detail):
        status = SolveStatus.INFEASIBLE if cnt.restorations else SolveStatus.DIVERGED
    return _package(problem, form, core, out, status, cnt, f_scale, c_scale, warm, t0)


def _package(problem, form, core, out, status, cnt, f_scale, c_scale, warm, t0) -> SolveResult:
    nx = form.nx
    x = out.w[:nx].copy()
    y_int = out.y * c_scale / f_scale
    lam = -form.sense * y_int
    z_lower = np.where(np.isfinite(problem.x_lower), out.zl[:nx] / f_scale, 0.0)
    z_upper = np.where(np.isfinite(problem.x_upper), out.zu[:nx] / f_scale, 0.0)
    with np.errstate(all="ignore"):
        objective = float(problem.objective(x))
    tol = core.o.tol
    dl, du = core._dist(out.w)
    names = problem.var_names or [f"x[{i}]" for i in range(nx)]
    flagged = []
    weak = []
    if status is SolveStatus.LOCALLY_OPTIMAL:
        sides = (("lower", out.zl, dl, core.has_l), ("upper", out.zu, du, core.has_u))
        for side, z, d, has in sides:
            for i in np.flatnonzero(has[:nx] & (z[:nx] * d[:nx] > 10.0 * tol)):
                flagged.append((names[i], side))
            small = has[:nx] & (d[:nx] < math.sqrt(tol)) & (z[:nx] < math.sqrt(tol))
            weak.extend((names[i], side) for i in np.flatnonzero(small))
    meta = {
        "acceptance": "filter",
        "obj_scale": f_scale,
        "con_scale": c_scale.copy(),
        "mu_final": out.mu,
        "restorations": cnt.restorations,
        "factorizations": cnt.factorizations,
        "inertia_corrections": cnt.inertia_corrections,
        "start": "warm" if warm else "cold",
        "degenerate_complementarity": flagged,
        "weakly_active": weak,
        "detail": out.detail,
    }
    if cnt.trace is not None:
        meta["iterates"] = cnt.trace
    e_dual, e_prim, e_comp = out.errors
    return SolveResult(
        status=status, x=x, lam=lam, z_lower=z_lower, z_upper=z_upper, objective=objective,
        iterations=cnt.iterations, kkt=KktResiduals(e_dual, e_prim, e_comp),
        wall_time=time.perf_counter() - t0, metadata=meta,
    )
