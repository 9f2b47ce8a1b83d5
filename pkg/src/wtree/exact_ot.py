"""Ground-truth 1-Wasserstein via min-cost flow, plus the Sinkhorn baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    InfeasibleMarginalsError,
    NumericalError,
    SinkhornNonConvergence,
    SizeCapError,
)
from .metric_core import Distribution, SemimetricMatrix
from .tree_ot import Coupling

MASS_TOL = 1e-9
PIVOT_TOL = 1e-12
DUAL_TOL = 1e-7


@dataclass(frozen=True)
class TransportResult:
    cost: float
    coupling: Coupling
    iterations: int = 0


def _support(p, tol=0.0):
    return np.flatnonzero(p > tol)


def exact_wasserstein(d: SemimetricMatrix, mu: Distribution, rho: Distribution,
                      size_cap: int = 2048) -> TransportResult:
    """Optimal transport cost for cost matrix d.

    Successive shortest augmenting paths with potentials on the bipartite
    support graph (only nonzero-mass rows and columns participate).  The
    recovered dual potentials certify optimality via complementary slackness.
    """
    if d.n != mu.n or d.n != rho.n:
        raise InfeasibleMarginalsError(f"size mismatch: matrix {d.n}, marginals {mu.n}/{rho.n}")
    if d.n > size_cap:
        raise SizeCapError(f"n={d.n} exceeds size cap {size_cap}")
    if abs(mu.p.sum() - rho.p.sum()) > MASS_TOL:
        raise InfeasibleMarginalsError("marginal masses differ by more than 1e-9")

    src = _support(mu.p)
    snk = _support(rho.p)
    a = mu.p[src] / mu.p[src].sum()
    b = rho.p[snk] / rho.p[snk].sum()
    ns, nt = len(src), len(snk)
    cost = d.d[np.ix_(src, snk)]

    flow = np.zeros((ns, nt))
    pot_s = np.zeros(ns)
    pot_t = np.zeros(nt)
    rem_a = a.copy()
    rem_b = b.copy()
    iterations = 0

    while rem_a.sum() > PIVOT_TOL:
        dist_s = np.where(rem_a > PIVOT_TOL, 0.0, np.inf)
        dist_t = np.full(nt, np.inf)
        prev_t = np.full(nt, -1, dtype=np.int64)   # source feeding each sink
        prev_s = np.full(ns, -1, dtype=np.int64)   # sink feeding each source
        done_s = np.zeros(ns, dtype=bool)
        done_t = np.zeros(nt, dtype=bool)

        # dense Dijkstra over the 2-layer residual graph with reduced costs;
        # stops as soon as a sink with remaining demand settles
        t_star = -1
        while True:
            cs = np.where(done_s, np.inf, dist_s)
            ct = np.where(done_t, np.inf, dist_t)
            ms, mt = cs.min(), ct.min()
            if not np.isfinite(min(ms, mt)):
                break
            if ms <= mt:
                k = int(np.argmin(cs))
                done_s[k] = True
                # forward edges k -> all sinks, reduced cost c + pot_s - pot_t
                cand = dist_s[k] + cost[k, :] + pot_s[k] - pot_t
                upd = ~done_t & (cand < dist_t - 1e-15)
                if np.any(upd):
                    dist_t[upd] = cand[upd]
                    prev_t[upd] = k
            else:
                l = int(np.argmin(ct))
                done_t[l] = True
                if rem_b[l] > PIVOT_TOL:
                    t_star = l
                    break
                # backward edges l -> sources carrying flow, reduced cost -c + pot_t - pot_s
                back = flow[:, l] > PIVOT_TOL
                cand = dist_t[l] - cost[:, l] + pot_t[l] - pot_s
                upd = back & ~done_s & (cand < dist_s - 1e-15)
                if np.any(upd):
                    dist_s[upd] = cand[upd]
                    prev_s[upd] = l

        if t_star < 0:
            raise NumericalError("no augmenting path found; marginals inconsistent")
        dbest = dist_t[t_star]

        # trace the alternating path back to an origin source
        forward, backward = [], []
        l = t_star
        while True:
            k = int(prev_t[l])
            forward.append((k, l))
            lp = int(prev_s[k])
            if lp < 0:
                k0 = k
                break
            backward.append((k, lp))
            l = lp
        bottleneck = min(rem_b[t_star], rem_a[k0])
        for k, l in backward:
            bottleneck = min(bottleneck, flow[k, l])
        for k, l in forward:
            flow[k, l] += bottleneck
        for k, l in backward:
            flow[k, l] -= bottleneck
        rem_a[k0] -= bottleneck
        rem_b[t_star] -= bottleneck
        if rem_a[k0] < PIVOT_TOL:
            rem_a[k0] = 0.0
        if rem_b[t_star] < PIVOT_TOL:
            rem_b[t_star] = 0.0

        pot_s += np.minimum(dist_s, dbest)
        pot_t += np.minimum(dist_t, dbest)
        iterations += 1

    total = float(np.sum(flow * cost))
    _certify(cost, flow, pot_s, pot_t)

    pi = np.zeros((d.n, d.n))
    pi[np.ix_(src, snk)] = flow
    return TransportResult(cost=total, coupling=Coupling(pi), iterations=iterations)


def _certify(cost, flow, pot_s, pot_t):
    """Complementary slackness on the recovered duals u_k + v_l <= cost."""
    u = -pot_s
    v = pot_t
    slack = cost - u[:, None] - v[None, :]
    if slack.min() < -DUAL_TOL:
        raise NumericalError(f"dual feasibility violated by {-slack.min():.3e}")
    on_support = flow > PIVOT_TOL
    if on_support.any() and np.abs(slack[on_support]).max() > DUAL_TOL:
        raise NumericalError("complementary slackness violated on the support")


def sinkhorn(d: SemimetricMatrix, mu: Distribution, rho: Distribution,
             lam: float = 1.0, max_iter: int = 10000, tol: float = 1e-9) -> TransportResult:
    """Entropic-regularized transport by alternating marginal scaling.

    Returns the unregularized cost <plan, d> of the regularized plan.  Falls
    back to log-domain updates when the kernel underflows.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if d.n != mu.n or d.n != rho.n:
        raise InfeasibleMarginalsError(f"size mismatch: matrix {d.n}, marginals {mu.n}/{rho.n}")
    src = _support(mu.p)
    snk = _support(rho.p)
    a = mu.p[src] / mu.p[src].sum()
    b = rho.p[snk] / rho.p[snk].sum()
    cost = d.d[np.ix_(src, snk)]

    log_domain = bool(np.any(cost / lam > 690.0))
    if not log_domain:
        K = np.exp(-cost / lam)
        u = np.ones(len(a)) / len(a)
        v = np.ones(len(b)) / len(b)
        plan = None
        for it in range(1, max_iter + 1):
            u = a / (K @ v)
            v = b / (K.T @ u)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))) or u.min() < 1e-300:
                log_domain = True
                break
            plan = u[:, None] * K * v[None, :]
            err = np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum()
            if err < tol:
                return _sinkhorn_result(d.n, src, snk, plan, cost, it)
        if not log_domain:
            raise SinkhornNonConvergence(err, max_iter)

    f = np.zeros(len(a))
    g = np.zeros(len(b))
    la, lb = np.log(a), np.log(b)
    for it in range(1, max_iter + 1):
        f = lam * (la - logsumexp((-cost + f[:, None] + g[None, :]) / lam, axis=1)) + f
        g = lam * (lb - logsumexp((-cost + f[:, None] + g[None, :]) / lam, axis=0)) + g
        plan = np.exp((-cost + f[:, None] + g[None, :]) / lam)
        err = np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum()
        if err < tol:
            return _sinkhorn_result(d.n, src, snk, plan, cost, it)
    raise SinkhornNonConvergence(err, max_iter)


def _sinkhorn_result(n, src, snk, plan, cost, iterations):
    pi = np.zeros((n, n))
    pi[np.ix_(src, snk)] = plan
    return TransportResult(cost=float(np.sum(plan * cost)), coupling=Coupling(pi),
                           iterations=iterations)
