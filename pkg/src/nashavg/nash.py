"""Maximum-entropy Nash equilibria and Nash averaging.

Agent-vs-agent (AvA) data is an antisymmetric logit matrix ``A``.  A
strategy ``p`` is a symmetric Nash equilibrium of the zero-sum meta-game iff
``A @ p <= 0`` entrywise; among those the entropy maximizer is unique.

Agent-vs-task (AvT) data is a score matrix ``S``.  The meta-game decouples
into the ordinary zero-sum game on ``S`` (agents maximize, tasks minimize),
so each side's optimal polytope is handled separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp, softmax

from .hodge import div, grad, repair_antisymmetric

SUPPORT_THRESHOLD = 1e-7
SIMPLEX_TOL = 1e-9
_CONE_BOUND = 1e6


class SolverError(RuntimeError):
    """Solver failed to certify its answer; ``diagnostics`` holds residuals."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class NashEvaluationAvA:
    distribution: np.ndarray
    nash_average: np.ndarray
    entropy: float
    exploitability: float
    support: tuple[int, ...]
    diagnostics: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class NashEvaluationAvT:
    agent_distribution: np.ndarray
    task_distribution: np.ndarray
    value: float
    agent_nash_avg: np.ndarray
    task_nash_avg: np.ndarray
    agent_support: tuple[int, ...]
    task_support: tuple[int, ...]
    exploitability: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def support_of(p, threshold: float = SUPPORT_THRESHOLD) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(np.asarray(p) > threshold))


def check_simplex(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise ValueError("distribution must be a non-empty finite vector")
    if p.min() < -tol or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"not a probability vector (min {p.min():.3g}, sum {p.sum():.12g})")
    return p


# ---------------------------------------------------------------------------
# generic machinery: maximal support by LP, entropy maximization by the dual


def _max_support(h: np.ndarray) -> np.ndarray:
    """Boolean mask of the maximal support of the cone ``{x >= 0 : h @ x <= 0}``.

    Maximizes ``sum(z)`` with ``z <= x``, ``z <= 1``; any coordinate that can
    be positive somewhere in the cone reaches ``z = 1`` after rescaling.
    """
    rows, n = h.shape
    h = h / max(1.0, float(np.abs(h).max(initial=0.0)))
    c = np.concatenate([np.zeros(n), -np.ones(n)])
    a_ub = np.block([[h, np.zeros((rows, n))], [-np.eye(n), np.eye(n)]])
    b_ub = np.zeros(rows + n)
    bounds = [(0, _CONE_BOUND)] * n + [(0, 1)] * n
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"support LP failed: {res.message}", {"lp_status": int(res.status)})
    return res.x[n:] > 0.5


def _max_support_avt(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximal supports of both players' optimal strategy sets in the game ``s``.

    Works on the cone ``{(x, y, t) : s.T x >= t, s y <= t, sum x = sum y}``,
    whose normalized points are exactly the optimal strategy pairs, so the
    (inexact) game value never enters.
    """
    m, n = s.shape
    s = s / max(1.0, float(np.abs(s).max()))
    nv = 2 * (m + n) + 1
    # variable layout: x (m), y (n), t, z_a (m), z_e (n)
    ix, iy, it = slice(0, m), slice(m, m + n), m + n
    iza, ize = slice(m + n + 1, 2 * m + n + 1), slice(2 * m + n + 1, nv)
    rows = []
    block = np.zeros((n, nv))
    block[:, ix] = -s.T
    block[:, it] = 1.0
    rows.append(block)
    block = np.zeros((m, nv))
    block[:, iy] = s
    block[:, it] = -1.0
    rows.append(block)
    block = np.zeros((m, nv))
    block[:, ix] = -np.eye(m)
    block[:, iza] = np.eye(m)
    rows.append(block)
    block = np.zeros((n, nv))
    block[:, iy] = -np.eye(n)
    block[:, ize] = np.eye(n)
    rows.append(block)
    a_ub = np.vstack(rows)
    a_eq = np.zeros((1, nv))
    a_eq[0, ix] = 1.0
    a_eq[0, iy] = -1.0
    c = np.zeros(nv)
    c[iza] = -1.0
    c[ize] = -1.0
    bounds = [(0, _CONE_BOUND)] * (m + n) + [(None, None)] + [(0, 1)] * (m + n)
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(a_ub)), A_eq=a_eq, b_eq=[0.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"support LP failed: {res.message}", {"lp_status": int(res.status)})
    return res.x[iza] > 0.5, res.x[ize] > 0.5


def _newton_dual(g: np.ndarray, nu: np.ndarray, max_iter: int = 100) -> tuple[np.ndarray, int]:
    """Minimize ``logsumexp(-g.T @ nu)`` over free ``nu`` (equality-constrained maxent dual)."""
    if g.shape[0] == 0:
        return nu, 0
    scale = max(1.0, float(np.abs(g).max()))

    def f(v):
        return logsumexp(-g.T @ v)

    for it in range(1, max_iter + 1):
        p = softmax(-g.T @ nu)
        gp = g @ p
        if np.abs(gp).max() <= 1e-15 * scale:
            return nu, it
        cov = np.diag(p) - np.outer(p, p)
        hess = g @ cov @ g.T
        step = np.linalg.lstsq(hess, gp, rcond=1e-13)[0]
        # grad of f is -gp, so `step` is the Newton descent direction
        f0, t, slope = f(nu), 1.0, -(gp @ step)
        while t > 1e-12 and f(nu + t * step) > f0 + 1e-4 * t * slope:
            t *= 0.5
        if t <= 1e-12:
            return nu, it
        nu = nu + t * step
    return nu, max_iter


def _maxent_on_support(g_eq: np.ndarray, g_in: np.ndarray, tol: float) -> tuple[np.ndarray, dict]:
    """Maximize entropy over ``{p in simplex : g_eq p = 0, g_in p <= 0}``.

    Columns of the constraint matrices index the support, which must be the
    maximal support of the feasible set so that the dual optimum is attained.
    """
    k = g_eq.shape[1]
    if k == 1:
        return np.ones(1), {"iterations": 0, "active_rows": 0}
    n_eq, n_in = g_eq.shape[0], g_in.shape[0]
    if n_eq + n_in == 0:
        return np.full(k, 1.0 / k), {"iterations": 0, "active_rows": 0}
    g = np.vstack([g_eq, g_in])
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    g_n = g / scale

    def fun(lam):
        theta = -g_n.T @ lam
        return logsumexp(theta), -(g_n @ softmax(theta))

    bounds = [(None, None)] * n_eq + [(0, None)] * n_in
    warm = minimize(
        fun,
        np.zeros(n_eq + n_in),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 5000, "ftol": 1e-16, "gtol": 1e-12},
    )
    lam = warm.x.copy()
    p = softmax(-g_n.T @ lam)
    slack_tol = 1e-6
    working = {j for j in range(n_in) if lam[n_eq + j] > 1e-9 or g_n[n_eq + j] @ p > -slack_tol}
    iterations = int(warm.nit)
    for _ in range(4 * (n_in + 1)):
        idx = list(range(n_eq)) + [n_eq + j for j in sorted(working)]
        nu, its = _newton_dual(g_n[idx], lam[idx])
        iterations += its
        trial = np.zeros_like(lam)
        trial[idx] = nu
        p = softmax(-g_n.T @ trial)
        mult = {j: trial[n_eq + j] for j in working}
        negative = [j for j, v in mult.items() if v < -1e-10]
        outside = [j for j in range(n_in) if j not in working]
        viol = {j: g_n[n_eq + j] @ p for j in outside}
        worst = max(viol, key=viol.get) if viol else None
        if negative:
            working.discard(min(negative, key=lambda j: mult[j]))
            continue
        if worst is not None and viol[worst] > 1e-13:
            working.add(worst)
            continue
        lam = trial
        break
    else:
        # fall back on the bound-constrained warm start
        p = softmax(-g_n.T @ warm.x)
    diag = {
        "iterations": iterations,
        "active_rows": len(working),
        "eq_residual": float(np.abs(g_eq @ p).max(initial=0.0)),
        "ineq_violation": float(max(0.0, (g_in @ p).max(initial=0.0))),
    }
    return p, diag


# ---------------------------------------------------------------------------
# agent vs agent


def nash_average_ava(a, p) -> np.ndarray:
    a = repair_antisymmetric(a)
    p = check_simplex(p)
    return a @ p


def epsilon_exploitability(a, p) -> float:
    """Largest gain any pure deviation earns against ``p`` (never negative)."""
    a = repair_antisymmetric(a)
    p = check_simplex(p)
    return float(max(0.0, (a @ p).max()))


def nash_certificate_ava(a, p, tol: float = 1e-8) -> dict:
    a = repair_antisymmetric(a)
    p = check_simplex(p)
    exploit = float((a @ p).max())
    return {"is_nash": exploit <= tol, "exploitability": exploit}


def maxent_nash_ava(a, tol: float = 1e-8) -> NashEvaluationAvA:
    """Maximum-entropy symmetric Nash equilibrium of the antisymmetric game ``a``."""
    a = repair_antisymmetric(a)
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty game")
    if n == 1:
        p = np.ones(1)
        diag = {"iterations": 0, "tolerance": tol, "kkt_residual": 0.0}
    else:
        supp = _max_support(a)
        if not supp.any():
            raise SolverError("no equilibrium found by the support LP")
        cols = np.flatnonzero(supp)
        q, diag = _maxent_on_support(a[np.ix_(cols, cols)], a[np.ix_(~supp, cols)], tol)
        p = np.zeros(n)
        p[cols] = q
        diag["support_size"] = int(len(cols))
        diag["tolerance"] = tol
    navg = a @ p
    exploit = float(navg.max())
    on_support = np.abs(navg[p > SUPPORT_THRESHOLD]).max(initial=0.0)
    diag["kkt_residual"] = float(max(on_support, max(0.0, exploit)))
    if exploit > tol or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise SolverError(
            f"maxent Nash certificate failed: exploitability {exploit:.3g} > {tol:g}", diag
        )
    return NashEvaluationAvA(
        distribution=p,
        nash_average=navg,
        entropy=entropy(p),
        exploitability=exploit,
        support=support_of(p),
        diagnostics=diag,
    )


def duplicate_player(a, idx: int, copies: int = 1) -> np.ndarray:
    """Insert ``copies`` exact clones of player ``idx`` directly after it."""
    a = repair_antisymmetric(a)
    n = a.shape[0]
    if not 0 <= idx < n:
        raise IndexError(f"player index {idx} out of range for {n} players")
    if copies < 1:
        raise ValueError("copies must be at least 1")
    order = list(range(idx + 1)) + [idx] * copies + list(range(idx + 1, n))
    return a[np.ix_(order, order)]


def invariance_check(a, idx: int, tol: float = 1e-6) -> bool:
    """Does duplicating ``idx`` split its Nash mass in half and leave everything else alone?"""
    a = repair_antisymmetric(a)
    base = maxent_nash_ava(a)
    dup = maxent_nash_ava(duplicate_player(a, idx, 1))
    p, q = base.distribution, dup.distribution
    others_p = np.delete(p, idx)
    others_q = np.delete(q, [idx, idx + 1])
    ok = np.allclose(others_p, others_q, atol=tol, rtol=0)
    ok &= abs(q[idx] - p[idx] / 2) <= tol and abs(q[idx + 1] - p[idx] / 2) <= tol
    navg_q = np.delete(dup.nash_average, idx + 1)
    ok &= np.allclose(base.nash_average, navg_q, atol=tol, rtol=0)
    return bool(ok)


def interpretability_report(a, tol: float = 1e-9) -> dict:
    """Closed-form maxent Nash when the game is purely cyclic or purely transitive."""
    a = repair_antisymmetric(a)
    n = a.shape[0]
    ratings = div(a).values
    cyclic = bool(np.abs(ratings).max() <= tol)
    transitive = bool(np.abs(a - grad(ratings)).max() <= tol)
    prediction = None
    if cyclic:
        prediction = np.full(n, 1.0 / n)
    elif transitive:
        top = ratings >= ratings.max() - tol
        prediction = top / top.sum()
    return {"cyclic": cyclic, "transitive": transitive, "maxent_prediction": prediction}


# ---------------------------------------------------------------------------
# agent vs task


def uniform_averages_avt(s) -> dict[str, np.ndarray]:
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    return {"skill": s.mean(axis=1), "difficulty": -s.mean(axis=0)}


def game_value(s) -> float:
    """Value of the zero-sum game where rows maximize ``x^T S y``."""
    s = np.asarray(s, dtype=float)
    m, n = s.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-s.T, np.ones((n, 1))])
    a_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"value LP failed: {res.message}", {"lp_status": int(res.status)})
    return float(res.x[-1])


def _side_maxent(payoff: np.ndarray, own_support: np.ndarray, other_support: np.ndarray, tol: float):
    """Maxent optimal strategy for the maximizing player of ``payoff`` (rows = own strategies).

    Optimal strategies are ``{x : payoff.T @ x >= value}``.  Columns in
    ``other_support`` bind with equality; constraints are written relative to
    one binding column so the LP value never enters.
    """
    cols = np.flatnonzero(own_support)
    ref = int(np.flatnonzero(other_support)[0])
    rows_eq = [j for j in np.flatnonzero(other_support) if j != ref]
    rows_in = list(np.flatnonzero(~other_support))
    base = payoff[:, ref]
    g_eq = (base[:, None] - payoff[:, rows_eq]).T[:, cols]
    g_in = (base[:, None] - payoff[:, rows_in]).T[:, cols]
    q, diag = _maxent_on_support(g_eq, g_in, tol)
    x = np.zeros(payoff.shape[0])
    x[cols] = q
    return x, diag


def avt_deviation_certificate(s, p_a, p_e) -> float:
    """Largest joint-deviation gain ``max_i (S p_e)_i - min_j (S^T p_a)_j``.

    Zero exactly at an equilibrium of the joint agent/task meta-game.
    """
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    return float((s @ p_e).max() - (s.T @ p_a).min())


def maxent_nash_avt(s, tol: float = 1e-8) -> NashEvaluationAvT:
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    m, n = s.shape
    value = game_value(s)
    # maximal supports first; each side's equalities are the other side's support
    agent_supp, task_supp = _max_support_avt(s)
    if not agent_supp.any() or not task_supp.any():
        raise SolverError("empty optimal-strategy polytope", {"value": value})
    p_a, diag_a = _side_maxent(s, agent_supp, task_supp, tol)
    p_e, diag_e = _side_maxent(-s.T, task_supp, agent_supp, tol)
    cert = avt_deviation_certificate(s, p_a, p_e)
    v = float(p_a @ s @ p_e)
    diag = {
        "agent": diag_a,
        "task": diag_e,
        "lp_value": value,
        "joint_certificate": cert,
        "tolerance": tol,
    }
    if cert > tol:
        raise SolverError(f"AvT joint certificate {cert:.3g} exceeds {tol:g}", diag)
    return NashEvaluationAvT(
        agent_distribution=p_a,
        task_distribution=p_e,
        value=v,
        agent_nash_avg=s @ p_e,
        task_nash_avg=-s.T @ p_a,
        agent_support=support_of(p_a),
        task_support=support_of(p_e),
        exploitability=max(0.0, cert),
        diagnostics=diag,
    )
