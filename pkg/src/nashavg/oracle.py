"""Brute-force reference solvers for small games.

Nothing here touches linear programming or the dual entropy solver in
``nash``; equilibria come from exhaustive enumeration and entropy is
maximized by primal Newton steps on each face of the equilibrium polytope.
Cost grows exponentially, so inputs are capped at 8 strategies per player.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from .nash import NashEvaluationAvA, NashEvaluationAvT, entropy, support_of

MAX_PLAYERS = 8
_FEAS = 1e-10


def _vertices(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Vertices of ``{x in simplex : g @ x <= h}`` by basis enumeration.

    A vertex with support ``sigma`` is pinned by ``|sigma| - 1`` tight rows
    plus ``sum(x) = 1``; every choice of rows is tried.
    """
    rows, n = g.shape
    scale = max(1.0, float(np.abs(g).max(initial=0.0)), float(np.abs(h).max(initial=0.0)))
    found = []
    for size in range(1, n + 1):
        for sigma in combinations(range(n), size):
            cols = list(sigma)
            for tight in combinations(range(rows), size - 1):
                mat = np.vstack([g[np.ix_(tight, cols)], np.ones((1, size))])
                rhs = np.concatenate([h[list(tight)], [1.0]])
                if np.linalg.matrix_rank(mat) < size:
                    continue
                xs = np.linalg.solve(mat, rhs)
                if xs.min() < -_FEAS:
                    continue
                x = np.zeros(n)
                x[cols] = np.clip(xs, 0.0, None)
                if np.all(g @ x <= h + _FEAS * scale):
                    found.append(x)
    if not found:
        return np.zeros((0, n))
    verts = np.array(found)
    keys = np.round(verts, 9)
    _, first = np.unique(keys, axis=0, return_index=True)
    return verts[np.sort(first)]


def _newton_face(g_eq: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Maximize entropy on ``{x : g_eq x = g_eq start, sum x = 1}`` restricted to ``start``'s support."""
    cols = np.flatnonzero(start > 0)
    x = start[cols].copy()
    basis = null_space(np.vstack([g_eq[:, cols], np.ones((1, len(cols)))]))
    if basis.shape[1] == 0:
        out = np.zeros_like(start)
        out[cols] = x
        return out

    def h(v):
        return -np.sum(v * np.log(v))

    for _ in range(200):
        gradient = -basis.T @ (np.log(x) + 1.0)
        hess = basis.T @ (basis / x[:, None])
        step = np.linalg.solve(hess, gradient)
        decrement = gradient @ step
        if decrement < 1e-28:
            break
        t = 1.0
        while True:
            trial = x + t * (basis @ step)
            if trial.min() > 0 and h(trial) >= h(x):
                break
            t *= 0.5
            if t < 1e-16:
                trial = x
                break
        if np.array_equal(trial, x):
            break
        x = trial
    out = np.zeros_like(start)
    out[cols] = x
    return out


def maxent_polytope_bruteforce(g, h) -> np.ndarray:
    """Entropy maximizer over ``{x in simplex : g @ x <= h}``.

    Enumerates faces by their tight-row sets.  For each face the entropy is
    maximized over its affine hull, starting from the barycenter of the
    face's vertices; the best feasible candidate wins.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    rows, n = g.shape
    if n > MAX_PLAYERS or rows > MAX_PLAYERS:
        raise ValueError(f"brute force limited to {MAX_PLAYERS} strategies")
    verts = _vertices(g, h)
    if len(verts) == 0:
        raise ValueError("polytope is empty")
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    slack = verts @ g.T - h
    tight = np.abs(slack) <= 1e-9 * scale
    best, best_h = None, -np.inf
    seen = set()
    for size in range(rows + 1):
        for e in combinations(range(rows), size):
            members = np.all(tight[:, list(e)], axis=1) if e else np.ones(len(verts), bool)
            key = tuple(np.flatnonzero(members))
            if not key or key in seen:
                continue
            seen.add(key)
            bary = verts[members].mean(axis=0)
            active = np.flatnonzero(np.all(tight[members], axis=0))
            cand = _newton_face(g[active], bary)
            if np.any(g @ cand > h + 1e-9 * scale):
                continue
            value = entropy(cand)
            if value > best_h:
                best, best_h = cand, value
    return best


def brute_force_maxent_oracle(a) -> NashEvaluationAvA:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n > MAX_PLAYERS:
        raise ValueError(f"oracle supports at most {MAX_PLAYERS} players, got {n}")
    p = maxent_polytope_bruteforce(a, np.zeros(n))
    navg = a @ p
    return NashEvaluationAvA(
        distribution=p,
        nash_average=navg,
        entropy=entropy(p),
        exploitability=float(navg.max()),
        support=support_of(p),
        diagnostics={"method": "enumeration"},
    )


def game_value_enumeration(s) -> float:
    """Value of the zero-sum game ``max_x min_y x^T S y`` by support enumeration.

    For each agent support and equal-sized set of binding task columns the
    equalizing strategy is solved for; its guaranteed payoff is a lower bound
    and the best one is attained at some extreme optimal strategy.
    """
    s = np.asarray(s, dtype=float)
    m, n = s.shape
    best = -np.inf
    for size in range(1, min(m, n) + 1):
        for sigma in combinations(range(m), size):
            for cols in combinations(range(n), size):
                # unknowns: x_sigma and the common payoff t
                mat = np.zeros((size + 1, size + 1))
                mat[:size, :size] = s[np.ix_(sigma, cols)].T
                mat[:size, size] = -1.0
                mat[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[size] = 1.0
                if np.linalg.matrix_rank(mat) < size + 1:
                    continue
                sol = np.linalg.solve(mat, rhs)
                if sol[:size].min() < -_FEAS:
                    continue
                x = np.zeros(m)
                x[list(sigma)] = np.clip(sol[:size], 0.0, None)
                x /= x.sum()
                best = max(best, float((s.T @ x).min()))
    return best


def brute_force_avt_oracle(s) -> NashEvaluationAvT:
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    m, n = s.shape
    if m > MAX_PLAYERS or n > MAX_PLAYERS:
        raise ValueError(f"oracle supports at most {MAX_PLAYERS} agents and tasks")
    v = game_value_enumeration(s)
    v_min = -game_value_enumeration(-s.T)
    p_a = maxent_polytope_bruteforce(-s.T, np.full(n, -v))
    p_e = maxent_polytope_bruteforce(s, np.full(m, v))
    return NashEvaluationAvT(
        agent_distribution=p_a,
        task_distribution=p_e,
        value=v,
        agent_nash_avg=s @ p_e,
        task_nash_avg=-s.T @ p_a,
        agent_support=support_of(p_a),
        task_support=support_of(p_e),
        exploitability=float(max(0.0, (s @ p_e).max() - (s.T @ p_a).min())),
        diagnostics={"method": "enumeration", "minimax_gap": abs(v - v_min)},
    )
