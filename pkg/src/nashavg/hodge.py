"""Antisymmetric matrix algebra on the complete graph.

Flows are n x n antisymmetric matrices.  ``grad``, ``div``, ``curl`` and
``rot`` are the combinatorial operators; together they split any flow into
a transitive part (explained by a rating vector) and a cyclic remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

ANTISYM_TOL = 1e-9
RANK_RTOL = 1e-10
ELO_ALPHA = np.log(10.0) / 400.0


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def repair_antisymmetric(a, tol: float = ANTISYM_TOL) -> np.ndarray:
    """Return ``(a - a.T) / 2``; reject matrices further than ``tol`` from antisymmetric."""
    a = _as_square(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    err = np.abs(a + a.T)
    if err.size and err.max() > tol:
        i, j = np.unravel_index(np.argmax(err), err.shape)
        raise ValueError(
            f"matrix is not antisymmetric: |A[{i},{j}] + A[{j},{i}]| = {err[i, j]:.3g} > {tol:g}"
        )
    return 0.5 * (a - a.T)


def _default_labels(n: int, prefix: str = "p") -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(n))


def _check_labels(labels: Sequence[str], n: int, what: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise ValueError(f"{what}: expected {n} labels, got {len(labels)}")
    if len(set(labels)) != n:
        raise ValueError(f"{what}: labels must be distinct")
    return labels


@dataclass(frozen=True)
class AntisymmetricLogitMatrix:
    """Logit payoff matrix with player labels.

    Entries within 1e-9 of antisymmetric are symmetrized on construction,
    larger violations raise ``ValueError``.
    """

    entries: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        a = repair_antisymmetric(self.entries)
        if a.shape[0] < 1:
            raise ValueError("need at least one player")
        np.fill_diagonal(a, 0.0)
        a.setflags(write=False)
        labels = self.labels or _default_labels(a.shape[0])
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", _check_labels(labels, a.shape[0], "players"))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class RatingVector:
    """Zero-sum ratings in natural-logit units.

    ``scale`` converts to display units by division: Elo points are
    ``values / scale`` with the default ``scale = ln(10) / 400``.
    """

    values: np.ndarray
    scale: float = ELO_ALPHA

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if abs(v.sum()) > 1e-9 * max(1.0, np.abs(v).sum()):
            raise ValueError(f"ratings must sum to zero (sum = {v.sum():.3g})")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def centered(cls, values, scale: float = ELO_ALPHA) -> "RatingVector":
        v = np.asarray(values, dtype=float)
        return cls(v - v.mean(), scale)

    @classmethod
    def from_display(cls, values, scale: float = ELO_ALPHA) -> "RatingVector":
        return cls.centered(np.asarray(values, dtype=float) * scale, scale)

    def display(self) -> np.ndarray:
        return self.values / self.scale


@dataclass(frozen=True)
class HodgeParts:
    transitive: np.ndarray
    cyclic: np.ndarray
    ratings: RatingVector


@dataclass(frozen=True)
class SchurFactors:
    """Thin real Schur form ``A = basis @ blocks(pairs) @ basis.T``."""

    basis: np.ndarray
    pairs: np.ndarray

    def block_matrix(self) -> np.ndarray:
        r = len(self.pairs)
        lam = np.zeros((2 * r, 2 * r))
        for j, value in enumerate(self.pairs):
            lam[2 * j, 2 * j + 1] = value
            lam[2 * j + 1, 2 * j] = -value
        return lam

    def reconstruct(self) -> np.ndarray:
        return self.basis @ self.block_matrix() @ self.basis.T


@dataclass(frozen=True)
class ScoreMatrix:
    """Agent-by-task scores; rows are agents, columns are tasks."""

    scores: np.ndarray
    agent_labels: tuple[str, ...] = field(default=())
    task_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"score matrix must be 2-d and non-empty, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("score matrix has non-finite entries")
        s.setflags(write=False)
        m, n = s.shape
        agents = self.agent_labels or _default_labels(m, "agent")
        tasks = self.task_labels or _default_labels(n, "task")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "agent_labels", _check_labels(agents, m, "agents"))
        object.__setattr__(self, "task_labels", _check_labels(tasks, n, "tasks"))

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def with_scores(self, scores) -> "ScoreMatrix":
        return ScoreMatrix(scores, self.agent_labels, self.task_labels)


def _entries(a) -> np.ndarray:
    if isinstance(a, AntisymmetricLogitMatrix):
        return a.entries
    return repair_antisymmetric(a)


def grad(r) -> np.ndarray:
    """Gradient flow ``r_i - r_j``."""
    r = np.asarray(getattr(r, "values", r), dtype=float).reshape(-1)
    return r[:, None] - r[None, :]


def div(a, scale: float = ELO_ALPHA) -> RatingVector:
    """Row means of the flow; zero-sum because the flow is antisymmetric."""
    a = _entries(a)
    v = a.mean(axis=1)
    # exact zero-sum up to rounding
    return RatingVector(v - v.mean(), scale)


def curl(a, i: int, j: int, k: int) -> float:
    a = _entries(a)
    n = a.shape[0]
    for idx in (i, j, k):
        if not -n <= idx < n:
            raise IndexError(f"index {idx} out of range for {n} players")
    return float(a[i, j] + a[j, k] - a[i, k])


def max_abs_curl(a) -> float:
    """Largest |curl(A)_ijk| over all triples, without building the 3-tensor."""
    a = _entries(a)
    n = a.shape[0]
    worst = 0.0
    for j in range(n):
        # curl_ijk for fixed j, all (i, k) at once: A_ij + A_jk - A_ik
        block = a[:, j][:, None] + a[j, :][None, :] - a
        worst = max(worst, float(np.abs(block).max()))
    return worst


def rot(a) -> np.ndarray:
    """Cyclic component ``(1/n) sum_k curl(A)_ijk``, i.e. ``A - grad(div(A))``."""
    a = _entries(a)
    return a - grad(a.mean(axis=1))


def hodge_decompose(a, scale: float = ELO_ALPHA) -> HodgeParts:
    a = _entries(a)
    ratings = div(a, scale)
    transitive = grad(ratings.values)
    return HodgeParts(transitive=transitive, cyclic=a - transitive, ratings=ratings)


def inner(a, b) -> float:
    return float(np.sum(np.asarray(a) * np.asarray(b)))


def _canonical_plane(a, q1, q2, lam):
    """Fix the in-plane rotation: q1 points along the first coordinate axis
    with a non-negligible shadow on the plane, so output does not depend on
    LAPACK sign and rotation choices."""
    plane = np.column_stack([q1, q2])
    shadow = plane @ plane.T
    k = int(np.argmax(np.linalg.norm(shadow, axis=0) > 1e-6))
    q1 = shadow[:, k] / np.linalg.norm(shadow[:, k])
    q2 = -(a @ q1) / lam
    q2 -= q1 * (q1 @ q2)
    return q1, q2 / np.linalg.norm(q2)


def schur_antisym(a) -> SchurFactors:
    """Thin real Schur decomposition of an antisymmetric matrix.

    Uses the SVD of ``A``: singular values come in equal pairs and, for a
    pair with left vectors ``u1, u2`` the block ``[[0, s], [-s, 0]]`` acts on
    the plane spanned by them.  Each plane basis is rebuilt so that
    ``A q1 = -s q2`` and ``A q2 = s q1``.
    """
    a = repair_antisymmetric(a)
    n = a.shape[0]
    if n == 0:
        return SchurFactors(np.zeros((0, 0)), np.zeros(0))
    # singular values of A come in equal pairs; an SVD keeps tiny ones at
    # round-off level, where eigh of A^T A would inflate them to sqrt(eps)
    _, s, vt = np.linalg.svd(a)
    smax = s[0]
    if smax == 0.0:
        return SchurFactors(np.zeros((n, 0)), np.zeros(0))
    keep = int(np.sum(s > RANK_RTOL * smax))
    keep += keep % 2
    space = vt[:keep].T

    cols, pairs = [], []
    remaining = space
    while remaining.shape[1] >= 2:
        # top direction of A restricted to the remaining invariant subspace
        sub = remaining.T @ a @ remaining
        ws, vs = np.linalg.eigh(sub.T @ sub)
        q1 = remaining @ vs[:, -1]
        q1 /= np.linalg.norm(q1)
        aq1 = a @ q1
        lam = np.linalg.norm(aq1)
        if lam <= RANK_RTOL * smax:
            break
        q2 = -aq1 / lam
        q2 -= q1 * (q1 @ q2)
        q2 /= np.linalg.norm(q2)
        q1, q2 = _canonical_plane(a, q1, q2, lam)
        cols.extend([q1, q2])
        pairs.append(lam)
        # deflate: orthonormal complement of span(q1, q2) inside `remaining`
        proj = remaining - np.outer(q1, q1 @ remaining) - np.outer(q2, q2 @ remaining)
        u, sv, _ = np.linalg.svd(proj, full_matrices=False)
        remaining = u[:, : remaining.shape[1] - 2]

    basis = np.column_stack(cols) if cols else np.zeros((n, 0))
    pairs = np.asarray(pairs)
    order = np.argsort(-pairs, kind="stable")
    idx = np.ravel([[2 * j, 2 * j + 1] for j in order]).astype(int)
    return SchurFactors(basis[:, idx], pairs[order])


def logit_matrix(p, clamp_eps: float = 0.01, labels: Sequence[str] = ()) -> AntisymmetricLogitMatrix:
    """Entrywise log-odds of a complementary win-probability matrix."""
    if not 0.0 < clamp_eps < 0.5:
        raise ValueError("clamp_eps must lie in (0, 0.5)")
    p = _as_square(p)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    bad = np.abs(p + p.T - 1.0)
    if bad.max() > 1e-9:
        i, j = np.unravel_index(np.argmax(bad), bad.shape)
        raise ValueError(f"P[{i},{j}] + P[{j},{i}] = {p[i, j] + p[j, i]:.6g}, expected 1")
    q = np.clip(p, clamp_eps, 1.0 - clamp_eps)
    a = np.log(q) - np.log1p(-q)
    return AntisymmetricLogitMatrix(0.5 * (a - a.T), labels)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_matrix(a) -> np.ndarray:
    return sigmoid(_entries(a))


def avt_averages(s) -> tuple[np.ndarray, np.ndarray]:
    """Average skill per agent (row mean) and difficulty per task (minus column mean)."""
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    return s.mean(axis=1), -s.mean(axis=0)


def avt_residual(s) -> np.ndarray:
    """``S - (s 1^T - 1 d^T)`` for the centered score matrix."""
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    s = s - s.mean()
    skill, difficulty = avt_averages(s)
    return s - (skill[:, None] - difficulty[None, :])


def embed_avt(s, mode: Literal["hodge", "naive"] = "hodge") -> np.ndarray:
    """Antisymmetric (m+n) x (m+n) embedding of an agent-by-task score matrix.

    ``naive`` places S and -S^T off the diagonal.  ``hodge`` first removes
    the grand mean and fills the diagonal blocks with the gradient flows of
    average skill and average difficulty.
    """
    s = np.asarray(getattr(s, "scores", s), dtype=float)
    m, n = s.shape
    out = np.zeros((m + n, m + n))
    if mode == "naive":
        out[:m, m:] = s
        out[m:, :m] = -s.T
        return out
    if mode != "hodge":
        raise ValueError(f"unknown embedding mode {mode!r}")
    s = s - s.mean()
    skill, difficulty = avt_averages(s)
    out[:m, :m] = grad(skill)
    out[m:, m:] = grad(difficulty)
    out[:m, m:] = s
    out[m:, :m] = -s.T
    return out


def avt_curl_criterion(s, tol: float = 1e-9) -> bool:
    """True iff average skill and difficulty explain the (centered) scores."""
    res = avt_residual(s)
    return bool(np.abs(res).max() <= tol)
