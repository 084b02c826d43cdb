"""Elo and multidimensional Elo (mElo) ratings.

Ratings are stored in natural-logit units, so ``p_ij = sigmoid(r_i - r_j)``.
Classic Elo points are obtained with ``RatingVector.display()``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .hodge import ELO_ALPHA, RatingVector, div, grad, schur_antisym, sigmoid

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """A fitting routine stopped before meeting its tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class PairwiseCounts:
    wins: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.array(self.wins, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("wins must be a square matrix")
        if np.any(w < 0):
            raise ValueError("win counts must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-play counts (diagonal) must be zero")
        w.setflags(write=False)
        object.__setattr__(self, "wins", w)
        labels = tuple(self.labels) or tuple(f"p{i}" for i in range(w.shape[0]))
        if len(labels) != w.shape[0] or len(set(labels)) != len(labels):
            raise ValueError("labels must be distinct, one per player")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class EmpiricalProbs:
    """Empirical win probabilities; ``support_mask`` marks observed pairs."""

    probs: np.ndarray
    support_mask: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        mask = np.array(self.support_mask, dtype=bool)
        n = p.shape[0]
        if p.shape != (n, n) or mask.shape != (n, n):
            raise ValueError("probs and support_mask must be square and the same shape")
        if np.any(mask != mask.T):
            raise ValueError("support_mask must be symmetric")
        np.fill_diagonal(mask, False)
        p[~mask] = 0.5
        np.fill_diagonal(p, 0.5)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.abs(p + p.T - 1.0)[mask].max(initial=0.0) > 1e-9:
            raise ValueError("observed probabilities must be complementary")
        p.setflags(write=False)
        mask.setflags(write=False)
        labels = tuple(self.labels) or tuple(f"p{i}" for i in range(n))
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("labels must be distinct, one per player")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "support_mask", mask)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def full(cls, probs, labels=()) -> "EmpiricalProbs":
        p = np.asarray(probs, dtype=float)
        mask = ~np.eye(p.shape[0], dtype=bool)
        return cls(p, mask, labels)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    def clamped(self, eps: float) -> "EmpiricalProbs":
        """Clamp observed probabilities to ``[eps, 1 - eps]``."""
        p = np.clip(self.probs, eps, 1.0 - eps)
        return replace(self, probs=p)


@dataclass(frozen=True)
class EloState:
    """Elo ratings plus the K-factor.

    ``learning_rate`` is in display (Elo point) units: a surprise of 1 moves
    a rating by ``learning_rate`` points, i.e. ``learning_rate * scale`` logits.
    """

    ratings: RatingVector
    learning_rate: float = 16.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class MEloModel:
    ratings: RatingVector
    cyclic_features: np.ndarray
    k: int

    def __post_init__(self):
        c = np.array(self.cyclic_features, dtype=float)
        n = len(self.ratings.values)
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if c.size == 0:
            c = np.zeros((n, 2 * self.k))
        if c.shape != (n, 2 * self.k):
            raise ValueError(f"cyclic_features must have shape ({n}, {2 * self.k}), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "cyclic_features", c)

    @classmethod
    def zeros(cls, n: int, k: int) -> "MEloModel":
        return cls(RatingVector(np.zeros(n)), np.zeros((n, 2 * k)), k)

    def logits(self) -> np.ndarray:
        """Full matrix of predicted logits ``r_i - r_j + c_i^T Omega c_j``."""
        a = grad(self.ratings.values)
        if self.k:
            c = self.cyclic_features
            a = a + c @ omega(self.k) @ c.T
        return a

    def predict_matrix(self) -> np.ndarray:
        return sigmoid(self.logits())


def _check_index(n: int, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < n:
            raise IndexError(f"player index {i} out of range for {n} players")


def elo_predict(state: EloState, i: int, j: int) -> float:
    r = state.ratings.values
    _check_index(len(r), i, j)
    return float(sigmoid(r[i] - r[j]))


def elo_update_online(state: EloState, i: int, j: int, outcome: float) -> EloState:
    """One match update; player ``j`` gets the opposite step so ratings stay zero-sum."""
    r = state.ratings.values
    _check_index(len(r), i, j)
    if i == j:
        raise ValueError("a player cannot play itself")
    if not 0.0 <= outcome <= 1.0:
        raise ValueError(f"outcome must lie in [0, 1], got {outcome}")
    step = state.learning_rate * state.ratings.scale * (outcome - sigmoid(r[i] - r[j]))
    new = r.copy()
    new[i] += step
    new[j] -= step
    return replace(state, ratings=RatingVector(new, state.ratings.scale))


def elo_fixed_point_residual(pbar: EmpiricalProbs, state: EloState | RatingVector) -> np.ndarray:
    """Row sums of ``pbar - phat`` over observed pairs; zero exactly at a batch fixed point."""
    ratings = state.ratings if isinstance(state, EloState) else state
    phat = sigmoid(grad(ratings.values))
    diff = np.where(pbar.support_mask, pbar.probs - phat, 0.0)
    return diff.sum(axis=1)


def _connected(mask: np.ndarray) -> bool:
    n = mask.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(mask[i] & ~seen):
            seen[j] = True
            stack.append(j)
    return bool(seen.all())


def elo_fit_batch(
    pbar: EmpiricalProbs,
    tol: float = 1e-10,
    max_iter: int = 200,
    learning_rate: float = 16.0,
    scale: float = ELO_ALPHA,
) -> EloState:
    """Batch Elo: ratings whose predicted row sums match the empirical ones.

    Damped Newton on the logistic loss over observed ordered pairs, with the
    zero-sum gauge fixed by a minimum-norm step.  Converged means every row
    residual is within ``tol``.
    """
    n = pbar.n
    mask = pbar.support_mask
    if n > 1 and not _connected(mask):
        raise ValueError("comparison graph is disconnected; ratings are not identifiable")
    r = np.zeros(n)
    w = mask.astype(float)

    def loss(r):
        a = grad(r)
        return float(np.sum(w * (np.logaddexp(0.0, -a) * pbar.probs + np.logaddexp(0.0, a) * (1 - pbar.probs))))

    res = elo_fixed_point_residual(pbar, RatingVector(r, scale))
    for it in range(max_iter):
        if np.abs(res).max(initial=0.0) <= tol:
            return EloState(RatingVector(r - r.mean(), scale), learning_rate)
        phat = sigmoid(grad(r))
        h = w * phat * (1 - phat)
        lap = np.diag(h.sum(axis=1)) - h
        step = np.linalg.lstsq(lap, res, rcond=None)[0]
        step -= step.mean()
        f0, t = loss(r), 1.0
        # gradient of the loss is -2 * res; accept on sufficient decrease
        while t > 1e-12 and loss(r + t * step) > f0 - 1e-4 * t * 2 * (res @ step):
            t *= 0.5
        r = r + t * step
        r -= r.mean()
        res = elo_fixed_point_residual(pbar, RatingVector(r, scale))
    worst = float(np.abs(res).max(initial=0.0))
    if worst <= tol:
        return EloState(RatingVector(r - r.mean(), scale), learning_rate)
    raise ConvergenceError(
        f"batch Elo did not converge in {max_iter} iterations (residual {worst:.3g})",
        residual=worst,
        iterations=max_iter,
    )


def omega(k: int) -> np.ndarray:
    """Block-diagonal ``2k x 2k`` generator with blocks ``[[0, 1], [-1, 0]]``."""
    if k <= 0:
        raise ValueError("k must be positive")
    out = np.zeros((2 * k, 2 * k))
    for b in range(k):
        out[2 * b, 2 * b + 1] = 1.0
        out[2 * b + 1, 2 * b] = -1.0
    return out


def melo_predict(model: MEloModel, i: int, j: int) -> float:
    r = model.ratings.values
    _check_index(len(r), i, j)
    x = r[i] - r[j]
    if model.k:
        c = model.cyclic_features
        x = x + c[i] @ omega(model.k) @ c[j]
    return float(sigmoid(x))


def _melo_step(r, c, om, i, j, p_ij, lr_r, lr_c):
    """In-place update of ``r`` and ``c``; returns the prediction error."""
    x = r[i] - r[j]
    if om is not None:
        x += c[i] @ om @ c[j]
    delta = p_ij - sigmoid(x)
    r[i] += lr_r * delta
    r[j] -= lr_r * delta
    if om is not None:
        ci, cj = c[i].copy(), c[j].copy()
        c[i] += lr_c * delta * (om @ cj)
        c[j] += lr_c * delta * (om.T @ ci)
    return delta


def melo_update_online(
    model: MEloModel, i: int, j: int, p_ij: float, lr_r: float = 16.0, lr_c: float = 1.0
) -> MEloModel:
    """Single mElo update; both feature vectors move using pre-update values.

    Learning rates act on natural-logit units.
    """
    r = model.ratings.values.copy()
    _check_index(len(r), i, j)
    if i == j:
        raise ValueError("a player cannot play itself")
    if not 0.0 <= p_ij <= 1.0:
        raise ValueError("p_ij must lie in [0, 1]")
    c = model.cyclic_features.copy()
    om = omega(model.k) if model.k else None
    _melo_step(r, c, om, i, j, p_ij, lr_r, lr_c)
    return MEloModel(RatingVector(r, model.ratings.scale), c, model.k)


def reorthogonalize(model: MEloModel, against_ratings: bool = False) -> MEloModel:
    """Re-express the cyclic term with orthogonal feature columns.

    The transitive part hidden in ``C Omega C^T`` moves into the ratings, and
    ``C`` is rebuilt from the Schur form of the remaining cyclic matrix, so
    predictions are unchanged.  With ``against_ratings`` the feature columns
    are additionally projected off the rating vector, which does change
    predictions.
    """
    if model.k == 0:
        return model
    c = model.cyclic_features
    n = c.shape[0]
    cyc = c @ omega(model.k) @ c.T
    shift = div(cyc).values
    r = model.ratings.values + shift
    cyc = cyc - grad(shift)
    if against_ratings and np.linalg.norm(r) > 0:
        u = r / np.linalg.norm(r)
        proj = np.eye(n) - np.outer(u, u)
        cyc = proj @ cyc @ proj
    f = schur_antisym(cyc)
    new_c = np.zeros((n, 2 * model.k))
    for b, lam in enumerate(f.pairs[: model.k]):
        root = np.sqrt(lam)
        new_c[:, 2 * b] = root * f.basis[:, 2 * b]
        new_c[:, 2 * b + 1] = root * f.basis[:, 2 * b + 1]
    return MEloModel(RatingVector.centered(r, model.ratings.scale), new_c, model.k)


def log_loss_matrix(pbar: EmpiricalProbs, phat) -> float:
    phat = np.asarray(phat, dtype=float)
    p = pbar.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -(np.where(p > 0, p * np.log(phat), 0.0) + np.where(p < 1, (1 - p) * np.log1p(-phat), 0.0))
    return float(np.sum(terms[pbar.support_mask]))


def melo_fit_batch(
    pbar: EmpiricalProbs,
    k: int = 1,
    lr_r: float = 16.0,
    lr_c: float = 1.0,
    epochs: int = 2000,
    reorth_every: int = 1,
    seed: int = 0,
    init_scale: float = 0.1,
) -> MEloModel:
    """Fit mElo by sweeping online updates over all observed ordered pairs.

    Each epoch visits the pairs in a seeded random order.  Step sizes decay
    as ``1/sqrt(1 + epoch)``; the raw rates oscillate on noiseless targets.
    Features start at small seeded Gaussian values because ``C = 0`` is a
    stationary point of the cyclic updates.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    n = pbar.n
    rng = np.random.default_rng(seed)
    r = np.zeros(n)
    c = rng.normal(0.0, init_scale, size=(n, 2 * k))
    om = omega(k) if k else None
    pairs = np.argwhere(pbar.support_mask)
    probs = pbar.probs
    for epoch in range(epochs):
        decay = 1.0 / np.sqrt(1.0 + epoch)
        for t in rng.permutation(len(pairs)):
            i, j = pairs[t]
            _melo_step(r, c, om, i, j, probs[i, j], lr_r * decay, lr_c * decay)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(c))):
            raise ConvergenceError(f"mElo fit diverged at epoch {epoch}", iterations=epoch)
        if k and reorth_every and (epoch + 1) % reorth_every == 0:
            m = reorthogonalize(MEloModel(RatingVector.centered(r), c, k))
            r, c = m.ratings.values.copy(), m.cyclic_features.copy()
    model = MEloModel(RatingVector.centered(r), c, k)
    loss = log_loss_matrix(pbar, model.predict_matrix())
    if not np.isfinite(loss):
        raise ConvergenceError("mElo fit produced a non-finite loss", residual=loss, iterations=epochs)
    return model


def prediction_metrics(pbar: EmpiricalProbs, phat) -> dict[str, float]:
    """Frobenius distance and summed logistic loss over observed ordered pairs."""
    phat = np.asarray(phat, dtype=float)
    if phat.shape != pbar.probs.shape:
        raise ValueError("shape mismatch between empirical and predicted matrices")
    diff = (pbar.probs - phat)[pbar.support_mask]
    return {
        "frobenius": float(np.sqrt(np.sum(diff**2))),
        "log_loss": log_loss_matrix(pbar, phat),
    }


def empirical_probs(counts: PairwiseCounts, smoothing: float = 0.0) -> EmpiricalProbs:
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    w = counts.wins
    total = w + w.T
    mask = total > 0
    np.fill_diagonal(mask, False)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(mask, (w + smoothing) / (total + 2 * smoothing), 0.5)
    return EmpiricalProbs(p, mask, counts.labels)
