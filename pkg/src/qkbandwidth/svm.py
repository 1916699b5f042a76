"""Support-vector classification from a precomputed Gram matrix.

The dual is solved with a two-variable working-set method using the
maximal-violating-pair rule; each step solves the pair subproblem in closed
form and clips it to the box, so the equality constraint is kept exactly.
Labels are +1/-1 throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .kernels import rbf_gram

C_GRID = (
    0.006, 0.015, 0.03, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0,
    16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0,
)
GAMMA_MULTIPLIERS = (
    0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 20.0, 50.0, 100.0, 200.0, 500.0,
    1000.0, 5000.0, 10000.0,
)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 10**7
_TAU = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, gap: float, iterations: int):
        super().__init__(
            f"SVC solver stopped after {iterations} pair updates with KKT gap {gap:.3e}"
        )
        self.gap = gap
        self.iterations = iterations


@dataclass
class SvcModel:
    alpha: np.ndarray
    bias: float
    C: float
    support_indices: np.ndarray
    iterations: int = 0
    kkt_gap: float = 0.0

    @property
    def n_support(self) -> int:
        return len(self.support_indices)

    def dump(self) -> str:
        """Plain-text form: n, C, bias, alpha list, support indices."""
        lines = [
            str(len(self.alpha)),
            repr(float(self.C)),
            repr(float(self.bias)),
            " ".join(repr(float(a)) for a in self.alpha),
            " ".join(str(int(i)) for i in self.support_indices),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "SvcModel":
        lines = text.split("\n")
        n = int(lines[0])
        alpha = np.array([float(v) for v in lines[3].split()], dtype=np.float64)
        if alpha.size != n:
            raise ValueError(f"model declares n={n} but lists {alpha.size} coefficients")
        sv = np.array([int(v) for v in lines[4].split()], dtype=np.int64)
        return cls(alpha=alpha, bias=float(lines[2]), C=float(lines[1]), support_indices=sv)


def as_pm1(y) -> np.ndarray:
    """Map a binary label vector to +1/-1 (``{0, 1}`` and ``{-1, +1}`` accepted)."""
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if values <= {-1, 1}:
        return y.astype(np.float64)
    if values <= {0, 1}:
        return np.where(y == 1, 1.0, -1.0)
    raise ValueError(f"labels must be binary in {{0,1}} or {{-1,+1}}, got {sorted(values)}")


def _check_problem(K, y):
    K = np.asarray(K, dtype=np.float64)
    y = as_pm1(y)
    if K.shape != (len(y), len(y)):
        raise ValueError(f"Gram shape {K.shape} does not match {len(y)} labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training labels contain a single class")
    return K, y


def dual_objective(alpha, K, y) -> float:
    """sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij (to be maximized)."""
    ay = np.asarray(alpha) * y
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(K) @ ay)


def train_svc(
    K, y, C: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> SvcModel:
    if not C > 0:
        raise ValueError("C must be positive")
    K, y = _check_problem(K, y)
    n = len(y)
    Kd = np.diag(K).copy()
    alpha = np.zeros(n)
    # r = -y * G where G = Q alpha - 1 is the gradient of the minimization form
    r = y.copy()
    pos = y > 0
    up = pos.copy()  # alpha can move in the +y direction
    low = ~pos  # alpha can move in the -y direction
    gap = np.inf

    it = 0
    while True:
        i = int(np.argmax(np.where(up, r, -np.inf)))
        j = int(np.argmin(np.where(low, r, np.inf)))
        gap = r[i] - r[j]
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(float(gap), it)
        it += 1

        ai, aj = alpha[i], alpha[j]
        Gi, Gj = -y[i] * r[i], -y[j] * r[j]
        Qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = Kd[i] + Kd[j] + 2.0 * Qij
            delta = (-Gi - Gj) / max(quad, _TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = Kd[i] + Kd[j] - 2.0 * Qij
            delta = (Gi - Gj) / max(quad, _TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total

        r -= K[:, i] * (y[i] * (ni - ai)) + K[:, j] * (y[j] * (nj - aj))
        alpha[i], alpha[j] = ni, nj
        for k in (i, j):
            a = alpha[k]
            up[k] = a < C if pos[k] else a > 0
            low[k] = a > 0 if pos[k] else a < C

    G = -y * r
    np.clip(alpha, 0.0, C, out=alpha)
    bias = _bias(alpha, G, y, C)
    tau_sv = 1e-8 * C
    support = np.flatnonzero(alpha > tau_sv)
    return SvcModel(alpha, bias, float(C), support, iterations=it, kkt_gap=float(gap))


def _bias(alpha, G, y, C) -> float:
    # y_i - sum_j alpha_j y_j K_ij  ==  -y_i G_i
    r = -y * G
    tau = 1e-8 * C
    free = (alpha > tau) & (alpha < C - tau)
    if np.any(free):
        return float(np.mean(r[free]))
    at_upper = alpha >= C - tau
    at_lower = ~at_upper
    # KKT: b >= r_i for (y=+1, alpha=0) and (y=-1, alpha=C);
    #      b <= r_i for (y=+1, alpha=C) and (y=-1, alpha=0).
    lower_mask = ((y > 0) & at_lower) | ((y < 0) & at_upper)
    upper_mask = ((y > 0) & at_upper) | ((y < 0) & at_lower)
    lb = r[lower_mask].max() if np.any(lower_mask) else None
    ub = r[upper_mask].min() if np.any(upper_mask) else None
    if lb is None:
        return float(ub)
    if ub is None:
        return float(lb)
    return float(0.5 * (lb + ub))


def decision_values(model: SvcModel, y_train, cross) -> np.ndarray:
    """f_t = sum_i alpha_i y_i cross[t, i] + b."""
    cross = np.atleast_2d(np.asarray(cross, dtype=np.float64))
    y_train = as_pm1(y_train)
    if cross.shape[1] != len(model.alpha) or len(y_train) != len(model.alpha):
        raise ValueError(
            f"cross kernel has {cross.shape[1]} columns, model has {len(model.alpha)}"
        )
    return cross @ (model.alpha * y_train) + model.bias


def predict(model: SvcModel, y_train, cross) -> np.ndarray:
    return np.where(decision_values(model, y_train, cross) >= 0, 1.0, -1.0)


def balanced_accuracy(y_pred, y_true) -> float:
    y_pred = as_pm1(y_pred) if len(y_pred) else np.asarray(y_pred, dtype=float)
    y_true = as_pm1(y_true)
    if len(y_pred) != len(y_true):
        raise ValueError("prediction and truth lengths differ")
    pos = y_true > 0
    neg = ~pos
    if not (pos.any() and neg.any()):
        raise ValueError("balanced accuracy needs both classes in y_true")
    tpr = np.mean(y_pred[pos] > 0)
    tnr = np.mean(y_pred[neg] < 0)
    return float(0.5 * (tpr + tnr))


def _check_grid(grid: Sequence[float]) -> list[float]:
    grid = [float(c) for c in grid]
    if not grid:
        raise ValueError("C grid is empty")
    if any(c <= 0 for c in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("C grid must be positive and strictly increasing")
    return grid


def _best(scores: list[float]) -> int:
    # first maximum == smallest C on an increasing grid
    return int(np.argmax(np.asarray(scores) >= max(scores) - 1e-12))


def select_c_by_train_score(K, y, grid: Sequence[float] = C_GRID, **solver):
    """Pick the C with the best training balanced accuracy (ties -> smallest C)."""
    grid = _check_grid(grid)
    K, y = _check_problem(K, y)
    models, scores = [], []
    for C in grid:
        m = train_svc(K, y, C, **solver)
        models.append(m)
        scores.append(balanced_accuracy(predict(m, y, K), y))
    k = _best(scores)
    return grid[k], models[k]


def stratified_folds(y, folds: int, rng_seed) -> np.ndarray:
    """Fold id per sample: per-class seeded shuffle, then round-robin."""
    y = as_pm1(y)
    if folds < 2 or folds > len(y):
        raise ValueError(f"cannot build {folds} folds from {len(y)} samples")
    rng = np.random.default_rng(rng_seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    offset = 0
    for label in (-1.0, 1.0):
        idx = np.flatnonzero(y == label)
        rng.shuffle(idx)
        fold_of[idx] = (offset + np.arange(len(idx))) % folds
        offset += len(idx)
    return fold_of


def cv_scores(K, y, grid, folds: int = 5, rng_seed=0, **solver) -> list[float]:
    """Mean validation balanced accuracy per grid C.

    Folds whose validation part lacks a class (e.g. leave-one-out) cannot be
    scored on their own; in that case the out-of-fold predictions of all
    folds are pooled and scored once.
    """
    K, y = _check_problem(K, y)
    fold_of = stratified_folds(y, folds, rng_seed)
    splits = []
    for f in range(folds):
        va = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        if len(np.unique(y[tr])) < 2:
            raise ValueError(f"fold {f} training part lacks a class; too few samples")
        splits.append((tr, va))
    pooled = any(len(np.unique(y[va])) < 2 for _, va in splits)

    out = []
    for C in grid:
        preds = np.empty(len(y))
        per_fold = []
        for tr, va in splits:
            m = train_svc(K[np.ix_(tr, tr)], y[tr], C, **solver)
            p = predict(m, y[tr], K[np.ix_(va, tr)])
            preds[va] = p
            if not pooled:
                per_fold.append(balanced_accuracy(p, y[va]))
        out.append(balanced_accuracy(preds, y) if pooled else float(np.mean(per_fold)))
    return out


def select_c_by_cv(K, y, grid: Sequence[float] = C_GRID, folds: int = 5, rng_seed=0, **solver):
    """k-fold CV over the C grid, then refit on all samples at the best C."""
    grid = _check_grid(grid)
    K, y = _check_problem(K, y)
    scores = cv_scores(K, y, grid, folds, rng_seed, **solver)
    k = _best(scores)
    return grid[k], train_svc(K, y, grid[k], **solver)


def gamma_grid(X, multipliers: Sequence[float] = GAMMA_MULTIPLIERS) -> np.ndarray:
    """multipliers / (N * Var[X]), Var taken over all entries of the training data."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    var = float(X.var())
    if not var > 0:
        raise ValueError("training data has zero variance; gamma grid undefined")
    return np.asarray(multipliers, dtype=np.float64) / (len(X) * var)


def rbf_joint_grid_search(
    X, y, c_grid=C_GRID, gamma_multipliers=GAMMA_MULTIPLIERS, folds: int = 5,
    rng_seed=0, **solver,
):
    """Joint CV over (C, gamma) for the RBF baseline.

    Returns ``(C, gamma, score)``; ties go to the smaller gamma, then the
    smaller C.
    """
    c_grid = _check_grid(c_grid)
    y = as_pm1(y)
    best = None
    for gamma in gamma_grid(X, gamma_multipliers):
        K = rbf_gram(X, gamma)
        scores = cv_scores(K, y, c_grid, folds, rng_seed, **solver)
        k = _best(scores)
        if best is None or scores[k] > best[2] + 1e-12:
            best = (c_grid[k], float(gamma), scores[k])
    return best


def rbf_bandwidth_curve(X_train, y_train, X_test, y_test, C: float, gammas, **solver):
    """Train/test balanced accuracy for each gamma at a frozen C."""
    y_train, y_test = as_pm1(y_train), as_pm1(y_test)
    rows = []
    for gamma in gammas:
        K = rbf_gram(X_train, gamma)
        m = train_svc(K, y_train, C, **solver)
        train = balanced_accuracy(predict(m, y_train, K), y_train)
        cross = rbf_gram(X_test, gamma, X_train)
        test = balanced_accuracy(predict(m, y_train, cross), y_test)
        rows.append((float(gamma), train, test, m.n_support))
    return rows
