"""Fidelity Gram matrices, the RBF baseline, and hardware-realism transforms."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .feature_maps import FeatureMap, embed_states, round_half_away
from .statevector import CapacityError

DEFAULT_MEMORY_BUDGET = 4 * 2**30  # bytes of cached amplitudes


@dataclass(frozen=True)
class ShotNoiseConfig:
    shots: int = 5000
    probe_size: int = 5
    repeats: int = 10
    rng_seed: int = 0
    # None probes the leading block; an int draws a seeded random subset.
    probe_seed: Optional[int] = None

    def __post_init__(self):
        if self.shots < 1 or self.probe_size < 1 or self.repeats < 1:
            raise ValueError("shots, probe_size and repeats must be positive")


def _check_budget(n_states: int, n_qubits: int, budget: int) -> None:
    need = n_states * (1 << n_qubits) * 16
    if need > budget:
        raise CapacityError(
            f"caching {n_states} states of {n_qubits} qubits needs "
            f"{need / 2**30:.2f} GiB (budget {budget / 2**30:.2f} GiB); "
            "reduce the number of points or qubits"
        )


def _fidelities(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    overlaps = A.conj() @ B.T
    F = overlaps.real**2 + overlaps.imag**2
    # norm drift after many gates can push |<a|a>|^2 a few ulps past 1
    return np.clip(F, 0.0, 1.0, out=F)


def gram(fmap: FeatureMap, X, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """K_ij = |<x_i|x_j>|^2 from cached statevectors.

    The strict upper triangle is mirrored so the result is exactly symmetric.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_budget(len(X), fmap.n_qubits, memory_budget)
    states = embed_states(fmap, X)
    return gram_from_states(states)


def gram_from_states(states: np.ndarray) -> np.ndarray:
    K = _fidelities(states, states)
    upper = np.triu(K, 1)
    return upper + upper.T + np.diag(np.diag(K))


def cross_gram(
    fmap: FeatureMap, X_test, X_train, memory_budget: int = DEFAULT_MEMORY_BUDGET
) -> np.ndarray:
    """Rectangular (n_test, n_train) fidelity matrix."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    X_train = np.atleast_2d(np.asarray(X_train, dtype=np.float64))
    _check_budget(len(X_test) + len(X_train), fmap.n_qubits, memory_budget)
    return _fidelities(embed_states(fmap, X_test), embed_states(fmap, X_train))


def cross_from_states(test_states: np.ndarray, train_states: np.ndarray) -> np.ndarray:
    return _fidelities(test_states, train_states)


def rbf_gram(X, gamma: float, Y=None) -> np.ndarray:
    """exp(-gamma ||x_i - y_j||^2); ``Y`` defaults to ``X``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    same = Y is None
    Y = X if same else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(Y**2, axis=1)[None, :]
        - 2.0 * X @ Y.T
    )
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-gamma * sq)
    if same:
        K = np.triu(K, 1)
        K = K + K.T
        np.fill_diagonal(K, 1.0)
    return K


# ------------------------------------------------------------ shot noise


def binomial_sigma(p, shots: int, repeats: int, rng: np.random.Generator) -> np.ndarray:
    """Sample std (ddof=1) of ``repeats`` estimates Binomial(shots, p)/shots, per p."""
    p = np.clip(np.atleast_1d(np.asarray(p, dtype=np.float64)), 0.0, 1.0)
    if repeats < 2:
        return np.zeros_like(p)
    draws = rng.binomial(shots, p[:, None], size=(p.size, repeats)) / shots
    return draws.std(axis=1, ddof=1)


def probe_indices(n: int, cfg: ShotNoiseConfig) -> np.ndarray:
    if cfg.probe_size > n:
        raise ValueError(f"probe_size {cfg.probe_size} exceeds {n} points")
    if cfg.probe_seed is None:
        return np.arange(cfg.probe_size)
    rng = np.random.default_rng(cfg.probe_seed)
    return np.sort(rng.choice(n, size=cfg.probe_size, replace=False))


def estimate_shot_sigma(fmap: FeatureMap, X_probe, cfg: ShotNoiseConfig) -> float:
    """Mean over off-diagonal probe entries of the finite-shot sample std."""
    X_probe = np.atleast_2d(np.asarray(X_probe, dtype=np.float64))
    if len(X_probe) < 2:
        raise ValueError("need at least two probe points")
    return shot_sigma_from_gram(gram(fmap, X_probe), cfg)


def shot_sigma_from_gram(K_probe: np.ndarray, cfg: ShotNoiseConfig) -> float:
    iu = np.triu_indices(len(K_probe), 1)
    rng = np.random.default_rng(cfg.rng_seed)
    return float(np.mean(binomial_sigma(K_probe[iu], cfg.shots, cfg.repeats, rng)))


def inject_noise(K, sigma: float, rng_seed) -> np.ndarray:
    """Add symmetric i.i.d. N(0, sigma^2) noise to the off-diagonal entries."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    K = np.array(K, dtype=np.float64)
    if sigma == 0:
        return K
    n = len(K)
    iu = np.triu_indices(n, 1)
    rng = np.random.default_rng(rng_seed)
    noise = np.zeros_like(K)
    noise[iu] = rng.normal(0.0, sigma, size=len(iu[0]))
    return K + noise + noise.T


def nearest_psd(K) -> np.ndarray:
    """Frobenius projection onto the PSD cone (negative eigenvalues clipped).

    Already-PSD input is returned unchanged, which makes the map idempotent.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("nearest_psd needs a square matrix")
    if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
        raise ValueError("nearest_psd needs a symmetric matrix")
    K = 0.5 * (K + K.T)
    try:
        w, V = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
    if w.min() >= 0:
        return K
    out = (V * np.clip(w, 0.0, None)) @ V.T
    return 0.5 * (out + out.T)


def round_inputs(X, decimals: int) -> np.ndarray:
    """Half-away-from-zero rounding to ``decimals`` places.

    Feature maps apply this to the scaled circuit parameters when their
    ``decimals`` field is set; call it directly only on values that are
    already circuit angles.
    """
    return round_half_away(X, decimals)


# ----------------------------------------------------------- diagnostics


def offdiag(K) -> np.ndarray:
    K = np.asarray(K)
    return K[np.triu_indices(len(K), 1)]


def median_offdiag(K) -> float:
    if len(K) < 2:
        raise ValueError("need at least a 2x2 matrix")
    return float(np.median(offdiag(K)))


def std_offdiag(K) -> float:
    if len(K) < 2:
        raise ValueError("need at least a 2x2 matrix")
    return float(np.std(offdiag(K)))


# --------------------------------------------------------- serialization

_GRAM_HEADER = struct.Struct("<Q")


def save_gram(path, K) -> None:
    """Little-endian uint64 ``n`` followed by the upper triangle (row-major)."""
    K = np.asarray(K, dtype="<f8")
    iu = np.triu_indices(len(K))
    with open(path, "wb") as fh:
        fh.write(_GRAM_HEADER.pack(len(K)))
        fh.write(K[iu].tobytes())


def load_gram(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _GRAM_HEADER.size:
        raise ValueError("gram file truncated in header")
    (n,) = _GRAM_HEADER.unpack_from(data)
    expected = n * (n + 1) // 2
    body = np.frombuffer(data, dtype="<f8", offset=_GRAM_HEADER.size)
    if body.size != expected:
        raise ValueError(f"gram file holds {body.size} values, expected {expected}")
    K = np.zeros((n, n))
    K[np.triu_indices(n)] = body
    return K + np.triu(K, 1).T


def save_gram_csv(path, K) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(K):
            writer.writerow([repr(float(v)) for v in row])
