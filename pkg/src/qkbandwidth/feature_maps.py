"""IQP and Hamiltonian-evolution embeddings with a bandwidth (scaling) knob.

Both maps expose the bandwidth as ``scaling_factor``: it is lambda for the
IQP map and the total evolution time t for the Hamiltonian-evolution map.
Internally both fold the factor into the data (``u = scaling * x``) before
any angle is formed, so ``embed(map(s), x)`` and ``embed(map(1), s * x)`` are
identical bit for bit. When ``decimals`` is set, ``u`` is rounded to that many
decimal places, which models finite control precision on the circuit angles.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .statevector import (
    MAX_QUBITS,
    StateVector,
    _check_capacity,
    apply_diagonal_phases,
    apply_hadamard_all,
    apply_two_qubit_gate,
    product_state,
    sample_haar_single_qubit,
    zero_state,
)


def round_half_away(x, decimals: int) -> np.ndarray:
    """Round half away from zero (``np.round`` rounds half to even)."""
    if decimals < 0:
        raise ValueError("decimals must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    scale = 10.0**decimals
    return np.sign(x) * np.floor(np.abs(x) * scale + 0.5) / scale


class FeatureMap:
    """Shared behaviour of the two embeddings; not instantiated directly."""

    dimension: int
    scaling_factor: float
    decimals: Optional[int]

    @property
    def n_qubits(self) -> int:
        raise NotImplementedError

    def with_scaling(self, scaling_factor: float):
        return replace(self, scaling_factor=scaling_factor)

    def with_decimals(self, decimals: Optional[int]):
        return replace(self, decimals=decimals)

    def scaled(self, x) -> np.ndarray:
        """Circuit-level parameters ``scaling * x`` (rounded if configured)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ValueError(
                f"expected {self.dimension} features, got {x.shape[-1]}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs must be finite")
        u = self.scaling_factor * x
        if self.decimals is not None:
            u = round_half_away(u, self.decimals)
        return u

    def embed(self, x) -> StateVector:
        raise NotImplementedError

    def embed_batch(self, X) -> np.ndarray:
        raise NotImplementedError

    def _validate(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not (self.scaling_factor > 0 and np.isfinite(self.scaling_factor)):
            raise ValueError("scaling_factor must be positive and finite")
        if self.decimals is not None and self.decimals < 0:
            raise ValueError("decimals must be non-negative")
        _check_capacity(self.n_qubits, MAX_QUBITS)


# --------------------------------------------------------------------- IQP


@lru_cache(maxsize=32)
def _z_signs(d: int) -> np.ndarray:
    """(2**d, d) matrix of Z eigenvalues: +1 where bit j is 0, -1 where it is 1."""
    idx = np.arange(1 << d, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(d, dtype=np.int64)) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


@dataclass(frozen=True)
class IqpFeatureMap(FeatureMap):
    """``U_Z(x) H U_Z(x) H |0^d>`` on ``d`` qubits.

    ``U_Z`` is diagonal with phase ``sum_j u_j s_j + sum_{j,j'} u_j u_j' s_j s_j'``
    at the basis state with Z eigenvalues ``s``, where ``u = scaling * x``.
    """

    dimension: int
    scaling_factor: float = 1.0
    decimals: Optional[int] = None

    def __post_init__(self):
        self._validate()

    @property
    def n_qubits(self) -> int:
        return self.dimension

    def embed(self, x) -> StateVector:
        return iqp_embed(self, x)

    def embed_batch(self, X) -> np.ndarray:
        U = self.scaled(np.atleast_2d(X))
        lin = U @ _z_signs(self.dimension).T
        phases = lin + lin * lin
        rot = np.exp(1j * phases)
        psi = rot * (2.0 ** (-self.dimension / 2))
        psi = _hadamard_rows(psi, self.dimension)
        return psi * rot


def iqp_phase_parts(x, basis_index: int) -> tuple[float, float]:
    """(linear, quadratic) parts of the IQP phase for unscaled ``x``.

    The quadratic part is the literal double sum over all ``(j, j')`` pairs,
    diagonal and both orderings included.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    if not 0 <= basis_index < (1 << d):
        raise ValueError(f"basis index {basis_index} out of range for d={d}")
    s = _z_signs(d)[basis_index]
    lin = 0.0
    quad = 0.0
    for j in range(d):
        lin += x[j] * s[j]
        for jp in range(d):
            quad += x[j] * x[jp] * s[j] * s[jp]
    return lin, quad


def iqp_phase(fmap: IqpFeatureMap, x, basis_index: int) -> float:
    u = fmap.scaled(x)
    lin, quad = iqp_phase_parts(u, basis_index)
    return lin + quad


def iqp_embed(fmap: IqpFeatureMap, x) -> StateVector:
    u = fmap.scaled(x)
    signs = _z_signs(fmap.dimension)
    lin = signs @ u
    phases = lin + lin * lin  # equals the double sum: (sum_j u_j s_j)^2
    psi = zero_state(fmap.dimension)
    psi = apply_hadamard_all(psi)
    psi = apply_diagonal_phases(psi, phases)
    psi = apply_hadamard_all(psi)
    return apply_diagonal_phases(psi, phases)


def _hadamard_rows(psi: np.ndarray, n_qubits: int) -> np.ndarray:
    """H on every qubit of every row of an (m, 2**n) batch."""
    psi = np.array(psi, dtype=np.complex128)
    m = psi.shape[0]
    inv = 1.0 / np.sqrt(2.0)
    for q in range(n_qubits):
        view = psi.reshape(m, -1, 2, 1 << q)
        a = view[:, :, 0, :].copy()
        b = view[:, :, 1, :]
        view[:, :, 0, :] = (a + b) * inv
        view[:, :, 1, :] = (a - b) * inv
    return psi


# ------------------------------------------------- Hamiltonian evolution

_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


def heisenberg_gate(theta: float) -> np.ndarray:
    """exp(-i theta (XX + YY + ZZ)).

    XX + YY + ZZ = 2 SWAP - I, so the exponential is
    ``e^{i theta} (cos 2theta I - i sin 2theta SWAP)``.
    """
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    return np.exp(1j * theta) * (
        np.cos(2 * theta) * np.eye(4) - 1j * np.sin(2 * theta) * _SWAP
    )


@dataclass(frozen=True)
class HamEvoFeatureMap(FeatureMap):
    """Trotterized Heisenberg-chain evolution of a fixed Haar product state.

    A ``d``-dimensional point lives on ``d + 1`` qubits. Each of the
    ``trotter_steps`` sweeps applies ``exp(-i (t/T) x_j (XX+YY+ZZ))`` on the
    pair ``(j, j+1)`` for ``j = 0 .. d-1`` in ascending order (open chain).
    """

    dimension: int
    scaling_factor: float = 1.0
    trotter_steps: int = 40
    init_seed: int = 0
    decimals: Optional[int] = None

    def __post_init__(self):
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")
        self._validate()

    @property
    def n_qubits(self) -> int:
        return self.dimension + 1

    def embed(self, x) -> StateVector:
        return hamevo_embed(self, x)

    def embed_batch(self, X) -> np.ndarray:
        U = self.scaled(np.atleast_2d(X))
        m = U.shape[0]
        nq = self.n_qubits
        thetas = U / self.trotter_steps
        phase = np.exp(1j * thetas)
        cos2 = np.cos(2 * thetas)
        msin2 = -1j * np.sin(2 * thetas)
        psi = np.tile(init_product_state(self).amplitudes, (m, 1))
        for _ in range(self.trotter_steps):
            for j in range(self.dimension):
                view = psi.reshape(m, -1, 2, 2, 1 << j)
                swapped = view.transpose(0, 1, 3, 2, 4).reshape(m, -1)
                psi = phase[:, j, None] * (
                    cos2[:, j, None] * psi + msin2[:, j, None] * swapped
                )
        assert psi.shape == (m, 1 << nq)
        return psi


def init_product_state(fmap: HamEvoFeatureMap) -> StateVector:
    """Haar product state; qubit ``q`` draws from substream ``(init_seed, q)``.

    Keying by qubit index means qubit ``q`` gets the same state whatever the
    total qubit count.
    """
    factors = [
        sample_haar_single_qubit(haar_rng(fmap.init_seed, q))
        for q in range(fmap.n_qubits)
    ]
    return product_state(factors)


def haar_rng(init_seed: int, qubit: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(init_seed, spawn_key=(qubit,)))


def hamevo_embed(fmap: HamEvoFeatureMap, x) -> StateVector:
    u = fmap.scaled(x)
    gates = [heisenberg_gate(uj / fmap.trotter_steps) for uj in u]
    psi = init_product_state(fmap)
    for _ in range(fmap.trotter_steps):
        for j, gate in enumerate(gates):
            psi = apply_two_qubit_gate(psi, gate, j, j + 1)
    return psi


def make_feature_map(kind: str, dimension: int, scaling_factor: float, **kwargs):
    """Factory used by the experiment layer: ``kind`` is ``iqp`` or ``hamevo``."""
    kind = kind.lower()
    if kind == "iqp":
        kwargs.pop("trotter_steps", None)
        kwargs.pop("init_seed", None)
        return IqpFeatureMap(dimension, scaling_factor, **kwargs)
    if kind in ("hamevo", "ham_evo", "hamiltonian"):
        return HamEvoFeatureMap(dimension, scaling_factor, **kwargs)
    raise ValueError(f"unknown feature map kind {kind!r}")


def embed_states(fmap: FeatureMap, X) -> np.ndarray:
    """Row-stacked amplitudes for every point of ``X``; shape (n, 2**q)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return fmap.embed_batch(X)


__all__ = [
    "FeatureMap",
    "IqpFeatureMap",
    "HamEvoFeatureMap",
    "heisenberg_gate",
    "iqp_phase",
    "iqp_phase_parts",
    "iqp_embed",
    "hamevo_embed",
    "init_product_state",
    "haar_rng",
    "make_feature_map",
    "embed_states",
    "round_half_away",
]
