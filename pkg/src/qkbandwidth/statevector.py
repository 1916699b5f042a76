"""Dense statevector primitives used by the feature maps.

Bit ordering: qubit ``q`` (0-indexed) is bit ``q`` of the basis-state index,
least-significant first. In the ``(2,) * n`` tensor view of the amplitudes
(C order) qubit ``q`` therefore lives on axis ``n - 1 - q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

MAX_QUBITS = 26
NORM_TOL = 1e-10

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class CapacityError(MemoryError):
    """Requested simulation does not fit the configured budget."""


@dataclass(frozen=True)
class SingleQubitState:
    a0: complex
    a1: complex

    def __post_init__(self):
        norm = abs(self.a0) ** 2 + abs(self.a1) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"single-qubit state not normalized: |a|^2 = {norm}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over ``n_qubits`` qubits.

    The amplitude array is stored read-only; every operation in this module
    returns a new ``StateVector``.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size == 0 or amps.size != 1 << n:
            raise ValueError(f"amplitude count {amps.size} is not a power of two")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi|^2 = {norm}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def __len__(self):
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


def _check_capacity(n_qubits: int, max_qubits: int = MAX_QUBITS) -> None:
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    if n_qubits > max_qubits:
        raise CapacityError(
            f"{n_qubits} qubits exceeds the configured maximum of {max_qubits}"
        )


def _unchecked(amps: np.ndarray) -> StateVector:
    # Skips the normalization check for results of unitary operations on
    # already-validated states.
    sv = object.__new__(StateVector)
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    amps.setflags(write=False)
    object.__setattr__(sv, "amplitudes", amps)
    return sv


def zero_state(n_qubits: int, max_qubits: int = MAX_QUBITS) -> StateVector:
    _check_capacity(n_qubits, max_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return _unchecked(amps)


def product_state(
    factors: Sequence[SingleQubitState], max_qubits: int = MAX_QUBITS
) -> StateVector:
    """Tensor product with ``factors[q]`` placed on qubit ``q``."""
    if len(factors) == 0:
        raise ValueError("product_state needs at least one factor")
    _check_capacity(len(factors), max_qubits)
    amps = np.ones(1, dtype=np.complex128)
    # Higher qubits are more significant, so they go on the left of kron.
    for f in factors:
        amps = np.kron(f.as_array(), amps)
    return _unchecked(amps)


def apply_hadamard_all(state: StateVector) -> StateVector:
    n = state.n_qubits
    psi = np.array(state.amplitudes)
    for q in range(n):
        view = psi.reshape(-1, 2, 1 << q)
        a = view[:, 0, :].copy()
        b = view[:, 1, :]
        view[:, 0, :] = (a + b) * _INV_SQRT2
        view[:, 1, :] = (a - b) * _INV_SQRT2
    return _unchecked(psi)


PhaseSpec = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def apply_diagonal_phases(state: StateVector, phase: PhaseSpec) -> StateVector:
    """Multiply amplitude ``b`` by ``exp(1j * phase(b))``.

    ``phase`` is either an array of ``2**n`` angles or a vectorized callable
    taking an integer index array.
    """
    if callable(phase):
        angles = phase(np.arange(len(state), dtype=np.int64))
    else:
        angles = phase
    angles = np.broadcast_to(np.asarray(angles, dtype=np.float64), (len(state),))
    if not np.all(np.isfinite(angles)):
        raise ValueError("phase angles must be finite")
    return _unchecked(state.amplitudes * np.exp(1j * angles))


def _check_unitary(gate: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (4, 4):
        raise ValueError(f"two-qubit gate must be 4x4, got {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, np.eye(4), rtol=0, atol=atol):
        raise ValueError("gate is not unitary")
    return gate


def apply_two_qubit_gate(
    state: StateVector, gate: np.ndarray, q_a: int, q_b: int
) -> StateVector:
    """Apply a 4x4 unitary to qubits ``(q_a, q_b)``.

    The gate's local basis index is ``2 * bit(q_a) + bit(q_b)``, so ``q_a`` is
    the more significant qubit of the gate regardless of its global position.
    """
    n = state.n_qubits
    if q_a == q_b:
        raise IndexError("two-qubit gate needs distinct qubits")
    for q in (q_a, q_b):
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")
    gate = _check_unitary(gate)
    ax_a, ax_b = n - 1 - q_a, n - 1 - q_b
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(psi, (ax_a, ax_b), (0, 1))
    shape = psi.shape
    out = (gate @ psi.reshape(4, -1)).reshape(shape)
    out = np.moveaxis(out, (0, 1), (ax_a, ax_b))
    return _unchecked(out.reshape(-1))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating the first argument."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def sample_haar_single_qubit(rng: np.random.Generator) -> SingleQubitState:
    """Haar-random pure state: normalized complex Gaussian pair."""
    while True:
        re0, im0, re1, im1 = rng.standard_normal(4)
        norm = np.sqrt(re0**2 + im0**2 + re1**2 + im1**2)
        if norm > 0:
            break
    a0 = complex(re0, im0) / norm
    a1 = complex(re1, im1) / norm
    # Guard the 1e-12 invariant against the last ulp of the division.
    s = np.sqrt(abs(a0) ** 2 + abs(a1) ** 2)
    return SingleQubitState(a0 / s, a1 / s)
