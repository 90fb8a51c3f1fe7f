"""Dense state-vector simulation.

Qubit ordering is little-endian throughout the package: qubit ``q`` is bit
``q`` of a basis-state label, so basis index ``i`` of an ``n``-qubit state
is ``sum(b_q << q)``. A register given as a list ``[q0, q1, ...]`` stores
integer bit ``j`` on ``register[j]``.

Angle conventions (fixed here, relied upon everywhere else)::

    RZ(t) = diag(1, exp(2i t))
    RY(t) = [[cos t, -sin t], [sin t, cos t]]
    RX(t) = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]]

With these, ``RX(-pi/2) RZ(t) RX(pi/2) == exp(i t) RY(t)``.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CapacityError, PreconditionError, QubitIndexError

MAX_QUBITS = 26
NORM_TOL = 1e-12
STATE_TOL = 1e-10

Control = tuple[int, int]


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """A single-qubit gate: a name, its parameters, and its 2x2 matrix."""

    name: str
    matrix: np.ndarray = field(repr=False, compare=False)
    params: tuple[float, ...] = ()

    @property
    def is_diagonal(self) -> bool:
        return self.matrix[0, 1] == 0 and self.matrix[1, 0] == 0

    def dagger(self) -> Gate:
        return Gate(self.name + "^dag", self.matrix.conj().T, self.params)


_INV_SQRT2 = 1 / np.sqrt(2)

H = Gate("H", np.array([[1, 1], [1, -1]], dtype=complex) * _INV_SQRT2)
X = Gate("X", np.array([[0, 1], [1, 0]], dtype=complex))
Z = Gate("Z", np.array([[1, 0], [0, -1]], dtype=complex))


def rz(theta: float) -> Gate:
    return Gate("RZ", np.array([[1, 0], [0, np.exp(2j * theta)]]), (theta,))


def ry(theta: float) -> Gate:
    c, s = np.cos(theta), np.sin(theta)
    return Gate("RY", np.array([[c, -s], [s, c]], dtype=complex), (theta,))


def rx(theta: float) -> Gate:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return Gate("RX", np.array([[c, -1j * s], [-1j * s, c]]), (theta,))


def is_unitary(gate: Gate, tol: float = NORM_TOL) -> bool:
    m = gate.matrix
    return bool(np.allclose(m.conj().T @ m, np.eye(2), atol=tol, rtol=0))


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


class RandomSource:
    """Seeded generator through which every measurement outcome flows."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def sample_bit(self, p_one: float) -> int:
        return int(self._gen.random() < p_one)

    def uniform(self, size: int) -> np.ndarray:
        return self._gen.random(size)


class ForcedOutcomes(RandomSource):
    """Replays a fixed outcome sequence, for exhaustive branch enumeration."""

    def __init__(self, outcomes: Iterable[int]):
        super().__init__(0)
        self._outcomes = list(outcomes)
        self._pos = 0

    def sample_bit(self, p_one: float) -> int:
        if self._pos >= len(self._outcomes):
            raise PreconditionError("forced outcome sequence exhausted")
        bit = self._outcomes[self._pos]
        self._pos += 1
        p = p_one if bit else 1 - p_one
        if p < NORM_TOL:
            raise PreconditionError(f"forced outcome {bit} has probability {p:.3g}")
        return bit

    @property
    def consumed(self) -> int:
        return self._pos


def enumerate_branches(n_measurements: int) -> Iterator[ForcedOutcomes]:
    """Yield one forced source per outcome string of length ``n_measurements``."""
    for bits in itertools.product((0, 1), repeat=n_measurements):
        yield ForcedOutcomes(bits)


@dataclass(frozen=True)
class MeasurementRecord:
    qubit: int
    outcome: int
    probability: float


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


def _normalize_controls(controls: Iterable[int | Control]) -> list[Control]:
    out = []
    for c in controls:
        if isinstance(c, tuple):
            q, pol = c
        else:
            q, pol = c, 1
        if pol not in (0, 1):
            raise ArgumentError(f"control polarity must be 0 or 1, got {pol}")
        out.append((int(q), int(pol)))
    return out


class PureState:
    """A normalized vector of ``2**num_qubits`` complex amplitudes.

    Gate methods mutate the state in place and return ``self`` so calls can
    be chained.
    """

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray):
        amps = np.array(amplitudes, dtype=complex).ravel()
        n = int(amps.size).bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise ArgumentError(f"state length {amps.size} is not a power of two >= 2")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
        self._amps = amps
        self._n = n

    @property
    def num_qubits(self) -> int:
        return self._n

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    def copy(self) -> PureState:
        return PureState(self._amps.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self._amps, self._amps).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self._amps) ** 2

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self._n})"

    # -- indexing helpers ---------------------------------------------------

    def _check(self, q: int) -> None:
        if not 0 <= q < self._n:
            raise QubitIndexError(f"qubit {q} out of range for {self._n}-qubit state")

    def _tensor(self) -> np.ndarray:
        return self._amps.reshape((2,) * self._n)

    def _index(self, fixed: Iterable[Control]) -> list:
        idx: list = [slice(None)] * self._n
        for q, v in fixed:
            idx[self._n - 1 - q] = v
        return idx

    # -- gates --------------------------------------------------------------

    def apply(self, gate: Gate, target: int) -> PureState:
        return self.apply_controlled(gate, (), target)

    def apply_controlled(
        self, gate: Gate, controls: Iterable[int | Control], target: int
    ) -> PureState:
        """Apply ``gate`` to ``target`` on the subspace where every control
        qubit equals its polarity (1 unless given as ``(qubit, 0)``)."""
        ctrl = _normalize_controls(controls)
        self._check(target)
        seen = {target}
        for q, _ in ctrl:
            self._check(q)
            if q in seen:
                raise ArgumentError(f"qubit {q} used twice among controls/target")
            seen.add(q)
        t = self._tensor()
        idx0 = self._index(ctrl + [(target, 0)])
        idx1 = self._index(ctrl + [(target, 1)])
        (u00, u01), (u10, u11) = gate.matrix
        if gate.is_diagonal:
            if u00 != 1:
                t[tuple(idx0)] *= u00
            if u11 != 1:
                t[tuple(idx1)] *= u11
            return self
        a0 = t[tuple(idx0)].copy()
        a1 = t[tuple(idx1)].copy()
        t[tuple(idx0)] = u00 * a0 + u01 * a1
        t[tuple(idx1)] = u10 * a0 + u11 * a1
        return self

    def cnot(self, control: int, target: int) -> PureState:
        return self.apply_controlled(X, [control], target)

    def phase(self, controls: Iterable[int | Control], angle: float) -> PureState:
        """Multiply the subspace selected by ``controls`` by ``exp(i*angle)``."""
        ctrl = _normalize_controls(controls)
        if not ctrl:
            raise ArgumentError("phase needs at least one control")
        qs = [q for q, _ in ctrl]
        for q in qs:
            self._check(q)
        if len(set(qs)) != len(qs):
            raise ArgumentError("duplicate qubits in phase controls")
        self._tensor()[tuple(self._index(ctrl))] *= np.exp(1j * angle)
        return self

    # -- measurement --------------------------------------------------------

    def prob(self, qubit: int, outcome: int) -> float:
        self._check(qubit)
        sub = self._tensor()[tuple(self._index([(qubit, outcome)]))]
        return float(np.vdot(sub, sub).real)

    def measure(self, qubit: int, rng: RandomSource) -> MeasurementRecord:
        """Born-rule measurement of one qubit; collapses and renormalizes."""
        p1 = min(max(self.prob(qubit, 1), 0.0), 1.0)
        outcome = rng.sample_bit(p1)
        p = p1 if outcome else 1 - p1
        self.collapse(qubit, outcome)
        return MeasurementRecord(qubit, outcome, p)

    def collapse(self, qubit: int, outcome: int) -> PureState:
        """Project ``qubit`` onto ``outcome`` and renormalize."""
        p = self.prob(qubit, outcome)
        if p < NORM_TOL:
            raise PreconditionError(f"cannot project qubit {qubit} onto zero-probability outcome")
        t = self._tensor()
        t[tuple(self._index([(qubit, 1 - outcome)]))] = 0
        self._amps /= np.sqrt(p)
        return self

    def definite_value(self, qubit: int, tol: float = STATE_TOL) -> int:
        """Return the bit held by ``qubit`` if it is in a basis state."""
        p1 = self.prob(qubit, 1)
        if p1 < tol:
            return 0
        if p1 > 1 - tol:
            return 1
        raise PreconditionError(f"qubit {qubit} is not in a definite basis state (p1={p1:.6g})")

    # -- register resizing --------------------------------------------------

    def add_qubit(self) -> int:
        """Tensor a fresh ``|0>`` on top; returns its index (the old width)."""
        if self._n + 1 > MAX_QUBITS:
            raise CapacityError(f"cannot grow beyond {MAX_QUBITS} qubits")
        self._amps = np.concatenate([self._amps, np.zeros_like(self._amps)])
        self._n += 1
        return self._n - 1

    def remove_qubit(self, qubit: int) -> int:
        """Drop a qubit that is in a definite basis state; higher indices
        shift down by one. Returns the bit it held."""
        value = self.definite_value(qubit)
        if self._n == 1:
            raise CapacityError("cannot remove the last qubit")
        sub = self._tensor()[tuple(self._index([(qubit, value)]))]
        amps = np.ascontiguousarray(sub).ravel()
        self._amps = amps / np.linalg.norm(amps)
        self._n -= 1
        return value

    def reset(self, qubit: int) -> PureState:
        """Return a definite-valued qubit to ``|0>``."""
        if self.definite_value(qubit):
            self.apply(X, qubit)
        return self


def zero_state(n: int) -> PureState:
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"qubit count {n} outside [1, {MAX_QUBITS}]")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1
    return PureState(amps)


def basis_state(n: int, label: int) -> PureState:
    state = zero_state(n)
    if not 0 <= label < 1 << n:
        raise ArgumentError(f"basis label {label} out of range for {n} qubits")
    state.amplitudes[0] = 0
    state.amplitudes[label] = 1
    return state


def product_state(singles: Sequence[Sequence[complex]]) -> PureState:
    """Tensor product of single-qubit states; ``singles[q]`` lands on qubit q."""
    amps = np.array([1.0 + 0j])
    for s in singles:
        amps = np.kron(np.asarray(s, dtype=complex), amps)
    return PureState(amps)


# ---------------------------------------------------------------------------
# QFT
# ---------------------------------------------------------------------------


def _check_register(state: PureState, qubits: Sequence[int]) -> None:
    if len(set(qubits)) != len(qubits):
        raise ArgumentError("duplicate qubits in register")
    for q in qubits:
        state._check(q)


def qft(state: PureState, qubits: Sequence[int]) -> PureState:
    """Map ``|b>`` on ``qubits`` (``qubits[0]`` = bit 0) to the product of
    ``(|0> + exp(2 pi i b / 2**(j+1)) |1>)/sqrt(2)`` on ``qubits[j]``.

    No swap network: qubit j ends up holding the phase that depends on the
    low ``j+1`` bits of b.
    """
    _check_register(state, qubits)
    for j in reversed(range(len(qubits))):
        state.apply(H, qubits[j])
        for k in range(j):
            state.phase([qubits[k], qubits[j]], np.pi / 2 ** (j - k))
    return state


def iqft(state: PureState, qubits: Sequence[int]) -> PureState:
    _check_register(state, qubits)
    for j in range(len(qubits)):
        for k in reversed(range(j)):
            state.phase([qubits[k], qubits[j]], -np.pi / 2 ** (j - k))
        state.apply(H, qubits[j])
    return state


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def overlap(a: PureState, b: PureState) -> complex:
    if a.num_qubits != b.num_qubits:
        raise ArgumentError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: PureState, b: PureState) -> float:
    return abs(overlap(a, b)) ** 2


def equal_up_to_global_phase(a: PureState, b: PureState, tol: float = STATE_TOL) -> bool:
    return abs(overlap(a, b)) >= 1 - tol


def extract(state: PureState, qubits: Sequence[int], tol: float = STATE_TOL) -> PureState:
    """Pure state of ``qubits`` (new qubit i = ``qubits[i]``), provided the
    remaining qubits factor out as a product.

    When the remainder is a basis state the extracted amplitudes carry no
    extra phase, so outputs of different runs compare exactly.
    """
    _check_register(state, qubits)
    n, k = state.num_qubits, len(qubits)
    keep_axes = [n - 1 - q for q in reversed(qubits)]
    rest_axes = [ax for ax in range(n) if ax not in keep_axes]
    mat = state._tensor().transpose(keep_axes + rest_axes).reshape(1 << k, -1)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    if s[0] ** 2 < 1 - tol:
        raise PreconditionError(
            f"qubits {list(qubits)} are entangled with the rest (Schmidt weight {s[0] ** 2:.6g})"
        )
    j = int(np.argmax(np.abs(vh[0])))
    kept = u[:, 0] * s[0] * vh[0, j] / abs(vh[0, j])
    return PureState(kept / np.linalg.norm(kept))
