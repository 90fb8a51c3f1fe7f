"""Distance-based classifier: state preparation, Hadamard-test readout,
the classical kernel, and its distributed preparation.

Register layout of the prepared state (little-endian indices)::

    counter   0 .. n-1          n = log2(#points)
    ancilla   n
    features  n+1 .. n+m        m = log2(#features)
    label     n+m+1             |0> for label +1, |1> for label -1

Amplitude encoding bisects the feature index from its most significant bit
down: the single level-0 rotation acts on ``features[m-1]``, level ``l``
acts on ``features[m-1-l]`` controlled on the ``l`` more significant
feature qubits.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import simcore
from .errors import ArgumentError, DatasetParseError, DegenerateInputError, PreconditionError
from .netsim import Device, Network, ProtocolTrace, Qubit, ResourceEstimate
from .simcore import H, PureState, RandomSource, X, rx, ry

NORM_TOL = 1e-12
TIE_TOL = 1e-12
POSTSELECT_MIN = 1e-9

DATASET_HEADER = "# distqml-dataset v1"


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _log2(n: int) -> int:
    return n.bit_length() - 1


def label_bit(y: int) -> int:
    return (1 - y) // 2


def normalize(raw: Sequence[float]) -> np.ndarray:
    v = np.asarray(raw, dtype=float)
    if v.ndim != 1 or not _is_pow2(v.size):
        raise ArgumentError(f"feature vector length {v.size} is not a power of two")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ArgumentError("cannot normalize the zero vector")
    return v / norm


def pad_pow2(raw: Sequence[float]) -> np.ndarray:
    v = np.asarray(raw, dtype=float)
    size = 1 << max(0, (v.size - 1).bit_length())
    return np.concatenate([v, np.zeros(max(size, 2) - v.size)])


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataPoint:
    features: np.ndarray
    label: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if not _is_pow2(f.size) or f.size < 2:
            raise ArgumentError(f"feature count {f.size} must be a power of two >= 2")
        if abs(np.linalg.norm(f) - 1) > NORM_TOL:
            raise ArgumentError("features must have unit Euclidean norm")
        if self.label not in (-1, 1):
            raise ArgumentError(f"label must be -1 or +1, got {self.label}")
        object.__setattr__(self, "features", f)


@dataclass
class PartitionedDataset:
    """Horizontally split data: ``per_party[k]`` holds party k+1's points.

    Points are numbered party-major, which fixes the counter value of each.
    """

    per_party: list[list[DataPoint]]

    def __post_init__(self):
        if not self.per_party:
            raise ArgumentError("dataset needs at least one party")
        pts = self.points
        if not _is_pow2(len(pts)):
            raise ArgumentError(f"total number of points {len(pts)} must be a power of two")
        sizes = {p.features.size for p in pts}
        if len(sizes) != 1:
            raise ArgumentError(f"inconsistent feature counts {sorted(sizes)}")

    @property
    def points(self) -> list[DataPoint]:
        return [p for party in self.per_party for p in party]

    @property
    def parties(self) -> int:
        return len(self.per_party)

    @property
    def n_features(self) -> int:
        return self.points[0].features.size

    def owners(self) -> list[int]:
        """Party index (0-based) owning each global point."""
        return [k for k, party in enumerate(self.per_party) for _ in party]

    @classmethod
    def split(cls, points: Sequence[DataPoint], parties: int) -> PartitionedDataset:
        """Even contiguous split of an ordered point list."""
        if parties < 1 or len(points) % parties:
            raise ArgumentError(f"cannot split {len(points)} points evenly over {parties} parties")
        per = len(points) // parties
        return cls([list(points[k * per:(k + 1) * per]) for k in range(parties)])


def parse_dataset(text: str) -> PartitionedDataset:
    """Parse the line-oriented dataset format.

    The first non-blank line must be the version header
    ``# distqml-dataset v1``. Every other non-blank, non-comment line is
    ``party feature_1 ... feature_M label`` (whitespace or comma
    separated). Party ids run 1..K; features are zero-padded to a power of
    two and normalized; labels are -1 or +1.
    """
    rows: list[tuple[int, int, list[float], int]] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not seen_header:
            if line != DATASET_HEADER:
                raise DatasetParseError(f"expected header {DATASET_HEADER!r}", lineno)
            seen_header = True
            continue
        if line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) < 3:
            raise DatasetParseError("need a party id, at least one feature, and a label", lineno)
        try:
            party = int(fields[0])
            feats = [float(f) for f in fields[1:-1]]
            label = int(fields[-1])
        except ValueError as exc:
            raise DatasetParseError(str(exc), lineno) from None
        if party < 1:
            raise DatasetParseError(f"party id must be >= 1, got {party}", lineno)
        if label not in (-1, 1):
            raise DatasetParseError(f"label must be -1 or +1, got {label}", lineno)
        if not any(feats):
            raise DatasetParseError("feature vector is all zeros", lineno)
        rows.append((lineno, party, feats, label))
    if not seen_header:
        raise DatasetParseError("empty dataset file")
    if not rows:
        raise DatasetParseError("dataset has no points")
    width = len(rows[0][2])
    for lineno, _, feats, _ in rows:
        if len(feats) != width:
            raise DatasetParseError(f"expected {width} features, got {len(feats)}", lineno)
    k_max = max(r[1] for r in rows)
    per_party: list[list[DataPoint]] = [[] for _ in range(k_max)]
    for _, party, feats, label in rows:
        per_party[party - 1].append(DataPoint(normalize(pad_pow2(feats)), label))
    for k, pts in enumerate(per_party, start=1):
        if not pts:
            raise DatasetParseError(f"party {k} has no points (ids must be contiguous)")
    try:
        return PartitionedDataset(per_party)
    except ArgumentError as exc:
        raise DatasetParseError(str(exc)) from None


def format_dataset(data: PartitionedDataset) -> str:
    lines = [DATASET_HEADER]
    for k, pts in enumerate(data.per_party, start=1):
        for p in pts:
            feats = " ".join(repr(float(f)) for f in p.features)
            lines.append(f"{k} {feats} {p.label:+d}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Amplitude encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingAngles:
    """Rotation tree: ``levels[l]`` has ``2**l`` angles, node ``p`` of
    level ``l`` covering the index block ``p`` of size ``M / 2**l``."""

    levels: tuple[np.ndarray, ...]

    @property
    def n_rotations(self) -> int:
        return sum(len(lv) for lv in self.levels)


def encoding_angles(x: Sequence[float]) -> EncodingAngles:
    x = np.asarray(x, dtype=float)
    if not _is_pow2(x.size) or x.size < 2:
        raise ArgumentError(f"feature count {x.size} must be a power of two >= 2")
    if abs(np.linalg.norm(x) - 1) > 1e-10:
        raise ArgumentError("encoding requires a unit-norm vector")
    m = _log2(x.size)
    levels = []
    for lvl in range(m):
        block = x.size >> lvl
        half = block // 2
        angles = np.empty(1 << lvl)
        for p in range(1 << lvl):
            lo = x[p * block:p * block + half]
            hi = x[p * block + half:(p + 1) * block]
            if half == 1:
                # leaf: signed components carry the sign of each amplitude
                angles[p] = math.atan2(hi[0], lo[0])
            else:
                angles[p] = math.atan2(np.linalg.norm(hi), np.linalg.norm(lo))
        levels.append(angles)
    return EncodingAngles(tuple(levels))


def encoding_rotations(x: Sequence[float], register: Sequence[int]):
    """``(target, prefix controls, angle)`` for every rotation encoding ``x``
    into ``register``; works for qubit indices or :class:`Qubit` handles."""
    angles = encoding_angles(x) if not isinstance(x, EncodingAngles) else x
    m = len(angles.levels)
    if len(register) != m:
        raise ArgumentError(f"register of {len(register)} qubits cannot hold {1 << m} features")
    out = []
    for lvl, level in enumerate(angles.levels):
        target = register[m - 1 - lvl]
        for p, theta in enumerate(level):
            prefix = [(register[m - 1 - i], (p >> (lvl - 1 - i)) & 1) for i in range(lvl)]
            out.append((target, prefix, float(theta)))
    return out


def amplitude_encode(
    state: PureState,
    register: Sequence[int],
    x: Sequence[float],
    controls: Sequence[tuple[int, int]] = (),
) -> PureState:
    """On the subspace selected by ``controls``, map ``|0..0>`` on
    ``register`` to ``sum_i x_i |i>``."""
    ctrl = list(controls)
    if {q for q, _ in ctrl} & set(register):
        raise ArgumentError("register and controls overlap")
    for target, prefix, theta in encoding_rotations(x, register):
        state.apply_controlled(ry(theta), ctrl + prefix, target)
    return state


def controlled_ry_via_rz(
    state: PureState,
    control: int | Sequence[tuple[int, int]],
    target: int,
    ancilla: int,
    theta: float,
    *,
    phase_correction: bool = True,
) -> PureState:
    """Controlled RY(theta) built from one RZ(theta) on an ancilla.

    Basis change RX(pi/2) on the target, Toffoli (controls + target) onto
    the ancilla, RZ(theta) on the ancilla, Toffoli again, RX(-pi/2).

    That sequence alone implements controlled ``exp(i theta) RY(theta)``:
    the eigenvalues of the conjugated RZ are ``{1, exp(2i theta)}`` while
    those of RY are ``exp(+-i theta)``. The leftover phase sits on the
    controlled subspace, so it is removed with a phase of ``-theta`` there;
    ``phase_correction=False`` skips it.
    """
    ctrl = [(control, 1)] if isinstance(control, (int, np.integer)) else list(control)
    qs = [q for q, _ in ctrl] + [target, ancilla]
    if len(set(qs)) != len(qs):
        raise ArgumentError("control, target and ancilla must be distinct")
    if state.prob(ancilla, 1) > 1e-10:
        raise PreconditionError("ancilla must start in |0>")
    state.apply(rx(np.pi / 2), target)
    state.apply_controlled(X, ctrl + [(target, 1)], ancilla)
    state.apply(simcore.rz(theta), ancilla)
    state.apply_controlled(X, ctrl + [(target, 1)], ancilla)
    state.apply(rx(-np.pi / 2), target)
    if phase_correction:
        state.phase(ctrl, -theta)
    return state


# ---------------------------------------------------------------------------
# Initial state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Layout:
    counter: tuple[int, ...]
    ancilla: int
    features: tuple[int, ...]
    label: int

    @classmethod
    def for_sizes(cls, n_points: int, n_features: int) -> Layout:
        if not _is_pow2(n_points) or not _is_pow2(n_features) or n_features < 2:
            raise ArgumentError("point and feature counts must be powers of two (features >= 2)")
        n, m = _log2(n_points), _log2(n_features)
        return cls(tuple(range(n)), n, tuple(range(n + 1, n + 1 + m)), n + m + 1)

    @property
    def num_qubits(self) -> int:
        return len(self.counter) + len(self.features) + 2

    def counter_controls(self, n: int) -> list[tuple[int, int]]:
        return [(q, (n >> j) & 1) for j, q in enumerate(self.counter)]


def _check_inputs(points: Sequence[DataPoint], x_tilde) -> np.ndarray:
    if not points:
        raise ArgumentError("need at least one data point")
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x_tilde.size != points[0].features.size:
        raise ArgumentError("test point and data points differ in feature count")
    if abs(np.linalg.norm(x_tilde) - 1) > NORM_TOL:
        raise ArgumentError("test point must have unit norm")
    return x_tilde


def initial_state_vector(points: Sequence[DataPoint], x_tilde) -> PureState:
    """The classifier's initial state written down amplitude by amplitude."""
    x_tilde = _check_inputs(points, x_tilde)
    lay = Layout.for_sizes(len(points), x_tilde.size)
    amps = np.zeros(1 << lay.num_qubits, dtype=complex)
    scale = 1 / math.sqrt(2 * len(points))
    for n, p in enumerate(points):
        y = label_bit(p.label) << lay.label
        for i in range(x_tilde.size):
            base = n | (i << lay.features[0]) | y
            amps[base] += scale * x_tilde[i]
            amps[base | 1 << lay.ancilla] += scale * p.features[i]
    return PureState(amps)


def prepare_initial_state(points: Sequence[DataPoint], x_tilde) -> PureState:
    """Build the initial state with gates on a single device."""
    x_tilde = _check_inputs(points, x_tilde)
    lay = Layout.for_sizes(len(points), x_tilde.size)
    state = simcore.zero_state(lay.num_qubits)
    for q in (*lay.counter, lay.ancilla):
        state.apply(H, q)
    amplitude_encode(state, lay.features, x_tilde, [(lay.ancilla, 0)])
    for n, p in enumerate(points):
        amplitude_encode(state, lay.features, p.features, lay.counter_controls(n) + [(lay.ancilla, 1)])
    for n, p in enumerate(points):
        if p.label == -1:
            if lay.counter:
                state.apply_controlled(X, lay.counter_controls(n), lay.label)
            else:
                state.apply(X, lay.label)
    return state


# ---------------------------------------------------------------------------
# Distributed preparation
# ---------------------------------------------------------------------------


def nonlocal_controlled_ry(
    net: Network,
    controls: Sequence[tuple[Qubit, int]],
    target: Qubit,
    ancilla: Qubit,
    theta: float,
) -> None:
    """Controlled RY(theta) on a server target whose angle is known only to
    the party holding ``ancilla``.

    The party receives a copy of the control condition on its ancilla
    (one GHZ pair), then a transient copy of the basis-changed target (a
    second pair), applies controlled-RZ(theta) between the two copies plus
    the phase correction ``-theta`` on the condition copy, and returns both
    copies by X-basis measurement. The server only ever applies
    angle-independent gates.
    """
    party, server = ancilla.device, target.device
    net.apply(rx(np.pi / 2), target)

    net.nonlocal_cnot(list(controls), ancilla, net.create_ghz([server, party]))

    (copy,) = net.cat_entangle([target], net.create_ghz([server, party]))
    net.phase([ancilla, copy], 2 * theta)
    net.phase([ancilla], -theta)
    net.cat_disentangle([copy], [target])
    net.trace.nonlocal_cnots += 1

    net.apply(H, ancilla)
    m = net.measure(ancilla)
    net.send_bits(1)
    if m:
        net.apply(X, ancilla)
        net.phase(controls, np.pi)

    net.apply(rx(-np.pi / 2), target)


@dataclass
class DistributedPreparation:
    state: PureState
    trace: ProtocolTrace
    layout: Layout
    nonlocal_rotations: int = 0
    party_outcomes: list[int] = field(default_factory=list)


def distributed_prepare(
    data: PartitionedDataset,
    x_tilde,
    method: int = 2,
    rng: RandomSource | None = None,
) -> DistributedPreparation:
    """Prepare the classifier state on the server from party-held points.

    ``method`` 1 runs everything on the server (benchmark), 2 uses a fresh
    GHZ pair per non-local step, 3 reuses measured GHZ qubits. Labels are
    sent to the server as one classical bit per point.
    """
    if method not in (1, 2, 3):
        raise ArgumentError(f"classifier method must be 1, 2 or 3, got {method}")
    points = data.points
    x_tilde = _check_inputs(points, x_tilde)
    lay = Layout.for_sizes(len(points), x_tilde.size)
    rng = rng or RandomSource(0)

    monolithic = method == 1
    net = Network(0 if monolithic else data.parties, rng, reuse=method == 3)
    net.trace.monolithic = monolithic
    s = net.server
    regs = net.register(s, lay.num_qubits)
    counter = [regs[i] for i in lay.counter]
    anc = regs[lay.ancilla]
    feats = [regs[i] for i in lay.features]
    label = regs[lay.label]
    homes: list[Device] = [] if monolithic else net.parties
    party_anc = [net.allocate(d, f"a{k + 1}") for k, d in enumerate(homes)]

    for q in (*counter, anc):
        net.apply(H, q)
    for target, prefix, theta in encoding_rotations(x_tilde, feats):
        net.apply(ry(theta), target, [(anc, 0), *prefix])

    n_remote = 0
    for n, (p, owner) in enumerate(zip(points, data.owners())):
        ctrl = [(q, (n >> j) & 1) for j, q in enumerate(counter)] + [(anc, 1)]
        for target, prefix, theta in encoding_rotations(p.features, feats):
            if monolithic:
                net.apply(ry(theta), target, ctrl + prefix)
            else:
                a = party_anc[owner]
                nonlocal_controlled_ry(net, ctrl + prefix, target, a, theta)
                n_remote += 1

    if not monolithic:
        net.send_bits(len(points))
    for n, p in enumerate(points):
        if p.label == -1:
            net.apply(X, label, [(q, (n >> j) & 1) for j, q in enumerate(counter)])

    try:
        server_state = net.extract(regs)
    except PreconditionError as exc:
        raise PreconditionError(f"party qubits did not disentangle: {exc}") from exc
    outcomes = [net.state.definite_value(net.index(a)) for a in party_anc]
    return DistributedPreparation(server_state, net.trace, lay, n_remote, outcomes)


# ---------------------------------------------------------------------------
# Readout
# ---------------------------------------------------------------------------


@dataclass
class ClassifierOutcome:
    postselect_probability: float
    label_plus_probability: float
    predicted_label: int
    shots_used: int = 0
    shots_accepted: int = 0

    @property
    def label_minus_probability(self) -> float:
        return 1 - self.label_plus_probability


def _vote(p_plus: float, tol: float) -> int:
    if p_plus > 0.5 + tol:
        return 1
    if p_plus < 0.5 - tol:
        return -1
    return 0


def readout_distribution(state: PureState, layout: Layout) -> np.ndarray:
    """Joint probabilities ``P[ancilla, label_bit]`` after the Hadamard."""
    st = state.copy().apply(H, layout.ancilla)
    probs = st.probabilities().reshape((2,) * st.num_qubits)
    n = st.num_qubits
    keep = (n - 1 - layout.ancilla, n - 1 - layout.label)
    other = tuple(ax for ax in range(n) if ax not in keep)
    joint = probs.sum(axis=other)
    # remaining axes are in increasing axis order; label has the smaller axis
    return joint.T if keep[0] > keep[1] else joint


def classify(
    state: PureState,
    layout: Layout,
    mode: str = "exact",
    shots: int = 10_000,
    rng: RandomSource | None = None,
    max_shots: int | None = None,
) -> ClassifierOutcome:
    """Hadamard on the ancilla, post-select ancilla 0, read the label.

    In ``shots`` mode sampling continues until ``shots`` post-selected
    shots are accepted (or ``max_shots`` are used, default 1000x).
    ``predicted_label`` is 0 for an exact tie.
    """
    joint = readout_distribution(state, layout)
    p_acc = float(joint[0].sum())
    if mode == "exact":
        if p_acc < POSTSELECT_MIN:
            raise DegenerateInputError(f"post-selection probability {p_acc:.3g} is zero")
        p_plus = float(joint[0, 0] / p_acc)
        return ClassifierOutcome(p_acc, p_plus, _vote(p_plus, TIE_TOL))
    if mode != "shots":
        raise ArgumentError(f"unknown mode {mode!r}")
    if shots < 1:
        raise ArgumentError("shots must be positive")
    rng = rng or RandomSource(0)
    cdf = np.cumsum(joint.ravel())
    max_shots = max_shots or 1000 * shots
    used = accepted = plus = 0
    while accepted < shots:
        if used >= max_shots:
            raise DegenerateInputError(f"only {accepted} of {shots} shots accepted after {used}")
        batch = min(max(2 * (shots - accepted), 1024), max_shots - used)
        draws = np.searchsorted(cdf, rng.uniform(batch) * cdf[-1], side="right")
        for d in draws:
            used += 1
            if d < 2:
                accepted += 1
                plus += d == 0
                if accepted == shots:
                    break
    p_plus = plus / accepted
    return ClassifierOutcome(accepted / used, p_plus, _vote(p_plus, 0.0), used, accepted)


def kernel_oracle(points: Sequence[DataPoint], x_tilde, normalization: str = "printed") -> tuple[float, int]:
    """Classical kernel score and its sign (0 for a tie).

    ``"printed"`` weighs each point by ``1 - |x~ - x_i|^2 / (4N)``, the
    reference formula; ``"circuit"`` uses ``1 - |x~ - x_i|^2 / 4``,
    the weighting the Hadamard-test statistics are proportional to. They
    agree for balanced labels and can differ otherwise.
    """
    x_tilde = _check_inputs(points, x_tilde)
    if normalization == "printed":
        denom = 4 * len(points)
    elif normalization == "circuit":
        denom = 4
    else:
        raise ArgumentError(f"unknown normalization {normalization!r}")
    score = sum(p.label * (1 - float(np.sum((x_tilde - p.features) ** 2)) / denom) for p in points)
    if abs(score) <= TIE_TOL:
        return score, 0
    return score, 1 if score > 0 else -1


# ---------------------------------------------------------------------------
# Resources
# ---------------------------------------------------------------------------


def classifier_resources(
    points_per_party: int, parties: int, features: int, method: int, source: str = "printed"
) -> ResourceEstimate:
    """Qubit and GHZ-pair counts for preparing the classifier state.

    ``source="printed"`` gives the reference closed forms (one GHZ
    pair per rotation); ``source="protocol"`` gives what
    :func:`distributed_prepare` consumes: two pairs per rotation, one
    ancilla per party, and in reuse mode one pooled GHZ qubit per device.
    """
    n, k, m = points_per_party, parties, features
    if not (_is_pow2(n * k) and _is_pow2(m)):
        raise ArgumentError("points and features must be powers of two")
    server = _log2(k * n) + _log2(m) + 2
    rotations = n * k * (m - 1)
    if method == 1:
        return ResourceEstimate(server, {}, 0)
    if method not in (2, 3):
        raise ArgumentError(f"classifier method must be 1, 2 or 3, got {method}")
    if source == "printed":
        extra = 2 * rotations if method == 2 else 2
        return ResourceEstimate(server + extra, {2: rotations}, 2 * rotations)
    if source != "protocol":
        raise ArgumentError(f"unknown source {source!r}")
    extra = 4 * rotations if method == 2 else 1 + k
    return ResourceEstimate(server + k + extra, {2: 2 * rotations}, 2 * rotations)
