"""Logical devices, locality enforcement and GHZ-mediated protocols.

A :class:`Network` owns a single global :class:`~distqml.simcore.PureState`
and a list of live :class:`Qubit` handles, each homed on one device. Every
multi-qubit gate goes through :meth:`Network.apply`, which refuses operands
on different devices. Cross-device interaction happens only through GHZ
resources (created by an ideal network primitive) plus local gates,
measurements and counted classical bits.

Measured-out protocol qubits are in a product state, so they are dropped
from the dense vector (or, in reuse mode, reset to ``|0>`` and pooled on
their device). The logical allocation count is kept in the trace either way.
"""

from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import simcore
from .errors import ArgumentError, LocalityViolation, ResourceError
from .simcore import Gate, H, PureState, RandomSource, X, Z

SERVER = "server"
PARTY = "party"


@dataclass(frozen=True)
class Device:
    role: str
    index: int = 0

    @property
    def name(self) -> str:
        return SERVER if self.role == SERVER else f"party{self.index}"

    def __str__(self) -> str:
        return self.name


@dataclass(eq=False)
class Qubit:
    """Handle on one live qubit; identity-compared."""

    uid: int
    device: Device
    label: str = ""

    def __repr__(self) -> str:
        return f"Qubit({self.label or self.uid}@{self.device})"


QControl = tuple[Qubit, int]


@dataclass(eq=False)
class GhzResource:
    qubits: list[Qubit]
    spent: bool = False

    @property
    def size(self) -> int:
        return len(self.qubits)

    def on(self, device: Device) -> Qubit:
        for q in self.qubits:
            if q.device == device:
                return q
        raise LocalityViolation(f"GHZ resource has no qubit on {device}")


@dataclass
class ProtocolTrace:
    ghz_created: Counter = field(default_factory=Counter)
    classical_bits_sent: int = 0
    local_gates: int = 0
    nonlocal_cnots: int = 0
    qubits_allocated: int = 0
    measurements: int = 0
    monolithic: bool = False

    def ghz_total(self) -> int:
        return sum(self.ghz_created.values())

    def as_record(self) -> dict[str, int | bool]:
        """Flat key/value view (``ghz_<size>`` keys in ascending size)."""
        rec: dict[str, int | bool] = {
            "qubits_allocated": self.qubits_allocated,
            "local_gates": self.local_gates,
            "nonlocal_cnots": self.nonlocal_cnots,
            "classical_bits_sent": self.classical_bits_sent,
            "measurements": self.measurements,
            "ghz_total": self.ghz_total(),
        }
        for size in sorted(self.ghz_created):
            rec[f"ghz_{size}"] = self.ghz_created[size]
        rec["monolithic"] = self.monolithic
        return rec


@dataclass(frozen=True)
class ResourceEstimate:
    """Qubit and GHZ requirements of one scenario (closed form or measured)."""

    total_qubits: int
    ghz_counts: dict[int, int]
    nonlocal_cnots: int

    @classmethod
    def from_trace(cls, trace: ProtocolTrace) -> ResourceEstimate:
        return cls(trace.qubits_allocated, dict(sorted(trace.ghz_created.items())), trace.nonlocal_cnots)

    def ghz_total(self) -> int:
        return sum(self.ghz_counts.values())


def _as_controls(controls: Iterable[Qubit | QControl]) -> list[QControl]:
    return [c if isinstance(c, tuple) else (c, 1) for c in controls]


class Network:
    """A server plus ``n_parties`` parties sharing one simulated state."""

    def __init__(self, n_parties: int, rng: RandomSource | None = None, reuse: bool = False):
        if n_parties < 0:
            raise ArgumentError("number of parties must be non-negative")
        self.server = Device(SERVER)
        self.parties = [Device(PARTY, k) for k in range(1, n_parties + 1)]
        self.rng = rng if rng is not None else RandomSource(0)
        self.reuse = reuse
        self.trace = ProtocolTrace()
        self.state: PureState | None = None
        self._live: list[Qubit] = []
        self._pool: dict[Device, list[Qubit]] = {}
        self._uids = itertools.count()

    @property
    def devices(self) -> list[Device]:
        return [self.server, *self.parties]

    @property
    def live_qubits(self) -> list[Qubit]:
        return list(self._live)

    def index(self, q: Qubit) -> int:
        try:
            return self._live.index(q)
        except ValueError:
            raise ResourceError(f"{q!r} is not live") from None

    def _check_device(self, device: Device) -> None:
        if device not in self.devices:
            raise ArgumentError(f"unknown device {device}")

    # -- allocation ---------------------------------------------------------

    def allocate(self, device: Device, label: str = "") -> Qubit:
        """New qubit in ``|0>`` on ``device``; reuses a pooled one if any."""
        self._check_device(device)
        pool = self._pool.get(device)
        if pool:
            # pooled qubits never left the vector; they were reset to |0>
            q = pool.pop()
            q.label = label
            return q
        if self.state is None:
            self.state = simcore.zero_state(1)
        else:
            self.state.add_qubit()
        q = Qubit(next(self._uids), device, label)
        self._live.append(q)
        self.trace.qubits_allocated += 1
        return q

    def register(self, device: Device, size: int, label: str = "") -> list[Qubit]:
        return [self.allocate(device, f"{label}{j}") for j in range(size)]

    def retire(self, q: Qubit) -> None:
        """Dispose of a measured, definite-valued qubit."""
        i = self.index(q)
        if self.reuse:
            self.state.reset(i)
            self._pool.setdefault(q.device, []).append(q)
        else:
            self.state.remove_qubit(i)
            self._live.pop(i)

    # -- local operations ---------------------------------------------------

    def _home(self, qubits: Sequence[Qubit]) -> Device:
        devices = {q.device for q in qubits}
        if len(devices) != 1:
            names = ", ".join(sorted(str(d) for d in devices))
            raise LocalityViolation(f"operands span devices {names}")
        return devices.pop()

    def apply(
        self, gate: Gate, target: Qubit, controls: Iterable[Qubit | QControl] = ()
    ) -> None:
        ctrl = _as_controls(controls)
        self._home([target, *(q for q, _ in ctrl)])
        self.state.apply_controlled(
            gate, [(self.index(q), pol) for q, pol in ctrl], self.index(target)
        )
        self.trace.local_gates += 1

    def cnot(self, control: Qubit | QControl, target: Qubit) -> None:
        self.apply(X, target, [control])

    def phase(self, controls: Iterable[Qubit | QControl], angle: float) -> None:
        """Local diagonal phase ``exp(i*angle)`` on the selected subspace."""
        ctrl = _as_controls(controls)
        self._home([q for q, _ in ctrl])
        self.state.phase([(self.index(q), pol) for q, pol in ctrl], angle)
        self.trace.local_gates += 1

    def measure(self, q: Qubit) -> int:
        rec = self.state.measure(self.index(q), self.rng)
        self.trace.measurements += 1
        return rec.outcome

    def run_local(self, qubits: Sequence[Qubit], circuit, n_gates: int = 1) -> None:
        """Run ``circuit(state, indices)`` on qubits that share one device."""
        self._home(list(qubits))
        circuit(self.state, [self.index(q) for q in qubits])
        self.trace.local_gates += n_gates

    def extract(self, qubits: Sequence[Qubit]) -> PureState:
        """Pure state of ``qubits`` (see :func:`distqml.simcore.extract`)."""
        return simcore.extract(self.state, [self.index(q) for q in qubits])

    def send_bits(self, n: int = 1) -> None:
        self.trace.classical_bits_sent += n

    # -- GHZ resources ------------------------------------------------------

    def create_ghz(self, devices: Sequence[Device]) -> GhzResource:
        """Ideal network primitive: one fresh qubit per device, jointly in
        ``(|0...0> + |1...1>)/sqrt(2)``."""
        if len(devices) < 2:
            raise ResourceError("a GHZ resource needs at least two devices")
        if len(set(devices)) != len(devices):
            raise ResourceError("GHZ qubits must live on pairwise distinct devices")
        qubits = [self.allocate(d, "ghz") for d in devices]
        idx = [self.index(q) for q in qubits]
        self.state.apply(H, idx[0])
        for i in idx[1:]:
            self.state.cnot(idx[0], i)
        self.trace.ghz_created[len(devices)] += 1
        return GhzResource(qubits)

    def _consume(self, ghz: GhzResource, size: int | None = None) -> None:
        if ghz.spent:
            raise ResourceError("GHZ resource already spent")
        if size is not None and ghz.size != size:
            raise ResourceError(f"expected a GHZ resource of size {size}, got {ghz.size}")
        ghz.spent = True

    # -- protocols ----------------------------------------------------------

    def cat_entangle(
        self, controls: Sequence[Qubit | QControl], ghz: GhzResource
    ) -> list[Qubit]:
        """Copy the boolean value ``AND(controls)`` onto the remote GHZ
        qubits, leaving them entangled with the controlling subspace.

        Local XOR onto the home GHZ qubit, measure it, broadcast the
        outcome (counted as one bit), each remote side applies a
        conditional X. Returns the remote copies in ``ghz`` order.
        """
        ctrl = _as_controls(controls)
        home = self._home([q for q, _ in ctrl])
        self._consume(ghz)
        local = ghz.on(home)
        self.apply(X, local, ctrl)
        m = self.measure(local)
        self.send_bits(1)
        self.retire(local)
        copies = [q for q in ghz.qubits if q is not local]
        for q in copies:
            if m:
                self.apply(X, q)
        return copies

    def cat_disentangle(self, copies: Sequence[Qubit], controls: Sequence[Qubit | QControl]) -> None:
        """Undo :meth:`cat_entangle`: X-basis measure every copy, send the
        bits home, and fix the sign on the controlling subspace."""
        ctrl = _as_controls(controls)
        parity = 0
        for q in copies:
            self.apply(H, q)
            parity ^= self.measure(q)
            self.send_bits(1)
            self.retire(q)
        if parity:
            self.phase(ctrl, np.pi)

    def nonlocal_cnot(
        self,
        control: Qubit | QControl | Sequence[QControl],
        target: Qubit,
        ghz: GhzResource,
    ) -> None:
        """CNOT between qubits on different devices using one GHZ pair and
        two classical bits. ``control`` may be a list of (qubit, polarity)
        pairs on one device, giving a remote multi-controlled X."""
        ctrl = _as_controls(control if isinstance(control, list) else [control])
        chome = self._home([q for q, _ in ctrl])
        if ghz.size != 2:
            raise ResourceError(f"non-local CNOT needs a GHZ pair, got size {ghz.size}")
        if target.device == chome:
            raise LocalityViolation("non-local CNOT operands share a device; use a local CNOT")
        remote = ghz.on(target.device)
        ghz.on(chome)
        (copy,) = self.cat_entangle(ctrl, ghz)
        assert copy is remote
        self.cnot(copy, target)
        self.cat_disentangle([copy], ctrl)
        self.trace.nonlocal_cnots += 1

    def nonlocal_cnot_multi(self, control: Qubit, targets: Sequence[Qubit], ghz: GhzResource) -> None:
        """CNOT from ``control`` onto every target, each on its own remote
        device, with one GHZ resource of size ``1 + len(targets)``.

        Classical cost: one broadcast bit out plus one bit back per target.
        """
        if ghz.size != 1 + len(targets):
            raise ResourceError(
                f"{len(targets)} targets need a GHZ resource of size {len(targets) + 1}, got {ghz.size}"
            )
        devs = [t.device for t in targets]
        if len(set(devs)) != len(devs):
            raise LocalityViolation("targets of a multi-target non-local CNOT must be on distinct devices")
        if control.device in devs:
            raise LocalityViolation("a target shares the control's device")
        ghz.on(control.device)
        remote = {t.device: ghz.on(t.device) for t in targets}
        copies = self.cat_entangle([control], ghz)
        for t in targets:
            self.cnot(remote[t.device], t)
        self.cat_disentangle(copies, [control])
        self.trace.nonlocal_cnots += 1

    def teleport(self, source: Qubit, ghz: GhzResource) -> Qubit:
        """Move the state of ``source`` onto the far end of a GHZ pair.

        The source and its co-located GHZ qubit are measured (two bits
        sent) and retired; the returned qubit holds the state.
        """
        self._consume(ghz, 2)
        local = ghz.on(source.device)
        (dest,) = [q for q in ghz.qubits if q is not local]
        self.cnot(source, local)
        self.apply(H, source)
        m_src = self.measure(source)
        m_loc = self.measure(local)
        self.send_bits(2)
        self.retire(source)
        self.retire(local)
        if m_loc:
            self.apply(X, dest)
        if m_src:
            self.apply(Z, dest)
        return dest
