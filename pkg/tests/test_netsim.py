import numpy as np
import pytest

from distqml import simcore
from distqml.errors import LocalityViolation, ResourceError
from distqml.netsim import Network, ResourceEstimate
from distqml.simcore import H, X, rz

from conftest import random_qubit, random_state


def net_with_state(state, split, rng):
    """Network whose first ``split`` qubits are on the server and the rest on party 1."""
    net = Network(1, rng)
    qs = net.register(net.server, split) + net.register(net.parties[0], state.num_qubits - split)
    net.state = state.copy()
    return net, qs


def test_device_names():
    net = Network(2)
    assert [d.name for d in net.devices] == ["server", "party1", "party2"]


def test_cross_device_gate_is_rejected():
    net = Network(1)
    a = net.allocate(net.server)
    b = net.allocate(net.parties[0])
    with pytest.raises(LocalityViolation):
        net.cnot(a, b)


@pytest.mark.parametrize("branch", range(4))
def test_nonlocal_cnot_every_branch(branch, gen):
    psi = random_state(4, gen)
    rng = simcore.ForcedOutcomes([branch & 1, branch >> 1])
    net, qs = net_with_state(psi, 2, rng)
    net.nonlocal_cnot(qs[1], qs[3], net.create_ghz([net.server, net.parties[0]]))
    expected = psi.copy().cnot(1, 3)
    assert net.state.num_qubits == 4
    assert simcore.fidelity(net.state, expected) == pytest.approx(1, abs=1e-12)
    assert net.trace.classical_bits_sent == 2
    assert net.trace.ghz_created[2] == 1
    assert net.trace.nonlocal_cnots == 1


def test_nonlocal_cnot_negative_polarity(gen):
    psi = random_state(3, gen)
    net, qs = net_with_state(psi, 2, simcore.RandomSource(3))
    net.nonlocal_cnot([(qs[0], 0), (qs[1], 1)], qs[2], net.create_ghz([net.server, net.parties[0]]))
    expected = psi.copy().apply_controlled(X, [(0, 0), (1, 1)], 2)
    assert simcore.fidelity(net.state, expected) == pytest.approx(1, abs=1e-12)


def test_nonlocal_cnot_same_device_rejected():
    net = Network(1)
    a, b = net.register(net.server, 2)
    with pytest.raises(LocalityViolation):
        net.nonlocal_cnot(a, b, net.create_ghz([net.server, net.parties[0]]))


def test_spent_ghz_cannot_be_reused():
    net = Network(1)
    a = net.allocate(net.server)
    b = net.allocate(net.parties[0])
    ghz = net.create_ghz([net.server, net.parties[0]])
    net.nonlocal_cnot(a, b, ghz)
    with pytest.raises(ResourceError):
        net.nonlocal_cnot(a, b, ghz)


def test_ghz_needs_distinct_devices():
    net = Network(1)
    with pytest.raises(ResourceError):
        net.create_ghz([net.server, net.server])
    with pytest.raises(ResourceError):
        net.create_ghz([net.server])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_ghz_state(k):
    net = Network(k - 1)
    ghz = net.create_ghz(net.devices)
    amps = net.state.amplitudes
    assert abs(amps[0]) ** 2 == pytest.approx(0.5)
    assert abs(amps[-1]) ** 2 == pytest.approx(0.5)
    assert ghz.size == k


@pytest.mark.parametrize("k", [2, 3])
def test_multi_target_cnot_all_branches(k, gen):
    n_targets = k
    for branch in range(1 << (n_targets + 1)):
        psi = random_state(1 + n_targets, gen)
        outcomes = [(branch >> i) & 1 for i in range(n_targets + 1)]
        net = Network(n_targets, simcore.ForcedOutcomes(outcomes))
        c = net.allocate(net.server)
        ts = [net.allocate(d) for d in net.parties]
        net.state = psi.copy()
        net.nonlocal_cnot_multi(c, ts, net.create_ghz(net.devices))
        expected = psi.copy()
        for t in range(1, n_targets + 1):
            expected.cnot(0, t)
        assert simcore.fidelity(net.state, expected) == pytest.approx(1, abs=1e-12)
        assert net.trace.classical_bits_sent == n_targets + 1


@pytest.mark.parametrize("branch", range(4))
def test_teleport_every_branch(branch, gen):
    phi = random_qubit(gen)
    rest = random_state(1, gen)
    psi = simcore.PureState(np.kron(rest.amplitudes, phi))  # qubit 0 = phi
    net = Network(1, simcore.ForcedOutcomes([branch & 1, branch >> 1]))
    net.register(net.server, 2)
    net.state = psi
    src = net.live_qubits[0]
    dest = net.teleport(src, net.create_ghz([net.server, net.parties[0]]))
    assert dest.device == net.parties[0]
    assert src not in net.live_qubits
    out = net.extract([dest]).amplitudes
    assert abs(np.vdot(out, phi)) ** 2 == pytest.approx(1, abs=1e-12)
    assert net.trace.classical_bits_sent == 2


def test_phase_on_any_ghz_qubit_is_global():
    theta = 0.81
    results = []
    for i in range(3):
        net = Network(2)
        ghz = net.create_ghz(net.devices)
        net.apply(rz(theta), ghz.qubits[i])
        results.append(net.state.amplitudes.copy())
    for r in results[1:]:
        np.testing.assert_allclose(r, results[0], atol=1e-12)


def test_reuse_pools_qubits():
    net = Network(1, reuse=True)
    a = net.allocate(net.server)
    b = net.allocate(net.parties[0])
    for _ in range(5):
        net.nonlocal_cnot(a, b, net.create_ghz([net.server, net.parties[0]]))
    assert net.trace.qubits_allocated == 4
    fresh = Network(1)
    a = fresh.allocate(fresh.server)
    b = fresh.allocate(fresh.parties[0])
    for _ in range(5):
        fresh.nonlocal_cnot(a, b, fresh.create_ghz([fresh.server, fresh.parties[0]]))
    assert fresh.trace.qubits_allocated == 12
    assert fresh.state.num_qubits == 2


def test_trace_record_is_flat():
    net = Network(2)
    net.create_ghz(net.devices)
    net.create_ghz(net.devices[:2])
    rec = net.trace.as_record()
    assert rec["ghz_3"] == 1 and rec["ghz_2"] == 1 and rec["ghz_total"] == 2
    assert all(not isinstance(v, (dict, list)) for v in rec.values())
    est = ResourceEstimate.from_trace(net.trace)
    assert est.ghz_total() == 2
    assert est.total_qubits == 5


def test_measure_runs_through_rng():
    net = Network(0, simcore.ForcedOutcomes([1]))
    q = net.allocate(net.server)
    net.apply(H, q)
    assert net.measure(q) == 1
