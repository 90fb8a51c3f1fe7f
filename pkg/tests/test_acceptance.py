"""End-to-end acceptance checks, one test per criterion.

Each test prints (and records for the terminal summary) a single
``criterion N PASS|FAIL`` line before asserting.
"""

import itertools
import time

import numpy as np
import pytest

from distqml import adder, simcore
from distqml import classifier as clf
from distqml.classifier import DataPoint, PartitionedDataset
from distqml.netsim import Network, ResourceEstimate
from distqml.simcore import rz

from conftest import ACCEPTANCE_LINES, random_qubit, random_state


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def unit(v):
    return v / np.linalg.norm(v)


def random_points(gen, count, features):
    return [DataPoint(unit(gen.normal(size=features)), int(gen.choice([-1, 1]))) for _ in range(count)]


def test_criterion_01_nonlocal_cnot_equivalence():
    gen = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 1.0
    runs = 0
    for _ in range(100):
        psi = random_state(6, gen)
        c, t = int(gen.integers(3)), 3 + int(gen.integers(3))
        expected = psi.copy().cnot(c, t)
        for branch in range(4):
            net = Network(1, simcore.ForcedOutcomes([branch & 1, branch >> 1]))
            qs = net.register(net.server, 3) + net.register(net.parties[0], 3)
            net.state = psi.copy()
            net.nonlocal_cnot(qs[c], qs[t], net.create_ghz([net.server, net.parties[0]]))
            ok_phase = simcore.equal_up_to_global_phase(net.state, expected, 1e-10)
            worst = min(worst, simcore.fidelity(net.state, expected) if ok_phase else 0.0)
            runs += 1
    elapsed = time.perf_counter() - start
    ok = worst >= 1 - 1e-10 and elapsed < 10
    report(1, ok, f"{runs} runs, min fidelity {worst:.12g}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_teleportation():
    gen = np.random.default_rng(202)
    worst = 1.0
    for _ in range(100):
        phi = random_qubit(gen)
        for branch in range(4):
            net = Network(1, simcore.ForcedOutcomes([branch & 1, branch >> 1]))
            src = net.allocate(net.server)
            net.state = simcore.PureState(phi.copy())
            dest = net.teleport(src, net.create_ghz([net.server, net.parties[0]]))
            out = net.extract([dest]).amplitudes
            worst = min(worst, abs(np.vdot(phi, out)) ** 2)
    ok = worst >= 1 - 1e-10
    report(2, ok, f"400 branches, min fidelity {worst:.12g}")
    assert ok


def test_criterion_03_ghz_phase_globality():
    gen = np.random.default_rng(303)
    worst = 0.0
    for k in (2, 3, 4):
        for theta in gen.uniform(-2 * np.pi, 2 * np.pi, size=20):
            amps = []
            for i in range(k):
                net = Network(k - 1)
                ghz = net.create_ghz(net.devices)
                net.apply(rz(theta), ghz.qubits[i])
                amps.append(net.state.amplitudes.copy())
            worst = max(worst, max(np.max(np.abs(a - amps[0])) for a in amps))
    ok = worst <= 1e-12
    report(3, ok, f"k in 2..4, 20 angles, max amplitude gap {worst:.3g}")
    assert ok


def test_criterion_04_adder_correctness():
    start = time.perf_counter()
    failures = []
    cases = 0

    def check(xs, bits, b, method, seed):
        nonlocal cases
        cfg = adder.AdderConfig(bits, len(xs), method, b)
        res = adder.distributed_add(xs, cfg, simcore.RandomSource(seed))
        cases += 1
        if res.sum != adder.expected_sum(xs, bits, b) or any(res.party_outcomes):
            failures.append((xs, bits, b, method, res.sum, res.party_outcomes))

    # N=2, K=2: 4 x 4 party inputs times 4 server inputs (b = 0 among them)
    for x1, x2, b in itertools.product(range(4), repeat=3):
        for method in (2, 3, 4):
            check([x1, x2], 2, b, method, seed=x1 + 4 * x2 + 16 * b)
    gen = np.random.default_rng(404)
    for i in range(200):
        bits, k = int(gen.integers(1, 4)), int(gen.integers(1, 4))
        xs = [int(v) for v in gen.integers(0, 1 << bits, size=k)]
        b = int(gen.integers(0, 1 << bits))
        for method in (2, 3, 4):
            check(xs, bits, b, method, seed=i)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    report(4, ok, f"{cases} runs (64 exhaustive combos + 200 random, methods 2-4), "
                  f"{len(failures)} wrong, {elapsed:.1f} s")
    assert ok, failures[:5]


def test_criterion_05_adder_privacy():
    gen = np.random.default_rng(505)
    worst = 0.0
    triples = 0
    while triples < 24:
        bits, k = int(gen.integers(2, 4)), int(gen.integers(2, 4))
        mod = 1 << bits
        a = [int(v) for v in gen.integers(0, mod, size=k)]
        perm = [a[i] for i in gen.permutation(k)]
        other = [int(v) for v in gen.integers(0, mod, size=k - 1)]
        other.append((sum(a) - sum(other)) % mod)
        if perm == a and other == a:
            continue
        method = (2, 3, 4)[triples % 3]
        states = [
            adder.distributed_add(xs, adder.AdderConfig(bits, k, method), simcore.RandomSource(s)).pre_iqft_state
            for s, xs in enumerate((a, perm, other))
        ]
        worst = max(worst, *(np.max(np.abs(s.amplitudes - states[0].amplitudes)) for s in states[1:]))
        triples += 1
    ok = worst <= 1e-12
    report(5, ok, f"{triples} equal-sum triples, max amplitude gap {worst:.3g}")
    assert ok


def test_criterion_06_table_one():
    rows_ok = True
    for n, k in itertools.product(range(1, 7), range(1, 7)):
        expected = {
            1: (n * (k + 1), {}),
            2: (n * (5 * k + 1), {2: 2 * n * k}),
            3: (n * (3 * k + 3), {k + 1: 2 * n * n}),
            4: ((n + 1) * (k + 1), {k + 1: 2 * n * n}),
        }
        for method, (qubits, ghz) in expected.items():
            est = adder.adder_resources(n, k, method, "printed")
            rows_ok &= est.total_qubits == qubits and est.ghz_counts == ghz
    instr_ok = True
    notes = []
    for n, k in [(1, 1), (2, 2), (3, 2), (2, 3), (3, 3)]:
        for method in (2, 3, 4):
            trace = adder.distributed_add([0] * k, adder.AdderConfig(n, k, method)).trace
            want = {2: 2 * n * k} if method == 2 else {k + 1: 2 * n}
            instr_ok &= dict(trace.ghz_created) == want
            printed = adder.adder_resources(n, k, method, "printed").ghz_counts
            if method != 2 and printed != dict(trace.ghz_created) and n == 3 and k == 2:
                notes.append(f"method {method} N=3 K=2: printed {printed} vs instrumented {dict(trace.ghz_created)}")
    ok = rows_ok and instr_ok
    report(6, ok, f"printed rows {'match' if rows_ok else 'MISMATCH'}, instrumented 2NK / 2N "
                  f"{'match' if instr_ok else 'MISMATCH'}; discrepancy: {'; '.join(notes)}")
    assert ok


def test_criterion_07_controlled_ry_identity():
    gen = np.random.default_rng(707)
    worst_gap, worst_anc = 0.0, 0.0
    for theta in gen.uniform(-2 * np.pi, 2 * np.pi, size=50):
        psi = simcore.PureState(np.kron([1, 0], random_state(2, gen).amplitudes))
        direct = psi.copy().apply_controlled(simcore.ry(theta), [0], 1)
        built = clf.controlled_ry_via_rz(psi.copy(), 0, 1, 2, theta)
        worst_anc = max(worst_anc, built.prob(2, 1))
        phase = np.vdot(direct.amplitudes, built.amplitudes)
        phase /= abs(phase)
        worst_gap = max(worst_gap, np.max(np.abs(built.amplitudes - phase * direct.amplitudes)))
    ok = worst_gap <= 1e-10 and worst_anc <= 1e-20
    report(7, ok, f"50 angles, max amplitude gap {worst_gap:.3g}, max ancilla |1> weight {worst_anc:.3g}")
    assert ok


def test_criterion_08_encoding_round_trip():
    gen = np.random.default_rng(808)
    worst = 0.0
    for m in (2, 4, 8):
        n = int(np.log2(m))
        for _ in range(100):
            x = unit(gen.normal(size=m))
            s = clf.amplitude_encode(simcore.zero_state(n), list(range(n)), x)
            worst = max(worst, np.max(np.abs(s.amplitudes - x)))
    ok = worst <= 1e-10
    report(8, ok, f"300 vectors, max amplitude error {worst:.3g}")
    assert ok


def test_criterion_09_classifier_equivalence():
    start = time.perf_counter()
    gen = np.random.default_rng(909)
    scenarios = [(2, 2, 2, "two parties, two points each")]
    for n, m, k in itertools.product((2, 4), (2, 4), (1, 2, 4)):
        scenarios += [(k, n, m, "random")] * 5
    min_fid = 1.0
    label_checked = label_mismatch = circuit_mismatch = 0
    mismatches = []
    for i, (k, n, m, _) in enumerate(scenarios):
        pts = random_points(gen, k * n, m)
        x_tilde = unit(gen.normal(size=m))
        data = PartitionedDataset.split(pts, k)
        method = 2 + i % 2
        prep = clf.distributed_prepare(data, x_tilde, method, simcore.RandomSource(i))
        local = clf.prepare_initial_state(pts, x_tilde)
        min_fid = min(min_fid, simcore.fidelity(prep.state, local))
        out = clf.classify(prep.state, prep.layout)
        score, label = clf.kernel_oracle(pts, x_tilde)
        circuit_score, circuit_label = clf.kernel_oracle(pts, x_tilde, "circuit")
        if abs(circuit_score) > 1e-9 and out.predicted_label != circuit_label:
            circuit_mismatch += 1
        if abs(score) > 1e-9:
            label_checked += 1
            if out.predicted_label != label:
                label_mismatch += 1
                mismatches.append((i, k, n, m, round(score, 6), label, out.predicted_label))
    elapsed = time.perf_counter() - start
    fid_ok = min_fid >= 1 - 1e-10
    ok = fid_ok and label_mismatch == 0 and elapsed < 120
    report(9, ok, f"{len(scenarios)} datasets, min fidelity {min_fid:.12g} ({'ok' if fid_ok else 'LOW'}); "
                  f"label vs 1/(4N) kernel: {label_mismatch}/{label_checked} disagree "
                  f"(vs 1/4 kernel: {circuit_mismatch}); {elapsed:.1f} s")
    assert fid_ok, "distributed preparation differs from monolithic"
    assert elapsed < 120
    assert label_mismatch == 0, f"circuit label differs from the 1/(4N) kernel sign: {mismatches}"


def test_criterion_10_table_two():
    formulas_ok = True
    for n, k, m in itertools.product((1, 2, 4, 8), (1, 2, 4), (2, 4, 8)):
        if not (n * k) & (n * k - 1) == 0:
            continue
        base = int(np.log2(k * n) + np.log2(m))
        rot = n * k * (m - 1)
        formulas_ok &= clf.classifier_resources(n, k, m, 1).total_qubits == base + 2
        m2 = clf.classifier_resources(n, k, m, 2)
        m3 = clf.classifier_resources(n, k, m, 3)
        formulas_ok &= m2.total_qubits == base + 2 + 2 * rot and m2.ghz_counts == {2: rot}
        formulas_ok &= m3.total_qubits == base + 4 and m3.ghz_counts == {2: rot}
    gen = np.random.default_rng(1010)
    factors = set()
    for k, n, m in [(2, 2, 2), (1, 2, 4), (2, 2, 4), (4, 1, 2)]:
        data = PartitionedDataset.split(random_points(gen, k * n, m), k)
        for method in (2, 3):
            trace = clf.distributed_prepare(data, unit(gen.normal(size=m)), method).trace
            printed = clf.classifier_resources(n, k, m, method).ghz_counts[2]
            factors.add(trace.ghz_created[2] / printed)
    flagged = factors == {2.0}
    ok = formulas_ok and flagged
    report(10, ok, f"printed formulas {'match' if formulas_ok else 'MISMATCH'}; "
                   f"instrumented/printed GHZ2 ratio {sorted(factors)} (discrepancy flagged)")
    assert ok


def test_criterion_11_shots_calibration():
    gen = np.random.default_rng(1111)
    shots = 10_000
    worst = 0.0
    outside = 0
    for seed in range(10):
        k, n, m = 2, 2, 2 if seed % 2 else 4
        pts = random_points(gen, k * n, m)
        x_tilde = unit(gen.normal(size=m))
        state = clf.prepare_initial_state(pts, x_tilde)
        lay = clf.Layout.for_sizes(k * n, m)
        exact = clf.classify(state, lay)
        sampled = clf.classify(state, lay, "shots", shots, simcore.RandomSource(seed))
        p = exact.label_plus_probability
        sigma = np.sqrt(p * (1 - p) / shots)
        z = abs(sampled.label_plus_probability - p) / sigma if sigma > 0 else 0.0
        worst = max(worst, z)
        outside += z > 3
        assert sampled.shots_accepted == shots
    ok = outside == 0
    report(11, ok, f"10 datasets at {shots} accepted shots, max deviation {worst:.2f} sigma")
    assert ok
