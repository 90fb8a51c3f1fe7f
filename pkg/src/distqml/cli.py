"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 dataset parse error, 4 capacity,
5 verification failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adder, classifier, simcore
from .errors import ArgumentError, CapacityError, DatasetParseError, DistQMLError, VerificationError
from .netsim import ResourceEstimate

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PARSE, EXIT_CAPACITY, EXIT_VERIFY = 0, 1, 2, 3, 4, 5
SEED_ENV = "DISTQML_SEED"
FIDELITY_TOL = 1e-10


class UsageError(DistQMLError):
    pass


@dataclass
class ScenarioConfig:
    kind: str
    method: int
    seed: int = 0
    bits: int = 0
    inputs: list[int] = field(default_factory=list)
    server_input: int = 0
    dataset: str = ""
    test_point: list[float] = field(default_factory=list)
    mode: str = "exact"
    shots: int = 10_000
    verify: bool = True

    def validate(self) -> None:
        if self.kind == "adder":
            if self.bits < 1:
                raise UsageError("--bits must be >= 1")
            if not self.inputs:
                raise UsageError("--inputs needs at least one party input")
            if self.method not in (1, 2, 3, 4):
                raise UsageError("adder --method must be 1..4")
            for x in [*self.inputs, self.server_input]:
                if not 0 <= x < 1 << self.bits:
                    raise UsageError(f"input {x} does not fit in {self.bits} bits")
        elif self.kind == "classifier":
            if not self.dataset:
                raise UsageError("--dataset is required")
            if not self.test_point:
                raise UsageError("--test-point is required")
            if self.method not in (1, 2, 3):
                raise UsageError("classifier --method must be 1..3")
            if self.mode not in ("exact", "shots"):
                raise UsageError("--mode must be exact or shots")
            if self.shots < 1:
                raise UsageError("--shots must be positive")
        else:
            raise UsageError(f"unknown scenario kind {self.kind!r}")

    @classmethod
    def from_mapping(cls, data: dict) -> ScenarioConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
        if "kind" not in data or "method" not in data:
            raise UsageError("config needs 'kind' and 'method'")
        return cls(**data)


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def _num(x):
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.12g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple)):
            flat[name] = " ".join(str(_num(v)) for v in value)
        else:
            flat[name] = _num(value)
    return flat


def _estimate_record(est: ResourceEstimate) -> dict:
    rec = {"total_qubits": est.total_qubits, "nonlocal_cnots": est.nonlocal_cnots}
    for size, count in sorted(est.ghz_counts.items()):
        rec[f"ghz_{size}"] = count
    return rec


def render(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(record), indent=2) + "\n"
    flat = _flatten(record)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(flat.keys())
        writer.writerow(_fmt_value(v) for v in flat.values())
        return buf.getvalue()
    width = max(len(k) for k in flat)
    return "".join(f"{k:<{width}}  {_fmt_value(v)}\n" for k, v in flat.items())


def render_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(rows), indent=2) + "\n"
    flat = [_flatten(r) for r in rows]
    keys: list[str] = []
    for r in flat:
        keys.extend(k for k in r if k not in keys)
    table = [[_fmt_value(r.get(k, "")) for k in keys] for r in flat]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        writer.writerows(table)
        return buf.getvalue()
    widths = [max(len(k), *(len(row[i]) for row in table)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in table]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _num(obj)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_add(cfg: ScenarioConfig) -> tuple[dict, bool]:
    """Run a distributed addition; returns the report and a pass flag."""
    k = len(cfg.inputs)
    conf = adder.AdderConfig(cfg.bits, k, adder.Method(cfg.method), cfg.server_input)
    res = adder.distributed_add(cfg.inputs, conf, simcore.RandomSource(cfg.seed))
    expected = adder.expected_sum(cfg.inputs, cfg.bits, cfg.server_input)
    ok = res.sum == expected and not any(res.party_outcomes)
    report = {
        "kind": "adder",
        "method": cfg.method,
        "seed": cfg.seed,
        "bits": cfg.bits,
        "parties": k,
        "sum": res.sum,
        "expected_sum": expected,
        "party_outcomes": res.party_outcomes,
    }
    if cfg.verify and cfg.method != 1:
        bench = adder.distributed_add(
            cfg.inputs, adder.AdderConfig(cfg.bits, k, adder.Method.LOCAL_BENCHMARK, cfg.server_input),
            simcore.RandomSource(cfg.seed),
        )
        fid = simcore.fidelity(res.server_state, bench.server_state)
        report["fidelity_vs_local"] = fid
        ok = ok and fid >= 1 - FIDELITY_TOL and bench.sum == res.sum
    report["trace"] = res.trace.as_record()
    report["formula_printed"] = _estimate_record(adder.adder_resources(cfg.bits, k, cfg.method, "printed"))
    report["formula_protocol"] = _estimate_record(adder.adder_resources(cfg.bits, k, cfg.method, "protocol"))
    report["verified"] = ok
    return report, ok


def _parse_points(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}: {exc}") from None


def cmd_classify(cfg: ScenarioConfig) -> tuple[dict, bool]:
    path = Path(cfg.dataset)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from None
    data = classifier.parse_dataset(text)
    raw = np.asarray(cfg.test_point, dtype=float)
    if raw.size > data.n_features:
        raise UsageError(f"test point has {raw.size} features, dataset has {data.n_features}")
    x_tilde = classifier.normalize(np.concatenate([raw, np.zeros(data.n_features - raw.size)]))
    rng = simcore.RandomSource(cfg.seed)
    prep = classifier.distributed_prepare(data, x_tilde, cfg.method, rng)
    out = classifier.classify(prep.state, prep.layout, cfg.mode, cfg.shots, rng)
    points = data.points
    printed_score, printed_label = classifier.kernel_oracle(points, x_tilde, "printed")
    circuit_score, circuit_label = classifier.kernel_oracle(points, x_tilde, "circuit")
    n_per = len(points) // data.parties
    report = {
        "kind": "classifier",
        "method": cfg.method,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "points": len(points),
        "parties": data.parties,
        "features": data.n_features,
        "predicted_label": out.predicted_label,
        "postselect_probability": out.postselect_probability,
        "label_plus_probability": out.label_plus_probability,
        "label_minus_probability": out.label_minus_probability,
    }
    if cfg.mode == "shots":
        report["shots_used"] = out.shots_used
        report["shots_accepted"] = out.shots_accepted
    report["kernel_score_printed"] = printed_score
    report["kernel_label_printed"] = printed_label
    report["kernel_score_circuit"] = circuit_score
    report["kernel_label_circuit"] = circuit_label
    ok = not any(prep.party_outcomes)
    if cfg.verify and cfg.method != 1:
        local = classifier.prepare_initial_state(points, x_tilde)
        fid = simcore.fidelity(prep.state, local)
        report["fidelity_vs_local"] = fid
        ok = ok and fid >= 1 - FIDELITY_TOL
    report["trace"] = prep.trace.as_record()
    if all(len(p) == n_per for p in data.per_party):
        args = (n_per, data.parties, data.n_features, cfg.method)
        report["formula_printed"] = _estimate_record(classifier.classifier_resources(*args, source="printed"))
        report["formula_protocol"] = _estimate_record(classifier.classifier_resources(*args, source="protocol"))
    report["verified"] = ok
    return report, ok


def _ghz_str(counts: dict[int, int]) -> str:
    return "+".join(f"{c}xGHZ{s}" for s, c in sorted(counts.items())) or "0"


def adder_resource_rows(bits: Sequence[int], parties: Sequence[int], methods=(1, 2, 3, 4)) -> list[dict]:
    rows = []
    for n in bits:
        for k in parties:
            for m in methods:
                printed = adder.adder_resources(n, k, m, "printed")
                res = adder.distributed_add([0] * k, adder.AdderConfig(n, k, adder.Method(m)))
                measured = ResourceEstimate.from_trace(res.trace)
                rows.append(_resource_row({"N": n, "K": k, "method": m}, printed, measured))
    return rows


def classifier_resource_rows(points, parties, features, methods=(1, 2, 3), seed: int = 0) -> list[dict]:
    rows = []
    gen = np.random.default_rng(seed)
    for n in points:
        for k in parties:
            for f in features:
                pts = []
                for i in range(n * k):
                    v = gen.normal(size=f)
                    pts.append(classifier.DataPoint(v / np.linalg.norm(v), 1 if i % 2 == 0 else -1))
                data = classifier.PartitionedDataset.split(pts, k)
                x_tilde = pts[0].features
                for m in methods:
                    printed = classifier.classifier_resources(n, k, f, m, "printed")
                    prep = classifier.distributed_prepare(data, x_tilde, m, simcore.RandomSource(seed))
                    measured = ResourceEstimate.from_trace(prep.trace)
                    rows.append(_resource_row({"N": n, "K": k, "M": f, "method": m}, printed, measured))
    return rows


def _resource_row(key: dict, printed: ResourceEstimate, measured: ResourceEstimate) -> dict:
    row = dict(key)
    row["qubits_printed"] = printed.total_qubits
    row["qubits_measured"] = measured.total_qubits
    row["ghz_printed"] = _ghz_str(printed.ghz_counts)
    row["ghz_measured"] = _ghz_str(measured.ghz_counts)
    flags = []
    if printed.total_qubits != measured.total_qubits:
        flags.append("qubits")
    if printed.ghz_counts != measured.ghz_counts:
        flags.append("ghz")
    row["discrepancy"] = ",".join(flags) or "-"
    return row


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _int_range(text: str) -> list[int]:
    """``3``, ``1,2,4`` or ``1:3`` (inclusive)."""
    if ":" in text:
        lo, _, hi = text.partition(":")
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
    return _int_list(text)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distqml", description="Distributed quantum adder and classifier simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--method", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
        p.add_argument("--format", choices=("table", "json", "csv"), default="table")
        p.add_argument("--no-verify", action="store_true", help="skip the single-device benchmark")
        p.add_argument("--timing", action="store_true", help="append wall time (breaks byte-identical output)")

    p_add = sub.add_parser("add", help="distributed Fourier-basis addition")
    p_add.add_argument("--bits", type=int, required=True)
    p_add.add_argument("--inputs", type=_int_list, required=True, help="party inputs, e.g. 1,2")
    p_add.add_argument("--server-input", type=int, default=0)
    common(p_add)

    p_cls = sub.add_parser("classify", help="distributed distance-based classifier")
    p_cls.add_argument("--dataset", required=True)
    p_cls.add_argument("--test-point", required=True, help="features, e.g. 0.6,0.8")
    p_cls.add_argument("--mode", choices=("exact", "shots"), default="exact")
    p_cls.add_argument("--shots", type=int, default=10_000)
    common(p_cls)

    p_run = sub.add_parser("run", help="run a scenario from a JSON config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p_run.add_argument("--timing", action="store_true")

    p_res = sub.add_parser("resources", help="closed-form vs measured resource tables")
    p_res.add_argument("kind", choices=("adder", "classifier"))
    p_res.add_argument("--bits", type=_int_range, default=[3])
    p_res.add_argument("--parties", type=_int_range, default=[2])
    p_res.add_argument("--points", type=_int_range, default=[2])
    p_res.add_argument("--features", type=_int_range, default=[2])
    p_res.add_argument("--methods", type=_int_range, default=None)
    p_res.add_argument("--format", choices=("table", "json", "csv"), default="table")
    return parser


def _config_from_args(args) -> ScenarioConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.command == "add":
        return ScenarioConfig(
            "adder", args.method or 3, seed, bits=args.bits, inputs=args.inputs,
            server_input=args.server_input, verify=not args.no_verify,
        )
    return ScenarioConfig(
        "classifier", args.method or 2, seed, dataset=args.dataset,
        test_point=_parse_points(args.test_point), mode=args.mode, shots=args.shots,
        verify=not args.no_verify,
    )


def _load_config(path: str) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    data.setdefault("seed", _default_seed())
    return ScenarioConfig.from_mapping(data)


def run_scenario(cfg: ScenarioConfig) -> tuple[dict, bool]:
    cfg.validate()
    if cfg.kind == "adder":
        return cmd_add(cfg)
    return cmd_classify(cfg)


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "resources":
            if args.kind == "adder":
                rows = adder_resource_rows(args.bits, args.parties, args.methods or (1, 2, 3, 4))
            else:
                rows = classifier_resource_rows(args.points, args.parties, args.features, args.methods or (1, 2, 3))
            out.write(render_rows(rows, args.format))
            return EXIT_OK
        cfg = _load_config(args.config) if args.command == "run" else _config_from_args(args)
        start = time.perf_counter()
        report, ok = run_scenario(cfg)
        if args.timing:
            report["wall_time_s"] = time.perf_counter() - start
        out.write(render(report, args.format))
        return EXIT_OK if ok else EXIT_VERIFY
    except (UsageError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except DistQMLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
