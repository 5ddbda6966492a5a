"""Experiment runner: presets, config files, seeded batches, CSV/JSON output.

A run writes one CSV per seeded repetition (interval rows plus a trailing
summary comment) and one aggregate JSON whose statistics are recomputable
from those CSVs.  Identical spec and seeds give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
from dataclasses import asdict, dataclass, replace

from . import adaptive_sampling, fixed_sampling, multiflow, netsim
from .analysis import (
    age_event_prob,
    chunk_missing_prob,
    outage_probability,
    rate_upper_bound,
    sample_decode_prob,
)
from .core import CodingParams, LossModel, ParameterError
from .netsim import SimConfig

MODES = (
    "fsfb-sim",
    "vsvb-sim",
    "sweep-coding",
    "bounds",
    "multiserver",
    "wire-send",
    "wire-recv",
    "baseline-fixed",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ExperimentSpec:
    """Everything needed to execute one experiment end to end."""

    mode: str = "fsfb-sim"
    name: str | None = None
    runs: int = 1
    seed_base: int = 0
    out_dir: str = "."
    # Simulation parameters (SimConfig is built per run with its seed).
    k: int = 3
    n: int = 4
    sample_bits: int = 8192
    avt: int = 5
    q_s: float | None = None
    buffer_capacity: int = 5000
    p_in: float = 0.1
    p_out: float = 0.1
    propagation_delay: int = 1
    duration: int = 100_000
    monitoring_interval: int = 100
    initial_age: int | None = None
    initial_rate: float | None = None
    sample_memory: int | None = None
    rtt_init: float | None = None
    sigma_min: float = 0.99
    sigma_max: float | None = None
    block_candidates: tuple[int, ...] | None = None
    # Mode extras.
    rate: float = 1.0  # baseline-fixed codeword rate
    sweep_n: tuple[int, ...] = (3, 4, 5, 6, 7, 8, 9)
    flow_count: int = 2
    flow_avts: tuple[int, ...] | None = None
    # Wire endpoints.
    dest: tuple[str, int] | None = None
    listen: tuple[str, int] | None = None
    avt_ms: int = 100
    slot_ms: int = 1
    n_init: int = 5
    payload_bytes: int = 1024
    samples: int = 0
    fixed_rate: float | None = None
    drop_shim: float = 0.0
    delay_shim_ms: float = 0.0
    relative_delay: bool = False
    shim_seed: int = 0
    log_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")

    @property
    def label(self) -> str:
        return self.name if self.name else self.mode

    def sim_config(self, seed: int) -> SimConfig:
        return SimConfig(
            coding=CodingParams(self.k, self.n, self.sample_bits),
            avt=self.avt,
            q_s=self.q_s,
            buffer_capacity=self.buffer_capacity,
            loss=LossModel(self.p_in, self.p_out),
            propagation_delay=self.propagation_delay,
            duration=self.duration,
            monitoring_interval=self.monitoring_interval,
            rng_seed=seed,
            initial_age=self.initial_age,
            initial_rate=self.initial_rate,
            sample_memory=self.sample_memory,
            rtt_init=self.rtt_init,
            sigma_min=self.sigma_min,
            sigma_max=self.sigma_max,
            block_candidates=self.block_candidates,
        )

    def wire_config(self):
        from .wire import WireConfig

        return WireConfig(
            dest=self.dest,
            listen=self.listen,
            k=self.k,
            n_init=self.n_init,
            avt_ms=self.avt_ms,
            slot_ms=self.slot_ms,
            payload_bytes=self.payload_bytes,
            samples=self.samples,
            fixed_rate=self.fixed_rate,
            drop_shim=self.drop_shim,
            delay_shim_ms=self.delay_shim_ms,
            relative_delay=self.relative_delay,
            shim_seed=self.shim_seed,
            log_path=self.log_path,
        )


# Named parameter bundles reproducing the headline experiments.  The
# fixed-sampling presets start at one codeword per slot: the formula start
# floods the queue past recovery in this slotted model (see README).
PRESETS: dict[str, dict] = {
    "table1-k3n4": dict(
        mode="fsfb-sim", k=3, n=4, avt=5, q_s=3 * 1.4706, buffer_capacity=5000,
        p_in=0.1, p_out=0.1, duration=100_000, monitoring_interval=100,
        runs=10, initial_rate=1.0,
    ),
    "table1-k3n6": dict(
        mode="fsfb-sim", k=3, n=6, avt=5, q_s=3 * 1.4706, buffer_capacity=5000,
        p_in=0.1, p_out=0.1, duration=100_000, monitoring_interval=100,
        runs=10, initial_rate=1.0,
    ),
    "sweep-avt2-p02": dict(
        mode="sweep-coding", k=3, avt=2, q_s=3 * 1.4706, p_in=0.2, p_out=0.2,
        duration=100_000, monitoring_interval=100, runs=10, initial_rate=1.0,
        sweep_n=(3, 4, 5, 6, 7, 8, 9),
    ),
    "sweep-avt5-p02": dict(
        mode="sweep-coding", k=3, avt=5, q_s=3 * 1.4706, p_in=0.2, p_out=0.2,
        duration=100_000, monitoring_interval=100, runs=10, initial_rate=1.0,
        sweep_n=(3, 4, 5, 6, 7, 8, 9),
    ),
    "vsvb-lossy": dict(
        mode="vsvb-sim", k=3, n=4, avt=5, q_s=2 * 1.4706, p_in=0.1, p_out=0.1,
        duration=30_000, monitoring_interval=100, runs=3,
    ),
    "multiserver-pair": dict(
        mode="multiserver", flow_count=2, k=3, n=4, avt=5, q_s=2 * 3 * 1.4706,
        p_in=0.1, p_out=0.1, duration=30_000, monitoring_interval=100, runs=3,
    ),
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must be host:port, got {text!r}")
    return host, int(port)


def _opt(parser):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else parser(text)

    return parse


# key name -> (attribute, value parser)
CONFIG_KEYS: dict[str, tuple[str, object]] = {
    "mode": ("mode", str.strip),
    "name": ("name", str.strip),
    "runs": ("runs", int),
    "seed_base": ("seed_base", int),
    "out_dir": ("out_dir", str.strip),
    "k": ("k", int),
    "n": ("n", int),
    "sample_bits": ("sample_bits", int),
    "avt": ("avt", int),
    "q_s": ("q_s", _opt(float)),
    "buffer_capacity": ("buffer_capacity", int),
    "p_in": ("p_in", float),
    "p_out": ("p_out", float),
    "propagation_delay": ("propagation_delay", int),
    "duration": ("duration", int),
    "monitoring_interval": ("monitoring_interval", int),
    "initial_age": ("initial_age", _opt(int)),
    "initial_rate": ("initial_rate", _opt(float)),
    "sample_memory": ("sample_memory", _opt(int)),
    "rtt_init": ("rtt_init", _opt(float)),
    "sigma_min": ("sigma_min", float),
    "sigma_max": ("sigma_max", _opt(float)),
    "block_candidates": ("block_candidates", _opt(_parse_int_tuple)),
    "rate": ("rate", float),
    "sweep_n": ("sweep_n", _parse_int_tuple),
    "flow_count": ("flow_count", int),
    "flow_avts": ("flow_avts", _opt(_parse_int_tuple)),
    "dest": ("dest", _opt(_parse_addr)),
    "listen": ("listen", _opt(_parse_addr)),
    "avt_ms": ("avt_ms", int),
    "slot_ms": ("slot_ms", int),
    "n_init": ("n_init", int),
    "payload_bytes": ("payload_bytes", int),
    "samples": ("samples", int),
    "fixed_rate": ("fixed_rate", _opt(float)),
    "drop_shim": ("drop_shim", float),
    "delay_shim_ms": ("delay_shim_ms", float),
    "relative_delay": ("relative_delay", _parse_bool),
    "shim_seed": ("shim_seed", int),
    "log": ("log_path", str.strip),
}


def apply_preset(updates: dict, preset: str) -> dict:
    """Overlay a named preset's parameters; explicit updates keep priority."""
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}"
        )
    merged = dict(PRESETS[preset])
    merged.update(updates)
    return merged


def parse_config(path: str) -> ExperimentSpec:
    """Read a key=value file into an ExperimentSpec.

    Blank lines and '#' comments are skipped.  A 'preset' line pulls in the
    named bundle; later lines override it.  Unknown keys and unparsable
    values fail with their line number.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    updates: dict = {}
    preset: str | None = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {text!r}", lineno)
        key = key.strip()
        value = value.strip()
        if key == "preset":
            preset = value
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        attr, parser = CONFIG_KEYS[key]
        try:
            updates[attr] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid value for {key}: {value!r} ({exc})", lineno)
    if preset is not None:
        updates = apply_preset(updates, preset)
    try:
        return ExperimentSpec(**updates)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc))


def build_spec(
    preset: str | None = None,
    config_path: str | None = None,
    overrides: dict | None = None,
) -> ExperimentSpec:
    """Combine preset, config file, and explicit overrides (low to high)."""
    updates: dict = {}
    if config_path is not None:
        spec = parse_config(config_path)
        updates = {
            key: getattr(spec, key)
            for key in ExperimentSpec.__dataclass_fields__
            if getattr(spec, key) != ExperimentSpec.__dataclass_fields__[key].default
        }
    if overrides:
        updates.update(overrides)
    if preset is not None:
        updates = apply_preset(updates, preset)
        if overrides:
            updates.update(overrides)
    try:
        return ExperimentSpec(**updates)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc))


def _csv_value(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, schema: str, columns, rows, summary: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_value(v) for v in row])
        if summary is not None:
            fh.write("# summary: " + json.dumps(summary, sort_keys=True) + "\n")


def read_csv(path: str) -> tuple[str, list[str], list[list[str]], dict | None]:
    """Inverse of write_csv: (schema, columns, raw rows, summary or None)."""
    schema = ""
    summary = None
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# schema:"):
                schema = line.split(":", 1)[1].strip()
            elif line.startswith("# summary:"):
                summary = json.loads(line.split(":", 1)[1])
            elif line.strip():
                rows.append(next(csv.reader([line])))
    if rows:
        columns = rows.pop(0)
    return schema, columns, rows, summary


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
        fh.write("\n")


def _mean_std(values) -> tuple[float, float]:
    values = list(values)
    mean = statistics.fmean(values)
    std = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mean, std


def _spec_record(spec: ExperimentSpec) -> dict:
    record = asdict(spec)
    for key, value in record.items():
        if isinstance(value, tuple):
            record[key] = list(value)
    return record


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute the spec, write its files, and return the aggregate payload."""
    os.makedirs(spec.out_dir, exist_ok=True)
    label = spec.label
    if spec.mode in ("fsfb-sim", "vsvb-sim", "baseline-fixed"):
        aggregate = _run_sim_batch(spec, label)
    elif spec.mode == "sweep-coding":
        aggregate = _run_sweep(spec, label)
    elif spec.mode == "bounds":
        aggregate = _run_bounds(spec, label)
    elif spec.mode == "multiserver":
        aggregate = _run_multiserver(spec, label)
    elif spec.mode == "wire-send":
        aggregate = _run_wire_send(spec, label)
    elif spec.mode == "wire-recv":
        aggregate = _run_wire_recv(spec, label)
    else:  # pragma: no cover - mode validated in __post_init__
        raise ConfigError(f"unhandled mode {spec.mode!r}")
    path = os.path.join(spec.out_dir, f"{label}.json")
    write_json(path, aggregate)
    return aggregate


def _run_sim_batch(spec: ExperimentSpec, label: str) -> dict:
    per_run = []
    for run in range(spec.runs):
        seed = spec.seed_base + run
        config = spec.sim_config(seed)
        if spec.mode == "fsfb-sim":
            result = fixed_sampling.run_sim(config)
        elif spec.mode == "vsvb-sim":
            result = adaptive_sampling.run_sim(config)
        else:
            result = netsim.run_fixed_rate_sim(config, spec.rate)
        summary = dict(result.summary(), run=run, seed=seed)
        write_csv(
            os.path.join(spec.out_dir, f"{label}-run{run:02d}.csv"),
            result.schema,
            result.columns,
            result.rows,
            summary=summary,
        )
        per_run.append(summary)
    mean_av, std_av = _mean_std(r["av"] for r in per_run)
    mean_strict, std_strict = _mean_std(r["av_strict"] for r in per_run)
    delays = [r["mean_delay"] for r in per_run if math.isfinite(r["mean_delay"])]
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "per_run": per_run,
        "mean_av": mean_av,
        "std_av": std_av,
        "mean_av_strict": mean_strict,
        "std_av_strict": std_strict,
        "mean_delay": statistics.fmean(delays) if delays else None,
    }


SWEEP_COLUMNS = ("n", "run", "seed", "av", "av_strict", "mean_delay")


def _run_sweep(spec: ExperimentSpec, label: str) -> dict:
    rows = []
    by_n: dict[int, list[tuple[float, float]]] = {}
    for n in spec.sweep_n:
        for run in range(spec.runs):
            seed = spec.seed_base + run
            config = replace(
                spec.sim_config(seed), coding=CodingParams(spec.k, n, spec.sample_bits)
            )
            result = fixed_sampling.run_sim(config)
            rows.append((n, run, seed, result.av, result.av_strict, result.mean_delay))
            by_n.setdefault(n, []).append((result.av, result.av_strict))
    write_csv(
        os.path.join(spec.out_dir, f"{label}-sweep.csv"),
        "coding-sweep/1",
        SWEEP_COLUMNS,
        rows,
    )
    points = []
    for n in spec.sweep_n:
        avs = [a for a, _ in by_n[n]]
        stricts = [s for _, s in by_n[n]]
        mean_av, std_av = _mean_std(avs)
        mean_strict, _ = _mean_std(stricts)
        points.append(
            {
                "n": n,
                "mean_av": mean_av,
                "std_av": std_av,
                "mean_av_strict": mean_strict,
            }
        )
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "points": points,
    }


BOUNDS_COLUMNS = (
    "elapsed",
    "chunk_missing_prob",
    "sample_decode_prob",
    "age_event_prob",
    "outage_prob",
)


def _run_bounds(spec: ExperimentSpec, label: str) -> dict:
    config = spec.sim_config(spec.seed_base)
    coding = config.coding
    loss = config.loss
    sigma_up = rate_upper_bound(config.service_rate, coding.n, loss.p_in)
    horizon = config.avt
    rows = []
    for elapsed in range(horizon + 1):
        rows.append(
            (
                elapsed,
                chunk_missing_prob(loss, elapsed),
                sample_decode_prob(coding, loss, elapsed),
                age_event_prob(elapsed, horizon, coding, loss),
                outage_probability(elapsed, horizon, coding, loss),
            )
        )
    write_csv(
        os.path.join(spec.out_dir, f"{label}-bounds.csv"),
        "bounds/1",
        BOUNDS_COLUMNS,
        rows,
    )
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "sigma_upper_bound": sigma_up,
        "outage_at_avt": rows[-1][4],
    }


def _run_multiserver(spec: ExperimentSpec, label: str) -> dict:
    per_run = []
    for run in range(spec.runs):
        seed = spec.seed_base + run
        config = spec.sim_config(seed)
        result = multiflow.run_sim(config, spec.flow_count, spec.flow_avts)
        summary = dict(result.summary(), run=run, seed=seed)
        write_csv(
            os.path.join(spec.out_dir, f"{label}-run{run:02d}.csv"),
            result.system.schema,
            result.system.columns,
            result.system.rows,
            summary=summary,
        )
        write_csv(
            os.path.join(spec.out_dir, f"{label}-run{run:02d}-flows.csv"),
            "flow-interval/1",
            result.flow_columns,
            result.flow_rows,
        )
        per_run.append(summary)
    mean_fair, std_fair = _mean_std(r["fairness_final"] for r in per_run)
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "per_run": per_run,
        "mean_fairness_final": mean_fair,
        "std_fairness_final": std_fair,
    }


def _run_wire_send(spec: ExperimentSpec, label: str) -> dict:
    from . import wire

    log = wire.run_sender(spec.wire_config())
    rows = log.rows
    path = spec.log_path or os.path.join(spec.out_dir, f"{label}-sender.csv")
    write_csv(
        path,
        "wire-sender/1",
        ("ms", "sigma", "n", "ts_ms", "source"),
        rows,
        summary={
            "samples_sent": log.samples_sent,
            "chunks_sent": log.chunks_sent,
            "shim_dropped": log.shim_dropped,
            "stale_skipped": log.stale_skipped,
            "feedback_applied": log.feedback_applied,
            "fallbacks": log.fallbacks,
        },
    )
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "samples_sent": log.samples_sent,
        "chunks_sent": log.chunks_sent,
        "shim_dropped": log.shim_dropped,
        "feedback_applied": log.feedback_applied,
        "final_sigma": log.final_sigma,
        "final_n": log.final_n,
        "final_ts_ms": log.final_ts_ms,
    }


def _run_wire_recv(spec: ExperimentSpec, label: str) -> dict:
    from . import wire

    try:
        log = wire.run_receiver(spec.wire_config(), max_samples=spec.samples)
    except KeyboardInterrupt:  # pragma: no cover - interactive use
        raise
    path = spec.log_path or os.path.join(spec.out_dir, f"{label}-receiver.csv")
    write_csv(
        path,
        log.schema,
        log.columns,
        log.rows,
        summary={
            "chunks_received": log.chunks_received,
            "duplicates": log.duplicates,
            "malformed": log.malformed,
            "decoded_samples": log.decoded_samples,
            "payload_ok": log.payload_ok,
            "mean_delay_ms": log.mean_delay_ms,
            "feedback_sent": log.feedback_sent,
        },
    )
    return {
        "experiment": label,
        "mode": spec.mode,
        "spec": _spec_record(spec),
        "chunks_received": log.chunks_received,
        "decoded_samples": log.decoded_samples,
        "payload_ok": log.payload_ok,
        "mean_delay_ms": log.mean_delay_ms,
        "feedback_sent": log.feedback_sent,
    }
