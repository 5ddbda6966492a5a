"""Command-line entry point for experiments and the UDP endpoints."""

from __future__ import annotations

import argparse
import sys

from .core import ParameterError
from .experiments import (
    MODES,
    PRESETS,
    ConfigError,
    build_spec,
    run_experiment,
    _parse_addr,
    _parse_int_tuple,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agefec",
        description=(
            "Age-aware FEC experiments: simulators, analytic bounds, and the "
            "UDP reference transport."
        ),
    )
    parser.add_argument("mode", choices=MODES, help="experiment to run")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named parameter bundle")
    parser.add_argument("--config", metavar="FILE", help="key=value config file")
    parser.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
    parser.add_argument("--name", help="experiment label used in file names")
    parser.add_argument("--runs", type=int, help="seeded repetitions")
    parser.add_argument("--seed", dest="seed_base", type=int, help="first seed")

    sim = parser.add_argument_group("simulation parameters")
    sim.add_argument("--k", type=int, help="data chunks per sample")
    sim.add_argument("--n", type=int, help="coded chunks per sample")
    sim.add_argument("--sample-bits", dest="sample_bits", type=int)
    sim.add_argument("--avt", type=int, help="age violation threshold, slots")
    sim.add_argument("--qs", dest="q_s", type=float, help="service rate, chunks/slot")
    sim.add_argument("--buffer", dest="buffer_capacity", type=int)
    sim.add_argument("--pin", dest="p_in", type=float, help="pre-queue loss probability")
    sim.add_argument("--pout", dest="p_out", type=float, help="post-queue loss probability")
    sim.add_argument("--propagation", dest="propagation_delay", type=int)
    sim.add_argument("--duration", type=int, help="slots per run")
    sim.add_argument("--interval", dest="monitoring_interval", type=int)
    sim.add_argument("--initial-age", dest="initial_age", type=int)
    sim.add_argument("--initial-rate", dest="initial_rate", type=float)
    sim.add_argument("--sample-memory", dest="sample_memory", type=int)
    sim.add_argument("--rtt-init", dest="rtt_init", type=float)
    sim.add_argument("--sigma-min", dest="sigma_min", type=float)
    sim.add_argument("--sigma-max", dest="sigma_max", type=float)
    sim.add_argument(
        "--block-candidates", dest="block_candidates", type=_parse_int_tuple,
        metavar="N,N,...",
    )
    sim.add_argument("--rate", type=float, help="baseline-fixed codeword rate")
    sim.add_argument("--sweep-n", dest="sweep_n", type=_parse_int_tuple, metavar="N,N,...")
    sim.add_argument("--flow-count", dest="flow_count", type=int)
    sim.add_argument("--flow-avts", dest="flow_avts", type=_parse_int_tuple, metavar="A,A,...")

    wire = parser.add_argument_group("wire endpoints")
    wire.add_argument("--dest", type=_parse_addr, metavar="HOST:PORT")
    wire.add_argument("--listen", type=_parse_addr, metavar="HOST:PORT")
    wire.add_argument("--avt-ms", dest="avt_ms", type=int)
    wire.add_argument("--slot-ms", dest="slot_ms", type=int)
    wire.add_argument("--n-init", dest="n_init", type=int)
    wire.add_argument("--payload-bytes", dest="payload_bytes", type=int)
    wire.add_argument("--samples", type=int, help="sender stop count / receiver target")
    wire.add_argument("--fixed-rate", dest="fixed_rate", type=float)
    wire.add_argument("--drop-shim", dest="drop_shim", type=float, metavar="P")
    wire.add_argument("--delay-shim-ms", dest="delay_shim_ms", type=float)
    wire.add_argument(
        "--relative-delay", dest="relative_delay", action="store_true", default=None
    )
    wire.add_argument("--shim-seed", dest="shim_seed", type=int)
    wire.add_argument("--log", dest="log_path", metavar="PATH")
    return parser


_SKIP_KEYS = ("preset", "config")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if value is not None and key not in _SKIP_KEYS
    }
    try:
        spec = build_spec(
            preset=args.preset, config_path=args.config, overrides=overrides
        )
        aggregate = run_experiment(spec)
    except (ConfigError, ParameterError) as exc:
        print(f"agefec: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"agefec: io error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("agefec: interrupted", file=sys.stderr)
        return 1
    for key in (
        "mean_av",
        "mean_av_strict",
        "mean_delay",
        "sigma_upper_bound",
        "outage_at_avt",
        "mean_fairness_final",
        "decoded_samples",
        "samples_sent",
        "mean_delay_ms",
    ):
        if key in aggregate and aggregate[key] is not None:
            print(f"{key}: {aggregate[key]}")
    print(f"wrote {spec.label}.json in {spec.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
