"""Command-line interface: dataset synthesis, single-file enhancement, batch
evaluation, and modulation-set inspection."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .dataset import SynthSettings, eval_dataset, synth_dataset
from .modset import estimate_modulation_set_detailed
from .pipeline import (
    MASK_CHOICES,
    PREPROC_CHOICES,
    PipelineConfig,
    PipelineError,
    run_pipeline,
)
from .wavio import read_wav

logger = logging.getLogger(__name__)

_OVERRIDE_KEYS = [f.name for f in fields(PipelineConfig)]


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--preproc", choices=PREPROC_CHOICES)
    parser.add_argument("--mask", choices=MASK_CHOICES)
    parser.add_argument("--sample-rate", type=int, dest="sample_rate")
    parser.add_argument("--beta-x", type=float, dest="beta_x")
    parser.add_argument("--diag-load", type=float, dest="diag_load")
    parser.add_argument("--weight-stride", type=int, dest="weight_stride")
    parser.add_argument("--peak-count", type=int, dest="peak_count")
    parser.add_argument(
        "--coherence-threshold", type=float, dest="coherence_threshold"
    )
    parser.add_argument("--max-shifts", type=int, dest="max_shifts")
    parser.add_argument("--welch-seg", type=int, dest="welch_seg")
    parser.add_argument("--ms-window-sec", type=float, dest="ms_window_sec")
    parser.add_argument("--ms-alpha", type=float, dest="ms_alpha")
    parser.add_argument("--ms-bias", type=float, dest="ms_bias")
    parser.add_argument("--gain-floor-db", type=float, dest="gain_floor_db")
    parser.add_argument("--seed", type=int, dest="seed")
    parser.add_argument(
        "--modset",
        dest="forced_modset",
        help="comma-separated shifts in Hz (e.g. 0,110,220) to bypass estimation",
    )


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    config = (
        PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    )
    mapping = config.as_mapping()
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    return PipelineConfig.from_mapping(mapping)


def _log_config(config: PipelineConfig, log_path=None) -> None:
    lines = [f"{k}={v}" for k, v in config.as_mapping().items()]
    for line in lines:
        logger.info("config %s", line)
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _cmd_synth(args) -> int:
    settings = SynthSettings(
        seed=args.seed,
        snr_range=(args.snr_min, args.snr_max),
        f0_range=(args.f0_min, args.f0_max),
        num_harmonics=args.harmonics,
        correlation=args.correlation,
        envelope_rate=args.envelope_rate,
        amplitude_decay=args.amplitude_decay,
        encoding=args.encoding,
    )
    manifest = synth_dataset(args.clean_dir, args.out_dir, settings)
    print(f"wrote {manifest}")
    return 0


def _cmd_enhance(args) -> int:
    config = _build_config(args)
    _log_config(config, args.log)
    _, record = run_pipeline(
        args.input,
        config,
        output_wav=args.output,
        reference_wav=args.reference,
    )
    print(f"wrote {args.output}")
    if record is not None:
        print(f"si_sdr_db={record.si_sdr_db:.6f} stoi={record.stoi:.6f}")
    return 0


def _cmd_eval(args) -> int:
    base = _build_config(args)
    configs = []
    for spec in args.pipeline or ["id:none"]:
        try:
            preproc, mask = spec.split(":")
        except ValueError:
            raise PipelineError("config", f"bad --pipeline spec {spec!r}; use preproc:mask")
        mapping = base.as_mapping()
        mapping["preproc"] = preproc
        mapping["mask"] = mask
        configs.append(PipelineConfig.from_mapping(mapping))
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.dataset_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _log_config(base, out_dir / "run.log")
    records, skips = eval_dataset(
        args.dataset_dir, configs, out_dir=out_dir, workers=args.workers
    )
    print(f"evaluated {len(records)} records ({len(skips)} skipped) -> {out_dir}")
    return 0


def _cmd_modset(args) -> int:
    config = _build_config(args)
    signal = read_wav(args.input)
    modset, reports = estimate_modulation_set_detailed(
        signal,
        config.stft_config(),
        peak_count=config.peak_count,
        coherence_threshold=config.coherence_threshold,
        max_shifts=config.max_shifts,
        seg_len=config.welch_seg,
        overlap=config.welch_overlap,
    )
    for report in reports:
        flag = "accepted" if report.accepted else "rejected"
        print(f"candidate {report.candidate_hz:10.3f} Hz  "
              f"coherence {report.coherence:5.3f}  {flag}")
    print("modulation set [Hz]: " + ",".join(f"{s:g}" for s in modset.shifts))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclospeech",
        description="Harmonic-noise speech enhancement via cyclic MPDR beamforming",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a noisy dataset")
    p_synth.add_argument("--clean-dir", required=True)
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--snr-min", type=float, default=-20.0)
    p_synth.add_argument("--snr-max", type=float, default=0.0)
    p_synth.add_argument("--f0-min", type=float, default=60.0)
    p_synth.add_argument("--f0-max", type=float, default=150.0)
    p_synth.add_argument("--harmonics", type=int, default=10)
    p_synth.add_argument("--correlation", type=float, default=0.9)
    p_synth.add_argument("--envelope-rate", type=float, default=5.0)
    p_synth.add_argument("--amplitude-decay", type=float, default=0.5)
    p_synth.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p_synth.set_defaults(func=_cmd_synth)

    p_enh = sub.add_parser("enhance", help="enhance a single WAV file")
    p_enh.add_argument("input")
    p_enh.add_argument("output")
    p_enh.add_argument("--reference", help="clean WAV for oracle mask / metrics")
    p_enh.add_argument("--log", help="write the resolved config to this file")
    _add_config_args(p_enh)
    p_enh.set_defaults(func=_cmd_enhance)

    p_eval = sub.add_parser("eval", help="batch-evaluate pipelines on a dataset")
    p_eval.add_argument("--dataset-dir", required=True)
    p_eval.add_argument("--out-dir")
    p_eval.add_argument(
        "--pipeline",
        action="append",
        help="preproc:mask pair (repeatable), e.g. cmpdr:oracle-irm",
    )
    p_eval.add_argument("--workers", type=int, default=1)
    _add_config_args(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_mod = sub.add_parser("modset", help="estimate and print the modulation set")
    p_mod.add_argument("input")
    _add_config_args(p_mod)
    p_mod.set_defaults(func=_cmd_modset)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
