"""Command-line front end.

Results go to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 validation error, 2 I/O error.  Output files are only written once the
whole computation has succeeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, evaluation
from .audio_io import Encoding, WavFormat, read_wav, to_mono, write_wav
from .dsp import upsample
from .errors import ValidationError
from .postprocess import PostProcessConfig, postprocess_pipeline

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
DEFAULT_KEYS = 4

log = logging.getLogger("svcpost")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- postprocess ---------------------------------------------------------------


def _postprocess_config(args) -> PostProcessConfig:
    return PostProcessConfig(
        crossover_hz=args.crossover_hz,
        target_rate_hz=args.target_rate,
        num_taps=args.taps,
        length_tolerance_samples=args.length_tolerance,
    )


def _read_batch(listfile) -> list[tuple[str, str, str]]:
    base = Path(listfile).parent
    jobs = []
    for lineno, line in enumerate(Path(listfile).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or not all(parts):
            raise ValidationError(f"{listfile} line {lineno}: expected 'source,converted,output'")
        jobs.append(tuple(str(base / p) for p in parts))
    return jobs


def cmd_postprocess(args) -> int:
    config = _postprocess_config(args)
    encoding = Encoding(args.encoding) if args.encoding else None
    if args.batch:
        if args.source or args.converted or args.out:
            raise ValidationError("--batch cannot be combined with --source/--converted/--out")
        jobs = _read_batch(args.batch)
    else:
        if not (args.source and args.converted and args.out):
            raise ValidationError("--source, --converted and --out are required (or use --batch)")
        jobs = [(args.source, args.converted, args.out)]

    def run(job):
        return postprocess_pipeline(*job, config=config, encoding=encoding)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        reports = list(pool.map(run, jobs))
    for (_, _, out), report in zip(jobs, reports):
        for w in report.warnings:
            print(f"warning: {out}: {w}", file=sys.stderr)
        prefix = f"output={out} " if args.batch else ""
        print(prefix + report.line())
    return EXIT_OK


# -- analysis ----------------------------------------------------------------


def _spectrogram_config(args) -> analysis.SpectrogramConfig:
    return analysis.SpectrogramConfig(
        n_fft=args.n_fft, hop=args.hop, n_mels=args.n_mels,
        fmin_hz=args.fmin, fmax_hz=args.fmax, log_floor=args.log_floor,
    )


def _mel_from_path(path, config) -> analysis.MelSpectrogram:
    if Path(path).suffix.lower() == ".wav":
        buf, _ = read_wav(path)
        return analysis.mel_spectrogram(to_mono(buf), config)
    return analysis.MelSpectrogram.load(path)


def cmd_mel_l1(args) -> int:
    config = _spectrogram_config(args)
    a = _mel_from_path(args.a, config)
    b = _mel_from_path(args.b, config)
    print(f"{analysis.mel_l1(a, b):.6f}")
    return EXIT_OK


def _contour_summary(c: analysis.F0Contour) -> str:
    voiced = c.f0_hz[c.voiced]
    median = float(np.median(voiced)) if voiced.size else 0.0
    return f"frames={len(c)} voiced={int(c.voiced.sum())} median_f0_hz={median:.3f}"


def cmd_f0_estimate(args) -> int:
    buf, _ = read_wav(args.input)
    contour = analysis.estimate_f0(
        to_mono(buf), fmin_hz=args.fmin, fmax_hz=args.fmax, frame_length=args.frame,
        hop=args.hop, voicing_threshold=args.threshold,
    )
    _write_text(args.out, contour.to_text())
    print(_contour_summary(contour))
    return EXIT_OK


def cmd_f0_shift(args) -> int:
    contour = analysis.shift_f0(analysis.F0Contour.load(args.input), args.keys)
    _write_text(args.out, contour.to_text())
    print(f"keys={args.keys} ratio={analysis.key_ratio(args.keys):.6f} {_contour_summary(contour)}")
    return EXIT_OK


def cmd_cossim(args) -> int:
    pairs = evaluation.load_embedding_pairs(args.pairs)
    for system, (sim, n) in evaluation.mean_similarity(pairs).items():
        print(f"system={system} cos_sim={sim:.4f} pairs={n}")
    return EXIT_OK


def cmd_mos(args) -> int:
    records = evaluation.load_ratings(args.ratings)
    order = [s.strip() for s in args.systems.split(",")] if args.systems else None
    pairs = evaluation.load_embedding_pairs(args.embeddings) if args.embeddings else None
    report = evaluation.aggregate_report(records, order, pairs, by_group=args.by_group)
    text = report.render_csv() if args.format == "csv" else report.render_text()
    for row in report.rows:
        for dim, cell in row.cells.items():
            if cell.single_rating:
                print(f"warning: {row.label}/{dim} has a single rating; CI half-width reported as 0", file=sys.stderr)
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_manifest(args) -> int:
    path = args.path or evaluation.builtin_manifest_path()
    entries, totals = evaluation.load_manifest(path)
    if args.action == "validate":
        print(f"ok {totals.line()}")
    elif args.action == "summarize":
        print(totals.line())
        for e in entries:
            print(f"{e.technique},{e.duration_min},{e.gender},{e.number}")
    else:
        subset, sub_totals = evaluation.select_subset(entries, args.technique, args.gender)
        text = evaluation.render_manifest(subset)
        if args.out:
            _write_text(args.out, text)
        sys.stdout.write(text)
        print(sub_totals.line(), file=sys.stderr)
    return EXIT_OK


def cmd_resample(args) -> int:
    buf, fmt = read_wav(args.input)
    out = upsample(buf, args.factor, args.taps)
    write_wav(args.out, out, WavFormat(fmt.encoding, out.channels, out.sample_rate_hz))
    print(f"input_rate_hz={buf.sample_rate_hz} output_rate_hz={out.sample_rate_hz} "
          f"input_samples={buf.n_frames} output_samples={out.n_frames}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svcpost", description="Singing-voice conversion post-processing and evaluation tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pp = sub.add_parser("postprocess", help="add the source's band above the crossover to converted audio")
    pp.add_argument("--source")
    pp.add_argument("--converted")
    pp.add_argument("--out")
    pp.add_argument("--batch", help="file of 'source,converted,output' lines")
    pp.add_argument("--jobs", type=int, default=1, help="pairs processed concurrently in --batch mode")
    pp.add_argument("--crossover-hz", type=float, default=10_000.0)
    pp.add_argument("--target-rate", type=int, default=48_000)
    pp.add_argument("--taps", type=int, default=511)
    pp.add_argument("--length-tolerance", type=int, default=0, metavar="N")
    pp.add_argument("--encoding", choices=[e.value for e in Encoding], help="output encoding (default: source's)")
    pp.set_defaults(func=cmd_postprocess)

    ml = sub.add_parser("mel-l1", help="mean absolute log-mel difference between two wavs or mel files")
    ml.add_argument("--a", required=True)
    ml.add_argument("--b", required=True)
    ml.add_argument("--n-fft", type=int, default=1024)
    ml.add_argument("--hop", type=int, default=256)
    ml.add_argument("--n-mels", type=int, default=80)
    ml.add_argument("--fmin", type=float, default=0.0)
    ml.add_argument("--fmax", type=float, default=None, help="default: half the sample rate")
    ml.add_argument("--log-floor", type=float, default=1e-5)
    ml.set_defaults(func=cmd_mel_l1)

    f0 = sub.add_parser("f0", help="estimate or key-shift F0 contours")
    f0sub = f0.add_subparsers(dest="f0_command", required=True, parser_class=_Parser)
    est = f0sub.add_parser("estimate")
    est.add_argument("--in", dest="input", required=True)
    est.add_argument("--out", required=True)
    est.add_argument("--fmin", type=float, default=50.0)
    est.add_argument("--fmax", type=float, default=1100.0)
    est.add_argument("--frame", type=int, default=2048)
    est.add_argument("--hop", type=int, default=256)
    est.add_argument("--threshold", type=float, default=0.6, help="voicing threshold on normalized autocorrelation")
    est.set_defaults(func=cmd_f0_estimate)
    sh = f0sub.add_parser("shift")
    sh.add_argument("--in", dest="input", required=True)
    sh.add_argument("--out", required=True)
    sh.add_argument(
        "--keys", type=int, default=DEFAULT_KEYS,
        help="semitones to transpose; default 4 (cross-gender conversion), use -4 to go down",
    )
    sh.set_defaults(func=cmd_f0_shift)

    cs = sub.add_parser("cossim", help="mean embedding cosine similarity per system")
    cs.add_argument("--pairs", required=True, help="file of 'system,converted_path,reference_path' lines")
    cs.set_defaults(func=cmd_cossim)

    mo = sub.add_parser("mos", help="MOS with 95%% confidence intervals per system and dimension")
    mo.add_argument("--ratings", required=True)
    mo.add_argument("--by-group", action="store_true", help="separate rows for ordinary and professional listeners")
    mo.add_argument("--embeddings", help="embedding-pair list file for the Cos.Sim column")
    mo.add_argument("--systems", help="comma-separated row order (default: first appearance)")
    mo.add_argument("--format", choices=["text", "csv"], default="text")
    mo.add_argument("--out", help="also write the table to this file")
    mo.set_defaults(func=cmd_mos)

    mf = sub.add_parser("manifest", help="validate, summarize or filter a test-set manifest")
    mf.add_argument("action", choices=["validate", "summarize", "filter"])
    mf.add_argument("path", nargs="?", help="manifest CSV/TSV (default: the packaged test-set manifest)")
    mf.add_argument("--technique", action="append", help="repeatable")
    mf.add_argument("--gender", choices=list(evaluation.GENDERS))
    mf.add_argument("--out")
    mf.set_defaults(func=cmd_manifest)

    rs = sub.add_parser("resample", help="integer-factor upsampling")
    rs.add_argument("--in", dest="input", required=True)
    rs.add_argument("--factor", type=int, required=True)
    rs.add_argument("--out", required=True)
    rs.add_argument("--taps", type=int, default=None, help="anti-imaging filter length (default 256*factor-1)")
    rs.set_defaults(func=cmd_resample)
    return p


def main(argv=None) -> int:
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            stream.reconfigure(encoding="utf-8")
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
