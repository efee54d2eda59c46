"""Command-line entry points: label, eval, analyze, infuse-demo.

Exit codes: 0 on success, 1 for usage errors, 2 for data errors (the
message names the offending record id or line). Output files are written
to a temporary file and renamed into place so failed runs never leave
partial outputs behind.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass

from . import __version__
from ._io import atomic_write_text
from .analysis import (LengthStats, ScoreRow, StratifiedSummary,
                       emit_plot_data, length_stats, stratify)
from .corpus import CorpusError, CorpusRecord, load_corpus, tokenize
from .infusion import (InfusionError, ToyConfig, ToyModel, demo_image_pair,
                       forward, grad_check)
from .labeler import LabelCounts, PriorLabel, label_corpus
from .metrics import EvaluationError, MetricReport, evaluate_corpus
from .rules import RuleFileError, RuleSet, default_rules, load_rules

__all__ = ["main", "run", "pipeline_label_then_eval", "PipelineResult"]

_DATA_ERRORS = (CorpusError, RuleFileError, EvaluationError, InfusionError,
                OSError)

_METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "cider")


def _metric_value(row, metric: str) -> float:
    if metric.startswith("bleu"):
        return row.bleu[int(metric[4:]) - 1]
    return getattr(row, metric)


@dataclass
class PipelineResult:
    """Everything the analyze pipeline produces in one pass."""

    metrics: MetricReport
    counts: LabelCounts
    labels: list[PriorLabel]
    summary: StratifiedSummary
    lengths: LengthStats


def pipeline_label_then_eval(records: list[CorpusRecord],
                             rules: RuleSet | None = None,
                             metric: str = "bleu4",
                             bins: int = 20) -> PipelineResult:
    """Label candidates, score them, and stratify scores by label.

    This mirrors the analysis used to compare generated reports: the
    label comes from the candidate text, the score from candidate vs
    reference, and the summary groups scores by that label.
    """
    if metric not in _METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}")
    rules = rules or default_rules()
    labels, counts = label_corpus(records, rules, text_source="candidate")
    metrics = evaluate_corpus(records)
    metrics.per_report = [
        dataclasses.replace(row, label=label.value)
        for row, label in zip(metrics.per_report, labels)
    ]
    rows = [ScoreRow(id=row.id, score=_metric_value(row, metric),
                     label=row.label)
            for row in metrics.per_report]
    token_lengths = {record.id: len(tokenize(record.candidate or ""))
                     for record in records}
    value_range = (0.0, 10.0) if metric == "cider" else (0.0, 1.0)
    summary = stratify(rows, bins=bins, value_range=value_range,
                       token_lengths=token_lengths)
    lengths = length_stats(records, labels)
    return PipelineResult(metrics=metrics, counts=counts, labels=labels,
                          summary=summary, lengths=lengths)


def _load_ruleset(path: str | None) -> RuleSet:
    return load_rules(path) if path else default_rules()


def _cmd_label(args: argparse.Namespace) -> int:
    records = load_corpus(args.infile, format=args.format)
    rules = _load_ruleset(args.rules)
    labels, counts = label_corpus(records, rules, text_source=args.label_on)
    lines = []
    for record, label in zip(records, labels):
        evidence = [{"sentence_index": item.mention.sentence_index,
                     "span": list(item.match_span),
                     "rule": item.fired_rule}
                    for item in label.evidence]
        lines.append(json.dumps(
            {"id": record.id, "label": label.value, "evidence": evidence},
            ensure_ascii=False, sort_keys=True))
    atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    summary = json.dumps(counts.to_dict(), sort_keys=True)
    if args.summary:
        atomic_write_text(args.summary, summary + "\n")
    print(summary)
    return 0


def _per_report_csv(metrics: MetricReport) -> str:
    header = "id,bleu1,bleu2,bleu3,bleu4,rouge_l,cider,label"
    lines = [header]
    for row in metrics.per_report:
        label = "" if row.label is None else str(row.label)
        values = [repr(v) for v in (*row.bleu, row.rouge_l, row.cider)]
        lines.append(",".join([row.id, *values, label]))
    return "".join(line + "\n" for line in lines)


def _cmd_eval(args: argparse.Namespace) -> int:
    records = load_corpus(args.infile, format=args.format)
    metrics = evaluate_corpus(records)
    if args.gold_labels:
        metrics.per_report = [
            dataclasses.replace(row, label=record.gold_label)
            for row, record in zip(metrics.per_report, records)
        ]
    atomic_write_text(args.out,
                  json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n")
    if args.csv:
        atomic_write_text(args.csv, _per_report_csv(metrics))
    print(json.dumps(metrics.corpus.to_dict(), sort_keys=True))
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    records = load_corpus(args.infile, format=args.format)
    rules = _load_ruleset(args.rules)
    result = pipeline_label_then_eval(records, rules, metric=args.metric,
                                      bins=args.bins)
    negative = result.summary.negative
    positive = result.summary.positive
    positive_below = None
    if negative is not None and positive is not None:
        positive_below = bool(positive.mean < negative.mean)
    payload = {
        "metric": args.metric,
        "counts": result.counts.to_dict(),
        "stratified": result.summary.to_dict(),
        "length_stats": result.lengths.to_dict(),
        "corpus_metrics": result.metrics.corpus.to_dict(),
        "positive_mean_below_negative": positive_below,
    }
    atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.csv:
        atomic_write_text(args.csv, _per_report_csv(result.metrics))
    if args.plot_data:
        emit_plot_data(result.summary, args.plot_data)
    print(json.dumps({"counts": result.counts.to_dict(),
                      "positive_mean_below_negative": positive_below},
                     sort_keys=True))
    return 0


def _cmd_infuse_demo(args: argparse.Namespace) -> int:
    config = ToyConfig(seed=args.seed)
    model = ToyModel(config)
    images = demo_image_pair(args.seed, size=config.image_size)
    result = forward(model, images, prior=float(args.prior),
                     max_len=args.max_len)
    print(f"seed={args.seed} prior={args.prior} tokens={result.tokens}")
    if args.emit_latents:
        payload = {
            "seed": args.seed,
            "prior": args.prior,
            "tokens": result.tokens,
            "latent": result.latent.tolist(),
            "latent_infused": result.latent_infused.tolist(),
        }
        atomic_write_text(args.emit_latents,
                      json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.grad_check:
        report = grad_check(model, images, prior=float(args.prior))
        print(f"grad-check max relative error: {report.max_rel_error:.3e}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radpriors",
        description="Label comparison-prior expressions in radiology "
                    "reports, score generated reports, and demo prior "
                    "infusion.")
    rules_version = "unknown"
    try:
        rules_version = default_rules().version
    except Exception:
        pass
    parser.add_argument(
        "--version", action="version",
        version=f"radpriors {__version__} (default rules {rules_version})")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_io(sub: argparse.ArgumentParser, needs_out: bool = True) -> None:
        sub.add_argument("--in", dest="infile", required=True,
                         help="input corpus file")
        if needs_out:
            sub.add_argument("--out", required=True, help="output file")
        sub.add_argument("--format", choices=("jsonl", "csv"),
                         default="jsonl", help="corpus file format")

    label = commands.add_parser(
        "label", help="label each report for comparison-prior expressions")
    add_io(label)
    label.add_argument("--rules", help="rules file overriding the bundled set")
    label.add_argument("--label-on", choices=("text", "reference", "candidate"),
                       default="text", help="which field to label")
    label.add_argument("--summary", help="also write the counts JSON here")
    label.set_defaults(func=_cmd_label)

    evaluate = commands.add_parser(
        "eval", help="score candidates against references")
    add_io(evaluate)
    evaluate.add_argument("--csv", help="also write per-report scores as CSV")
    evaluate.add_argument("--gold-labels", action="store_true",
                          help="copy gold labels into the per-report rows")
    evaluate.set_defaults(func=_cmd_eval)

    analyze = commands.add_parser(
        "analyze", help="label candidates, score them, stratify by label")
    add_io(analyze)
    analyze.add_argument("--rules", help="rules file overriding the bundled set")
    analyze.add_argument("--metric", choices=_METRIC_NAMES, default="bleu4",
                         help="metric to stratify")
    analyze.add_argument("--bins", type=int, default=20,
                         help="histogram bin count")
    analyze.add_argument("--csv", help="also write per-report scores as CSV")
    analyze.add_argument("--plot-data",
                         help="write histogram CSV here (stats JSON beside it)")
    analyze.set_defaults(func=_cmd_analyze)

    demo = commands.add_parser(
        "infuse-demo", help="run the prior-infused toy decoder")
    demo.add_argument("--seed", type=int, default=17)
    demo.add_argument("--prior", type=int, choices=(0, 1), default=1)
    demo.add_argument("--max-len", type=int, default=None)
    demo.add_argument("--emit-latents", help="write latent matrices as JSON")
    demo.add_argument("--grad-check", action="store_true",
                      help="also compare analytic and numeric gradients")
    demo.set_defaults(func=_cmd_infuse_demo)
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
