"""Batch pipeline: prepare cases, generate rules, synthesize, run, score.

Every subcommand is idempotent given the same inputs, flags and seed; all
artifacts are JSON or TSV with sorted keys so reruns are byte-identical.
Exit codes: 0 success, 1 usage error, 2 backend error, 3 data error.
Failures print a machine-readable record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import analysis, fixtures
from .dataset import (
    CorpusManifest,
    DatasetError,
    WebpageCase,
    build_cases,
    derive_seed,
    dump_json,
    load_case,
)
from .dom import DocumentTree, DomError, parse_html, preprocess
from .evaluation import aggregate, classify_case
from .executor import ActionSequence, ExecutionError, extract
from .gateway import BackendConfig, GatewayError, JudgeMode, LlmGateway
from .generation import GenerationTrace, Strategy, StrategyConfig, generate
from .synthesis import NoCandidates, TooFewPages, cross_execute, select_seeds, synthesize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _error_record(kind: str, detail: str) -> None:
    print(json.dumps({"error": kind, "detail": detail}), file=sys.stderr)


def _load_meta(directory: Path) -> dict:
    meta_path = directory / "_meta.json"
    if not meta_path.exists():
        raise DatasetError(f"missing _meta.json in {directory}")
    return json.loads(meta_path.read_text(encoding="utf-8"))


def _case_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.glob("*.json") if not p.name.startswith("_"))


def _load_page(corpus_root: Path, html_path: str, page_id: str) -> DocumentTree:
    raw = (corpus_root / html_path).read_text(encoding="utf-8")
    return preprocess(parse_html(raw, page_id))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_prepare(args: argparse.Namespace) -> int:
    manifest = CorpusManifest.load(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cases = build_cases(manifest, sample_n=args.sample, rng_seed=args.seed)
    for case in cases:
        dump_json(case.to_record(), out / f"{case.case_id}.json")
    dump_json(
        {
            "corpus_root": str(manifest.root.resolve()),
            "sample": args.sample,
            "seed": args.seed,
        },
        out / "_meta.json",
    )
    print(f"prepared {len(cases)} case(s) in {out}")
    return 0


def _generate_case(
    case: WebpageCase,
    corpus_root: Path,
    gateway: LlmGateway,
    cfg: StrategyConfig,
    n_seeds: int,
    base_seed: int,
    out: Path,
) -> None:
    seed_ids = select_seeds(
        case.page_ids, n_seeds, derive_seed(base_seed, "seeds", case.case_id)
    )
    by_id = {p.page_id: p for p in case.pages}
    seeds = []
    for page_id in seed_ids:
        record = by_id[page_id]
        page = _load_page(corpus_root, record.html_path, page_id)
        sequence, trace = generate(page, case.instruction, gateway, cfg)
        trace.html_path = str((corpus_root / record.html_path).resolve())
        trace_file = f"{case.case_id}__{page_id}.json"
        dump_json(trace.to_record(), out / "traces" / trace_file)
        seeds.append({
            "page_id": page_id,
            "html_path": record.html_path,
            "gold": list(record.gold),
            "proposed_values": list(trace.final_values),
            "sequence": sequence.to_record() if sequence else None,
            "trace_file": f"traces/{trace_file}",
        })
    dump_json(
        {
            "case_id": case.case_id,
            "instruction": case.instruction,
            "strategy": cfg.strategy.value,
            "seeds": seeds,
        },
        out / "candidates" / f"{case.case_id}.json",
    )


def cmd_generate(args: argparse.Namespace) -> int:
    cases_dir = Path(args.cases)
    meta = _load_meta(cases_dir)
    corpus_root = Path(meta["corpus_root"])
    out = Path(args.out)
    (out / "candidates").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    config = BackendConfig.from_file(args.backend)
    gateway = LlmGateway(config)
    cfg = StrategyConfig(
        strategy=Strategy(args.strategy),
        d_max=args.dmax,
        judge_mode=JudgeMode(args.judge),
    )

    todo: list[WebpageCase] = []
    skipped = 0
    for path in _case_files(cases_dir):
        case = load_case(path)
        target = out / "candidates" / f"{case.case_id}.json"
        if target.exists() and not args.force:
            try:
                json.loads(target.read_text(encoding="utf-8"))
                skipped += 1
                continue
            except json.JSONDecodeError:
                pass  # half-written checkpoint: redo
        todo.append(case)

    failures: list[Exception] = []

    def work(case: WebpageCase) -> None:
        _generate_case(case, corpus_root, gateway, cfg, args.seeds_per_case, args.seed, out)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(work, case): case for case in todo}
            for future in futures:
                try:
                    future.result()
                except GatewayError as exc:
                    failures.append(exc)
    else:
        for case in todo:
            work(case)

    dump_json(meta, out / "_meta.json")
    if failures:
        raise failures[0]
    print(f"generated {len(todo)} case(s), skipped {skipped} checkpointed")
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    candidates_dir = Path(args.candidates)
    meta = _load_meta(candidates_dir)
    corpus_root = Path(meta["corpus_root"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gateway: Optional[LlmGateway] = None
    if args.mode == "llm":
        if not args.backend:
            raise UsageError("--mode llm requires --backend")
        gateway = LlmGateway(BackendConfig.from_file(args.backend))

    count = 0
    for path in _case_files(candidates_dir / "candidates"):
        record = json.loads(path.read_text(encoding="utf-8"))
        seeds = record["seeds"]
        candidates: list[ActionSequence] = []
        seed_values: list[list[str]] = []
        gold_values: list[list[str]] = []
        trees: list[DocumentTree] = []
        seed_ids: list[str] = []
        for seed in seeds:
            if seed["sequence"] is None:
                continue  # generation failed on this seed
            candidates.append(ActionSequence.from_record(seed["sequence"]))
            seed_values.append(seed["proposed_values"])
            gold_values.append(seed["gold"])
            seed_ids.append(seed["page_id"])
            trees.append(_load_page(corpus_root, seed["html_path"], seed["page_id"]))
        matrix = []
        if candidates:
            matrix = cross_execute(candidates, trees)
            choice = synthesize(
                candidates,
                matrix,
                seed_values,
                mode=args.mode,
                gateway=gateway,
                instruction=record["instruction"],
                seed_ids=seed_ids,
                gold_values=gold_values if args.gold else None,
            )
            chosen: Optional[dict] = choice.sequence.to_record()
            index: Optional[int] = choice.index
        else:
            chosen, index = None, None
        dump_json(
            {
                "case_id": record["case_id"],
                "chosen_index": index,
                "candidates": [c.to_record() for c in candidates],
                "matrix": [
                    [result.to_record() for result in row] for row in matrix
                ],
                "seed_ids": seed_ids,
                "sequence": chosen,
            },
            out / f"{record['case_id']}.json",
        )
        count += 1
    dump_json(meta, out / "_meta.json")
    print(f"synthesized {count} case(s)")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    sequences_dir = Path(args.sequences)
    cases_dir = Path(args.cases)
    meta = _load_meta(cases_dir)
    corpus_root = Path(meta["corpus_root"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> None:
        record = json.loads(path.read_text(encoding="utf-8"))
        case = load_case(cases_dir / f"{record['case_id']}.json")
        pages: dict[str, dict] = {}
        if record["sequence"] is not None:
            sequence = ActionSequence.from_record(record["sequence"])
            for page_record in case.pages:
                page = _load_page(corpus_root, page_record.html_path, page_record.page_id)
                pages[page_record.page_id] = extract(page, sequence).to_record()
        else:
            for page_record in case.pages:
                pages[page_record.page_id] = {"values": [], "status": "no_match"}
        dump_json({"case_id": record["case_id"], "pages": pages}, out / path.name)

    files = _case_files(sequences_dir)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(work, files))
    else:
        for path in files:
            work(path)
    dump_json(meta, out / "_meta.json")
    print(f"ran sequences for {len(files)} case(s)")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    results_dir = Path(args.results)
    cases_dir = Path(args.cases)
    outcomes = []
    for path in _case_files(results_dir):
        record = json.loads(path.read_text(encoding="utf-8"))
        case = load_case(cases_dir / f"{record['case_id']}.json")
        pages = []
        for page_record in case.pages:
            extracted = record["pages"].get(page_record.page_id, {}).get("values", [])
            pages.append((extracted, list(page_record.gold), page_record.page_id))
        outcomes.append(classify_case(record["case_id"], pages))
    if not outcomes:
        raise DatasetError(f"no result files in {results_dir}")
    report = aggregate(outcomes)
    table = report.TSV_HEADER + "\n" + report.to_tsv_row(args.model, args.method) + "\n"
    Path(args.out).write_text(table, encoding="utf-8")
    if args.per_case:
        dump_json([o.to_record() for o in outcomes], args.per_case)
    from .evaluation import Label

    print(
        f"cases={report.total} "
        f"Correct={100 * report.ratios[Label.CORRECT]:.2f}% "
        f"Unex={100 * report.ratios[Label.UNEX]:.2f}%"
    )
    print(f"report written to {args.out}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    traces_dir = Path(args.traces)
    sequences_dir = Path(args.sequences)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    traces = [
        GenerationTrace.from_record(json.loads(p.read_text(encoding="utf-8")))
        for p in sorted(traces_dir.glob("*.json"))
    ]
    histogram = analysis.sequence_length_histogram(traces)
    (out / "lengths.tsv").write_text(histogram.to_tsv(args.dmax) + "\n", encoding="utf-8")

    sequences = []
    for path in _case_files(sequences_dir):
        record = json.loads(path.read_text(encoding="utf-8"))
        if record.get("sequence"):
            sequences.append(ActionSequence.from_record(record["sequence"]))
    fragility = analysis.fragility_report(sequences)
    (out / "fragility.tsv").write_text(fragility.to_tsv() + "\n", encoding="utf-8")

    lines = ["case\ttoken_ratio\theight_ratio"]
    token_ratios: list[float] = []
    height_ratios: list[float] = []
    for trace in traces:
        if not trace.succeeded or not trace.steps:
            continue
        first = trace.steps[0].metrics_before
        last = trace.steps[-1].metrics_before
        if first.token_count == 0 or first.height == 0:
            continue
        token_ratio = last.token_count / first.token_count
        height_ratio = last.height / first.height
        token_ratios.append(token_ratio)
        height_ratios.append(height_ratio)
        lines.append(f"{trace.page_id}\t{token_ratio:.4f}\t{height_ratio:.4f}")
    if token_ratios:
        lines.append(
            "mean\t"
            f"{sum(token_ratios) / len(token_ratios):.4f}\t"
            f"{sum(height_ratios) / len(height_ratios):.4f}"
        )
    (out / "compression.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    params = analysis.CostModelParams(
        n_seeds=args.ns,
        t_generate=args.tg if args.tg is not None else args.dmax * args.td,
        t_synthesize=args.ts if args.ts is not None else args.td,
        t_execute=args.te,
        t_direct=args.td,
        d_max=args.dmax,
    )
    try:
        threshold = analysis.breakeven_pages(params)
        breakeven = str(threshold)
    except analysis.NoBreakeven:
        breakeven = "-"
    (out / "breakeven.tsv").write_text(
        "n_seeds\tt_generate\tt_synthesize\tt_execute\tt_direct\tpages\n"
        f"{params.n_seeds}\t{params.t_generate}\t{params.t_synthesize}\t"
        f"{params.t_execute}\t{params.t_direct}\t{breakeven}\n",
        encoding="utf-8",
    )
    print(f"analysis tables written to {out}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    trace = GenerationTrace.from_record(
        json.loads(Path(args.trace).read_text(encoding="utf-8"))
    )
    if not trace.html_path:
        raise DatasetError("trace does not reference its page file")
    page = preprocess(parse_html(Path(trace.html_path).read_text(encoding="utf-8"), trace.page_id))
    if trace.sequence is None:
        raise DatasetError("trace recorded no sequence; nothing to replay")
    result = extract(page, trace.sequence)
    if tuple(result.values) != tuple(trace.final_values):
        _error_record(
            "ReplayMismatch",
            f"recorded {list(trace.final_values)} but re-execution yields {list(result.values)}",
        )
        return 3
    print(f"replay ok: {list(result.values)}")
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    built = fixtures.build_synthetic_corpus(
        args.out, sites=args.sites, pages_per_site=args.pages
    )
    print(f"synthetic corpus written to {built.root}")
    print(f"manifest: {built.manifest_path}")
    print(f"backend config: {built.backend_path}")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="wrapsmith", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build case files from a corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sample", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("generate", help="generate candidate sequences per case")
    p.add_argument("--cases", required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="progressive")
    p.add_argument("--backend", required=True, help="backend config JSON file")
    p.add_argument("--dmax", type=int, default=5)
    p.add_argument("--seeds-per-case", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--judge", choices=[m.value for m in JudgeMode], default="deterministic")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("synthesize", help="choose one sequence per case")
    p.add_argument("--candidates", required=True)
    p.add_argument("--mode", choices=["deterministic", "llm"], default="deterministic")
    p.add_argument("--backend")
    p.add_argument("--gold", action="store_true", help="rank against gold labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("run", help="execute chosen sequences on all case pages")
    p.add_argument("--sequences", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score results and write the report table")
    p.add_argument("--results", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--model", default="-")
    p.add_argument("--method", default="-")
    p.add_argument("--per-case")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="compression, length, fragility, break-even tables")
    p.add_argument("--traces", required=True)
    p.add_argument("--sequences", required=True)
    p.add_argument("--dmax", type=int, default=5)
    p.add_argument("--ns", type=int, default=3)
    p.add_argument("--tg", type=float, default=None, help="per-seed generation time")
    p.add_argument("--ts", type=float, default=None, help="synthesis time")
    p.add_argument("--te", type=float, default=0.0, help="per-page execution time")
    p.add_argument("--td", type=float, default=1.0, help="per-page direct extraction time")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay", help="re-execute a recorded trace without the model")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("corpus", help="build the synthetic offline fixture corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sites", type=int, default=10)
    p.add_argument("--pages", type=int, default=20)
    p.set_defaults(func=cmd_corpus)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _error_record("UsageError", str(exc))
        return 1
    except GatewayError as exc:
        _error_record(type(exc).__name__, str(exc))
        return 2
    except (
        DatasetError,
        DomError,
        ExecutionError,
        TooFewPages,
        NoCandidates,
        FileNotFoundError,
        json.JSONDecodeError,
        ValueError,
    ) as exc:
        _error_record(type(exc).__name__, str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
