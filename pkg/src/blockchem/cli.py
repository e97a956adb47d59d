"""Command-line entry point: one subcommand per pipeline stage.

Data goes to stdout or ``--output``; diagnostics go to stderr. Files are
written to a temporary sibling and renamed into place, so a failed run never
leaves partial output. Exit codes: 0 success, 2 usage, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Sequence, TextIO

from . import __version__
from .datagen import (
    ActivityCliffPair, Task, filter_by_vocab, gen_examples,
    load_templates, mine_cliffs_same_scaffold, mine_pairs_diff_scaffold_same_property,
    multi_property_inputs,
)
from .embed import MODEL_VERSION
from .evaluation import Alternative, batch_evaluate
from .molgraph import (
    CorpusRecord, SmilesError, StereoStrippedWarning, iter_corpus, parse_smiles, read_corpus,
    write_smiles,
)
from .oracle import (
    ADMET_PROPERTIES, TABLE_VERSION, ContributionTable, Oracle, PropertyKind, PropertyRecord,
    load_records,
)
from .reason import (
    Objective, RefinementError, RefinementTrace, modification_frequencies, refine, refine_sequential,
)
from .scaffold import FragmentSetError, scaffold_key
from .tokenizer import (
    DEFAULT_MIN_BLOCK_SIZE, JunctionError, TokenizationResult, load_conflict_rules, reassemble_result,
    tokenize,
)
from .vocab import FORMAT_VERSION, Vocabulary, build_vocab, vocab_stats

log = logging.getLogger("blockchem")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 2, 3, 4
LOG_ENV = "BLOCKCHEM_LOG"
# below this many records a process pool costs more than it saves
PARALLEL_THRESHOLD = 2000


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------

@contextmanager
def open_output(path: str | None, stdout: TextIO) -> Iterator[TextIO]:
    """Write to stdout, or atomically to ``path`` via a temporary file."""
    if path is None or path == "-":
        yield stdout
        stdout.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def read_lines(path: str, stdin: TextIO) -> list[str]:
    if path == "-":
        return stdin.read().splitlines()
    return Path(path).read_text(encoding="utf-8").splitlines()


def _report_skipped(kind: str, diags: Sequence, stderr: TextIO) -> None:
    for d in diags:
        print(f"warning: {d}", file=stderr)
    if diags:
        print(f"{len(diags)} {kind} skipped", file=stderr)


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map; uses worker processes only for large inputs."""
    if workers > 1 and len(items) >= PARALLEL_THRESHOLD:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (workers * 8))))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _tokenize_one(job: tuple[CorpusRecord, str | None, int, bool]) -> tuple[int, dict | None, str | None]:
    rec, rules_path, min_size, synth_only = job
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StereoStrippedWarning)
            g = parse_smiles(rec.smiles)
        rules = load_conflict_rules(rules_path) if rules_path else None
        result = tokenize(g, rules, min_block_size=min_size, synth_only=synth_only)
        record = result.to_record()
        if rec.identifier:
            record["id"] = rec.identifier
        return rec.line_no, record, None
    except SmilesError as exc:
        return rec.line_no, None, f"line {rec.line_no}:{exc.offset}: {exc.reason}"
    except FragmentSetError as exc:
        return rec.line_no, None, f"line {rec.line_no}: {exc}"


def cmd_tokenize(args, stdin, stdout, stderr) -> int:
    if args.conflict_rules:
        load_conflict_rules(args.conflict_rules)  # validate before work begins
    records = list(iter_corpus(read_lines(args.input, stdin)))
    jobs = [(r, args.conflict_rules, args.min_block_size, args.synth_only) for r in records]
    results = _pmap(_tokenize_one, jobs, args.workers)
    diags = [err for _, _, err in results if err]
    with open_output(args.output, stdout) as out:
        for _, record, _ in results:
            if record is not None:
                out.write(json.dumps(record, sort_keys=True) + "\n")
    _report_skipped("records", diags, stderr)
    return EXIT_OK


def cmd_detokenize(args, stdin, stdout, stderr) -> int:
    diags = []
    with open_output(args.output, stdout) as out:
        for no, line in enumerate(read_lines(args.input, stdin), 1):
            if not line.strip():
                continue
            try:
                result = TokenizationResult.from_record(json.loads(line))
                out.write(write_smiles(reassemble_result(result)) + "\n")
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                diags.append(f"line {no}: {exc}")
    _report_skipped("records", diags, stderr)
    return EXIT_OK


def _load_results(path: str, stdin) -> list[TokenizationResult]:
    out = []
    for no, line in enumerate(read_lines(path, stdin), 1):
        if line.strip():
            try:
                out.append(TokenizationResult.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataError(f"{path}: line {no}: {exc}") from exc
    return out


def cmd_vocab(args, stdin, stdout, stderr) -> int:
    if args.vocab_cmd == "build":
        results = []
        for path in args.inputs:
            results.extend(_load_results(path, stdin))
        v = build_vocab(results, args.cap, args.mid)
        with open_output(args.output, stdout) as out:
            out.write(v.to_jsonl())
        print(f"vocabulary: {len(v)} blocks from {len(results)} molecules", file=stderr)
    else:
        v = Vocabulary.load(args.vocab)
        with open_output(args.output, stdout) as out:
            out.write(vocab_stats(v))
    return EXIT_OK


def _scaffold_one(rec: CorpusRecord) -> tuple[str | None, str | None]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StereoStrippedWarning)
            g = parse_smiles(rec.smiles)
        return f"{rec.smiles}\t{scaffold_key(g).canonical_form}", None
    except SmilesError as exc:
        return None, f"line {rec.line_no}:{exc.offset}: {exc.reason}"
    except FragmentSetError as exc:
        return None, f"line {rec.line_no}: {exc}"


def cmd_scaffold(args, stdin, stdout, stderr) -> int:
    records = list(iter_corpus(read_lines(args.input, stdin)))
    results = _pmap(_scaffold_one, records, args.workers)
    with open_output(args.output, stdout) as out:
        for line, _ in results:
            if line is not None:
                out.write(line + "\n")
    _report_skipped("records", [e for _, e in results if e], stderr)
    return EXIT_OK


def _read_records(path: str, stderr) -> list[PropertyRecord]:
    records, diags = load_records(path)
    _report_skipped("records", diags, stderr)
    return records


def _mine(records, relation: str, fan_out, allow_empty) -> list[ActivityCliffPair]:
    pairs = []
    if relation in ("same", "all"):
        pairs.extend(mine_cliffs_same_scaffold(records, allow_empty_scaffold=allow_empty))
    if relation in ("diff", "all"):
        nominal = [r for r in records if r.kind is PropertyKind.NOMINAL]
        pairs.extend(mine_pairs_diff_scaffold_same_property(nominal, fan_out=fan_out))
    return sorted(pairs)


def cmd_cliffs(args, stdin, stdout, stderr) -> int:
    records = _read_records(args.records, stderr)
    pairs = _mine(records, args.relation, args.fan_out, args.allow_empty_scaffold)
    with open_output(args.output, stdout) as out:
        for p in pairs:
            out.write(json.dumps(p.to_json(), sort_keys=True) + "\n")
    return EXIT_OK


def _relabel(records: list[PropertyRecord], table: ContributionTable, props: list[str]) -> list[PropertyRecord]:
    oracle = Oracle(table)
    molecules = sorted({r.molecule for r in records})
    out = []
    for m in molecules:
        g = parse_smiles(m)
        for p in props:
            out.append(PropertyRecord(m, p, oracle.label(g, p), PropertyKind.NOMINAL))
    return out


def cmd_datagen(args, stdin, stdout, stderr) -> int:
    templates = load_templates(args.templates)
    records = _read_records(args.records, stderr)
    if args.property:
        records = [r for r in records if r.property == args.property.upper()]
    if args.label_source == "oracle":
        if not args.contributions:
            raise _UsageError("--label-source oracle needs --contributions")
        table = ContributionTable.load(args.contributions)
        props = [args.property.upper()] if args.property else sorted({r.property for r in records})
        records = _relabel(records, table, props)
    task = Task(args.task)
    if task in (Task.CLASSIFICATION, Task.PROPERTY_TO_MOLECULE, Task.SCAFFOLD_PROPERTY_TO_MOLECULE):
        inputs = [r for r in records if r.kind is PropertyKind.NOMINAL]
        if task is not Task.CLASSIFICATION:
            inputs = [r for r in inputs if r.value == 1]
    elif task is Task.REGRESSION:
        inputs = [r for r in records if r.kind is PropertyKind.NUMERICAL]
    elif task is Task.MULTI_PROPERTY_TO_MOLECULE:
        inputs = multi_property_inputs(records)
    elif task is Task.MOLECULE_GENERATION:
        inputs = list(dict.fromkeys(r.molecule for r in records))
    elif task is Task.POS_NEG_SAME_SCAFFOLD:
        inputs = [p for p in _mine(records, "same", None, args.allow_empty_scaffold)
                  if p.relation.value == "SameScaffoldOppositeLabel"]
    else:
        inputs = _mine(records, "diff", args.fan_out, False)
    examples, diags = gen_examples(task, inputs, templates, seed=args.seed,
                                   source=args.source or Path(args.records).stem)
    if args.vocab:
        before = len(examples)
        examples = filter_by_vocab(examples, Vocabulary.load(args.vocab))
        print(f"vocabulary filter kept {len(examples)} of {before} examples", file=stderr)
    with open_output(args.output, stdout) as out:
        for ex in examples:
            out.write(json.dumps(ex.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    _report_skipped("inputs", diags, stderr)
    return EXIT_OK


def cmd_oracle(args, stdin, stdout, stderr) -> int:
    table = ContributionTable.load(args.contributions)
    model = table[args.property]
    oracle = Oracle(table)
    good, bad = read_corpus(read_lines(args.input, stdin))
    diags = [str(d) for d in bad]
    with open_output(args.output, stdout) as out:
        for rec, g in good:
            try:
                score = oracle.score(g, args.property)
            except FragmentSetError as exc:
                diags.append(f"line {rec.line_no}: {exc}")
                continue
            out.write(f"{rec.smiles}\t{score!r}\t{int(score >= model.threshold)}\n")
    _report_skipped("records", diags, stderr)
    return EXIT_OK


def cmd_refine(args, stdin, stdout, stderr) -> int:
    objectives = [Objective.parse(o) for o in args.objective]
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
        if len(weights) != len(objectives):
            raise _UsageError("--weights needs one weight per --objective")
        objectives = [Objective(o.property, o.direction, w) for o, w in zip(objectives, weights)]
    table = ContributionTable.load(args.contributions)
    for o in objectives:
        table[o.property]
    v = Vocabulary.load(args.vocab)
    oracle = Oracle(table)
    if args.smiles:
        molecules = [CorpusRecord(0, args.smiles, None)]
    elif args.input:
        molecules = list(iter_corpus(read_lines(args.input, stdin)))
    else:
        raise _UsageError("refine needs --smiles or --input")
    diags, pairs = [], []
    with open_output(args.output, stdout) as out:
        for k, rec in enumerate(molecules):
            try:
                g = parse_smiles(rec.smiles)
                if args.min_blocks > 1 and len(tokenize(g).blocks) < args.min_blocks:
                    continue
                if args.weights or len(objectives) == 1:
                    traces = [refine(g, objectives, oracle, v, args.max_iter, args.epsilon)]
                else:
                    traces = refine_sequential(g, objectives, oracle, v, args.max_iter, args.epsilon)
            except (SmilesError, FragmentSetError, RefinementError, JunctionError) as exc:
                diags.append(f"molecule {k} ({rec.smiles}): {exc}")
                continue
            for r, trace in enumerate(traces):
                out.write(json.dumps({"molecule": k, "round": r, **trace.to_json()}, sort_keys=True) + "\n")
            pairs.append((traces[0].initial, traces[-1].final))
    if args.pairs_out:
        with open_output(args.pairs_out, stdout) as out:
            for before, after in pairs:
                out.write(f"{before}\t{after}\n")
    _report_skipped("molecules", diags, stderr)
    return EXIT_OK


def cmd_modfreq(args, stdin, stdout, stderr) -> int:
    traces = []
    for path in args.traces:
        for no, line in enumerate(read_lines(path, stdin), 1):
            if line.strip():
                try:
                    traces.append(RefinementTrace.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise DataError(f"{path}: line {no}: {exc}") from exc
    rows = modification_frequencies(traces)
    if args.top:
        rows = rows[:args.top]
    with open_output(args.output, stdout) as out:
        out.write("old_block\tnew_block\tcount\n")
        for old, new, n in rows:
            out.write(f"{old}\t{new}\t{n}\n")
    return EXIT_OK


def cmd_eval(args, stdin, stdout, stderr) -> int:
    pairs = []
    for no, line in enumerate(read_lines(args.pairs, stdin), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise DataError(f"{args.pairs}: line {no}: expected before<TAB>after")
        pairs.append((parts[0].strip(), parts[1].strip()))
    if not pairs:
        raise DataError("no pairs to evaluate")
    props = [p.strip() for p in args.properties.split(",")] if args.properties else list(ADMET_PROPERTIES)
    table = ContributionTable.load(args.contributions)
    report = batch_evaluate(pairs, Oracle(table), props, alternative=args.alternative)
    with open_output(args.output, stdout) as out:
        out.write(report.to_tsv() if args.format == "tsv" else report.to_text())
    if args.tsv_out:
        with open_output(args.tsv_out, stdout) as out:
            out.write(report.to_tsv())
    _report_skipped("pairs", report.diagnostics, stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def version_text() -> str:
    return (f"blockchem {__version__} (vocab format {FORMAT_VERSION}, encoder format {MODEL_VERSION}, "
            f"contribution format {TABLE_VERSION})")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blockchem", description="Building-block tokenization and refinement pipeline.")
    p.add_argument("--version", action="version", version=version_text())
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes for large inputs")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_io(sp, has_input=True):
        if has_input:
            sp.add_argument("input", nargs="?", default="-", help="input file ('-' for stdin)")
        sp.add_argument("-o", "--output", help="output file (default stdout)")
        return sp

    t = with_io(sub.add_parser("tokenize", help="corpus lines -> JSONL tokenizations"))
    t.add_argument("--min-block-size", type=int, default=DEFAULT_MIN_BLOCK_SIZE)
    t.add_argument("--conflict-rules", help="conflict rule JSON (default: bundled rules)")
    t.add_argument("--synth-only", action="store_true", help="no rule-based fallback")

    with_io(sub.add_parser("detokenize", help="JSONL tokenizations -> SMILES"))

    v = sub.add_parser("vocab", help="build or inspect a block vocabulary")
    vsub = v.add_subparsers(dest="vocab_cmd", required=True, parser_class=_Parser)
    vb = vsub.add_parser("build")
    vb.add_argument("inputs", nargs="+", help="tokenized JSONL file(s), shards merged")
    vb.add_argument("--cap", type=int, default=500)
    vb.add_argument("--mid", type=int, default=500)
    vb.add_argument("-o", "--output")
    vs = vsub.add_parser("stats")
    vs.add_argument("vocab")
    vs.add_argument("-o", "--output")

    with_io(sub.add_parser("scaffold", help="corpus lines -> SMILES<TAB>scaffold"))

    c = sub.add_parser("cliffs", help="mine activity-cliff pairs from records")
    c.add_argument("--records", required=True)
    c.add_argument("--relation", choices=("same", "diff", "all"), default="all")
    c.add_argument("--fan-out", type=int)
    c.add_argument("--allow-empty-scaffold", action="store_true")
    c.add_argument("-o", "--output")

    d = sub.add_parser("datagen", help="generate instruction examples")
    d.add_argument("--task", required=True, choices=[t.value for t in Task])
    d.add_argument("--records", required=True)
    d.add_argument("--templates", help="template JSON (default: bundled)")
    # SUPPRESS keeps a top-level --seed from being reset by this default
    d.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    d.add_argument("--property")
    d.add_argument("--vocab", help="keep only examples whose blocks are in this vocabulary")
    d.add_argument("--label-source", choices=("data", "oracle"), default="data")
    d.add_argument("--contributions")
    d.add_argument("--fan-out", type=int, default=5)
    d.add_argument("--allow-empty-scaffold", action="store_true")
    d.add_argument("--source")
    d.add_argument("-o", "--output")

    o = sub.add_parser("oracle", help="surrogate property oracle")
    osub = o.add_subparsers(dest="oracle_cmd", required=True, parser_class=_Parser)
    op = with_io(osub.add_parser("predict"))
    op.add_argument("--property", required=True)
    op.add_argument("--contributions", required=True)

    r = sub.add_parser("refine", help="iterative block-level refinement")
    r.add_argument("--smiles")
    r.add_argument("--input", help="corpus file of molecules to refine")
    r.add_argument("--objective", action="append", required=True, help="PROP:max|min[:weight], repeatable")
    r.add_argument("--weights", help="comma-separated weights: optimize all objectives at once")
    r.add_argument("--vocab", required=True)
    r.add_argument("--contributions", required=True)
    r.add_argument("--max-iter", type=int, default=10)
    r.add_argument("--epsilon", type=float, default=1e-9)
    r.add_argument("--min-blocks", type=int, default=1, help="skip molecules with fewer blocks")
    r.add_argument("--pairs-out", help="write before<TAB>after pairs for eval")
    r.add_argument("-o", "--output")

    m = sub.add_parser("modfreq", help="rank accepted block replacements")
    m.add_argument("traces", nargs="+")
    m.add_argument("--top", type=int)
    m.add_argument("-o", "--output")

    e = sub.add_parser("eval", help="before/after Wilcoxon report")
    e.add_argument("--pairs", required=True, help="TSV before<TAB>after")
    e.add_argument("--properties", help="comma-separated (default: the six ADMET properties)")
    e.add_argument("--contributions", required=True)
    e.add_argument("--alternative", choices=[a.value for a in Alternative], default="two-sided")
    e.add_argument("--format", choices=("text", "tsv"), default="text")
    e.add_argument("--tsv-out")
    e.add_argument("-o", "--output")
    return p


COMMANDS = {
    "tokenize": cmd_tokenize, "detokenize": cmd_detokenize, "vocab": cmd_vocab, "scaffold": cmd_scaffold,
    "cliffs": cmd_cliffs, "datagen": cmd_datagen, "oracle": cmd_oracle, "refine": cmd_refine,
    "modfreq": cmd_modfreq, "eval": cmd_eval,
}


def run(argv: Sequence[str] | None = None, stdin: TextIO | None = None, stdout: TextIO | None = None,
        stderr: TextIO | None = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(), stream=stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    if args.workers < 1:
        print("blockchem: error: --workers must be >= 1", file=stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, stdin, stdout, stderr)
    except _UsageError as exc:
        print(f"{parser.format_usage()}blockchem: error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"blockchem: I/O error: {exc}", file=stderr)
        return EXIT_IO
    except (DataError, ValueError, KeyError) as exc:
        print(f"blockchem: data error: {exc}", file=stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
