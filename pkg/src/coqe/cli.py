"""Command-line entry point: ``coqe {stats,augment,render,decode,eval,errors}``.

Settings resolve as flags > ``--config`` JSON file > built-in defaults. The
effective configuration is written into every output file: as a leading
``{"_header": ...}`` line for JSON Lines, or a ``config`` key for JSON.

Exit codes: 0 success, 1 input error, 2 generator or protocol error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from .augment import DEFAULT_ORDERS, augment_corpus, render_corpus
from .corpus import Corpus, CorpusError, Quintuple, corpus_stats, get_scheme, iter_jsonl, load_corpus
from .decoding import CorruptionConfig, GeneratorError, external_generator
from .metrics import ALL_MODES, EvaluationError, MatchMode, evaluate
from .pipeline import decode_corpus, reference_factory, shared_factory
from .postprocess import ERROR_KINDS, ErrorReport
from .template import ElementOrder, all_orders, style_for

log = logging.getLogger("coqe")

EXIT_OK, EXIT_INPUT, EXIT_GENERATOR = 0, 1, 2


@dataclass
class RunConfig:
    scheme: str = "camera"
    split: str = "unsplit"
    orders: str = "default"
    single_tasks: bool = True
    style: str = "prefix"
    language: str = "en"
    generator: str = "oracle"
    endpoint: Optional[str] = None
    mode: str = "step"
    timeout: float = 30.0
    max_len: int = 256
    seed: Optional[int] = None
    drop: float = 0.0
    swap: float = 0.0
    substitute: float = 0.0
    truncate: float = 0.0
    modes: str = ",".join(m.name for m in ALL_MODES)
    format: str = "json"

    def noise(self) -> CorruptionConfig:
        return CorruptionConfig(self.drop, self.swap, self.substitute, self.truncate)

    def prompt_style(self):
        return style_for(self.style, self.language)


class InputError(Exception):
    pass


def resolve_orders(text: str) -> list[ElementOrder]:
    text = text.strip()
    if text == "default":
        return list(DEFAULT_ORDERS)
    if text == "all":
        return all_orders()
    if text.isdigit():
        k = int(text)
        pool = list(DEFAULT_ORDERS) + [o for o in all_orders() if o not in DEFAULT_ORDERS]
        if not 1 <= k <= len(pool):
            raise InputError(f"--orders count must be within 1..{len(pool)}")
        return pool[:k]
    try:
        return [ElementOrder.parse(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def resolve_modes(text: str) -> list[MatchMode]:
    """Accept ``E-Q5,B-Q4`` or letter/arity shorthands like ``E,P,B`` (both arities)."""
    modes = []
    for part in (p.strip().upper() for p in text.split(",") if p.strip()):
        try:
            if "-" in part:
                modes.append(MatchMode.parse(part))
            elif part in ("Q4", "Q5"):
                modes.extend(m for m in ALL_MODES if m.arity == part)
            else:
                modes.extend(MatchMode.parse(f"{part}-{a}") for a in ("Q5", "Q4"))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    return list(dict.fromkeys(modes))


def build_config(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_values) - set(values)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values)


def _load(path: str, cfg: RunConfig) -> Corpus:
    try:
        scheme = get_scheme(cfg.scheme)
        with open(path, "rb") as fh:
            return load_corpus(fh, scheme, cfg.split)
    except OSError as exc:
        raise InputError(f"cannot read corpus {path}: {exc}") from None
    except (CorpusError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


@contextmanager
def _sink(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _header(command: str, cfg: RunConfig, args) -> dict:
    return {"command": command, "config": asdict(cfg),
            "inputs": {k: getattr(args, k) for k in ("corpus", "predictions") if getattr(args, k, None)}}


def _write_jsonl(path, header: dict, rows) -> int:
    n = 0
    with _sink(path) as out:
        out.write(json.dumps({"_header": header}, ensure_ascii=False) + "\n")
        for row in rows:
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
            n += 1
    return n


def _emit(args, cfg: RunConfig, header: dict, payload: dict, table: str) -> None:
    doc = {**payload, "config": header}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    if cfg.format == "table":
        print(table)
    elif not args.out:
        print(json.dumps(doc, ensure_ascii=False, indent=2))


# --- commands --------------------------------------------------------------------

def cmd_stats(args, cfg: RunConfig) -> int:
    corpus = _load(args.corpus, cfg)
    report = corpus_stats(corpus)
    _emit(args, cfg, _header("stats", cfg, args), report.to_json(), report.table())
    return EXIT_OK


def cmd_augment(args, cfg: RunConfig) -> int:
    corpus = _load(args.corpus, cfg)
    orders = resolve_orders(cfg.orders)
    style = cfg.prompt_style()
    if cfg.split in ("dev", "test"):
        examples = render_corpus(corpus, style=style)
    else:
        examples = augment_corpus(corpus, orders, cfg.single_tasks, style)
    n = _write_jsonl(args.out, _header("augment", cfg, args), (e.to_json() for e in examples))
    log.info("wrote %d examples", n)
    return EXIT_OK


def cmd_render(args, cfg: RunConfig) -> int:
    corpus = _load(args.corpus, cfg)
    orders = resolve_orders(cfg.orders)
    examples = render_corpus(corpus, orders[0], cfg.prompt_style())
    _write_jsonl(args.out, _header("render", cfg, args), (e.to_json() for e in examples))
    return EXIT_OK


def cmd_decode(args, cfg: RunConfig) -> int:
    corpus = _load(args.corpus, cfg)
    if cfg.generator in ("oracle", "corrupt"):
        if cfg.generator == "corrupt" and cfg.seed is None:
            raise InputError("--seed is required for the corrupting generator")
        factory = reference_factory(cfg.generator, cfg.noise(), cfg.seed or 0)
        preds = decode_corpus(corpus, factory, corpus.scheme, cfg.prompt_style(), cfg.mode, cfg.max_len)
    elif cfg.generator == "external":
        if not cfg.endpoint:
            raise InputError("--endpoint is required for the external generator")
        try:
            gen = external_generator(cfg.endpoint, cfg.mode, cfg.timeout)
        except GeneratorError as exc:
            log.error("generator unavailable: %s", exc)
            preds = decode_corpus(corpus, shared_factory(_Unavailable(str(exc))), corpus.scheme,
                                  cfg.prompt_style(), cfg.mode, cfg.max_len)
        else:
            with gen:
                preds = decode_corpus(corpus, shared_factory(gen), corpus.scheme,
                                      cfg.prompt_style(), cfg.mode, cfg.max_len)
    else:
        raise InputError(f"unknown generator {cfg.generator!r}")

    gold_counts = {it.id: len(it.quintuples) for it in corpus}
    rows = []
    for p in preds:
        row = p.to_json()
        row["gold_tuples"] = gold_counts[p.sentence_id]
        rows.append(row)
        if p.failed:
            log.error("sentence %s failed: %s", p.sentence_id, p.failure)
    _write_jsonl(args.out, _header("decode", cfg, args), rows)
    return EXIT_GENERATOR if any(p.failed for p in preds) else EXIT_OK


class _Unavailable:
    def __init__(self, reason: str):
        self.reason = reason

    def step(self, *a):
        raise GeneratorError(self.reason)

    def generate(self, *a):
        raise GeneratorError(self.reason)


def read_predictions(path: str) -> list[dict]:
    try:
        with open(path, "rb") as fh:
            return [obj for _, obj in iter_jsonl(fh) if not (isinstance(obj, dict) and "_header" in obj)]
    except OSError as exc:
        raise InputError(f"cannot read predictions {path}: {exc}") from None
    except CorpusError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_eval(args, cfg: RunConfig) -> int:
    corpus = _load(args.corpus, cfg)
    modes = resolve_modes(cfg.modes)
    predictions = {}
    for k, row in enumerate(read_predictions(args.predictions), start=1):
        try:
            sid = row["id"]
            predictions[sid] = [Quintuple.from_json(q) for q in row.get("quintuples", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.predictions}: prediction {k}: {exc}") from None
    try:
        report = evaluate(corpus, predictions, modes)
    except EvaluationError as exc:
        raise InputError(str(exc)) from None
    _emit(args, cfg, _header("eval", cfg, args), report.to_json(), report.table())
    return EXIT_OK


def aggregate_errors(rows: list[dict]) -> tuple[ErrorReport, dict]:
    total = ErrorReport()
    comparative = 0
    comparative_with: Counter = Counter()
    for k, row in enumerate(rows, start=1):
        try:
            rep = ErrorReport.from_json(row["errors"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"prediction {k}: bad 'errors' field: {exc}") from None
        observed = len(row.get("diagnostics", []))
        if rep.diagnostics != observed:
            raise InputError(f"prediction {k}: error counts ({rep.diagnostics}) disagree "
                             f"with {observed} recorded diagnostics")
        total.merge(rep)
        if row.get("gold_tuples", 0) > 0:
            comparative += 1
            comparative_with.update(kind for kind in ERROR_KINDS if rep.counts[kind])
    attribution = {k: (comparative_with[k] / comparative if comparative else 0.0) for k in ERROR_KINDS}
    return total, {"comparative_sentences": comparative, "attribution": attribution}


def cmd_errors(args, cfg: RunConfig) -> int:
    rows = read_predictions(args.predictions)
    total, extra = aggregate_errors(rows)
    payload = {**total.to_json(), **extra, "failed": sum(1 for r in rows if r.get("failed"))}
    _emit(args, cfg, _header("errors", cfg, args), payload, total.table())
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "augment": cmd_augment,
    "render": cmd_render,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "errors": cmd_errors,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _bool_flag(p: argparse.ArgumentParser, name: str, help: str) -> None:
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action="store_true", default=None, help=help)
    p.add_argument(f"--no-{name}", dest=name.replace("-", "_"), action="store_false")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    # defaults stay None so that config-file values are not masked
    common.add_argument("--corpus")
    common.add_argument("--predictions")
    common.add_argument("--scheme", choices=["camera", "vcom"])
    common.add_argument("--split", choices=["train", "dev", "test", "unsplit"])
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--orders", help="'default', 'all', a count, or e.g. SOAP,OAPS")
    common.add_argument("--style", choices=["prefix", "suffix"])
    common.add_argument("--language", choices=["en", "vi"])
    common.add_argument("--generator", choices=["oracle", "corrupt", "external"])
    common.add_argument("--endpoint", help="tcp://HOST:PORT or a command line")
    common.add_argument("--mode", choices=["step", "free"])
    common.add_argument("--timeout", type=float)
    common.add_argument("--max-len", dest="max_len", type=int)
    common.add_argument("--modes", help="e.g. E,P,B or E-Q5,B-Q4")
    common.add_argument("--format", choices=["json", "table"])
    for kind in ("drop", "swap", "substitute", "truncate"):
        common.add_argument(f"--{kind}", type=float, help=f"{kind} corruption probability")
    _bool_flag(common, "single-tasks", "add single-element extraction tasks (augment)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="coqe", description="Comparative quintuple extraction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__name__.replace("cmd_", ""))
    return parser


REQUIRED = {
    "stats": ("corpus",),
    "augment": ("corpus",),
    "render": ("corpus",),
    "decode": ("corpus",),
    "eval": ("corpus", "predictions"),
    "errors": ("predictions",),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    missing = [f"--{k}" for k in REQUIRED[args.command] if not getattr(args, k)]
    if missing:
        parser.error(f"{args.command} requires {', '.join(missing)}")
    try:
        cfg = build_config(args)
        cfg.noise()
        return COMMANDS[args.command](args, cfg)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
