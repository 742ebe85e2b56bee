"""Command-line driver: pipeline stages, a chat REPL, and the server.

Stages pass work between each other as newline-delimited JSON files:
crawl writes fetched pages, clean writes structured articles, annotate
fills the record journal, convert writes the knowledge file.  `all` runs
the four in order.  Exit codes: 0 clean run, 1 stage failure, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path

from .aiml import (
    KnowledgeBase,
    default_greetings,
    load_knowledge_file,
    normalize,
    render,
    serialize_knowledge,
)
from .converter import DISEASE_TAG, TemplateBank, convert_all, default_bank
from .crawler import ERROR, CrawlConfig, CrawlLogWriter, FetchedPage, crawl
from .emotion import classify_emotion
from .preprocess import (
    Gazetteer,
    Ontology,
    annotate,
    default_gazetteer,
    default_ontology,
)
from .repository import Repository, record_from
from .service import ServiceConfig, build_app, build_portal
from .wrapper import CleanedNews, CleaningFailed, clean


@dataclass
class PipelineRun:
    """What each executed stage did: item counts and soft error counts."""

    stage: str
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    errors: dict[str, int] = field(default_factory=dict)

    def note(self, stage: str, *, errors: int = 0, **counts: int) -> None:
        self.counts[stage] = dict(counts)
        self.errors[stage] = errors

    def summary_lines(self) -> list[str]:
        lines = []
        for stage, counts in self.counts.items():
            pairs = " ".join(f"{key}={value}" for key, value in counts.items())
            lines.append(f"{stage}: {pairs} errors={self.errors[stage]}")
        return lines

    def to_json(self) -> dict:
        return {"stage": self.stage, "counts": self.counts, "errors": self.errors}


def _page_to_json(page: FetchedPage) -> str:
    return json.dumps(
        {
            "url": page.url,
            "depth": page.depth,
            "status": page.status,
            "content_type": page.content_type,
            "body": page.body,
            "fetched_at": page.fetched_at,
        },
        ensure_ascii=False,
    )


def _page_from_json(line: str) -> FetchedPage:
    raw = json.loads(line)
    return FetchedPage(
        url=raw["url"],
        depth=raw["depth"],
        status=raw["status"],
        content_type=raw["content_type"],
        body=raw["body"],
        fetched_at=raw["fetched_at"],
    )


def _article_to_json(article: CleanedNews) -> str:
    return json.dumps(
        {
            "title": article.title,
            "url": article.url,
            "date": article.date.isoformat(),
            "content": article.content,
            "date_guessed": article.date_guessed,
        },
        ensure_ascii=False,
    )


def _article_from_json(line: str) -> CleanedNews:
    raw = json.loads(line)
    return CleanedNews(
        title=raw["title"],
        url=raw["url"],
        date=dt.date.fromisoformat(raw["date"]),
        content=raw["content"],
        date_guessed=raw["date_guessed"],
    )


def _read_ndjson(path, parser) -> list:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                items.append(parser(line))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: unreadable line: {exc}") from None
    return items


@dataclass
class _Tools:
    """Everything a pipeline invocation needs, resolved and validated."""

    crawl_config: CrawlConfig | None = None
    ontology: Ontology | None = None
    gazetteer: Gazetteer | None = None
    bank: TemplateBank | None = None
    pages_path: Path | None = None
    cleaned_path: Path | None = None
    repo_path: Path | None = None
    kb_path: Path | None = None
    crawl_log_path: Path | None = None


def _prepare(args) -> _Tools:
    """Load and validate configuration; raises ValueError or OSError."""
    tools = _Tools()
    tools.ontology = (
        Ontology.from_file(args.ontology) if getattr(args, "ontology", None)
        else default_ontology()
    )
    if getattr(args, "gazetteer", None):
        tools.gazetteer = Gazetteer.from_file(args.gazetteer, tools.ontology)
    elif args.stage in ("annotate", "all"):
        tools.gazetteer = default_gazetteer()
    if getattr(args, "templates", None):
        tools.bank = TemplateBank.from_file(args.templates)
    elif args.stage in ("convert", "all"):
        tools.bank = default_bank()
    if args.stage in ("crawl", "all"):
        tools.crawl_config = CrawlConfig.from_file(args.config)
    if getattr(args, "log", None):
        tools.crawl_log_path = Path(args.log)

    if args.stage == "all":
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        tools.pages_path = out_dir / "pages.ndjson"
        tools.cleaned_path = out_dir / "cleaned.ndjson"
        tools.repo_path = Path(args.repo) if args.repo else out_dir / "repository.ndjson"
        tools.kb_path = Path(args.kb) if args.kb else out_dir / "kb.aiml"
    else:
        if args.stage == "crawl":
            tools.pages_path = Path(args.out)
        if args.stage == "clean":
            tools.pages_path = Path(args.input)
            tools.cleaned_path = Path(args.out)
        if args.stage == "annotate":
            tools.cleaned_path = Path(args.input)
            tools.repo_path = Path(args.repo)
        if args.stage == "convert":
            tools.repo_path = Path(args.repo)
            tools.kb_path = Path(args.kb)
    return tools


def _stage_crawl(tools: _Tools, run: PipelineRun) -> None:
    errors = 0
    fetched = 0
    with ExitStack() as stack:
        writer = None
        if tools.crawl_log_path is not None:
            writer = stack.enter_context(CrawlLogWriter(tools.crawl_log_path))

        def log(entry) -> None:
            nonlocal errors
            if entry.outcome == ERROR:
                errors += 1
            if writer is not None:
                writer(entry)

        out = stack.enter_context(open(tools.pages_path, "w", encoding="utf-8"))
        for page in crawl(tools.crawl_config, log=log):
            out.write(_page_to_json(page) + "\n")
            fetched += 1
    run.note("crawl", pages=fetched, errors=errors)


def _stage_clean(tools: _Tools, run: PipelineRun) -> None:
    pages = _read_ndjson(tools.pages_path, _page_from_json)
    cleaned = 0
    errors = 0
    with open(tools.cleaned_path, "w", encoding="utf-8") as out:
        for page in pages:
            try:
                article = clean(page)
            except CleaningFailed as exc:
                print(f"clean: skipping {exc.url}: {exc.reason}", file=sys.stderr)
                errors += 1
                continue
            out.write(_article_to_json(article) + "\n")
            cleaned += 1
    run.note("clean", pages=len(pages), articles=cleaned, errors=errors)


def _stage_annotate(tools: _Tools, run: PipelineRun) -> None:
    articles = _read_ndjson(tools.cleaned_path, _article_from_json)
    records = [
        record_from(annotate(a, gazetteer=tools.gazetteer, ontology=tools.ontology))
        for a in articles
    ]
    with Repository(tools.repo_path) as repo:
        outcomes = repo.insert_all(records)
    run.note("annotate", **outcomes)


def _stage_convert(tools: _Tools, run: PipelineRun) -> None:
    # Repository would silently treat a missing journal as empty.
    if not tools.repo_path.exists():
        raise FileNotFoundError(f"no record journal at {tools.repo_path}")
    with Repository(tools.repo_path) as repo:
        records = repo.query()
    categories = convert_all(records, tools.bank, tools.ontology)
    tools.kb_path.write_text(serialize_knowledge(categories), encoding="utf-8")
    skipped = sum(
        1 for r in records if all(e.tag != DISEASE_TAG for e in r.entities)
    )
    run.note("convert", records=len(records), categories=len(categories), errors=skipped)


_STAGES = {
    "crawl": (_stage_crawl,),
    "clean": (_stage_clean,),
    "annotate": (_stage_annotate,),
    "convert": (_stage_convert,),
    "all": (_stage_crawl, _stage_clean, _stage_annotate, _stage_convert),
}


def _cmd_pipeline(args) -> int:
    try:
        tools = _prepare(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run = PipelineRun(stage=args.stage)
    code = 0
    try:
        for stage in _STAGES[args.stage]:
            stage(tools, run)
    except Exception as exc:
        print(f"{args.stage} failed: {exc}", file=sys.stderr)
        code = 1
    if args.json:
        print(json.dumps(run.to_json()))
    else:
        for line in run.summary_lines():
            print(line)
    return code


def _cmd_repl(args) -> int:
    try:
        categories = load_knowledge_file(args.kb)
    except (OSError, ValueError) as exc:
        print(f"cannot load knowledge: {exc}", file=sys.stderr)
        return 1
    kb = KnowledgeBase()
    kb.add_all(default_greetings())
    kb.add_all(categories)
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            print("> ", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        tokens = normalize(line)
        result = kb.match(tokens) if tokens else None
        response = render(result, kb.fallback)
        cue = response.cue or classify_emotion(line) or classify_emotion(response.text)
        print(response.text)
        if cue is not None:
            print(f"[cue: {cue}]")
        if response.push is not None:
            print(f"[open: {response.push.url}]")
    return 0


def _cmd_serve(args) -> int:
    try:
        config = ServiceConfig.from_file(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    import uvicorn

    app = build_app(build_portal(config))
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisisbot",
        description="Crawl crisis news, build the answer knowledge, chat, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=_cmd_pipeline, stage=name)
        p.add_argument("--json", action="store_true", help="machine-readable summary")
        p.add_argument("--ontology", help="ontology JSON file (default: built-in)")
        return p

    p = pipeline("crawl", "fetch pages breadth-first into a pages file")
    p.add_argument("--config", required=True, help="crawl config JSON")
    p.add_argument("--out", required=True, help="pages file to write")
    p.add_argument("--log", help="crawl log file to write")

    p = pipeline("clean", "extract title, date, and main text from pages")
    p.add_argument("input", help="pages file from crawl")
    p.add_argument("--out", required=True, help="articles file to write")

    p = pipeline("annotate", "tag entities and store records in the journal")
    p.add_argument("input", help="articles file from clean")
    p.add_argument("--repo", required=True, help="record journal to fill")
    p.add_argument("--gazetteer", help="gazetteer TSV file (default: built-in)")

    p = pipeline("convert", "write the question-answering knowledge file")
    p.add_argument("--repo", required=True, help="record journal to read")
    p.add_argument("--kb", required=True, help="knowledge file to write")
    p.add_argument("--templates", help="template bank file (default: built-in)")

    p = pipeline("all", "run crawl, clean, annotate, convert in order")
    p.add_argument("--config", required=True, help="crawl config JSON")
    p.add_argument("--out", required=True, help="directory for stage outputs")
    p.add_argument("--repo", help="record journal (default: OUT/repository.ndjson)")
    p.add_argument("--kb", help="knowledge file (default: OUT/kb.aiml)")
    p.add_argument("--gazetteer", help="gazetteer TSV file (default: built-in)")
    p.add_argument("--templates", help="template bank file (default: built-in)")
    p.add_argument("--log", help="crawl log file to write")

    p = sub.add_parser("repl", help="chat on the terminal against a knowledge file")
    p.set_defaults(func=_cmd_repl)
    p.add_argument("--kb", required=True, help="knowledge file to load")

    p = sub.add_parser("serve", help="run the HTTP portal")
    p.set_defaults(func=_cmd_serve)
    p.add_argument("--config", required=True, help="service config JSON")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
