"""Command-line interface.

    maskscrub sanitize corpus.json -o out.json --bundle builtin:reference -p 0.01
    maskscrub sweep corpus.json --bundle builtin:reference --thresholds 1e-3,1e-2,1e-1 -o report.json
    maskscrub score corpus.json --decisions decisions.jsonl -o report.json
    maskscrub desub out.json --table table.json -o restored.json
    maskscrub inspect --bundle builtin:reference

Exit status: 0 on success, 1 when an input, bundle or table cannot be used,
2 when some conversations failed part-way (their finished turns are kept,
the rest is written as the redaction sentinel).

The decisions log (``--decisions``) contains the original sensitive words
and must be handled as sensitive itself.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import __version__, _accel
from .backends import BundleError, load_backend
from .corpus import (
    Conversation,
    CorpusError,
    corpus_to_json,
    parse_abcd,
    read_corpus,
    read_plaintext,
)
from .evaluation import (
    DEFAULT_CATEGORIES,
    corpus_gold,
    render_table,
    reports_to_json,
    score,
    sweep,
)
from .pipeline import DecisionRecord, SanitizeConfig, sanitize_corpus
from .rng import RNG_ALGORITHM
from .substitution import SubstitutionParams, SubstitutionTable, reverse_apply
from .tokenizer import REDACTED

log = logging.getLogger("maskscrub")

CONFIG_SECTION = "maskscrub"
DEFAULTS = {
    "threshold": 0.01,
    "top_n": 50,
    "top_k": 1,
    "radius": 2.0,
    "seed": 0,
    "mode": "substitute",
    "invocation": "separate",
    "context": True,
    "context_depth": 1,
    "table_scope": "per_conversation",
    "format": None,
    "bundle": None,
    "decisions": None,
    "table": None,
}
_TYPES = {"threshold": float, "top_n": int, "top_k": int, "radius": float, "seed": int,
          "context_depth": int}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for partial failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not cp.has_section(CONFIG_SECTION):
        return {}
    out = {}
    for key, raw in cp.items(CONFIG_SECTION):
        name = key.replace("-", "_")
        if name not in DEFAULTS:
            raise UsageError(f"{path}: unknown key {key!r}")
        try:
            if name == "context":
                out[name] = cp.getboolean(CONFIG_SECTION, key)
            else:
                out[name] = _TYPES.get(name, str)(raw)
        except ValueError as exc:
            raise UsageError(f"{path}: bad value for {key!r}: {exc}") from exc
    return out


def _settings(args) -> dict:
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _sanitize_config(s: dict) -> SanitizeConfig:
    try:
        params = SubstitutionParams(n=s["top_n"], k=s["top_k"], s=s["radius"], seed=s["seed"])
        return SanitizeConfig(
            threshold_p=s["threshold"], params=params,
            mode="redact_only" if s["mode"] == "redact" else "redact_and_substitute",
            invocation=s["invocation"], use_context=s["context"],
            context_depth=s["context_depth"], backend_id=str(s["bundle"]),
            table_scope=s["table_scope"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_bundle(ref):
    if not ref:
        raise UsageError("no model bundle given (use --bundle PATH or --bundle builtin:reference)")
    try:
        return load_backend(ref)
    except BundleError as exc:
        raise UsageError(f"cannot load bundle: {exc}") from exc


def _input_format(path: Path, fmt):
    if fmt:
        return fmt
    return "text" if path.suffix.lower() in (".txt", ".text") else "json"


def _read_input(path, fmt) -> list[Conversation]:
    path = Path(path)
    try:
        fmt = _input_format(path, fmt)
        if fmt == "text":
            return read_plaintext(path)
        if fmt == "abcd":
            return parse_abcd(json.loads(path.read_text(encoding="utf-8")))
        return read_corpus(path)
    except OSError as exc:
        raise UsageError(f"cannot read input {path}: {exc.strerror or exc}") from exc
    except (CorpusError, UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse input {path}: {exc}") from exc


def _render_output(convs, texts, fmt, path, keep_metadata=True) -> str:
    if _input_format(Path(path), fmt) == "text":
        lines = [t for conv in convs for t in texts.get(conv.id, [u.text for u in conv.turns])]
        return "".join(t + "\n" for t in lines)
    if not convs:
        return ""
    return corpus_to_json(convs, texts, keep_metadata)


def _write(path, content: str) -> None:
    Path(path).write_text(content, encoding="utf-8")


def _tables_json(convs, result, scope) -> str:
    if scope == "corpus" or len(convs) <= 1:
        table = next(iter(result.tables.values()), SubstitutionTable())
        return table.to_json() + "\n"
    nested = {cid: t.as_dict() for cid, t in result.tables.items()}
    return json.dumps(nested, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def cmd_sanitize(args) -> int:
    s = _settings(args)
    config = _sanitize_config(s)
    convs = _read_input(args.input, s["format"])
    backend = _load_bundle(s["bundle"])
    sub_backend = _load_bundle(args.substitution_bundle) if args.substitution_bundle else None
    kw = {"substitution_backend": sub_backend} if sub_backend is not None else {}
    result = sanitize_corpus(convs, config, backend, **kw)

    texts = result.texts()
    for failure in result.failures:
        done = texts[failure.conversation]
        conv = next(c for c in convs if c.id == failure.conversation)
        # unprocessed turns fail closed
        texts[failure.conversation] = done + [REDACTED] * (len(conv.turns) - len(done))

    _write(args.output, _render_output(convs, texts, s["format"], args.input, keep_metadata=False))
    if s["decisions"]:
        lines = [json.dumps(rec.to_dict(cid), ensure_ascii=False) for cid, rec in result.decisions()]
        _write(s["decisions"], "".join(ln + "\n" for ln in lines))
    if s["table"] and config.substitute:
        _write(s["table"], _tables_json(convs, result, config.table_scope))
    for failure in result.failures:
        print(f"error: conversation {failure.conversation!r} failed at turn {failure.turn_index} "
              f"({type(failure.cause).__name__})", file=sys.stderr)
    flagged = sum(1 for _, rec in result.decisions() if rec.action != "kept")
    log.info("sanitized %d conversations, %d words acted on", len(convs), flagged)
    return 2 if result.failures else 0


def _parse_thresholds(raw: str) -> list[float]:
    try:
        values = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad threshold list {raw!r}") from exc
    if not values:
        raise UsageError("no thresholds given")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError("thresholds must be sorted in ascending order")
    if any(not 0 < v <= 1 for v in values):
        raise UsageError("thresholds must lie in (0, 1]")
    return values


def _categories(raw):
    if not raw:
        return DEFAULT_CATEGORIES
    return tuple(c.strip() for c in raw.split(",") if c.strip())


def cmd_sweep(args) -> int:
    s = _settings(args)
    thresholds = _parse_thresholds(args.thresholds)
    config = _sanitize_config(s)
    convs = _read_input(args.input, s["format"])
    backend = _load_bundle(s["bundle"])
    reports = sweep(convs, config, thresholds, backend, _categories(args.categories))
    _write(args.output, reports_to_json(reports))
    table = render_table(reports)
    if args.table_text:
        _write(args.table_text, table)
    else:
        sys.stdout.write(table)
    return 0


def _read_decisions(path) -> list[tuple[str, DecisionRecord]]:
    out = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                d = json.loads(line)
                out.append((str(d["conversation"]), DecisionRecord(
                    int(d["turn"]), int(d["word"]), d["surface"], float(d["prob"]),
                    float(d["ic"]), d["action"], d.get("replacement"))))
    except OSError as exc:
        raise UsageError(f"cannot read decisions {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}:{lineno}: malformed decision record") from exc
    return out


def cmd_score(args) -> int:
    convs = _read_input(args.input, args.format)
    decisions = _read_decisions(args.decisions)
    gold = corpus_gold(convs, _categories(args.categories))
    try:
        report = score(decisions, gold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(args.output, reports_to_json([report]))
    sys.stdout.write(render_table([report], label="run"))
    return 0


def _read_tables(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read table {path}: {exc.strerror or exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed table {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"malformed table {path}: expected a JSON object")
    try:
        if all(isinstance(v, str) for v in data.values()):
            return SubstitutionTable(data), None
        if all(isinstance(v, dict) for v in data.values()):
            return None, {cid: SubstitutionTable(t) for cid, t in data.items()}
    except ValueError as exc:
        raise UsageError(f"malformed table {path}: {exc}") from exc
    raise UsageError(f"malformed table {path}: mixed flat and per-conversation entries")


def cmd_desub(args) -> int:
    flat, nested = _read_tables(args.table)
    convs = _read_input(args.input, args.format)
    texts = {}
    for conv in convs:
        table = flat if flat is not None else nested.get(conv.id, SubstitutionTable())
        texts[conv.id] = [reverse_apply(u.text, table) for u in conv.turns]
    _write(args.output, _render_output(convs, texts, args.format, args.input))
    return 0


def cmd_inspect(args) -> int:
    backend = _load_bundle(args.bundle)
    print(f"bundle:      {backend.bundle_path}")
    print(f"identity:    {backend.identity}")
    print(f"vocabulary:  {len(backend.vocab)} tokens")
    print(f"context:     {backend.max_context} tokens")
    print(f"embedding:   {backend.embedding_dim} dims")
    if args.text is not None:
        from .pfilter import probe_word
        from .tokenizer import tokenize
        tok = tokenize(args.text, backend.vocab)
        for i, w in enumerate(tok.words):
            if w.kind == "punctuation":
                continue
            wp = probe_word(tok, i, backend)[0]
            print(f"{i:4d}  {w.surface:<20} p={wp.probability:.3e}  ic={wp.ic_nats:.2f}")
    return 0


def _version_text(argv) -> str:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--bundle")
    known, _ = pre.parse_known_args(argv)
    bundle = "none"
    if known.bundle:
        try:
            bundle = load_backend(known.bundle).identity
        except BundleError as exc:
            bundle = f"unavailable ({exc})"
    return (f"maskscrub {__version__}\n"
            f"bundle: {bundle}\n"
            f"rng: {RNG_ALGORITHM}\n"
            f"kernels: {_accel.backend_name()}\n")


def _add_sanitize_flags(p, sweep_only=False):
    p.add_argument("--config", help="INI file with a [maskscrub] section")
    p.add_argument("--bundle", help="model bundle directory or builtin:reference")
    p.add_argument("--format", choices=("json", "text", "abcd"),
                   help="input format; abcd reads the test split of abcd_v1.1.json")
    p.add_argument("--seed", type=int)
    ctx = p.add_mutually_exclusive_group()
    ctx.add_argument("--context", dest="context", action="store_const", const=True)
    ctx.add_argument("--no-context", dest="context", action="store_const", const=False)
    p.add_argument("--context-depth", type=int)
    if sweep_only:
        return
    p.add_argument("-p", "--threshold", type=float)
    p.add_argument("--top-n", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--mode", choices=("redact", "substitute"))
    p.add_argument("--invocation", choices=("separate", "simultaneous"))
    p.add_argument("--table-scope", choices=("per_conversation", "corpus"))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="maskscrub", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="store_true", help="print tool, bundle and RNG identities")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("sanitize", help="redact and substitute a corpus")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    _add_sanitize_flags(p)
    p.add_argument("--decisions", help="write the (sensitive) per-word decision log here")
    p.add_argument("--table", help="write the substitution table here")
    p.add_argument("--substitution-bundle", help="separate model for candidate generation")
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("sweep", help="score several thresholds against metadata labels")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--thresholds", required=True, help="comma-separated, ascending")
    p.add_argument("--categories", help="comma-separated metadata keys")
    p.add_argument("--table-text", help="write the text table here instead of stdout")
    _add_sanitize_flags(p, sweep_only=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", help="score a decision log against metadata labels")
    p.add_argument("input")
    p.add_argument("--decisions", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--categories")
    p.add_argument("--format", choices=("json", "text"))
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("desub", help="undo substitutions with a substitution table")
    p.add_argument("input")
    p.add_argument("--table", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=("json", "text"))
    p.set_defaults(func=cmd_desub)

    p = sub.add_parser("inspect", help="describe a bundle, optionally score a text")
    p.add_argument("--bundle", required=True)
    p.add_argument("--text")
    p.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    if "--version" in argv:
        sys.stdout.write(_version_text(argv))
        return 0
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if not args.command:
        ap.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
