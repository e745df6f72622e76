"""Command-line drivers for the whole pipeline and the HTTP query service.

Subcommands: build-corpus, split, train-tokenizer, train, evaluate, query,
serve. The HTTP API serves POST /api/query, GET /api/languages and
GET /api/health from immutable loaded checkpoints; the environment variable
WORDALCHEMY_CONFIG may point at a ServiceConfig JSON file.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import corpus as cp
from . import evaluator as ev
from .errors import UnknownLanguageError, WordAlchemyError
from .model import ModelConfig
from .tokenizer import Tokenizer, bpe_training_text, train_bpe
from .trainer import (
    Checkpoint,
    TrainConfig,
    load_checkpoint_file,
    save_checkpoint_file,
    train,
)

DEFAULT_K = 10
MAX_K = 1000


# ---------------------------------------------------------------------------
# Corpus / splits file layout
# ---------------------------------------------------------------------------

def save_splits_dir(splits: cp.CorpusSplits, out_dir: str, params: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, pairs in (
        ("train", splits.train),
        ("seen_test", splits.seen_test),
        ("unseen_test", splits.unseen_test),
        ("description_test", splits.description_test),
    ):
        (out / f"{name}.jsonl").write_text(cp.serialize_pairs(pairs), encoding="utf-8")
    (out / "headwords.json").write_text(
        json.dumps(splits.headwords, ensure_ascii=False, sort_keys=True), encoding="utf-8"
    )
    manifest = {"seed": splits.seed, "languages": splits.languages()}
    if params:
        manifest.update(params)
    (out / "splits.json").write_text(json.dumps(manifest, sort_keys=True), encoding="utf-8")


def load_splits_dir(path: str) -> cp.CorpusSplits:
    root = Path(path)
    manifest = json.loads((root / "splits.json").read_text(encoding="utf-8"))

    def read(name: str) -> list[cp.WordDefPair]:
        f = root / f"{name}.jsonl"
        if not f.exists():
            return []
        return cp.parse_dictionary(f.read_text(encoding="utf-8"))

    headwords = json.loads((root / "headwords.json").read_text(encoding="utf-8"))
    return cp.CorpusSplits(
        train=read("train"),
        seen_test=read("seen_test"),
        unseen_test=read("unseen_test"),
        description_test=read("description_test"),
        headwords={k: list(v) for k, v in headwords.items()},
        seed=manifest["seed"],
    )


# ---------------------------------------------------------------------------
# Service configuration and engine
# ---------------------------------------------------------------------------

@dataclass
class ServiceConfig:
    checkpoints: list[str] = dataclasses.field(default_factory=list)
    corpus: str | None = None  # train-split JSONL backing the baseline
    bind: str = "127.0.0.1:8000"
    default_k: int = DEFAULT_K
    max_k: int = MAX_K
    backend: str = "model"  # model | baseline | both
    static_dir: str | None = None

    def validate(self) -> None:
        if self.backend not in ("model", "baseline", "both"):
            raise WordAlchemyError(f"unknown backend {self.backend!r}")
        if self.backend in ("model", "both") and not self.checkpoints:
            raise WordAlchemyError("model backend requires at least one checkpoint")
        if self.backend in ("baseline", "both") and not self.corpus:
            raise WordAlchemyError("baseline backend requires --corpus")
        if not (1 <= self.default_k <= self.max_k):
            raise WordAlchemyError(
                f"default k {self.default_k} must be within [1, max k {self.max_k}]"
            )

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls(**data)
        cfg.validate()
        return cfg


class QueryEngine:
    """Immutable query state shared by all request handlers."""

    def __init__(self, cfg: ServiceConfig):
        cfg.validate()
        self.cfg = cfg
        self.scorers: dict[str, ev.CandidateScorer] = {}
        digests = []
        for path in cfg.checkpoints if cfg.backend in ("model", "both") else []:
            data = Path(path).read_bytes()
            digests.append(hashlib.sha256(data).hexdigest())
            ckpt = load_checkpoint_file(path)
            scorer = ev.CandidateScorer(ckpt)
            for lang in scorer.languages():
                self.scorers.setdefault(lang, scorer)
        self.baseline: dict[str, ev.LexicalOverlapIndex] = {}
        if cfg.backend in ("baseline", "both") and cfg.corpus:
            pairs = cp.parse_dictionary(Path(cfg.corpus).read_text(encoding="utf-8"))
            digests.append(hashlib.sha256(cp.serialize_pairs(pairs).encode("utf-8")).hexdigest())
            headwords: dict[str, list[str]] = {}
            for p in pairs:
                headwords.setdefault(p.lang, [])
            headwords = {lang: sorted({p.word for p in pairs if p.lang == lang}) for lang in headwords}
            for lang in headwords:
                self.baseline[lang] = ev.LexicalOverlapIndex(pairs, lang, headwords[lang])
        if not digests:
            self.digest = ""
        elif len(digests) == 1:
            self.digest = digests[0]
        else:
            self.digest = hashlib.sha256("".join(digests).encode()).hexdigest()

    def languages(self) -> list[str]:
        return sorted(set(self.scorers) | set(self.baseline))

    def available_backends(self) -> set[str]:
        out = set()
        if self.scorers:
            out.add("model")
        if self.baseline:
            out.add("baseline")
        return out

    def query(self, definition: str, lang: str, k: int, backend: str | None) -> tuple[ev.RankedCandidates, str]:
        chosen = backend or ("model" if self.scorers else "baseline")
        if chosen == "model":
            if lang not in self.scorers:
                raise UnknownLanguageError(lang)
            return self.scorers[lang].score(definition, lang), "model"
        if chosen == "baseline":
            if lang not in self.baseline:
                raise UnknownLanguageError(lang)
            return self.baseline[lang].score(definition), "baseline"
        raise WordAlchemyError(f"unknown backend {chosen!r}")


class QueryBody(BaseModel):
    definition: str
    lang: str
    k: int | None = None
    backend: str | None = None


def create_app(cfg: ServiceConfig) -> FastAPI:
    engine = QueryEngine(cfg)
    app = FastAPI(title="wordalchemy")
    app.state.engine = engine

    @app.post("/api/query")
    def api_query(body: QueryBody):
        eng: QueryEngine = app.state.engine
        if not body.definition.strip():
            return JSONResponse(status_code=400, content={"error": "empty_definition"})
        k = body.k if body.k is not None else eng.cfg.default_k
        if k > eng.cfg.max_k:
            return JSONResponse(status_code=400, content={"error": "k_too_large"})
        if k < 1:
            return JSONResponse(status_code=400, content={"error": "invalid_k"})
        if body.backend is not None and body.backend not in eng.available_backends():
            return JSONResponse(status_code=400, content={"error": "unknown_backend"})
        try:
            ranked, backend = eng.query(body.definition, body.lang, k, body.backend)
        except UnknownLanguageError:
            return JSONResponse(status_code=404, content={"error": "unknown_language"})
        candidates = [
            {"word": w, "score": s, "rank": i + 1}
            for i, (w, s) in enumerate(zip(ranked.words[:k], ranked.scores[:k]))
        ]
        return {"candidates": candidates, "lang": body.lang, "backend": backend}

    @app.get("/api/languages")
    def api_languages():
        return {"languages": app.state.engine.languages()}

    @app.get("/api/health")
    def api_health():
        return {"status": "ok", "checkpoint_digest": app.state.engine.digest}

    static_dir = cfg.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")
    return app


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _cmd_build_corpus(args) -> int:
    pairs: list[cp.WordDefPair] = []
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        languages = set(manifest["languages"])
        base = Path(args.manifest).parent
        for rel in manifest["files"]:
            path = Path(rel)
            if not path.is_absolute():
                path = base / path
            batch = cp.parse_dictionary(path.read_text(encoding="utf-8"), args.lang)
            for p in batch:
                if p.lang not in languages:
                    raise WordAlchemyError(
                        f"{path}: lang {p.lang!r} not declared in manifest languages {sorted(languages)}"
                    )
            pairs.extend(batch)
    for path in args.corpus or []:
        pairs.extend(cp.parse_dictionary(Path(path).read_text(encoding="utf-8"), args.lang))
    if not pairs:
        raise WordAlchemyError("no input pairs; pass --manifest and/or --corpus")
    Path(args.out).write_text(cp.serialize_pairs(pairs), encoding="utf-8")
    stats = cp.corpus_stats(pairs)
    print(f"wrote {stats.n_pairs} pairs / {stats.n_unique_words} unique words to {args.out}")
    for lang, (np_, nw) in sorted(stats.per_lang.items()):
        print(f"  {lang}: {np_} pairs, {nw} words")
    return 0


def _cmd_split(args) -> int:
    pairs = cp.parse_dictionary(Path(args.corpus).read_text(encoding="utf-8"))
    splits = cp.split_corpus(
        pairs,
        unseen_word_fraction=args.unseen_fraction,
        seen_sample_size=args.seen_sample,
        seed=args.seed,
    )
    save_splits_dir(
        splits,
        args.out,
        params={
            "unseen_word_fraction": args.unseen_fraction,
            "seen_sample_size": args.seen_sample,
            "source_corpus": args.corpus,
        },
    )
    print(
        f"split {len(pairs)} pairs -> train {len(splits.train)}, "
        f"seen_test {len(splits.seen_test)}, unseen_test {len(splits.unseen_test)} ({args.out})"
    )
    return 0


def _cmd_train_tokenizer(args) -> int:
    pairs = cp.parse_dictionary(Path(args.corpus).read_text(encoding="utf-8"))
    text = bpe_training_text(pairs, include_prefixes=not args.no_prefixes)
    tok = train_bpe(text, args.vocab_size, seed=args.seed)
    tok.save(args.out)
    print(f"trained tokenizer: {tok.vocab_size} tokens, {len(tok.merges)} merges -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    splits = load_splits_dir(args.splits)
    tok = Tokenizer.load(args.tokenizer)
    mcfg = ModelConfig(
        vocab_size=tok.vocab_size,
        d_model=args.d_model,
        n_heads=args.n_heads,
        d_ff=args.d_ff,
        n_enc_layers=args.enc_layers,
        n_dec_layers=args.dec_layers,
        max_input_len=args.max_input_len,
        max_label_len=args.max_label_len,
    )
    tcfg = TrainConfig(
        batch_size=args.batch_size,
        max_steps=args.steps,
        n_epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        grad_accum_steps=args.accum,
        warmup_steps=args.warmup,
        seed=args.seed,
        validate_every=args.validate_every,
        use_prefixes=not args.no_prefixes,
    )
    log_every = max(1, (args.steps or 1000) // 20)

    def hook(entry):
        if entry["step"] % log_every == 0:
            print(f"step {entry['step']}: loss {entry['loss']:.4f} lr {entry['lr']:.2e}")

    ckpt, log = train(splits, tok, mcfg, tcfg, log_hook=hook if not args.quiet else None)
    digest = save_checkpoint_file(ckpt, args.out)
    if args.log_file:
        Path(args.log_file).write_text(log.to_jsonl(), encoding="utf-8")
    print(f"checkpoint {args.out} sha256 {digest}")
    return 0


def _cmd_evaluate(args) -> int:
    if len(args.ckpt) != 5:
        raise WordAlchemyError(
            f"evaluation protocol needs 5 seeds (5 checkpoints), got {len(args.ckpt)}"
        )
    ckpts = [load_checkpoint_file(p) for p in args.ckpt]
    splits = load_splits_dir(args.splits)
    if args.descriptions:
        desc = cp.load_description_set(Path(args.descriptions).read_text(encoding="utf-8"))
        splits = dataclasses.replace(splits, description_test=desc)
    dump = open(args.dump, "w", encoding="utf-8") if args.dump else None
    try:
        report = ev.evaluate(ckpts, splits, max_queries=args.limit, dump_file=dump)
    finally:
        if dump:
            dump.close()
    out = report.to_json()
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


def _cmd_query(args) -> int:
    if args.backend == "baseline":
        if not args.splits:
            raise WordAlchemyError("baseline queries need --splits")
        splits = load_splits_dir(args.splits)
        ranked = ev.lexical_overlap_baseline(args.definition, splits, args.lang)
    else:
        if not args.ckpt:
            raise WordAlchemyError("model queries need --ckpt")
        ckpt = load_checkpoint_file(args.ckpt)
        ranked = ev.score_candidates(ckpt, args.definition, args.lang)
    for i, (word, score) in enumerate(ranked.top(args.k), start=1):
        print(f"{i}\t{word}\t{score:.6f}")
    return 0


def resolve_serve_config(args) -> ServiceConfig:
    """Flags win; otherwise WORDALCHEMY_CONFIG may name a ServiceConfig file."""
    env_cfg = os.environ.get("WORDALCHEMY_CONFIG")
    if env_cfg and not (args.ckpt or args.corpus):
        cfg = ServiceConfig.from_file(env_cfg)
    else:
        cfg = ServiceConfig(
            checkpoints=args.ckpt or [],
            corpus=args.corpus,
            bind=args.bind,
            default_k=args.k,
            backend=args.backend,
            static_dir=args.static,
        )
    cfg.validate()
    return cfg


def _cmd_serve(args) -> int:
    cfg = resolve_serve_config(args)
    app = create_app(cfg)
    host, _, port = cfg.bind.rpartition(":")
    import uvicorn

    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordalchemy", description="Reverse dictionary engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="normalize raw corpus files into one JSONL corpus")
    p.add_argument("--manifest", help="JSON manifest listing languages and file paths")
    p.add_argument("--corpus", action="append", help="corpus JSONL file (repeatable)")
    p.add_argument("--lang", help="keep only this language")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_corpus)

    p = sub.add_parser("split", help="build train / seen / unseen splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output splits directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unseen-fraction", type=float, default=0.1)
    p.add_argument("--seen-sample", type=int, default=500)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train-tokenizer", help="learn a BPE vocabulary from a corpus")
    p.add_argument("--corpus", required=True, help="JSONL corpus (typically the train split)")
    p.add_argument("--vocab-size", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-prefixes", action="store_true",
                   help="leave the task prefixes out of the tokenizer corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_tokenizer)

    p = sub.add_parser("train", help="train a model on a splits directory")
    p.add_argument("--splits", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--warmup", type=int, default=200)
    p.add_argument("--accum", type=int, default=1)
    p.add_argument("--validate-every", type=int, default=0)
    p.add_argument("--no-prefixes", action="store_true",
                   help="disable task prefixes (multilingual shared-vocabulary mode)")
    p.add_argument("--d-model", type=int, default=256)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=1024)
    p.add_argument("--enc-layers", type=int, default=4)
    p.add_argument("--dec-layers", type=int, default=4)
    p.add_argument("--max-input-len", type=int, default=64)
    p.add_argument("--max-label-len", type=int, default=16)
    p.add_argument("--log-file", help="write per-step training log JSONL here")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="rank test queries with 5 checkpoints and report metrics")
    p.add_argument("--ckpt", action="append", required=True, help="checkpoint path (pass 5 times)")
    p.add_argument("--splits", required=True)
    p.add_argument("--descriptions", help="extra description-set JSONL")
    p.add_argument("--limit", type=int, default=None, help="deterministic per-split query cap")
    p.add_argument("--dump", help="write per-query rank JSONL here")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("query", help="rank headwords for one definition")
    p.add_argument("definition")
    p.add_argument("--ckpt")
    p.add_argument("--splits", help="splits directory (baseline backend)")
    p.add_argument("--lang", default="en")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--backend", choices=("model", "baseline"), default="model")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("serve", help="serve the HTTP query API")
    p.add_argument("--ckpt", action="append", help="checkpoint path (repeatable)")
    p.add_argument("--corpus", help="train-split JSONL for the baseline backend")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="default candidates per query")
    p.add_argument("--backend", choices=("model", "baseline", "both"), default="model")
    p.add_argument("--static", help="directory of web UI files to serve at /")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WordAlchemyError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
