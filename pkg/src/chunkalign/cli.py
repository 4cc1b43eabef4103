"""Command-line pipeline: segment, embed, pool, align, evaluate, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import Granularity, load_corpus, read_units_tsv, segment
from .corpus import write_units_tsv
from .dac import DacConfig, aggregate, mine_chunk_pairs, select_pairs, write_scores_tsv
from .embed_store import EmbeddingMatrix, fetch_vectors, normalize, read_matrix, write_matrix
from .evaluation import (
    NoiseConfig,
    derive_side_seeds,
    inject_noise,
    load_gold,
    load_pairs,
    score,
    sweep_thresholds,
    write_reports_json,
    write_reports_tsv,
)
from .miner import MarginParams, write_pairs_tsv
from .pooled import align_documents_pooled
from .pooling import PoolingMethod
from .pooled import pool_corpus

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "CHUNKALIGN_ENDPOINT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the validation status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _chunk_granularity(text: str) -> Granularity:
    try:
        g = Granularity.from_string(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if g.is_whole_document:
        raise argparse.ArgumentTypeError(
            "chunk granularity must be an integer; whole-document units come from --mode pooled"
        )
    return g


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must be in [0, 1]")
    return value


def _nonnegative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _pooling_method(text: str) -> PoolingMethod:
    try:
        return PoolingMethod.from_string(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _threshold_list(text: str) -> list[float]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty threshold list")
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of floats") from None
    for value in values:
        if not 0.0 <= value <= 1.0:
            raise argparse.ArgumentTypeError(f"threshold {value} outside [0, 1]")
    if any(b < a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("thresholds must be sorted ascending")
    return values


def _require_file(path: str, what: str) -> Path:
    resolved = Path(path)
    if not resolved.is_file():
        raise FileNotFoundError(f"{what} not found: {resolved}")
    return resolved


@dataclass
class RunConfig:
    """Resolved settings for one pipeline run, echoed next to its outputs."""

    command: str
    version: str = __version__
    mode: str | None = None
    src_manifest: str | None = None
    tgt_manifest: str | None = None
    src_embeddings: str | None = None
    tgt_embeddings: str | None = None
    noise_src_manifest: str | None = None
    noise_tgt_manifest: str | None = None
    gold: str | None = None
    out_dir: str | None = None
    granularity: str | None = None
    method: str | None = None
    k: int | None = None
    threshold: float | None = None
    thresholds: list[float] | None = None
    noise_ratio: float | None = None
    noise_seed: int | None = None
    min_margin: float | None = None
    keep_all: bool | None = None
    workers: int | None = None

    def write(self, out_dir: Path) -> None:
        payload = json.dumps(asdict(self), indent=2, sort_keys=True)
        (out_dir / "config.json").write_text(payload + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chunkalign", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[], help="split documents into units for embedding")
    p.add_argument("--manifest", required=True, help="JSON-lines corpus manifest")
    p.add_argument("-g", "--granularity", type=_chunk_granularity, default=Granularity(1),
                   help="sentences per unit (default 1)")
    p.add_argument("--out", required=True, help="output units TSV (unit_id<TAB>text)")

    p = sub.add_parser("fetch-embeddings", help="embed a units file via the HTTP service")
    p.add_argument("--units", required=True, help="units TSV from the segment step")
    p.add_argument("--endpoint", default=None,
                   help=f"embedding service URL (default: ${ENDPOINT_ENV})")
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--out", required=True, help="output embedding matrix file")

    p = sub.add_parser("import-embeddings", help="convert precomputed vectors to a matrix file")
    p.add_argument("--units", required=True, help="units TSV defining ids and row order")
    p.add_argument("--vectors", required=True,
                   help='JSON-lines file of {"unit_id": ..., "vector": [...]} records')
    p.add_argument("--out", required=True, help="output embedding matrix file")

    p = sub.add_parser("pool", help="pool sentence embeddings into document vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True, help="sentence-level (granularity 1) matrix")
    p.add_argument("--method", type=_pooling_method, default=PoolingMethod.MP,
                   help="MP, LP, IDF or LIDF (default MP)")
    p.add_argument("--out", required=True, help="output document matrix file")

    def add_align_inputs(p):
        p.add_argument("--src-manifest", required=True)
        p.add_argument("--tgt-manifest", required=True)
        p.add_argument("--src-embeddings", required=True,
                       help="matrix covering the source units at the chosen granularity")
        p.add_argument("--tgt-embeddings", required=True)
        p.add_argument("-k", type=_positive_int, default=MarginParams().k,
                       help="margin neighborhood size (default 16)")
        p.add_argument("--workers", type=_positive_int, default=1,
                       help="threads for the search stage (results are identical for any count)")
        p.add_argument("--noise-src-manifest", default=None,
                       help="pool of unalignable docs to mix into the source side")
        p.add_argument("--noise-tgt-manifest", default=None)
        p.add_argument("--noise-ratio", type=_nonnegative_float, default=0.5,
                       help="noise docs as a fraction of alignable docs (default 0.5)")
        p.add_argument("--noise-seed", type=int, default=0)
        p.add_argument("--min-margin", type=float, default=None,
                       help="optional margin floor on mined pairs (disabled by default)")
        p.add_argument("--out-dir", required=True)

    p = sub.add_parser("align", help="align two corpora into document pairs")
    p.add_argument("--mode", choices=["dac", "pooled"], default="dac")
    add_align_inputs(p)
    p.add_argument("-g", "--granularity", type=_chunk_granularity, default=None,
                   help="sentences per chunk for --mode dac (default 1)")
    p.add_argument("--threshold", type=_unit_interval, default=None,
                   help="document alignment coefficient cutoff for --mode dac (default 0.1)")
    p.add_argument("--method", type=_pooling_method, default=None,
                   help="pooling method for --mode pooled (default MP)")
    p.add_argument("--keep-all", action="store_true",
                   help="keep every pair above the threshold instead of one-to-one matching")
    p.add_argument("--dump-chunk-pairs", action="store_true",
                   help="also write the mined chunk pairs (--mode dac)")
    p.add_argument("--gold", default=None, help="gold pairs TSV; enables the report")

    p = sub.add_parser("sweep", help="score the dac path at several thresholds")
    add_align_inputs(p)
    p.add_argument("-g", "--granularity", type=_chunk_granularity, default=Granularity(1))
    p.add_argument("--thresholds", type=_threshold_list, required=True,
                   help="comma-separated ascending list, e.g. 0.0,0.1,0.2")
    p.add_argument("--keep-all", action="store_true")
    p.add_argument("--gold", required=True)
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")

    p = sub.add_parser("evaluate", help="score a predicted pairs file against gold")
    p.add_argument("--pairs", required=True, help="predicted pairs TSV (first two columns used)")
    p.add_argument("--gold", required=True)
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.add_argument("--out", default=None, help="report path (default: stdout)")

    return parser


# --- segment ---------------------------------------------------------------


def _prepare_segment(args) -> dict:
    _require_file(args.manifest, "manifest")
    return {"docs": load_corpus(args.manifest)}


def _run_segment(args, ctx) -> None:
    units = [unit for doc in ctx["docs"] for unit in segment(doc, args.granularity)]
    write_units_tsv(units, args.out)
    print(f"wrote {len(units)} units for {len(ctx['docs'])} documents to {args.out}")


# --- fetch-embeddings ------------------------------------------------------


def _prepare_fetch(args) -> dict:
    _require_file(args.units, "units file")
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise ValueError(f"no embedding endpoint: pass --endpoint or set ${ENDPOINT_ENV}")
    units = read_units_tsv(args.units)
    if not units:
        raise ValueError(f"units file {args.units} is empty")
    return {"units": units, "endpoint": endpoint}


def _run_fetch(args, ctx) -> None:
    ids = [unit_id for unit_id, _ in ctx["units"]]
    texts = [text for _, text in ctx["units"]]
    matrix = fetch_vectors(ids, texts, ctx["endpoint"], batch_size=args.batch_size)
    write_matrix(matrix, args.out)
    print(f"wrote {len(matrix)} x {matrix.dim} embeddings to {args.out}")


# --- import-embeddings -----------------------------------------------------


def _prepare_import(args) -> dict:
    _require_file(args.units, "units file")
    _require_file(args.vectors, "vectors file")
    units = read_units_tsv(args.units)
    if not units:
        raise ValueError(f"units file {args.units} is empty")
    vectors: dict[str, list] = {}
    with open(args.vectors, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.vectors}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(record, dict) or "unit_id" not in record or "vector" not in record:
                raise ValueError(f"{args.vectors}:{lineno}: record must carry unit_id and vector")
            unit_id = str(record["unit_id"])
            if unit_id in vectors:
                raise ValueError(f"{args.vectors}:{lineno}: duplicate vector for {unit_id!r}")
            vectors[unit_id] = record["vector"]
    missing = [unit_id for unit_id, _ in units if unit_id not in vectors]
    if missing:
        raise ValueError(f"no vector for unit {missing[0]!r} ({len(missing)} missing in total)")
    return {"units": units, "vectors": vectors}


def _run_import(args, ctx) -> None:
    ids = [unit_id for unit_id, _ in ctx["units"]]
    try:
        data = np.asarray([ctx["vectors"][unit_id] for unit_id in ids], dtype=np.float32)
    except ValueError:
        raise ValueError("imported vectors have differing dimensions") from None
    if data.ndim != 2:
        raise ValueError("imported vectors have differing dimensions")
    bad = np.flatnonzero(~np.isfinite(data).all(axis=1))
    if bad.size:
        raise ValueError(f"non-finite vector for unit {ids[int(bad[0])]!r}")
    matrix = normalize(EmbeddingMatrix(ids=ids, data=data))
    write_matrix(matrix, args.out)
    print(f"wrote {len(matrix)} x {matrix.dim} embeddings to {args.out}")


# --- pool ------------------------------------------------------------------


def _prepare_pool(args) -> dict:
    _require_file(args.manifest, "manifest")
    _require_file(args.embeddings, "embeddings file")
    docs = load_corpus(args.manifest)
    matrix = normalize(read_matrix(args.embeddings))
    return {"docs": docs, "matrix": matrix}


def _run_pool(args, ctx) -> None:
    pooled = pool_corpus(ctx["docs"], ctx["matrix"], args.method)
    write_matrix(pooled, args.out)
    print(f"wrote {len(pooled)} document vectors ({args.method.name}) to {args.out}")


# --- align / sweep ---------------------------------------------------------


def _load_side(manifest: str, noise_manifest: str | None, ratio: float, seed: int):
    docs = load_corpus(manifest)
    if noise_manifest is not None:
        pool = load_corpus(noise_manifest)
        docs = inject_noise(docs, pool, NoiseConfig(ratio=ratio, seed=seed))
    return docs


def _prepare_align_inputs(args) -> dict:
    _require_file(args.src_manifest, "source manifest")
    _require_file(args.tgt_manifest, "target manifest")
    _require_file(args.src_embeddings, "source embeddings file")
    _require_file(args.tgt_embeddings, "target embeddings file")
    if args.noise_src_manifest is not None:
        _require_file(args.noise_src_manifest, "source noise manifest")
    if args.noise_tgt_manifest is not None:
        _require_file(args.noise_tgt_manifest, "target noise manifest")
    src_seed, tgt_seed = derive_side_seeds(args.noise_seed)
    src_docs = _load_side(args.src_manifest, args.noise_src_manifest, args.noise_ratio, src_seed)
    tgt_docs = _load_side(args.tgt_manifest, args.noise_tgt_manifest, args.noise_ratio, tgt_seed)
    gold = None
    if getattr(args, "gold", None) is not None:
        _require_file(args.gold, "gold file")
        gold = load_gold(args.gold)
    return {
        "src_docs": src_docs,
        "tgt_docs": tgt_docs,
        "src_matrix": normalize(read_matrix(args.src_embeddings)),
        "tgt_matrix": normalize(read_matrix(args.tgt_embeddings)),
        "gold": gold,
    }


def _prepare_align(args) -> dict:
    if args.mode == "dac":
        if args.method is not None:
            raise ValueError("--method is only valid with --mode pooled")
    else:
        for flag, name in [
            (args.granularity, "--granularity"),
            (args.threshold, "--threshold"),
        ]:
            if flag is not None:
                raise ValueError(f"{name} is only valid with --mode dac")
        if args.keep_all:
            raise ValueError("--keep-all is only valid with --mode dac")
        if args.dump_chunk_pairs:
            raise ValueError("--dump-chunk-pairs is only valid with --mode dac")
    return _prepare_align_inputs(args)


def _align_run_config(args, command: str) -> RunConfig:
    return RunConfig(
        command=command,
        mode=getattr(args, "mode", "dac"),
        src_manifest=args.src_manifest,
        tgt_manifest=args.tgt_manifest,
        src_embeddings=args.src_embeddings,
        tgt_embeddings=args.tgt_embeddings,
        noise_src_manifest=args.noise_src_manifest,
        noise_tgt_manifest=args.noise_tgt_manifest,
        gold=getattr(args, "gold", None),
        out_dir=args.out_dir,
        k=args.k,
        noise_ratio=args.noise_ratio if
        (args.noise_src_manifest or args.noise_tgt_manifest) else None,
        noise_seed=args.noise_seed if
        (args.noise_src_manifest or args.noise_tgt_manifest) else None,
        min_margin=args.min_margin,
        workers=args.workers,
    )


def _write_report(reports, fmt: str, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if fmt == "json":
            write_reports_json(reports, handle)
        else:
            write_reports_tsv(reports, handle)


def _run_align(args, ctx) -> None:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_echo = _align_run_config(args, "align")
    if args.mode == "dac":
        granularity = args.granularity or Granularity(1)
        threshold = DacConfig().threshold if args.threshold is None else args.threshold
        config = DacConfig(
            threshold=threshold,
            granularity=granularity,
            margin_params=MarginParams(k=args.k),
        )
        config_echo.granularity = str(granularity)
        config_echo.threshold = threshold
        config_echo.keep_all = args.keep_all
        config_echo.write(out_dir)
        pairs, counts_src, counts_tgt = mine_chunk_pairs(
            ctx["src_docs"], ctx["tgt_docs"], ctx["src_matrix"], ctx["tgt_matrix"],
            config, workers=args.workers,
        )
        if args.min_margin is not None:
            pairs = [pair for pair in pairs if pair.margin >= args.min_margin]
        if args.dump_chunk_pairs:
            write_pairs_tsv(pairs, out_dir / "chunk_pairs.tsv")
        selected = select_pairs(
            aggregate(pairs, counts_src, counts_tgt), config, one_to_one=not args.keep_all
        )
        write_scores_tsv(selected, out_dir / "pairs.tsv")
        predicted = [(s.src_doc, s.tgt_doc) for s in selected]
        report_threshold = threshold
    else:
        method = args.method or PoolingMethod.MP
        config_echo.method = method.name
        config_echo.write(out_dir)
        mined = align_documents_pooled(
            ctx["src_docs"], ctx["tgt_docs"], ctx["src_matrix"], ctx["tgt_matrix"],
            method, MarginParams(k=args.k), workers=args.workers,
        )
        if args.min_margin is not None:
            mined = [pair for pair in mined if pair.margin >= args.min_margin]
        write_pairs_tsv(mined, out_dir / "pairs.tsv")
        predicted = [(pair.src_id, pair.tgt_id) for pair in mined]
        report_threshold = None
    print(f"aligned {len(predicted)} document pairs -> {out_dir / 'pairs.tsv'}")
    if ctx["gold"] is not None:
        report = score(predicted, ctx["gold"], threshold=report_threshold)
        _write_report([report], "tsv", out_dir / "report.tsv")
        print(
            f"precision {report.precision:.6f}, recall {report.recall:.6f}, "
            f"f1 {report.f1:.6f} against {args.gold}"
        )


def _run_sweep(args, ctx) -> None:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_echo = _align_run_config(args, "sweep")
    config_echo.granularity = str(args.granularity)
    config_echo.thresholds = list(args.thresholds)
    config_echo.keep_all = args.keep_all
    config_echo.write(out_dir)
    config = DacConfig(granularity=args.granularity, margin_params=MarginParams(k=args.k))
    pairs, counts_src, counts_tgt = mine_chunk_pairs(
        ctx["src_docs"], ctx["tgt_docs"], ctx["src_matrix"], ctx["tgt_matrix"],
        config, workers=args.workers,
    )
    if args.min_margin is not None:
        pairs = [pair for pair in pairs if pair.margin >= args.min_margin]
    scores = aggregate(pairs, counts_src, counts_tgt)
    reports = sweep_thresholds(scores, ctx["gold"], args.thresholds, one_to_one=not args.keep_all)
    report_path = out_dir / f"reports.{args.format}"
    _write_report(reports, args.format, report_path)
    print(f"wrote {len(reports)} sweep reports to {report_path}")


# --- evaluate ----------------------------------------------------------------


def _prepare_evaluate(args) -> dict:
    _require_file(args.pairs, "pairs file")
    _require_file(args.gold, "gold file")
    return {"predicted": load_pairs(args.pairs), "gold": load_gold(args.gold)}


def _run_evaluate(args, ctx) -> None:
    report = score(ctx["predicted"], ctx["gold"])
    if args.out is None:
        if args.format == "json":
            write_reports_json([report], sys.stdout)
        else:
            write_reports_tsv([report], sys.stdout)
    else:
        _write_report([report], args.format, Path(args.out))
        print(f"wrote report to {args.out}")


_COMMANDS = {
    "segment": (_prepare_segment, _run_segment),
    "fetch-embeddings": (_prepare_fetch, _run_fetch),
    "import-embeddings": (_prepare_import, _run_import),
    "pool": (_prepare_pool, _run_pool),
    "align": (_prepare_align, _run_align),
    "sweep": (_prepare_align_inputs, _run_sweep),
    "evaluate": (_prepare_evaluate, _run_evaluate),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    prepare, run = _COMMANDS[args.command]
    try:
        ctx = prepare(args)
    except Exception as exc:
        print(f"chunkalign: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        run(args, ctx)
    except Exception as exc:
        print(f"chunkalign: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
