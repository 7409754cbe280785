"""End-to-end orchestration: ingest, measure, regress, report.

Stages communicate through files under the output directory, so each CLI
subcommand can be rerun on its own. Every output is a pure function of the
inputs, the configuration and the seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import inflection
from .config import LanguageConfig, RunConfig
from .inflection import GateResult, LeaveOut, accuracy_gate, lemma_mi_records, leave_out_models, mi_records
from .ingest import (IngestError, LanguageLexicon, PhonemeInventory, TokenizeError, build_lexicon,
                     count_frequencies, parse_freq_table, parse_g2p_table, parse_pron_dict,
                     parse_unimorph, transcribe)
from .measures import (LemmaMeasureRow, MeasureRow, assemble_form_table, column_names,
                       lexicon_lemma_table)
from .phonotactics import CrossvalPC, crossval_pc_models, parse_smoothing
from .report import ForestRow, render_forest, render_scatter
from .stats import lmm as lmm_module
from .stats import (RegressionSpec, benjamini_hochberg, build_spec_battery, lmm_fit, ols_fit,
                    spearman, standardize)

logger = logging.getLogger(__name__)

VARIABLES = {"MI": "mi", "PC": "pc", "WL": "wl", "FR": "fr", "mean(PC)": "mean_pc", "mean(WL)": "mean_wl"}
SPEARMAN_PAIRS = [("MI", "PC"), ("PC", "WL"), ("MI", "WL")]
SUMMARY_COLUMNS = ["language", "status", "mean_p_correct", "triples", "no_pron", "out_of_inventory",
                   "zero_frequency", "overabundant", "entries", "lexemes", "word_types",
                   "form_rows", "lemma_rows", "reason"]
OLS_COLUMNS = ["language", "term", "beta", "se", "ci_low", "ci_high", "t", "p_raw", "p_adj",
               "n", "df", "family_size", "status"]


def lmm_metadata() -> dict:
    return {"estimation": "REML, fixed effects and residual variance profiled out",
            "random_effects": "intercept and slopes per language, full covariance",
            "parameterization": "lower-triangular relative covariance factor, log diagonal",
            "optimizer": "Nelder-Mead simplex", "initial_relative_covariance": "0.5 I",
            "relative_tolerance": lmm_module.REL_TOL, "max_evaluations": lmm_module.MAX_EVALS,
            "inference": "Wald z", "ci": "z-based 95%", "predictors": "standardized over pooled rows",
            "response": "raw"}


class LeakageError(AssertionError):
    """A scored item contributed to the model that scored it."""


def derive_seed(seed: int, *parts: str) -> int:
    digest = hashlib.sha256(":".join([str(seed), *parts]).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def write_tsv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_tsv(path: Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n",
                    encoding="utf-8")


# --------------------------------------------------------------------------- ingest

def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def ingest_language(lang: LanguageConfig) -> LanguageLexicon:
    triples = parse_unimorph(_read(lang.unimorph), source=str(lang.unimorph))
    if lang.pron is not None:
        pron = parse_pron_dict(_read(lang.pron), source=str(lang.pron))
    else:
        table = parse_g2p_table(_read(lang.g2p), source=str(lang.g2p))
        pron = {}
        for lemma, form, _ in triples:
            for word in (lemma, form):
                if word in pron:
                    continue
                try:
                    pron[word] = transcribe(word, table)
                except TokenizeError as exc:
                    logger.debug("%s: %s", lang.id, exc)
    if not pron:
        raise IngestError(f"{lang.id}: no pronunciations available")
    inventory = PhonemeInventory.from_sequences(s for s in pron.values() if s)
    if lang.freq is not None:
        freq = parse_freq_table(_read(lang.freq), source=str(lang.freq))
    else:
        with open(lang.raw_text, "rb") as fh:
            freq = count_frequencies(fh)
    if freq.total < 1:
        raise IngestError(f"{lang.id}: frequency source is empty")
    return build_lexicon(triples, pron, freq, inventory, lang.id)


# --------------------------------------------------------------------------- measure

@dataclass
class LanguageResult:
    language_id: str
    status: str
    reason: str = ""
    gate: GateResult | None = None
    stage_counts: dict = field(default_factory=dict)
    lexicon: LanguageLexicon | None = None
    pc: CrossvalPC | None = None
    leave_out: LeaveOut | None = None
    mi: list = field(default_factory=list)
    form_table: list[MeasureRow] = field(default_factory=list)
    lemma_table: list[LemmaMeasureRow] = field(default_factory=list)

    @property
    def included(self) -> bool:
        return self.status == "included"


def audit_leave_out(result: LanguageResult) -> None:
    """Raise :class:`LeakageError` if any word or lexeme influenced its own score."""
    if result.pc is not None:
        for rec in result.pc.records:
            word = tuple(rec.form_id.split(" "))
            if word in result.pc.models[rec.fold].training_types:
                raise LeakageError(f"{result.language_id}: word {rec.form_id!r} was in its scoring model")
    lo = result.leave_out
    if lo is not None:
        for f, inf in enumerate(lo.inflectors):
            held_out = set(lo.folds.members(f))
            for rules in inf.rules.values():
                for by_rep in rules.values():
                    for rule in by_rep.values():
                        if rule.lexemes is None:
                            raise LeakageError("inflectors were trained without provenance tracking")
                        leaked = rule.lexemes & held_out
                        if leaked:
                            raise LeakageError(
                                f"{result.language_id}: lexemes {sorted(leaked)[:3]} support a rule "
                                f"of the inflector that scores them (fold {f})")


def measure_language(lang: LanguageConfig, cfg: RunConfig) -> LanguageResult:
    try:
        lex = ingest_language(lang)
    except (IngestError, ValueError, OSError) as exc:
        logger.error("%s: ingestion failed: %s", lang.id, exc)
        return LanguageResult(lang.id, "failed", reason=f"ingestion: {exc}")
    counts = dict(lex.stage_counts)
    counts["word_types"] = len(lex.word_types())
    try:
        pc = crossval_pc_models(lex, cfg.folds_phon, derive_seed(cfg.seed, lang.id, "phon"),
                                cfg.ngram_order, parse_smoothing(cfg.smoothing))
        lo = leave_out_models(lex, cfg.folds_morph, derive_seed(cfg.seed, lang.id, "morph"),
                              cfg.inflection_alpha, track_provenance=cfg.audit)
    except ValueError as exc:
        logger.error("%s: measurement failed: %s", lang.id, exc)
        return LanguageResult(lang.id, "failed", reason=f"measurement: {exc}", stage_counts=counts)
    mi = mi_records(lo.probs, lo.fold_of_entry)
    gate = accuracy_gate([p for _, p in lo.probs], cfg.min_accuracy)
    result = LanguageResult(lang.id, "included" if gate.included else "excluded", gate=gate,
                            stage_counts=counts, lexicon=lex, pc=pc, leave_out=lo, mi=mi)
    if cfg.audit:
        audit_leave_out(result)
    if not gate.included:
        result.reason = f"mean p_correct {gate.mean:.4f} below {cfg.min_accuracy}"
        logger.warning("%s: excluded (%s)", lang.id, result.reason)
        return result
    result.form_table = assemble_form_table(lex, pc.records, mi)
    result.lemma_table = lexicon_lemma_table(lex, result.form_table)
    counts["form_rows"] = len(result.form_table)
    counts["lemma_rows"] = len(result.lemma_table)
    if not cfg.audit:
        # fold models are only needed for auditing; keep results light
        result.pc = CrossvalPC(pc.records, [], pc.folds)
        result.leave_out = LeaveOut(lo.probs, [], lo.folds, lo.fold_of_entry)
    return result


def measure_all(cfg: RunConfig) -> list[LanguageResult]:
    if cfg.jobs > 1 and len(cfg.languages) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(measure_language, cfg.languages, [cfg] * len(cfg.languages)))
    return [measure_language(lang, cfg) for lang in cfg.languages]


def metadata(cfg: RunConfig) -> dict:
    return {
        "parameters": {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.parameters().items()},
        "languages": [lang.id for lang in cfg.languages],
        "pc": {"model": f"{cfg.ngram_order}-gram segment model", "smoothing": cfg.smoothing,
               "log_base": 2, "eos_in_numerator": True, "length_excludes_eos": True,
               "unit": "word type", "folds": cfg.folds_phon},
        "mi": {"model": "suffix-rule inflector", "log_base": 2,
               "normalization": "finite candidate set", "clamp_epsilon": inflection.EPSILON,
               "context_base": inflection.CONTEXT_BASE, "smoothing_alpha": cfg.inflection_alpha,
               "overabundance": "first attested form per slot", "folds": cfg.folds_morph},
        "frequency": {"unit": "ln counts per million", "matching": "lowercased exact form string",
                      "zero_frequency": "excluded"},
        "ols": {"predictors": "standardized within language", "response": "raw",
                "ci": "t-based 95%", "multiple_comparisons": "Benjamini-Hochberg per pair and grouping across languages"},
        "lmm": lmm_metadata(),
        "figures": {"language_order": "by estimate", "format": "svg"},
    }


def write_measure_outputs(results: Sequence[LanguageResult], cfg: RunConfig) -> None:
    out = Path(cfg.output_dir)
    for r in results:
        if r.lexicon is None:
            continue
        lex = r.lexicon
        write_tsv(out / "pc" / f"{r.language_id}.tsv",
                  ["language", "form", "length", "surprisal_bits", "pc_bits"],
                  ((r.language_id, rec.form_id, rec.length, rec.surprisal_bits, rec.pc_bits)
                   for rec in r.pc.records))
        write_tsv(out / "mi" / f"{r.language_id}.tsv",
                  ["language", "lemma", "form", "features", "p_correct", "mi"],
                  ((r.language_id, lex.entries[m.form_id].lemma_orth, lex.entries[m.form_id].form_orth,
                    str(lex.entries[m.form_id].features), m.p_correct, m.mi) for m in r.mi))
        write_tsv(out / "mi" / f"{r.language_id}.lemma.tsv",
                  ["language", "lemma", "mi_lemma", "n_forms"],
                  ((r.language_id, m.lemma_id, m.mi_lemma, m.n_forms)
                   for m in lemma_mi_records(lex, r.mi)))
    included = [r for r in results if r.included]
    form_cols, lemma_cols = column_names(MeasureRow), column_names(LemmaMeasureRow)
    for r in included:
        write_tsv(out / "measures" / f"{r.language_id}.tsv", form_cols,
                  (astuple_fields(row, form_cols) for row in r.form_table))
        write_tsv(out / "measures" / f"{r.language_id}.lemma.tsv", lemma_cols,
                  (astuple_fields(row, lemma_cols) for row in r.lemma_table))
    write_tsv(out / "measures" / "all.tsv", form_cols,
              (astuple_fields(row, form_cols) for r in included for row in r.form_table))
    write_tsv(out / "measures" / "all.lemma.tsv", lemma_cols,
              (astuple_fields(row, lemma_cols) for r in included for row in r.lemma_table))
    write_summary(results, out / "summary.tsv")
    write_json(out / "metadata.json", metadata(cfg))


def astuple_fields(row, cols):
    return [getattr(row, c) for c in cols]


def write_summary(results: Sequence[LanguageResult], path: Path) -> None:
    rows = []
    for r in results:
        c = r.stage_counts
        rows.append([r.language_id, r.status, r.gate.mean if r.gate else None,
                     *[c.get(k, 0) for k in SUMMARY_COLUMNS[3:-1]], r.reason])
    write_tsv(path, SUMMARY_COLUMNS, rows)


def run_measure(cfg: RunConfig) -> list[LanguageResult]:
    results = measure_all(cfg)
    write_measure_outputs(results, cfg)
    return results


def run_ingest(cfg: RunConfig) -> list[LanguageResult]:
    """Ingest only; writes the joined lexicon of every language for inspection."""
    out = Path(cfg.output_dir)
    results = []
    for lang in cfg.languages:
        try:
            lex = ingest_language(lang)
        except (IngestError, ValueError, OSError) as exc:
            logger.error("%s: ingestion failed: %s", lang.id, exc)
            results.append(LanguageResult(lang.id, "failed", reason=f"ingestion: {exc}"))
            continue
        counts = dict(lex.stage_counts, word_types=len(lex.word_types()))
        results.append(LanguageResult(lang.id, "ingested", stage_counts=counts, lexicon=lex))
        write_tsv(out / "lexicon" / f"{lang.id}.tsv",
                  ["lemma", "form", "features", "lemma_segments", "form_segments", "count"],
                  ((e.lemma_orth, e.form_orth, str(e.features), " ".join(e.lemma_seg),
                    " ".join(e.form_seg), e.frequency_count) for e in lex.entries))
    write_summary(results, out / "summary.tsv")
    return results


# --------------------------------------------------------------------------- regress

def load_columns(path: Path) -> dict[str, dict[str, np.ndarray]]:
    """Read a measures TSV into per-language column arrays keyed by variable name."""
    rows = read_tsv(path)
    by_lang: dict[str, list[dict]] = {}
    for row in rows:
        by_lang.setdefault(row["language_id"], []).append(row)
    tables = {}
    for lang, lang_rows in by_lang.items():
        tables[lang] = {var: np.array([float(r[col]) for r in lang_rows])
                        for var, col in VARIABLES.items()}
    return tables


def per_language_ols(spec: RegressionSpec, tables: dict[str, dict[str, np.ndarray]]) -> list[dict]:
    """Focal-coefficient OLS per language with BH adjustment across the languages fitted."""
    rows = []
    for lang, t in tables.items():
        preds = spec.per_language_predictors
        try:
            X = np.column_stack([np.ones(len(t[spec.response]))]
                                + [standardize(t[v], f"{lang}:{v}") for v in preds])
            fit = ols_fit(t[spec.response], X, ["(Intercept)", *preds])
        except ValueError as exc:
            logger.warning("%s %s: OLS skipped: %s", spec.name, lang, exc)
            rows.append({"language": lang, "term": spec.focal, "status": f"skipped: {exc}"})
            continue
        c = fit[spec.focal]
        rows.append({"language": lang, "term": spec.focal, "beta": c.beta, "se": c.se,
                     "ci_low": c.ci_low, "ci_high": c.ci_high, "t": c.stat, "p_raw": c.p_raw,
                     "n": fit.n, "df": fit.df_resid, "status": "ok"})
    fitted = [r for r in rows if r["status"] == "ok"]
    for r, p in zip(fitted, benjamini_hochberg([r["p_raw"] for r in fitted])):
        r["p_adj"] = p
        r["family_size"] = len(fitted)
    return rows


def pooled_table(tables: dict[str, dict[str, np.ndarray]], spec: RegressionSpec) -> dict:
    pooled = {v: np.concatenate([t[v] for t in tables.values()]) for v in VARIABLES}
    out = {spec.response: pooled[spec.response]}
    for v in spec.fixed:
        out[v] = standardize(pooled[v], v)
    out["language"] = np.concatenate([[lang] * len(t["MI"]) for lang, t in tables.items()])
    return out


def spec_dict(spec: RegressionSpec) -> dict:
    return {"name": spec.name, "response": spec.response, "fixed": list(spec.fixed),
            "random_slopes": list(spec.random_slopes),
            "per_language_controls": list(spec.per_language_controls), "grouping": spec.grouping}


def language_means(tables: dict[str, dict[str, np.ndarray]]) -> list[dict]:
    return [{"language": lang, "n": len(t["MI"]),
             **{v: float(np.mean(t[v])) for v in ("MI", "PC", "WL", "FR")}}
            for lang, t in tables.items()]


def run_regress(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    words_path, lemmas_path = out / "measures" / "all.tsv", out / "measures" / "all.lemma.tsv"
    if not words_path.exists():
        logger.error("no measures found at %s; run 'measure' first", words_path)
        return 1
    word_tables = load_columns(words_path)
    lemma_tables = _load_lemma_columns(lemmas_path)
    if not word_tables:
        logger.error("no included languages to analyse")
        return 1
    battery = build_spec_battery()
    family_summary = []
    for spec in battery:
        groupings = [("word", word_tables)]
        if spec.response == "MI":
            groupings.append(("lemma", lemma_tables))
        for grouping, tables in groupings:
            rows = per_language_ols(spec, tables)
            write_tsv(out / "ols" / f"{spec.slug}.{grouping}.tsv", OLS_COLUMNS,
                      ([r.get(c) for c in OLS_COLUMNS] for r in rows))
            fitted = [r for r in rows if r["status"] == "ok"]
            family_summary.append([
                f"{spec.slug}.{grouping}", len(fitted),
                sum(r["p_adj"] < cfg.alpha and r["beta"] > 0 for r in fitted),
                sum(r["p_adj"] < cfg.alpha and r["beta"] < 0 for r in fitted),
                len(rows) - len(fitted)])
    write_tsv(out / "regression_summary.tsv",
              ["family", "n_languages", "n_positive_significant", "n_negative_significant", "n_skipped"],
              family_summary)

    for spec in battery:
        path = out / "lmm" / f"{spec.slug}.json"
        record = {"spec": spec_dict(spec), "method": lmm_metadata()}
        try:
            fit = lmm_fit(spec, pooled_table(word_tables, spec))
        except (ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("%s: mixed model skipped: %s", spec.name, exc)
            record["status"] = f"skipped: {exc}"
        else:
            record["status"] = "ok"
            record.update(fit.to_dict())
        write_json(path, _jsonable(record))

    means = language_means(word_tables)
    write_tsv(out / "language_means.tsv", ["language", "n", "MI", "PC", "WL", "FR"],
              ([m[c] for c in ("language", "n", "MI", "PC", "WL", "FR")] for m in means))
    spearman_rows = []
    for xv, yv in SPEARMAN_PAIRS:
        xs = [m[xv] for m in means]
        ys = [m[yv] for m in means]
        try:
            rho, p = spearman(xs, ys)
        except ValueError as exc:
            logger.warning("Spearman %s/%s skipped: %s", xv, yv, exc)
            spearman_rows.append([xv, yv, len(means), None, None, f"skipped: {exc}"])
            continue
        spearman_rows.append([xv, yv, len(means), rho, p, "ok"])
    write_tsv(out / "spearman.tsv", ["x", "y", "n_languages", "rho", "p", "status"], spearman_rows)
    return 0


def _load_lemma_columns(path: Path) -> dict[str, dict[str, np.ndarray]]:
    if not path.exists():
        return {}
    return load_columns(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.floating):
        return _jsonable(float(obj))
    return obj


# --------------------------------------------------------------------------- report

LABELS = {"MI": "morphological irregularity", "PC": "phonotactic complexity (bits/phoneme)",
          "WL": "word length (segments)", "FR": "frequency (ln cpm)"}


def run_report(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    figures = out / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    n_written = 0
    for path in sorted((out / "ols").glob("*.tsv")):
        rows = [r for r in read_tsv(path) if r["status"] == "ok"]
        family = path.name[: -len(".tsv")]
        if not rows:
            logger.warning("%s: no estimates to plot", family)
            continue
        slug, grouping = family.rsplit(".", 1)
        response, focal = slug.split("-", 1)
        render_forest([ForestRow(r["language"], float(r["beta"]), float(r["ci_low"]), float(r["ci_high"]))
                       for r in rows],
                      f"Effect of {focal} on {response} by language ({grouping} level)",
                      figures / f"forest_{family}.svg")
        n_written += 1
    means_path = out / "language_means.tsv"
    means = read_tsv(means_path) if means_path.exists() else []
    for xv, yv in SPEARMAN_PAIRS:
        if len(means) < 3:
            logger.warning("scatter %s/%s skipped: fewer than 3 languages", xv, yv)
            continue
        pts = [(m["language"], float(m[xv]), float(m[yv])) for m in means]
        render_scatter(pts, f"By-language means: {yv} vs {xv}", "mean " + LABELS[xv],
                       "mean " + LABELS[yv], figures / f"scatter_{yv}-{xv}.svg")
        n_written += 1
    logger.info("wrote %d figures", n_written)
    return 0


# --------------------------------------------------------------------------- all

def run_pipeline(cfg: RunConfig) -> int:
    """Run every stage. Returns a process exit status (0 on success)."""
    results = run_measure(cfg)
    if not any(r.included for r in results):
        logger.error("no language passed ingestion and the accuracy gate; nothing to analyse")
        return 1
    status = run_regress(cfg)
    if status:
        return status
    return run_report(cfg)
