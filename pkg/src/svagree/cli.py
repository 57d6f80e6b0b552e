"""Command-line pipeline: extract -> build -> train -> eval -> probe -> report.

    svagree extract corpus.conll -o out/extract
    svagree build -i out/extract -o out/data --objective number_pred
    svagree train -d out/data -o out/runs --seeds 2
    svagree eval --checkpoint out/runs/seed_1/checkpoint.json \
        --instances out/extract/instances.jsonl -o out/report
    svagree probe --checkpoint out/runs/seed_1/checkpoint.json -o out/probe
    svagree report out/report/report.json ... -o out/merged
    svagree gradcheck
    svagree synth -o corpus.conll --sentences 24000

Every command writes a manifest.json with input/output digests. Outputs are
byte-identical across reruns with the same inputs and seeds. Exit codes:
0 success, 2 usage error, 3 data error, 4 numeric failure.

The only environment variable honored is SVAGREE_OUTPUT_ROOT: when set,
relative output paths are resolved beneath it.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod
from .corpus import ReadStats, Split, assign_split, read_corpus
from .errors import DataError, NumericError, SvagreeError, UsageError
from .evaluation import (
    EvalReport,
    TrainConfig,
    TrainState,
    eval_external,
    evaluate_checkpoint,
    majority_baseline,
    mean_report_rows,
    pool_reports,
    recency_baseline,
    sample_per_attractor,
    train,
)
from .extract import (
    AgreementInstance,
    Vocab,
    attractor_histogram,
    build_vocab,
    extract_instances,
    instance_from_dict,
    instance_to_dict,
)
from .nn import (
    ModelConfig,
    checkpoint_dict,
    grad_check,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .objectives import (
    Objective,
    ObjectiveExample,
    VerbFormTable,
    build_verb_form_table,
    examples_for_objective,
    make_lm,
)
from .probe import (
    build_lexicon,
    classify_templates,
    generate_templates,
    long_modifier_probe,
    pca_embeddings,
    trace,
)
from .runio import (
    Manifest,
    digest_of,
    read_json,
    read_jsonl,
    sha256_file,
    write_csv,
    write_csv_raw,
    write_json,
    write_jsonl,
)
from .synth import SynthConfig, write_corpus

log = logging.getLogger("svagree")

REPORT_COLUMNS = ("key", "n", "errors", "rate", "ci_low", "ci_high")
MEAN_COLUMNS = ("key", "runs", "mean_n", "mean_rate", "stdev_rate")

DEFAULT_SEED_COUNTS = {
    Objective.NUMBER_PRED: 20,
    Objective.LM: 1,
}


def _out_path(raw: str) -> Path:
    """Resolve an output path, honoring the SVAGREE_OUTPUT_ROOT override."""
    path = Path(raw)
    root = os.environ.get("SVAGREE_OUTPUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _out_dir(raw: str) -> Path:
    path = _out_path(raw)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --- extract -----------------------------------------------------------------


def _extract_sentence_worker(payload):
    sentence, extract_cfg = payload
    return extract_instances(sentence, extract_cfg)


def cmd_extract(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    columns = config_mod.column_layout(tree)
    split_cfg = config_mod.split_assignment(tree)
    extract_cfg = config_mod.extract_config(tree)
    max_len = tree["corpus"]["max_len"]
    out = _out_dir(args.out)

    stats = ReadStats()
    sentences = list(
        read_corpus(args.corpus, columns=columns, max_len=max_len, stats=stats)
    )
    log.info(
        "read %d sentences (%d malformed, %d over length cap dropped)",
        stats.sentences, stats.dropped_malformed, stats.dropped_too_long,
    )
    splits = {s.id: assign_split(s.id, split_cfg).value for s in sentences}

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            per_sentence = list(
                pool.map(
                    _extract_sentence_worker,
                    ((s, extract_cfg) for s in sentences),
                    chunksize=256,
                )
            )
    else:
        per_sentence = [extract_instances(s, extract_cfg) for s in sentences]
    instances = [inst for group in per_sentence for inst in group]
    if not instances:
        raise DataError("no agreement instances found in the input corpus")

    train_sentences = [s for s in sentences if splits[s.id] == Split.TRAIN.value]
    if not train_sentences:
        raise DataError("train split is empty; adjust split fractions or corpus size")
    vocab = build_vocab(train_sentences, cap=extract_cfg.vocab_cap)

    sentences_path = out / "sentences.jsonl"
    write_jsonl(
        sentences_path,
        (
            {
                "id": s.id,
                "split": splits[s.id],
                "tokens": [[t.form, t.pos] for t in s.tokens],
            }
            for s in sentences
        ),
    )
    instances_path = out / "instances.jsonl"
    write_jsonl(
        instances_path,
        (instance_to_dict(inst, split=splits[inst.sentence_id]) for inst in instances),
    )
    vocab_path = out / "vocab.json"
    write_json(vocab_path, vocab.to_dict())

    histogram = attractor_histogram(instances)
    subject_counts = {"SINGULAR": 0, "PLURAL": 0, "UNKNOWN": 0}
    verb_counts = {"SINGULAR": 0, "PLURAL": 0}
    split_counts = {"train": 0, "valid": 0, "test": 0}
    for inst in instances:
        key = inst.subject_number.value if inst.subject_number else "UNKNOWN"
        subject_counts[key] += 1
        verb_counts[inst.verb_number.value] += 1
        split_counts[splits[inst.sentence_id]] += 1
    known = subject_counts["SINGULAR"] + subject_counts["PLURAL"]
    stats_doc = {
        "sentences": {
            "kept": stats.sentences,
            "dropped_malformed": stats.dropped_malformed,
            "dropped_too_long": stats.dropped_too_long,
        },
        "instances": {"total": len(instances), "per_split": split_counts},
        "subject_numbers": dict(
            subject_counts,
            singular_fraction=(subject_counts["SINGULAR"] / known) if known else None,
        ),
        "verb_numbers": verb_counts,
        "attractor_histogram": histogram,
        "warnings": stats.warnings,
    }
    stats_path = out / "stats.json"
    write_json(stats_path, stats_doc)
    histogram_path = out / "attractor_histogram.csv"
    write_csv(
        histogram_path,
        [{"attractors": k, "count": v} for k, v in histogram.items()],
        ("attractors", "count"),
    )

    manifest = Manifest("extract", tree, seeds=[split_cfg.seed, extract_cfg.select_seed])
    for corpus_file in args.corpus:
        manifest.add_input(corpus_file)
    for path in (sentences_path, instances_path, vocab_path, stats_path, histogram_path):
        manifest.add_output(path)
    manifest.write(out / "manifest.json")
    log.info("extracted %d instances -> %s", len(instances), out)
    return 0


# --- build -------------------------------------------------------------------


def _load_instances(path: Path, split: str | None = None) -> list[AgreementInstance]:
    instances = []
    for record in read_jsonl(path):
        if split is not None and record.get("split") != split:
            continue
        instances.append(instance_from_dict(record))
    return instances


def _load_instance_records(path: Path) -> list[dict]:
    return list(read_jsonl(path))


def _sentences_for_table(sentences_path: Path, split: str) -> list:
    """Lightweight sentence stand-ins (tokens only) for table/LM building."""
    from .corpus import Sentence, Token

    out = []
    for record in read_jsonl(sentences_path):
        if record["split"] != split and split != "all":
            continue
        tokens = tuple(
            Token(
                index=i + 1,
                form=form,
                lower=form.lower(),
                pos=pos,
                head=0 if i == 0 else 1,
                deprel="dep",
            )
            for i, (form, pos) in enumerate(record["tokens"])
        )
        out.append(Sentence(id=record["id"], tokens=tokens))
    return out


def cmd_build(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    objective = _parse_objective(args.objective)
    in_dir = Path(args.input)
    out = _out_dir(args.out)

    instances_path = in_dir / "instances.jsonl"
    sentences_path = in_dir / "sentences.jsonl"
    vocab_path = in_dir / "vocab.json"
    for required in (instances_path, sentences_path, vocab_path):
        if not required.exists():
            raise DataError(f"missing extract artifact: {required}")

    vocab = Vocab.from_dict(read_json(vocab_path))
    vocab_digest = digest_of(vocab.to_dict())

    train_sentences = _sentences_for_table(sentences_path, "train")
    table = build_verb_form_table(train_sentences)
    table_path = out / "table.json"
    write_json(table_path, table.to_dict())
    write_json(out / "vocab.json", vocab.to_dict())

    records = _load_instance_records(instances_path)
    if args.hard_only:
        records = [r for r in records if len(r["intervening_numbers"]) >= 1]
        split_cfg = config_mod.split_assignment(tree, train_override=args.hard_train_frac)
        for record in records:
            record["split"] = assign_split(record["sentence_id"], split_cfg).value

    counts = {}
    skipped = {}
    extra_meta = {}
    for split in ("train", "valid", "test"):
        if objective is Objective.LM:
            split_sentences = _sentences_for_table(sentences_path, split)
            examples = [make_lm(s, vocab) for s in split_sentences]
            skipped[split] = 0
        else:
            instances = [
                instance_from_dict(r) for r in records if r.get("split") == split
            ]
            examples, n_skipped = examples_for_objective(
                objective, instances, vocab, table
            )
            skipped[split] = n_skipped
        counts[split] = len(examples)
        write_jsonl(out / f"{split}.jsonl", (ex.to_dict() for ex in examples))
        if objective is Objective.GRAMMATICALITY and examples:
            flips = sum(
                1 for ex in examples if ex.target.value == "UNGRAMMATICAL"
            )
            extra_meta[f"flip_rate_{split}"] = flips / len(examples)

    meta = {
        "objective": objective.value,
        "vocab_digest": vocab_digest,
        "counts": counts,
        "skipped": skipped,
        "hard_only": args.hard_only,
        "verb_form_pairs": len(table),
        **extra_meta,
    }
    write_json(out / "meta.json", meta)

    manifest = Manifest("build", tree)
    for path in (instances_path, sentences_path, vocab_path):
        manifest.add_input(path)
    for split in ("train", "valid", "test"):
        manifest.add_output(out / f"{split}.jsonl")
    manifest.add_output(table_path)
    manifest.add_output(out / "meta.json")
    manifest.write(out / "manifest.json")
    log.info(
        "built %s datasets: train=%d valid=%d test=%d -> %s",
        objective.value, counts["train"], counts["valid"], counts["test"], out,
    )
    return 0


def _parse_objective(name: str) -> Objective:
    try:
        return Objective(name)
    except ValueError:
        valid = ", ".join(o.value for o in Objective)
        raise UsageError(f"unknown objective {name!r}; expected one of: {valid}")


# --- train ---------------------------------------------------------------------


def _load_examples(path: Path) -> list[ObjectiveExample]:
    return [ObjectiveExample.from_dict(record) for record in read_jsonl(path)]


def _train_one_seed(payload) -> dict:
    """Worker for one seed: loads data, trains, writes checkpoint and log."""
    (data_dir, run_dir, seed, config_kwargs, resume_from) = payload
    data_dir = Path(data_dir)
    run_dir = Path(run_dir)
    meta = read_json(data_dir / "meta.json")
    objective = Objective(meta["objective"])
    vocab_data = read_json(data_dir / "vocab.json")
    vocab_digest = digest_of(vocab_data)
    train_examples = _load_examples(data_dir / "train.jsonl")
    valid_examples = _load_examples(data_dir / "valid.jsonl")

    config = TrainConfig(objective=objective, seed=seed, **config_kwargs)
    start = None
    if resume_from is not None:
        state_doc = read_json(Path(resume_from) / "train_state.json")
        start = TrainState.from_dict(state_doc)

    vocab_size = len(Vocab.from_dict(vocab_data))
    result = train(config, train_examples, valid_examples, vocab_size, start=start)

    seed_dir = run_dir / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    doc = checkpoint_dict(
        result.model,
        vocab_data=vocab_data,
        vocab_digest=vocab_digest,
        objective=objective.value,
        train_state={
            "best_epoch": result.best_epoch,
            "best_valid_error": result.best_valid_error,
            "epochs_run": result.state.epoch,
            "stopped_early": result.stopped_early,
        },
    )
    save_checkpoint(seed_dir / "checkpoint.json", doc)
    write_json(seed_dir / "train_state.json", result.state.to_dict())
    write_json(
        seed_dir / "log.json",
        {
            "seed": seed,
            "objective": objective.value,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "valid_error": e.valid_error,
                    "best_so_far": e.best_so_far,
                }
                for e in result.log
            ],
            "best_epoch": result.best_epoch,
            "best_valid_error": result.best_valid_error,
            "stopped_early": result.stopped_early,
        },
    )
    return {
        "seed": seed,
        "best_epoch": result.best_epoch,
        "best_valid_error": result.best_valid_error,
        "epochs_run": result.state.epoch,
    }


def cmd_train(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    data_dir = Path(args.data)
    out = _out_dir(args.out)
    meta = read_json(data_dir / "meta.json")
    objective = Objective(meta["objective"])

    section = tree["train"]
    config_kwargs = {
        "cell": args.cell or section["cell"],
        "dim": section["dim"],
        "hidden": section["hidden"],
        "lr": section["lr"],
        "beta1": section["beta1"],
        "beta2": section["beta2"],
        "epsilon": section["epsilon"],
        "batch_size": section["batch_size"],
        "max_epochs": args.epochs or section["max_epochs"],
        "patience": section["patience"],
        "clip_norm": section["clip_norm"],
        "hard_only": bool(meta.get("hard_only")),
    }
    if config_kwargs["cell"] not in ("lstm", "srn"):
        raise UsageError(f"unknown cell type {config_kwargs['cell']!r}")

    if args.seed_list:
        seeds = [int(s) for s in args.seed_list.split(",") if s.strip()]
    else:
        count = args.seeds or DEFAULT_SEED_COUNTS.get(objective, 10)
        seeds = list(range(1, count + 1))
    if args.resume and len(seeds) != 1:
        raise UsageError("--resume works with exactly one seed")

    payloads = [
        (str(data_dir), str(out), seed, config_kwargs, args.resume) for seed in seeds
    ]
    if args.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            summaries = list(pool.map(_train_one_seed, payloads))
    else:
        summaries = []
        for payload in payloads:
            summaries.append(_train_one_seed(payload))
            log.info(
                "seed %d: best valid error %.4f (epoch %d)",
                summaries[-1]["seed"],
                summaries[-1]["best_valid_error"],
                summaries[-1]["best_epoch"],
            )

    summary = {
        "objective": objective.value,
        "cell": config_kwargs["cell"],
        "seeds": summaries,
        "mean_best_valid_error": sum(s["best_valid_error"] for s in summaries)
        / len(summaries),
    }
    write_json(out / "summary.json", summary)

    manifest = Manifest("train", tree, seeds=seeds)
    for name in ("train.jsonl", "valid.jsonl", "meta.json", "vocab.json"):
        manifest.add_input(data_dir / name)
    for seed in seeds:
        manifest.add_output(out / f"seed_{seed}" / "checkpoint.json")
        manifest.add_output(out / f"seed_{seed}" / "log.json")
    manifest.add_output(out / "summary.json")
    manifest.write(out / "manifest.json")
    log.info("trained %d seed(s) -> %s", len(seeds), out)
    return 0


# --- eval -----------------------------------------------------------------------


def _write_report(report: EvalReport, out: Path, stem: str = "report") -> list[Path]:
    json_path = out / f"{stem}.json"
    csv_path = out / f"{stem}.csv"
    write_json(json_path, report.to_dict())
    write_csv(csv_path, report.rows(), REPORT_COLUMNS)
    return [json_path, csv_path]


def cmd_eval(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    out = _out_dir(args.out)
    split = None if args.split == "all" else args.split
    instances = _load_instances(Path(args.instances), split)
    if not instances:
        raise DataError(f"no instances with split={args.split} in {args.instances}")

    modes = [bool(args.checkpoint), bool(args.baseline), bool(args.external)]
    if sum(modes) != 1:
        raise UsageError("choose exactly one of --checkpoint, --baseline, --external")

    inputs = [Path(args.instances)]
    if args.baseline:
        if args.baseline == "majority":
            report = majority_baseline(instances, meta={"split": args.split})
        elif args.baseline == "recency":
            report = recency_baseline(instances, meta={"split": args.split})
        else:
            raise UsageError(f"unknown baseline {args.baseline!r}")
    elif args.external:
        eval_cfg = tree["eval"]
        sampled = sample_per_attractor(
            instances,
            per_bin=eval_cfg["per_attractor_sample"],
            seed=eval_cfg["sample_seed"],
        )
        scores = {}
        for record in read_jsonl(args.external):
            scores[record["instance_id"]] = (
                float(record["logp_correct"]),
                float(record["logp_flipped"]),
            )
        report = eval_external(
            scores,
            sampled,
            meta={"split": args.split, "scores_digest": sha256_file(args.external)},
        )
        inputs.append(Path(args.external))
    else:
        doc = load_checkpoint(args.checkpoint)
        model = model_from_checkpoint(doc)
        vocab = Vocab.from_dict(doc["vocab"])
        if doc.get("vocab_digest") and digest_of(doc["vocab"]) != doc["vocab_digest"]:
            raise DataError("checkpoint vocabulary does not match its recorded digest")
        if args.vocab:
            external_digest = digest_of(read_json(args.vocab))
            if external_digest != doc.get("vocab_digest"):
                raise DataError(
                    "vocabulary/checkpoint mismatch: "
                    f"{args.vocab} digest {external_digest[:12]} != checkpoint "
                    f"digest {str(doc.get('vocab_digest'))[:12]}"
                )
            inputs.append(Path(args.vocab))
        objective = Objective(doc.get("objective") or "number_pred")
        table = None
        if args.table:
            table = VerbFormTable.from_dict(read_json(args.table))
            inputs.append(Path(args.table))
        report = evaluate_checkpoint(
            model,
            objective,
            instances,
            vocab,
            table=table,
            meta={"split": args.split, "checkpoint_digest": sha256_file(args.checkpoint)},
        )
        inputs.append(Path(args.checkpoint))

    written = _write_report(report, out)
    manifest = Manifest("eval", tree)
    for path in inputs:
        manifest.add_input(path)
    for path in written:
        manifest.add_output(path)
    manifest.write(out / "manifest.json")
    log.info(
        "evaluated %d instances: overall error %.4f -> %s",
        report.overall.n, report.overall.error_rate if report.overall.n else 0.0, out,
    )
    return 0


# --- probe ----------------------------------------------------------------------


def _trace_rows(trace_obj) -> tuple[list[str], list[list]]:
    """Series-per-row layout with the tokens as the header row."""
    header = ["series"] + list(trace_obj.tokens)
    rows: list[list] = [["p_plural"] + [float(v) for v in trace_obj.p_plural]]
    h = trace_obj.hidden.shape[1]
    for unit in range(h):
        rows.append([f"unit_{unit}"] + [float(v) for v in trace_obj.hidden[:, unit]])
    if trace_obj.cell is not None:
        for unit in range(h):
            rows.append([f"cell_{unit}"] + [float(v) for v in trace_obj.cell[:, unit]])
    return header, rows


def cmd_probe(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    checkpoint_path = Path(args.checkpoint) if args.checkpoint else None
    if checkpoint_path is None or not checkpoint_path.exists():
        raise UsageError("probe needs a trained --checkpoint file")
    doc = load_checkpoint(checkpoint_path)
    if doc["config"]["mode"] != "classifier":
        raise UsageError("probe needs a classifier checkpoint (not a language model)")
    model = model_from_checkpoint(doc)
    vocab = Vocab.from_dict(doc["vocab"])
    out = _out_dir(args.out)

    lexicon = build_lexicon(vocab, size=10)
    templates = generate_templates(lexicon, vocab)
    rows = classify_templates(model, templates, vocab)
    templates_path = out / "templates.csv"
    write_csv(
        templates_path,
        rows,
        (
            "sentence",
            "modifier",
            "n1_number",
            "n2_number",
            "expected",
            "predicted",
            "p_plural",
            "correct",
        ),
    )
    pp_rows = [r for r in rows if r["modifier"] == "PP"]
    rc_rows = [r for r in rows if r["modifier"] == "RC"]

    # Condition-averaged traces over the lexical sets (8 curves).
    h = model.config.hidden
    condition_rows = []
    for modifier in ("PP", "RC"):
        for n1 in ("SINGULAR", "PLURAL"):
            for n2 in ("SINGULAR", "PLURAL"):
                matched = [
                    t
                    for t in templates
                    if t.modifier == modifier
                    and t.n1_number.value == n1
                    and t.n2_number.value == n2
                ]
                traces = [trace(model, t.tokens, vocab) for t in matched]
                p = np.mean([tr.p_plural for tr in traces], axis=0)
                hid = np.mean([tr.hidden for tr in traces], axis=0)
                for position in range(p.shape[0]):
                    row = {
                        "condition": f"{modifier}_{n1[:2]}_{n2[:2]}",
                        "position": position,
                        "p_plural": float(p[position]),
                    }
                    for unit in range(h):
                        row[f"unit_{unit}"] = float(hid[position, unit])
                    condition_rows.append(row)
    condition_path = out / "condition_traces.csv"
    write_csv(
        condition_path,
        condition_rows,
        ["condition", "position", "p_plural"] + [f"unit_{u}" for u in range(h)],
    )

    pp_trace, rc_trace = long_modifier_probe(model, vocab)
    for name, trace_obj in (("pp", pp_trace), ("rc", rc_trace)):
        header, rows_t = _trace_rows(trace_obj)
        write_csv_raw(out / f"trace_long_{name}.csv", header, rows_t)
    pair_rows = [
        {
            "position": i,
            "token_pp": pp_trace.tokens[i],
            "token_rc": rc_trace.tokens[i],
            "p_plural_pp": float(pp_trace.p_plural[i]),
            "p_plural_rc": float(rc_trace.p_plural[i]),
        }
        for i in range(len(pp_trace.tokens))
    ]
    pair_path = out / "long_modifier.csv"
    write_csv(
        pair_path,
        pair_rows,
        ("position", "token_pp", "token_rc", "p_plural_pp", "p_plural_rc"),
    )

    pca = pca_embeddings(model, vocab, threshold=args.threshold)
    pca_path = out / "pca.csv"
    write_csv(
        pca_path,
        [
            {
                "word": pca.words[i],
                "pc1": float(pca.coords[i, 0]),
                "pc2": float(pca.coords[i, 1]),
                "number": pca.numbers[i].value,
            }
            for i in range(len(pca.words))
        ],
        ("word", "pc1", "pc2", "number"),
    )

    summary = {
        "templates_total": len(rows),
        "pp_correct": sum(r["correct"] for r in pp_rows),
        "pp_total": len(pp_rows),
        "rc_correct": sum(r["correct"] for r in rc_rows),
        "rc_total": len(rc_rows),
        "pca_words": len(pca.words),
        "pca_explained_variance": [float(v) for v in pca.explained_variance],
    }
    write_json(out / "probe_summary.json", summary)

    manifest = Manifest("probe", tree)
    manifest.add_input(checkpoint_path)
    for path in (
        templates_path,
        condition_path,
        pair_path,
        pca_path,
        out / "trace_long_pp.csv",
        out / "trace_long_rc.csv",
        out / "probe_summary.json",
    ):
        manifest.add_output(path)
    manifest.write(out / "manifest.json")
    log.info(
        "probe: PP %d/%d, RC %d/%d -> %s",
        summary["pp_correct"], summary["pp_total"],
        summary["rc_correct"], summary["rc_total"], out,
    )
    return 0


# --- report ----------------------------------------------------------------------


def cmd_report(args) -> int:
    tree = config_mod.load_config(args.config, args.set)
    out = _out_dir(args.out)
    reports = []
    for path in args.reports:
        doc = read_json(path)
        report = EvalReport()
        overall = doc["overall"]
        report.overall.n = overall["n"]
        report.overall.errors = overall["errors"]
        report.skipped = doc.get("skipped", 0)
        for row in doc["strata"]:
            stats = report.stratum(row["key"])
            stats.n = row["n"]
            stats.errors = row["errors"]
        reports.append(report)
    if not reports:
        raise UsageError("report needs at least one report.json input")

    pooled = pool_reports(reports)
    write_json(out / "pooled.json", pooled.to_dict())
    write_csv(out / "pooled.csv", pooled.rows(), REPORT_COLUMNS)
    mean_rows = mean_report_rows(reports)
    write_json(out / "mean.json", {"rows": mean_rows, "runs": len(reports)})
    write_csv(out / "mean.csv", mean_rows, MEAN_COLUMNS)

    manifest = Manifest("report", tree)
    for path in args.reports:
        manifest.add_input(path)
    for name in ("pooled.json", "pooled.csv", "mean.json", "mean.csv"):
        manifest.add_output(out / name)
    manifest.write(out / "manifest.json")
    log.info("merged %d reports -> %s", len(reports), out)
    return 0


# --- gradcheck ---------------------------------------------------------------------


GRADCHECK_CONFIGS = (
    ("lstm-classifier", ModelConfig(cell="lstm", mode="classifier", vocab_size=11, dim=4, hidden=4)),
    ("srn-classifier", ModelConfig(cell="srn", mode="classifier", vocab_size=11, dim=4, hidden=4)),
    ("lstm-lm", ModelConfig(cell="lstm", mode="lm", vocab_size=11, dim=4, hidden=4)),
)


def cmd_gradcheck(args) -> int:
    reports = []
    all_passed = True
    for label, model_config in GRADCHECK_CONFIGS:
        for seed in range(1, args.seeds + 1):
            report = grad_check(
                model_config,
                seed=seed,
                tolerance=args.tolerance,
                seq_len=6,
                label=f"{label}-seed{seed}",
            )
            all_passed &= report.passed
            status = "PASS" if report.passed else "FAIL"
            print(f"{status} {report.label} max_rel_error={report.worst:.3e}")
            reports.append(
                {
                    "label": report.label,
                    "passed": report.passed,
                    "max_rel_error": report.max_rel_error,
                }
            )
    if args.out:
        out = _out_dir(args.out)
        write_json(
            out / "gradcheck.json",
            {"tolerance": args.tolerance, "reports": reports, "passed": all_passed},
        )
    if not all_passed:
        raise NumericError("gradient check failed")
    return 0


# --- synth ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    config = SynthConfig(
        n_sentences=args.sentences,
        seed=args.seed,
        singular_fraction=args.singular_fraction,
    )
    count = write_corpus(out, config)
    log.info("wrote %d synthetic sentences -> %s", count, out)
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svagree",
        description="Subject-verb number agreement: extraction, training, evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"svagree {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config override, e.g. --set corpus.max_len=40",
        )
        p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("extract", help="mine agreement instances from CoNLL corpora")
    p.add_argument("corpus", nargs="+", help="CoNLL-style input file(s)")
    p.add_argument("-o", "--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build", help="build objective datasets from instances")
    p.add_argument("-i", "--input", required=True, help="extract output directory")
    p.add_argument("-o", "--out", required=True, help="dataset output directory")
    p.add_argument("--objective", required=True, help="one of: %s" % ", ".join(o.value for o in Objective))
    p.add_argument(
        "--hard-only",
        action="store_true",
        help="keep only dependencies with at least one intervening noun",
    )
    p.add_argument(
        "--hard-train-frac",
        type=float,
        default=0.20,
        help="train fraction override used with --hard-only",
    )
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train models under one objective")
    p.add_argument("-d", "--data", required=True, help="build output directory")
    p.add_argument("-o", "--out", required=True, help="run output directory")
    p.add_argument("--cell", choices=["lstm", "srn"], help="recurrent cell type")
    p.add_argument("--seeds", type=int, help="number of seeds (default per objective)")
    p.add_argument("--seed-list", help="comma-separated explicit seeds")
    p.add_argument("--epochs", type=int, help="override train.max_epochs")
    p.add_argument("--resume", help="seed directory to continue training from")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="stratified evaluation on test instances")
    p.add_argument("--checkpoint", help="trained checkpoint.json")
    p.add_argument("--baseline", choices=["majority", "recency"])
    p.add_argument("--external", help="external score file (jsonl)")
    p.add_argument("--instances", required=True, help="instances.jsonl from extract")
    p.add_argument("--split", default="test", choices=["train", "valid", "test", "all"])
    p.add_argument("--table", help="verb form table.json (inflection/grammaticality/LM)")
    p.add_argument("--vocab", help="vocab.json to verify against the checkpoint digest")
    p.add_argument("-o", "--out", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="template, trace, and PCA probes")
    p.add_argument("--checkpoint", help="trained classifier checkpoint.json")
    p.add_argument("--threshold", type=float, default=0.9, help="majority-POS threshold")
    p.add_argument("-o", "--out", required=True)
    common(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", help="merge evaluation reports (pooled + per-run mean)")
    p.add_argument("reports", nargs="+", help="report.json files")
    p.add_argument("-o", "--out", required=True)
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("-o", "--out", help="optional directory for gradcheck.json")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic parsed corpus")
    p.add_argument("-o", "--out", required=True, help="output CoNLL file")
    p.add_argument("--sentences", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--singular-fraction", type=float, default=0.68)
    common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return 2
    except DataError as exc:
        log.error("%s", exc)
        return 3
    except NumericError as exc:
        log.error("%s", exc)
        return 4
    except SvagreeError as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
