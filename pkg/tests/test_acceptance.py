"""Acceptance suite: every release criterion as one test, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.

The desk-scale criteria share one synthetic-corpus pipeline (session fixture):
a 24k-sentence parsed corpus, the default 9/1/90 split for the headline
number-prediction and language-model runs, and a 20% split for the template
probe model.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from svagree.cli import main
from svagree.corpus import read_conll
from svagree.evaluation import (
    binomial_ci,
    majority_baseline,
    recency_baseline,
)
from svagree.extract import (
    NOUN_TAGS,
    ExtractConfig,
    Number,
    annotate,
    extract_instances,
    instance_from_dict,
)
from svagree.nn import ModelConfig, grad_check
from svagree.objectives import (
    build_verb_form_table,
    grammaticality_coin,
)
from svagree.probe import top_principal_components
from svagree.runio import read_json, read_jsonl

DATA = Path(__file__).parent / "data"
FIXTURE = str(DATA / "fixture.conll")


def report_line(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {status} {name}" + (f": {detail}" if detail else ""))
    assert passed, f"{name}: {detail}"


def run_cli(argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    """Synthetic-corpus pipeline shared by the desk-scale criteria."""
    root = tmp_path_factory.mktemp("desk")
    corpus = root / "corpus.conll"
    assert run_cli(["synth", "-o", corpus, "--sentences", "24000", "--seed", "11"]) == 0

    started = time.monotonic()
    assert run_cli(["extract", corpus, "-o", root / "ex"]) == 0
    assert run_cli(["build", "-i", root / "ex", "-o", root / "np",
                    "--objective", "number_pred"]) == 0
    assert run_cli(["train", "-d", root / "np", "-o", root / "np_runs",
                    "--seed-list", "1"]) == 0
    train_seconds = time.monotonic() - started

    assert run_cli([
        "eval", "--checkpoint", root / "np_runs" / "seed_1" / "checkpoint.json",
        "--instances", root / "ex" / "instances.jsonl", "-o", root / "np_rep",
    ]) == 0
    assert run_cli([
        "eval", "--baseline", "majority",
        "--instances", root / "ex" / "instances.jsonl", "-o", root / "maj_rep",
    ]) == 0

    assert run_cli(["build", "-i", root / "ex", "-o", root / "lm",
                    "--objective", "lm"]) == 0
    assert run_cli(["train", "-d", root / "lm", "-o", root / "lm_runs"]) == 0
    assert run_cli([
        "eval", "--checkpoint", root / "lm_runs" / "seed_1" / "checkpoint.json",
        "--instances", root / "ex" / "instances.jsonl",
        "--table", root / "lm" / "table.json", "-o", root / "lm_rep",
    ]) == 0

    # richer training split for the constructed-template probe model
    assert run_cli(["extract", corpus, "-o", root / "ex20",
                    "--set", "split.train=0.2", "--set", "split.test=0.79"]) == 0
    assert run_cli(["build", "-i", root / "ex20", "-o", root / "np20",
                    "--objective", "number_pred"]) == 0
    assert run_cli(["train", "-d", root / "np20", "-o", root / "np20_runs",
                    "--seed-list", "1"]) == 0
    assert run_cli([
        "probe", "--checkpoint", root / "np20_runs" / "seed_1" / "checkpoint.json",
        "-o", root / "probe",
    ]) == 0
    return {"root": root, "train_seconds": train_seconds}


def strata_of(path: Path) -> dict:
    doc = read_json(path)
    rows = {r["key"]: r for r in doc["strata"]}
    rows["overall"] = doc["overall"]
    rows["_skipped"] = doc.get("skipped", 0)
    return rows


# --- 1. gradient correctness -------------------------------------------------


def test_gradient_correctness():
    configs = (
        ("lstm-classifier", ModelConfig("lstm", "classifier", vocab_size=11, dim=4, hidden=4)),
        ("srn-classifier", ModelConfig("srn", "classifier", vocab_size=11, dim=4, hidden=4)),
        ("lstm-lm", ModelConfig("lstm", "lm", vocab_size=11, dim=4, hidden=4)),
    )
    started = time.monotonic()
    worst = 0.0
    for label, config in configs:
        for seed in (1, 2, 3):
            report = grad_check(config, seed=seed, tolerance=1e-4, seq_len=6)
            worst = max(worst, report.worst)
            assert report.passed, f"{label} seed {seed}: {report.max_rel_error}"
    elapsed = time.monotonic() - started
    report_line(
        "gradient-correctness",
        worst < 1e-4 and elapsed < 30.0,
        f"max rel error {worst:.2e}, {elapsed:.1f}s",
    )


# --- 2. extraction oracle ------------------------------------------------------


def test_extraction_oracle(fixture_sentences, fixture_annotations):
    checked = 0
    mismatches = []
    for sentence, annotation in zip(fixture_sentences, fixture_annotations):
        for key, expected in annotation["annotations"].items():
            s, v = (int(x) for x in key.split("-"))
            inst = annotate(sentence, s, v)
            got = {
                "subject_number": inst.subject_number.value if inst.subject_number else None,
                "verb_number": inst.verb_number.value,
                "distance": inst.distance,
                "intervening_numbers": [n.value for n in inst.intervening_numbers],
                "n_attractors": inst.n_attractors,
                "homogeneous": inst.homogeneous,
                "last_intervening": (
                    inst.last_intervening.value if inst.last_intervening else None
                ),
                "has_rel_clause": inst.has_rel_clause,
                "has_overt_relativizer": inst.has_overt_relativizer,
            }
            if got != expected:
                mismatches.append((annotation["label"], key))
            checked += 1

    labels = {a["label"]: a for a in fixture_annotations}
    roses_door = labels["homogeneous_two_attractors_roses_door"]["annotations"]["2-9"]
    roses_chairs = labels["non_homogeneous_roses_chairs"]["annotations"]["2-9"]
    structural = (
        roses_door["n_attractors"] == 2
        and roses_door["homogeneous"] is True
        and roses_chairs["homogeneous"] is False
    )
    report_line(
        "extraction-oracle",
        checked >= 20 and not mismatches and structural,
        f"{checked} hand-annotated pairs, mismatches: {mismatches}",
    )


# --- 3. baseline exactness ------------------------------------------------------


def test_baseline_exactness(fixture_sentences):
    config = ExtractConfig(select_one=False)
    instances = [
        inst
        for sentence in fixture_sentences
        for inst in extract_instances(sentence, config)
    ]
    recency = recency_baseline(instances)
    opposite_keys = [
        k for k in recency.strata if k.startswith("last=OPPOSITE|") and recency.strata[k].n
    ]
    opposite_n = sum(recency.strata[k].n for k in opposite_keys)
    opposite_errors = sum(recency.strata[k].errors for k in opposite_keys)

    clean = [
        inst
        for inst in instances
        if not inst.intervening_numbers
        and inst.prefix[inst.subject_index - 1][1] in NOUN_TAGS
    ]
    clean_report = recency_baseline(clean)

    majority = majority_baseline(instances)
    plural_fraction = sum(
        1 for inst in instances if inst.verb_number is Number.PLURAL
    ) / len(instances)

    ok = (
        opposite_n > 0
        and opposite_errors == opposite_n
        and len(clean) > 0
        and clean_report.overall.errors == 0
        and majority.overall.error_rate == pytest.approx(plural_fraction, abs=1e-12)
    )
    report_line(
        "baseline-exactness",
        ok,
        f"recency {opposite_errors}/{opposite_n} on OPPOSITE, "
        f"0 expected={clean_report.overall.errors} on clean ({len(clean)}), "
        f"majority {majority.overall.error_rate:.4f} vs plural fraction {plural_fraction:.4f}",
    )


# --- 4. desk-scale training -------------------------------------------------------


def test_desk_scale_training(desk):
    root = desk["root"]
    stats = read_json(root / "ex" / "stats.json")
    assert stats["instances"]["total"] >= 20_000

    model_rows = strata_of(root / "np_rep" / "report.json")
    majority_rows = strata_of(root / "maj_rep" / "report.json")
    overall = model_rows["overall"]["rate"]
    majority = majority_rows["overall"]["rate"]
    attr0 = model_rows["attractors=0"]["rate"]
    attr1 = model_rows["attractors=1"]["rate"]
    ok = (
        overall < majority
        and attr1 > attr0
        and desk["train_seconds"] < 15 * 60
    )
    report_line(
        "desk-scale-training",
        ok,
        f"overall {overall:.4f} < majority {majority:.4f}; "
        f"attr1 {attr1:.4f} > attr0 {attr0:.4f}; "
        f"pipeline {desk['train_seconds']:.0f}s",
    )


# --- 5. objective ordering ----------------------------------------------------------


def test_objective_ordering(desk):
    root = desk["root"]
    np_rows = strata_of(root / "np_rep" / "report.json")
    lm_rows = strata_of(root / "lm_rep" / "report.json")
    np_attr1 = np_rows["attractors=1"]["rate"]
    lm_attr1 = lm_rows["attractors=1"]["rate"]
    same_instances = (
        lm_rows["_skipped"] == 0
        and lm_rows["attractors=1"]["n"] == np_rows["attractors=1"]["n"]
    )
    report_line(
        "objective-ordering",
        same_instances and lm_attr1 > np_attr1,
        f"LM {lm_attr1:.4f} > number-prediction {np_attr1:.4f} on 1-attractor "
        f"(n={np_rows['attractors=1']['n']})",
    )


# --- 6. template probe -----------------------------------------------------------------


def test_template_probe(desk):
    summary = read_json(desk["root"] / "probe" / "probe_summary.json")
    ok = summary["pp_total"] == 40 and summary["pp_correct"] >= 36
    report_line(
        "template-probe",
        ok,
        f"PP {summary['pp_correct']}/{summary['pp_total']} "
        f"(RC {summary['rc_correct']}/{summary['rc_total']})",
    )


# --- 7. grammaticality data -------------------------------------------------------------


def test_grammaticality_data(desk):
    root = desk["root"]
    instances = [
        instance_from_dict(r) for r in read_jsonl(root / "ex" / "instances.jsonl")
    ]
    assert len(instances) >= 10_000
    sentences = list(read_conll(root / "corpus.conll"))
    table = build_verb_form_table(sentences)

    flippable = [i for i in instances if table.flip(i.verb_form) is not None]
    flips = sum(1 for i in flippable if grammaticality_coin(i.instance_id))
    flip_rate = flips / len(flippable)

    involutive = all(
        table.flip(table.flip(i.verb_form)) == i.verb_form.lower() for i in flippable
    )
    ok = (
        len(flippable) >= 10_000
        and 0.49 <= flip_rate <= 0.51
        and involutive
        and len(flippable) == len(instances)  # every synthetic verb is mapped
    )
    report_line(
        "grammaticality-data",
        ok,
        f"flip rate {flip_rate:.4f} over {len(flippable)} instances, involutive={involutive}",
    )


# --- 8. statistical plumbing ---------------------------------------------------------------


def test_statistical_plumbing():
    from statistics import NormalDist

    z = NormalDist().inv_cdf(0.975)

    def closed_form(errors, n):
        p = errors / n
        denom = 1 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        margin = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
        return max(0.0, min(center - margin, p)), min(1.0, max(center + margin, p))

    wilson_ok = True
    for errors, n in ((0, 100), (50, 100), (100, 100)):
        low, high = binomial_ci(errors, n)
        exp_low, exp_high = closed_form(errors, n)
        wilson_ok &= abs(low - exp_low) < 1e-10 and abs(high - exp_high) < 1e-10

    rng = np.random.default_rng(20)
    matrix = rng.normal(size=(20, 6))
    components, variances = top_principal_components(matrix, k=2)
    centered = matrix - matrix.mean(axis=0)
    eigvals, eigvecs = np.linalg.eigh(centered.T @ centered / 19)
    order = np.argsort(eigvals)[::-1]
    pca_ok = True
    for j in range(2):
        expected = eigvecs[:, order[j]]
        sign = 1.0 if np.dot(expected, components[j]) >= 0 else -1.0
        pca_ok &= bool(np.max(np.abs(components[j] - sign * expected)) < 1e-8)
        pca_ok &= abs(variances[j] - eigvals[order[j]]) < 1e-8

    report_line(
        "statistical-plumbing",
        wilson_ok and pca_ok,
        f"wilson={wilson_ok} pca={pca_ok}",
    )


# --- 9. determinism ---------------------------------------------------------------------------


def test_end_to_end_determinism(tmp_path):
    def one_run(tag):
        base = tmp_path / tag
        base.mkdir()
        corpus = base / "corpus.conll"
        assert run_cli(["synth", "-o", corpus, "--sentences", "500", "--seed", "21"]) == 0
        assert run_cli(["extract", corpus, "-o", base / "ex",
                        "--set", "split.train=0.4", "--set", "split.valid=0.1",
                        "--set", "split.test=0.5"]) == 0
        assert run_cli(["build", "-i", base / "ex", "-o", base / "data",
                        "--objective", "number_pred"]) == 0
        assert run_cli(["train", "-d", base / "data", "-o", base / "runs",
                        "--seed-list", "1", "--epochs", "3",
                        "--set", "train.dim=12", "--set", "train.hidden=12"]) == 0
        assert run_cli(["eval", "--checkpoint", base / "runs" / "seed_1" / "checkpoint.json",
                        "--instances", base / "ex" / "instances.jsonl",
                        "-o", base / "rep"]) == 0
        return base

    a = one_run("a")
    b = one_run("b")
    identical = True
    for rel in (
        Path("ex") / "instances.jsonl",
        Path("runs") / "seed_1" / "checkpoint.json",
        Path("rep") / "report.json",
        Path("rep") / "report.csv",
    ):
        identical &= (a / rel).read_bytes() == (b / rel).read_bytes()
    report_line("determinism", identical, "extract/train/eval reports byte-identical")
