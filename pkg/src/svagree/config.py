"""Configuration tree: built-in defaults, overridden by a JSON config file,
overridden in turn by command-line flags (`--set section.key=value`).

Keys mirror the pipeline stages:

    corpus.columns.{form,pos,head,deprel}   1-based CoNLL column positions
    corpus.max_len                          sentence length cap (null = off)
    split.{train,valid,test,seed}           hash-split fractions and seed
    extract.{subject_label,rc_labels,relativizer_tags,relativizer_forms,
             vocab_cap,select_one,select_seed}
    train.{cell,dim,hidden,lr,beta1,beta2,epsilon,batch_size,max_epochs,
           patience,clip_norm}
    eval.{per_attractor_sample,sample_seed}
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .corpus import ColumnLayout, SplitAssignment
from .errors import UsageError
from .extract import ExtractConfig

DEFAULTS: dict[str, Any] = {
    "corpus": {
        "columns": {"form": 2, "pos": 5, "head": 7, "deprel": 8},
        "max_len": 50,
    },
    "split": {"train": 0.09, "valid": 0.01, "test": 0.90, "seed": 1},
    "extract": {
        "subject_label": "nsubj",
        "rc_labels": ["rcmod", "relcl", "acl:relcl"],
        "relativizer_tags": ["WDT", "WP"],
        "relativizer_forms": ["that"],
        "vocab_cap": 10000,
        "select_one": True,
        "select_seed": 1,
    },
    "train": {
        "cell": "lstm",
        "dim": 50,
        "hidden": 50,
        "lr": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "batch_size": 16,
        "max_epochs": 20,
        "patience": 2,
        "clip_norm": 5.0,
    },
    "eval": {"per_attractor_sample": 500, "sample_seed": 1},
}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings need no quoting


def apply_overrides(tree: dict, assignments: list[str]) -> dict:
    """Apply `section.key=value` assignments; values parse as JSON when
    possible, otherwise as plain strings."""
    tree = copy.deepcopy(tree)
    for assignment in assignments:
        if "=" not in assignment:
            raise UsageError(f"override must look like key=value: {assignment!r}")
        dotted, text = assignment.split("=", 1)
        node = tree
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"cannot descend into non-section key: {dotted}")
        node[parts[-1]] = _parse_value(text)
    return tree


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> dict:
    tree = DEFAULTS
    if path is not None:
        try:
            file_tree = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load config file {path}: {exc}") from exc
        if not isinstance(file_tree, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        tree = _deep_merge(tree, file_tree)
    if overrides:
        tree = apply_overrides(tree, overrides)
    return tree


def column_layout(tree: dict) -> ColumnLayout:
    cols = tree["corpus"]["columns"]
    return ColumnLayout(
        form=cols["form"], pos=cols["pos"], head=cols["head"], deprel=cols["deprel"]
    )


def split_assignment(tree: dict, train_override: float | None = None) -> SplitAssignment:
    split = tree["split"]
    train = split["train"] if train_override is None else train_override
    if train_override is None:
        test = split["test"]
    else:
        test = 1.0 - train - split["valid"]
    return SplitAssignment(
        train_frac=train, valid_frac=split["valid"], test_frac=test, seed=split["seed"]
    )


def extract_config(tree: dict) -> ExtractConfig:
    section = tree["extract"]
    return ExtractConfig(
        subject_label=section["subject_label"],
        rc_labels=tuple(section["rc_labels"]),
        relativizer_tags=tuple(section["relativizer_tags"]),
        relativizer_forms=tuple(section["relativizer_forms"]),
        vocab_cap=section["vocab_cap"],
        select_one=section["select_one"],
        select_seed=section["select_seed"],
    )
