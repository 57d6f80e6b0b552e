"""Training driver (Adam + early stopping on validation error) and the
stratified evaluation harness: error rates by distance, last-intervening
noun, attractor count, and relative-clause condition, each with Wilson
95% binomial confidence intervals.

Evaluation works on per-instance correctness flags, so the same
stratification serves classifiers, the language-model two-form comparison,
the external-scorer adapter, and the heuristic baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError, NumericError
from .extract import (
    NOUN_TAGS,
    AgreementInstance,
    Number,
    Vocab,
    noun_number,
)
from .nn import (
    AdamState,
    ModelConfig,
    ParamStore,
    RecurrentModel,
    adam_update,
    example_loss,
    init_params,
)
from .objectives import (
    NUMBER_CLASSES,
    Objective,
    ObjectiveExample,
    VerbFormTable,
    flip_verb,
    make_grammaticality,
    make_nouns_only,
    make_number_pred,
    make_verb_inflect,
)

DISTANCE_MAX = 15  # distances beyond this pool into a "15+" stratum
ATTRACTOR_MAX = 4


@dataclass(frozen=True)
class TrainConfig:
    objective: Objective = Objective.NUMBER_PRED
    cell: str = "lstm"
    dim: int = 50
    hidden: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 20
    patience: int = 2
    clip_norm: float = 5.0
    seed: int = 1
    hard_only: bool = False
    train_fraction: float | None = None  # split override used with hard_only

    def __post_init__(self) -> None:
        if self.dim <= 0 or self.hidden <= 0:
            raise ValueError("model dimensions must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def model_config(self, vocab_size: int) -> ModelConfig:
        mode = "lm" if self.objective is Objective.LM else "classifier"
        return ModelConfig(
            cell=self.cell,
            mode=mode,
            vocab_size=vocab_size,
            dim=self.dim,
            hidden=self.hidden,
            n_classes=2,
        )


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    valid_error: float
    best_so_far: bool


@dataclass
class TrainState:
    """Everything needed to continue a run exactly where it stopped."""

    epoch: int
    adam: AdamState
    last_params: dict[str, np.ndarray]
    best_params: dict[str, np.ndarray]
    best_valid_error: float
    best_epoch: int
    epochs_since_best: int
    rng_state: dict

    def to_dict(self) -> dict:
        def pack(arrays: Mapping[str, np.ndarray]) -> dict:
            return {
                name: {"shape": list(a.shape), "data": a.reshape(-1).tolist()}
                for name, a in arrays.items()
            }

        return {
            "epoch": self.epoch,
            "adam": {
                "lr": self.adam.lr,
                "beta1": self.adam.beta1,
                "beta2": self.adam.beta2,
                "epsilon": self.adam.epsilon,
                "step": self.adam.step,
                "m": pack(self.adam.m),
                "v": pack(self.adam.v),
            },
            "last_params": pack(self.last_params),
            "best_params": pack(self.best_params),
            "best_valid_error": self.best_valid_error,
            "best_epoch": self.best_epoch,
            "epochs_since_best": self.epochs_since_best,
            "rng_state": self.rng_state,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainState":
        def unpack(packed: dict) -> dict[str, np.ndarray]:
            return {
                name: np.array(p["data"], dtype=np.float64).reshape(p["shape"])
                for name, p in packed.items()
            }

        adam_data = data["adam"]
        adam = AdamState(
            lr=adam_data["lr"],
            beta1=adam_data["beta1"],
            beta2=adam_data["beta2"],
            epsilon=adam_data["epsilon"],
            step=adam_data["step"],
            m=unpack(adam_data["m"]),
            v=unpack(adam_data["v"]),
        )
        return cls(
            epoch=data["epoch"],
            adam=adam,
            last_params=unpack(data["last_params"]),
            best_params=unpack(data["best_params"]),
            best_valid_error=data["best_valid_error"],
            best_epoch=data["best_epoch"],
            epochs_since_best=data["epochs_since_best"],
            rng_state=data["rng_state"],
        )


@dataclass
class TrainResult:
    model: RecurrentModel
    best_valid_error: float
    best_epoch: int
    log: list[EpochLog]
    state: TrainState
    stopped_early: bool


def _loss_target(model: RecurrentModel, ex: ObjectiveExample):
    return ex.target if model.config.mode == "lm" else ex.target_index


def dataset_error(
    model: RecurrentModel, examples: Sequence[ObjectiveExample]
) -> float:
    """Validation criterion: classification error rate for classifier
    objectives, mean per-token cross-entropy for the language model."""
    if not examples:
        raise DataError("empty validation set")
    if model.config.mode == "lm":
        total, count = 0.0, 0
        for ex in examples:
            loss, _, _ = example_loss(model, ex.input_ids, ex.target)
            total += loss * len(ex.input_ids)
            count += len(ex.input_ids)
        return total / count
    wrong = 0
    for ex in examples:
        if classify(model, ex) != ex.target_index:
            wrong += 1
    return wrong / len(examples)


def train(
    config: TrainConfig,
    train_examples: Sequence[ObjectiveExample],
    valid_examples: Sequence[ObjectiveExample],
    vocab_size: int,
    start: TrainState | None = None,
    progress: Callable[[EpochLog], None] | None = None,
) -> TrainResult:
    """Adam training with per-epoch validation and early stopping.

    Stops once validation error has not improved for `patience` epochs and
    returns the parameters of the best-validation epoch. Deterministic:
    the same (config, data) yields bitwise-identical parameters and log.
    Passing a saved TrainState continues that run, epoch counter included.
    """
    if not train_examples:
        raise DataError("empty training set")
    model_config = config.model_config(vocab_size)
    rng = np.random.default_rng(config.seed)
    if start is None:
        model = RecurrentModel(model_config, init_params(model_config, rng))
        adam = AdamState.for_params(
            model.ps, lr=config.lr, beta1=config.beta1, beta2=config.beta2,
            epsilon=config.epsilon,
        )
        best_params = model.ps.copy_params()
        best_error = math.inf
        best_epoch = 0
        epochs_since_best = 0
        first_epoch = 1
    else:
        model = RecurrentModel(
            model_config, ParamStore({n: a.copy() for n, a in start.last_params.items()})
        )
        adam = start.adam
        best_params = start.best_params
        best_error = start.best_valid_error
        best_epoch = start.best_epoch
        epochs_since_best = start.epochs_since_best
        first_epoch = start.epoch + 1
        rng.bit_generator.state = start.rng_state

    log: list[EpochLog] = []
    stopped_early = False
    last_epoch = first_epoch - 1

    order = np.arange(len(train_examples))
    for epoch in range(first_epoch, config.max_epochs + 1):
        last_epoch = epoch
        rng.shuffle(order)
        total_loss = 0.0
        batch_count = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.ps.zero_grads()
            for idx in batch:
                ex = train_examples[idx]
                loss, _, dlogits = example_loss(
                    model, ex.input_ids, _loss_target(model, ex)
                )
                if not math.isfinite(loss):
                    raise NumericError(
                        f"training diverged: non-finite loss at epoch {epoch}"
                    )
                total_loss += loss
                model.backward(dlogits)
            model.ps.scale_grads(1.0 / len(batch))
            model.ps.clip_grads(config.clip_norm)
            adam_update(model.ps, adam)
            batch_count += 1

        valid_error = dataset_error(model, valid_examples)
        improved = valid_error < best_error
        if improved:
            best_error = valid_error
            best_epoch = epoch
            best_params = model.ps.copy_params()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        entry = EpochLog(
            epoch=epoch,
            train_loss=total_loss / max(1, len(order)),
            valid_error=valid_error,
            best_so_far=improved,
        )
        log.append(entry)
        if progress is not None:
            progress(entry)
        if epochs_since_best >= config.patience:
            stopped_early = True
            break

    final_state = TrainState(
        epoch=last_epoch,
        adam=adam,
        last_params=model.ps.copy_params(),
        best_params=best_params,
        best_valid_error=best_error,
        best_epoch=best_epoch,
        epochs_since_best=epochs_since_best,
        rng_state=rng.bit_generator.state,
    )
    model.ps.load_params(best_params)
    return TrainResult(
        model=model,
        best_valid_error=best_error,
        best_epoch=best_epoch,
        log=log,
        state=final_state,
        stopped_early=stopped_early,
    )


def classify(model: RecurrentModel, example: ObjectiveExample) -> int:
    """Argmax class index; exact ties break toward index 0 (SINGULAR)."""
    result = model.forward(example.input_ids)
    probs = result.probs
    best = 0
    for k in range(1, probs.shape[0]):
        if probs[k] > probs[best]:
            best = k
    return best


def predict_number(model: RecurrentModel, example: ObjectiveExample) -> Number:
    return NUMBER_CLASSES[classify(model, example)]


def lm_compare(
    model: RecurrentModel,
    inst: AgreementInstance,
    table: VerbFormTable,
    vocab: Vocab,
) -> Number | None:
    """Compare the LM's probabilities for the two verb forms at the verb
    position and return the number of the higher one (ties -> SINGULAR).

    None when either form falls outside the word vocabulary (such instances
    are excluded from LM evaluation and counted by the caller).
    """
    flipped = flip_verb(inst, table)
    if flipped is None:
        return None
    correct_id = vocab.word_id(inst.verb_form)
    flipped_id = vocab.word_id(flipped[0])
    if correct_id is None or flipped_id is None or correct_id == flipped_id:
        return None
    prefix_ids = [vocab.bos_id] + vocab.encode_pairs(inst.prefix)
    result = model.forward(prefix_ids)
    dist = result.probs[-1]
    p_correct = float(dist[correct_id])
    p_flipped = float(dist[flipped_id])
    if p_correct == p_flipped:
        return Number.SINGULAR
    if p_correct > p_flipped:
        return inst.verb_number
    return inst.verb_number.flipped()


# --- Wilson interval -------------------------------------------------------


def binomial_ci(errors: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for an error proportion."""
    if n < 1:
        raise ValueError("binomial_ci needs n >= 1")
    if not 0 <= errors <= n:
        raise ValueError(f"errors {errors} outside [0, {n}]")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = errors / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    margin = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    # clamp to [0,1] and absorb rounding dust so the interval always
    # contains the point estimate
    low = min(max(0.0, center - margin), p)
    high = max(min(1.0, center + margin), p)
    return low, high


# --- Stratified reports ------------------------------------------------------


@dataclass
class StratumStats:
    n: int = 0
    errors: int = 0

    def add(self, correct: bool) -> None:
        self.n += 1
        if not correct:
            self.errors += 1

    @property
    def error_rate(self) -> float:
        return self.errors / self.n

    def row(self, key: str) -> dict:
        low, high = binomial_ci(self.errors, self.n)
        return {
            "key": key,
            "n": self.n,
            "errors": self.errors,
            "rate": self.error_rate,
            "ci_low": low,
            "ci_high": high,
        }


@dataclass
class EvalReport:
    overall: StratumStats = field(default_factory=StratumStats)
    strata: dict[str, StratumStats] = field(default_factory=dict)
    skipped: int = 0
    meta: dict = field(default_factory=dict)

    def stratum(self, key: str) -> StratumStats:
        if key not in self.strata:
            self.strata[key] = StratumStats()
        return self.strata[key]

    def rows(self) -> list[dict]:
        """CSV contract: one row per non-empty stratum, overall first."""
        rows = [self.overall.row("overall")]
        for key in sorted(self.strata, key=_stratum_sort_key):
            stats = self.strata[key]
            if stats.n > 0:
                rows.append(stats.row(key))
        return rows

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.row("overall"),
            "strata": [r for r in self.rows() if r["key"] != "overall"],
            "skipped": self.skipped,
            "meta": self.meta,
        }


_FAMILY_ORDER = ["subject", "last", "distance", "attractors", "rc"]


def _stratum_sort_key(key: str):
    family = key.split("=", 1)[0]
    family_rank = (
        _FAMILY_ORDER.index(family) if family in _FAMILY_ORDER else len(_FAMILY_ORDER)
    )
    value = key.split("=", 1)[1] if "=" in key else ""
    numeric = None
    head = value.rstrip("+").split("|")[0].split("_")[0]
    if head.isdigit():
        numeric = int(head)
    return (family_rank, numeric is None, numeric or 0, key)


def stratify(
    instances: Sequence[AgreementInstance],
    correct: Sequence[bool | None],
    meta: dict | None = None,
) -> EvalReport:
    """Aggregate per-instance correctness into the report strata.

    `correct[i]` of None marks an instance skipped by the predictor (counted
    in report.skipped). Stratum domains follow the analyses: the distance
    strata cover dependencies with no intervening nouns, the attractor strata
    homogeneous intervention only (the 0 bin also appears under the strict
    no-intervening-noun reading as `attractors=0_nointervening`), and the
    relative-clause strata single-attractor-single-intervener dependencies.
    """
    if len(instances) != len(correct):
        raise ValueError("instances and correctness flags differ in length")
    report = EvalReport(meta=dict(meta or {}))
    for inst, ok in zip(instances, correct):
        if ok is None:
            report.skipped += 1
            continue
        report.overall.add(ok)

        if inst.subject_number is not None:
            report.stratum(f"subject={inst.subject_number.value}").add(ok)
            last = inst.last_intervening
            report.stratum(
                f"last={last.value}|subject={inst.subject_number.value}"
            ).add(ok)

        if not inst.intervening_numbers:
            d = inst.distance
            key = f"distance={d}" if d < DISTANCE_MAX else f"distance={DISTANCE_MAX}+"
            report.stratum(key).add(ok)
            if inst.subject_number is not None:
                report.stratum("attractors=0_nointervening").add(ok)

        if (
            inst.n_attractors is not None
            and inst.homogeneous
            and inst.n_attractors <= ATTRACTOR_MAX
        ):
            report.stratum(f"attractors={inst.n_attractors}").add(ok)

        if (
            inst.n_attractors == 1
            and len(inst.intervening_numbers) == 1
            and inst.homogeneous
        ):
            report.stratum(f"rc={inst.rc_condition}").add(ok)
    return report


# --- Predictors over instance streams ---------------------------------------


def evaluate_checkpoint(
    model: RecurrentModel,
    objective: Objective,
    instances: Sequence[AgreementInstance],
    vocab: Vocab,
    table: VerbFormTable | None = None,
    meta: dict | None = None,
) -> EvalReport:
    """Stratified test-set evaluation of a trained model on raw instances.

    Examples are rebuilt deterministically per instance (same hash coin for
    grammaticality as at training-data time); instances an objective cannot
    express are skipped and counted.
    """
    needs_table = objective in (
        Objective.VERB_INFLECT,
        Objective.GRAMMATICALITY,
        Objective.LM,
    )
    if needs_table and table is None:
        raise DataError(f"{objective.value} evaluation needs a verb-form table")
    correct: list[bool | None] = []
    for inst in instances:
        if objective is Objective.NUMBER_PRED:
            example = make_number_pred(inst, vocab)
        elif objective is Objective.NOUNS_ONLY_COMMON:
            example = make_nouns_only(inst, vocab, "common")
        elif objective is Objective.NOUNS_ONLY_ALL:
            example = make_nouns_only(inst, vocab, "all")
        elif objective is Objective.VERB_INFLECT:
            example = make_verb_inflect(inst, table, vocab)
        elif objective is Objective.GRAMMATICALITY:
            example = make_grammaticality(inst, table, vocab)
        elif objective is Objective.LM:
            predicted = lm_compare(model, inst, table, vocab)
            correct.append(None if predicted is None else predicted == inst.verb_number)
            continue
        else:
            raise DataError(f"cannot evaluate objective {objective.value}")
        if example is None:
            correct.append(None)
            continue
        correct.append(classify(model, example) == example.target_index)
    report = stratify(instances, correct, meta)
    report.meta.setdefault("objective", objective.value)
    return report


def evaluate_number_predictions(
    instances: Sequence[AgreementInstance],
    predicted: Sequence[Number | None],
    meta: dict | None = None,
) -> EvalReport:
    correct = [
        None if p is None else (p == inst.verb_number)
        for inst, p in zip(instances, predicted)
    ]
    return stratify(instances, correct, meta)


def majority_baseline(
    instances: Sequence[AgreementInstance], meta: dict | None = None
) -> EvalReport:
    """Always predict SINGULAR, the majority verb number in natural text."""
    predicted = [Number.SINGULAR] * len(instances)
    report = evaluate_number_predictions(instances, predicted, meta)
    report.meta.setdefault("model", "majority_baseline")
    return report


def _last_noun_number(inst: AgreementInstance) -> Number | None:
    for form, pos in reversed(inst.prefix):
        if pos in NOUN_TAGS:
            return noun_number(pos)
    return None


def recency_baseline(
    instances: Sequence[AgreementInstance], meta: dict | None = None
) -> EvalReport:
    """Predict the number of the most recent noun before the verb
    (SINGULAR when the prefix has no number-bearing noun)."""
    predicted = [_last_noun_number(inst) or Number.SINGULAR for inst in instances]
    report = evaluate_number_predictions(instances, predicted, meta)
    report.meta.setdefault("model", "recency_baseline")
    return report


# --- External scorer ----------------------------------------------------------


def eval_external(
    scores: Mapping[str, tuple[float, float]],
    instances: Sequence[AgreementInstance],
    meta: dict | None = None,
) -> EvalReport:
    """Score-file adapter: scores maps instance_id to
    (logp_correct, logp_flipped); the higher-scoring form wins, ties go to
    SINGULAR. Instances missing from the file are excluded and counted."""
    predicted: list[Number | None] = []
    for inst in instances:
        pair = scores.get(inst.instance_id)
        if pair is None:
            predicted.append(None)
            continue
        logp_correct, logp_flipped = pair
        if not (math.isfinite(logp_correct) and math.isfinite(logp_flipped)):
            raise DataError(f"non-finite score for instance {inst.instance_id}")
        if logp_correct == logp_flipped:
            predicted.append(Number.SINGULAR)
        elif logp_correct > logp_flipped:
            predicted.append(inst.verb_number)
        else:
            predicted.append(inst.verb_number.flipped())
    report = evaluate_number_predictions(instances, predicted, meta)
    report.meta.setdefault("model", "external_scores")
    return report


def sample_per_attractor(
    instances: Sequence[AgreementInstance],
    per_bin: int = 500,
    seed: int = 1,
    max_attractors: int = ATTRACTOR_MAX,
) -> list[AgreementInstance]:
    """Seeded random sample of up to per_bin homogeneous dependencies for
    each attractor count 0..max_attractors (for costly external scorers)."""
    rng = np.random.default_rng(seed)
    chosen: list[AgreementInstance] = []
    for k in range(max_attractors + 1):
        bin_instances = [
            inst
            for inst in instances
            if inst.homogeneous and inst.n_attractors == k
        ]
        if len(bin_instances) > per_bin:
            idx = rng.choice(len(bin_instances), size=per_bin, replace=False)
            bin_instances = [bin_instances[i] for i in sorted(idx)]
        chosen.extend(bin_instances)
    return chosen


# --- Multi-run merging ----------------------------------------------------------


def pool_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool counts over runs: per-stratum n and errors summed."""
    pooled = EvalReport(meta={"runs": len(reports), "mode": "pooled"})
    for report in reports:
        pooled.overall.n += report.overall.n
        pooled.overall.errors += report.overall.errors
        pooled.skipped += report.skipped
        for key, stats in report.strata.items():
            target = pooled.stratum(key)
            target.n += stats.n
            target.errors += stats.errors
    return pooled


def mean_report_rows(reports: Sequence[EvalReport]) -> list[dict]:
    """Per-run-mean table: average error rate per stratum across runs."""
    keys: list[str] = ["overall"]
    seen = set(keys)
    for report in reports:
        for key in sorted(report.strata, key=_stratum_sort_key):
            if key not in seen and report.strata[key].n > 0:
                seen.add(key)
                keys.append(key)
    rows = []
    for key in keys:
        rates = []
        ns = []
        for report in reports:
            stats = report.overall if key == "overall" else report.strata.get(key)
            if stats is not None and stats.n > 0:
                rates.append(stats.error_rate)
                ns.append(stats.n)
        if not rates:
            continue
        mean = sum(rates) / len(rates)
        spread = (
            math.sqrt(sum((r - mean) ** 2 for r in rates) / (len(rates) - 1))
            if len(rates) > 1
            else 0.0
        )
        rows.append(
            {
                "key": key,
                "runs": len(rates),
                "mean_n": sum(ns) / len(ns),
                "mean_rate": mean,
                "stdev_rate": spread,
            }
        )
    return rows
