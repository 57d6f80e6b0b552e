"""Turning agreement instances into training examples for the four
objectives (number prediction, verb inflection, grammaticality judgment,
language modeling) and the two noun-only baselines.

All transforms are pure and deterministic: the grammaticality corpus uses a
hash-of-instance-id coin rather than an RNG draw, so the flip pattern is
stable across runs and machines.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Sentence
from .extract import AgreementInstance, Number, Vocab

IRREGULAR_VERB_PAIRS = (("is", "are"), ("has", "have"), ("does", "do"))
SIBILANT_ENDINGS = ("s", "x", "z", "ch", "sh")
COMMON_NOUN_TAGS = frozenset({"NN", "NNS"})
ALL_NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS", "PRP"})


class Objective(enum.Enum):
    NUMBER_PRED = "number_pred"
    VERB_INFLECT = "verb_inflect"
    GRAMMATICALITY = "grammaticality"
    LM = "lm"
    NOUNS_ONLY_COMMON = "nouns_only_common"
    NOUNS_ONLY_ALL = "nouns_only_all"


class Grammaticality(enum.Enum):
    GRAMMATICAL = "GRAMMATICAL"
    UNGRAMMATICAL = "UNGRAMMATICAL"


# Class-index layout for the binary classifiers. Index 0 is the tie-break
# winner everywhere (SINGULAR for number tasks).
NUMBER_CLASSES = (Number.SINGULAR, Number.PLURAL)
GRAMMATICALITY_CLASSES = (Grammaticality.GRAMMATICAL, Grammaticality.UNGRAMMATICAL)


@dataclass(frozen=True)
class ObjectiveExample:
    objective: Objective
    input_ids: tuple[int, ...]
    target: Number | Grammaticality | tuple[int, ...]
    instance_id: str

    @property
    def target_index(self) -> int:
        if isinstance(self.target, Number):
            return NUMBER_CLASSES.index(self.target)
        if isinstance(self.target, Grammaticality):
            return GRAMMATICALITY_CLASSES.index(self.target)
        raise TypeError("sequence targets have no class index")

    def to_dict(self) -> dict:
        target = (
            list(self.target) if isinstance(self.target, tuple) else self.target.value
        )
        return {
            "objective": self.objective.value,
            "input_ids": list(self.input_ids),
            "target": target,
            "meta": {"instance_id": self.instance_id},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectiveExample":
        objective = Objective(data["objective"])
        raw = data["target"]
        target: Number | Grammaticality | tuple[int, ...]
        if isinstance(raw, list):
            target = tuple(raw)
        elif objective is Objective.GRAMMATICALITY:
            target = Grammaticality(raw)
        else:
            target = Number(raw)
        return cls(
            objective=objective,
            input_ids=tuple(data["input_ids"]),
            target=target,
            instance_id=data["meta"]["instance_id"],
        )


class VerbFormTable:
    """Bidirectional singular<->plural map for present-tense verb forms."""

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        self._to_plural: dict[str, str] = {}
        self._to_singular: dict[str, str] = {}
        for singular, plural in pairs:
            if singular in self._to_plural or plural in self._to_singular:
                continue  # first mapping wins; keeps the table involutive
            if singular == plural:
                continue
            self._to_plural[singular] = plural
            self._to_singular[plural] = singular

    def __len__(self) -> int:
        return len(self._to_plural)

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._to_plural.items())

    def singular_of(self, form: str) -> str | None:
        form = form.lower()
        if form in self._to_plural:
            return form
        return self._to_singular.get(form)

    def plural_of(self, form: str) -> str | None:
        form = form.lower()
        if form in self._to_singular:
            return form
        return self._to_plural.get(form)

    def flip(self, form: str) -> str | None:
        """The opposite-number form, None when the form is not in the table."""
        form = form.lower()
        if form in self._to_plural:
            return self._to_plural[form]
        return self._to_singular.get(form)

    def to_dict(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs()]}

    @classmethod
    def from_dict(cls, data: dict) -> "VerbFormTable":
        return cls((s, p) for s, p in data["pairs"])


def singular_verb_form(plural: str) -> str:
    """Third-person-singular form of a base verb: fly -> flies,
    watch -> watches, walk -> walks."""
    if len(plural) > 1 and plural.endswith("y") and plural[-2] not in "aeiou":
        return plural[:-1] + "ies"
    if plural.endswith(SIBILANT_ENDINGS):
        return plural + "es"
    return plural + "s"


def plural_verb_form(singular: str) -> str | None:
    """Base form of a third-person-singular verb: flies -> fly,
    watches -> watch, walks -> walk. None when no rule applies."""
    if singular.endswith("ies") and len(singular) > 3:
        return singular[:-3] + "y"
    if singular.endswith("es") and singular[:-2].endswith(SIBILANT_ENDINGS):
        return singular[:-2]
    if singular.endswith("s") and not singular.endswith("ss"):
        return singular[:-1]
    return None


def build_verb_form_table(sentences: Iterable[Sentence]) -> VerbFormTable:
    """Pair attested VBZ/VBP forms via the irregular list plus regular
    morphology; a pair is kept when at least one side occurs in the data
    and the rules invert each other on it."""
    vbz: set[str] = set()
    vbp: set[str] = set()
    for sentence in sentences:
        for token in sentence.tokens:
            if token.pos == "VBZ":
                vbz.add(token.lower)
            elif token.pos == "VBP":
                vbp.add(token.lower)

    irregular_forms = {form for pair in IRREGULAR_VERB_PAIRS for form in pair}
    pairs: list[tuple[str, str]] = [
        (s, p) for s, p in IRREGULAR_VERB_PAIRS if s in vbz or p in vbp
    ]
    for form in sorted(vbz - irregular_forms):
        plural = plural_verb_form(form)
        if plural is not None and singular_verb_form(plural) == form:
            pairs.append((form, plural))
    for form in sorted(vbp - irregular_forms):
        singular = singular_verb_form(form)
        if plural_verb_form(singular) == form:
            pairs.append((singular, form))
    return VerbFormTable(pairs)


def _encode_prefix(inst: AgreementInstance, vocab: Vocab) -> tuple[int, ...]:
    return tuple(vocab.encode_pairs(inst.prefix))


def make_number_pred(inst: AgreementInstance, vocab: Vocab) -> ObjectiveExample:
    """Prefix up to (excluding) the verb; target is the verb's number."""
    return ObjectiveExample(
        objective=Objective.NUMBER_PRED,
        input_ids=_encode_prefix(inst, vocab),
        target=inst.verb_number,
        instance_id=inst.instance_id,
    )


def make_verb_inflect(
    inst: AgreementInstance, table: VerbFormTable, vocab: Vocab
) -> ObjectiveExample | None:
    """Prefix plus the verb's singular form as one extra input token.

    None when the verb form cannot be resolved to a singular form.
    """
    if inst.verb_number is Number.SINGULAR:
        singular = inst.verb_form.lower()
    else:
        singular = table.singular_of(inst.verb_form)
        if singular is None:
            return None
    ids = _encode_prefix(inst, vocab) + (vocab.encode(singular, "VBZ"),)
    return ObjectiveExample(
        objective=Objective.VERB_INFLECT,
        input_ids=ids,
        target=inst.verb_number,
        instance_id=inst.instance_id,
    )


def grammaticality_coin(instance_id: str) -> bool:
    """True -> flip the verb (ungrammatical); hash-stable per instance."""
    digest = hashlib.blake2b(instance_id.encode("utf-8"), digest_size=8).digest()
    return bool(digest[0] & 1)


def flip_verb(inst: AgreementInstance, table: VerbFormTable) -> tuple[str, str] | None:
    """Opposite-number (form, pos) for the instance's verb, None if unmapped."""
    flipped = table.flip(inst.verb_form)
    if flipped is None:
        return None
    pos = "VBP" if inst.verb_number is Number.SINGULAR else "VBZ"
    return flipped, pos


def make_grammaticality(
    inst: AgreementInstance,
    table: VerbFormTable,
    vocab: Vocab,
    coin: bool | None = None,
) -> ObjectiveExample | None:
    """Whole sentence; half the corpus gets its verb number flipped.

    The coin defaults to a hash of the instance id, so exactly one version
    of each sentence exists and the corpus flip rate converges to 50%.
    """
    if coin is None:
        coin = grammaticality_coin(inst.instance_id)
    verb = (inst.verb_form, "VBZ" if inst.verb_number is Number.SINGULAR else "VBP")
    label = Grammaticality.GRAMMATICAL
    if coin:
        flipped = flip_verb(inst, table)
        if flipped is None:
            return None
        verb = flipped
        label = Grammaticality.UNGRAMMATICAL
    elif table.flip(inst.verb_form) is None:
        return None  # keep the kept/flipped populations comparable
    ids = (
        _encode_prefix(inst, vocab)
        + (vocab.encode(*verb),)
        + tuple(vocab.encode_pairs(inst.suffix))
    )
    return ObjectiveExample(
        objective=Objective.GRAMMATICALITY,
        input_ids=ids,
        target=label,
        instance_id=inst.instance_id,
    )


def make_lm(sentence: Sentence, vocab: Vocab) -> ObjectiveExample:
    """Next-word prediction over the whole sentence with boundary markers:
    input [BOS] w_1..w_n, target w_1..w_n [EOS]."""
    ids = tuple(vocab.encode(t.form, t.pos) for t in sentence.tokens)
    return ObjectiveExample(
        objective=Objective.LM,
        input_ids=(vocab.bos_id,) + ids,
        target=ids + (vocab.eos_id,),
        instance_id=sentence.id,
    )


def make_nouns_only(
    inst: AgreementInstance, vocab: Vocab, mode: str = "common"
) -> ObjectiveExample:
    """Prefix filtered to nouns only, original order; `mode` is "common"
    (NN/NNS) or "all" (adds proper nouns and pronouns)."""
    if mode == "common":
        tags = COMMON_NOUN_TAGS
        objective = Objective.NOUNS_ONLY_COMMON
    elif mode == "all":
        tags = ALL_NOUN_TAGS
        objective = Objective.NOUNS_ONLY_ALL
    else:
        raise ValueError(f"unknown nouns-only mode: {mode!r}")
    kept = [(form, pos) for form, pos in inst.prefix if pos in tags]
    ids = tuple(vocab.encode_pairs(kept)) if kept else (vocab.unk_id,)
    return ObjectiveExample(
        objective=objective,
        input_ids=ids,
        target=inst.verb_number,
        instance_id=inst.instance_id,
    )


def examples_for_objective(
    objective: Objective,
    instances: Sequence[AgreementInstance],
    vocab: Vocab,
    table: VerbFormTable | None = None,
) -> tuple[list[ObjectiveExample], int]:
    """Build the full example list for one instance-based objective.

    Returns (examples, skipped) where skipped counts instances the
    objective cannot express (unmappable verb forms).
    """
    examples: list[ObjectiveExample] = []
    skipped = 0
    for inst in instances:
        if objective is Objective.NUMBER_PRED:
            examples.append(make_number_pred(inst, vocab))
        elif objective is Objective.NOUNS_ONLY_COMMON:
            examples.append(make_nouns_only(inst, vocab, "common"))
        elif objective is Objective.NOUNS_ONLY_ALL:
            examples.append(make_nouns_only(inst, vocab, "all"))
        elif objective is Objective.VERB_INFLECT:
            if table is None:
                raise ValueError("verb_inflect needs a VerbFormTable")
            example = make_verb_inflect(inst, table, vocab)
            if example is None:
                skipped += 1
            else:
                examples.append(example)
        elif objective is Objective.GRAMMATICALITY:
            if table is None:
                raise ValueError("grammaticality needs a VerbFormTable")
            example = make_grammaticality(inst, table, vocab)
            if example is None:
                skipped += 1
            else:
                examples.append(example)
        else:
            raise ValueError(f"{objective} does not consume agreement instances")
    return examples, skipped
