"""Extraction of present-tense subject-verb dependencies with stratification
annotations: distance, intervening-noun numbers, attractor counts, intervention
homogeneity, and relative-clause features.

The verb's number is read from its own POS tag (VBZ singular, VBP plural); the
subject's number, used only for stratification, comes from the subject head's
tag, or from a fixed pronoun table when the head is a pronoun.
"""

from __future__ import annotations

import enum
import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Sentence, Token
from .errors import DataError


class Number(enum.Enum):
    SINGULAR = "SINGULAR"
    PLURAL = "PLURAL"

    def flipped(self) -> "Number":
        return Number.PLURAL if self is Number.SINGULAR else Number.SINGULAR


class LastIntervening(enum.Enum):
    NONE = "NONE"
    SAME = "SAME"
    OPPOSITE = "OPPOSITE"


SINGULAR_NOUN_TAGS = frozenset({"NN", "NNP"})
PLURAL_NOUN_TAGS = frozenset({"NNS", "NNPS"})
NOUN_TAGS = SINGULAR_NOUN_TAGS | PLURAL_NOUN_TAGS

VERB_NUMBER = {"VBZ": Number.SINGULAR, "VBP": Number.PLURAL}

# Pronoun/demonstrative forms with an unambiguous number; "you" stays out of
# number-bearing strata on purpose.
PRONOUN_NUMBERS: Mapping[str, Number] = {
    "he": Number.SINGULAR,
    "she": Number.SINGULAR,
    "it": Number.SINGULAR,
    "this": Number.SINGULAR,
    "that": Number.SINGULAR,
    "they": Number.PLURAL,
    "these": Number.PLURAL,
    "those": Number.PLURAL,
    "we": Number.PLURAL,
}

# PRP personal pronouns and DT demonstratives carry inherent number; WDT/WP
# relativizers take their number from an antecedent, so they stay unmapped.
PRONOUN_TAGS = frozenset({"PRP", "DT"})


@dataclass(frozen=True)
class ExtractConfig:
    subject_label: str = "nsubj"
    rc_labels: tuple[str, ...] = ("rcmod", "relcl", "acl:relcl")
    relativizer_tags: tuple[str, ...] = ("WDT", "WP")
    relativizer_forms: tuple[str, ...] = ("that",)
    vocab_cap: int = 10000
    select_one: bool = True
    select_seed: int = 1


@dataclass(frozen=True)
class AgreementInstance:
    """One subject-verb dependency plus everything the analyses stratify on.

    `prefix` covers the sentence up to but excluding the verb; `suffix` the
    tokens after it. Both are (form, pos) pairs so downstream example
    construction needs no second pass over the corpus. subject_number is None
    when the subject head bears no number (then the attractor fields that
    depend on it are None too, and the instance is excluded from those strata).
    """

    sentence_id: str
    subject_index: int
    verb_index: int
    subject_number: Number | None
    verb_number: Number
    prefix: tuple[tuple[str, str], ...]
    verb_form: str
    suffix: tuple[tuple[str, str], ...]
    distance: int
    intervening_numbers: tuple[Number, ...]
    n_attractors: int | None
    homogeneous: bool
    last_intervening: LastIntervening | None
    has_rel_clause: bool
    has_overt_relativizer: bool

    @property
    def instance_id(self) -> str:
        return f"{self.sentence_id}#{self.subject_index}-{self.verb_index}"

    @property
    def rc_condition(self) -> str:
        if not self.has_rel_clause:
            return "NO_RC"
        return "OVERT_RC" if self.has_overt_relativizer else "REDUCED_RC"


def noun_number(pos: str) -> Number | None:
    """Number encoded by a noun tag; None for every non-noun tag."""
    if pos in SINGULAR_NOUN_TAGS:
        return Number.SINGULAR
    if pos in PLURAL_NOUN_TAGS:
        return Number.PLURAL
    return None


def token_number(token: Token) -> Number | None:
    """Number of a subject head: noun tags by tag, pronouns by form table."""
    by_tag = noun_number(token.pos)
    if by_tag is not None:
        return by_tag
    if token.pos in PRONOUN_TAGS:
        return PRONOUN_NUMBERS.get(token.lower)
    return None


def find_dependencies(
    sentence: Sentence, config: ExtractConfig = ExtractConfig()
) -> list[tuple[int, int]]:
    """All (subject_index, verb_index) pairs with a present-tense verb and a
    leftward subject attached via the configured subject relation."""
    pairs = []
    for token in sentence.tokens:
        if token.deprel != config.subject_label:
            continue
        if token.head == 0 or token.head <= token.index:
            continue
        verb = sentence.token(token.head)
        if verb.pos in VERB_NUMBER:
            pairs.append((token.index, verb.index))
    return pairs


def select_one(
    pairs: Sequence[tuple[int, int]], sentence_id: str, seed: int
) -> tuple[int, int] | None:
    """Uniform choice among candidate dependencies, deterministic in
    (seed, sentence id)."""
    if not pairs:
        return None
    if len(pairs) == 1:
        return pairs[0]
    digest = hashlib.blake2b(
        f"{seed}:{sentence_id}".encode("utf-8"), digest_size=8
    ).digest()
    return pairs[int.from_bytes(digest, "big") % len(pairs)]


def _subtree(sentence: Sentence, root_index: int) -> set[int]:
    """Indices of root_index and all its dependents (transitively)."""
    children = defaultdict(list)
    for token in sentence.tokens:
        if token.head > 0:
            children[token.head].append(token.index)
    out = {root_index}
    stack = [root_index]
    while stack:
        for child in children[stack.pop()]:
            if child not in out:
                out.add(child)
                stack.append(child)
    return out


def annotate(
    sentence: Sentence,
    subject_index: int,
    verb_index: int,
    config: ExtractConfig = ExtractConfig(),
) -> AgreementInstance:
    """Compute the full annotation for one dependency pair.

    Intervening nouns are the tokens strictly between subject and verb whose
    tag encodes a number; a relative clause counts only when its root hangs
    inside the subject's noun phrase."""
    subject = sentence.token(subject_index)
    verb = sentence.token(verb_index)
    subject_number = token_number(subject)
    verb_number = VERB_NUMBER[verb.pos]

    between = sentence.tokens[subject_index : verb_index - 1]
    intervening = [(t, noun_number(t.pos)) for t in between]
    intervening = [(t, num) for t, num in intervening if num is not None]
    numbers = tuple(num for _, num in intervening)

    homogeneous = len(set(numbers)) <= 1
    if subject_number is None:
        n_attractors = None
        last = None
    else:
        n_attractors = sum(1 for num in numbers if num != subject_number)
        if not numbers:
            last = LastIntervening.NONE
        elif numbers[-1] == subject_number:
            last = LastIntervening.SAME
        else:
            last = LastIntervening.OPPOSITE

    has_rc, overt = _relative_clause_features(
        sentence, subject_index, verb_index, config
    )

    return AgreementInstance(
        sentence_id=sentence.id,
        subject_index=subject_index,
        verb_index=verb_index,
        subject_number=subject_number,
        verb_number=verb_number,
        prefix=tuple((t.form, t.pos) for t in sentence.tokens[: verb_index - 1]),
        verb_form=verb.form,
        suffix=tuple((t.form, t.pos) for t in sentence.tokens[verb_index:]),
        distance=verb_index - subject_index - 1,
        intervening_numbers=numbers,
        n_attractors=n_attractors,
        homogeneous=homogeneous,
        last_intervening=last,
        has_rel_clause=has_rc,
        has_overt_relativizer=overt,
    )


def _relative_clause_features(
    sentence: Sentence,
    subject_index: int,
    verb_index: int,
    config: ExtractConfig,
) -> tuple[bool, bool]:
    subject_np = _subtree(sentence, subject_index)
    has_rc = False
    overt = False
    for token in sentence.tokens[subject_index : verb_index - 1]:
        if token.deprel not in config.rc_labels:
            continue
        if token.head not in subject_np:
            continue
        has_rc = True
        clause = _subtree(sentence, token.index)
        for idx in clause:
            t = sentence.token(idx)
            if t.index >= token.index:
                continue
            if t.pos in config.relativizer_tags or t.lower in config.relativizer_forms:
                overt = True
                break
    return has_rc, overt


def extract_instances(
    sentence: Sentence, config: ExtractConfig = ExtractConfig()
) -> list[AgreementInstance]:
    """Dependencies of one sentence, annotated; at most one when
    config.select_one is set (uniform, seed-stable choice)."""
    pairs = find_dependencies(sentence, config)
    if config.select_one:
        chosen = select_one(pairs, sentence.id, config.select_seed)
        pairs = [chosen] if chosen is not None else []
    return [annotate(sentence, s, v, config) for s, v in pairs]


# --- Vocabulary ---------------------------------------------------------

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
SPECIALS = (PAD, UNK, BOS, EOS)


def _tag_token(pos: str) -> str:
    return f"<pos:{pos}>"


class Vocab:
    """Lowercased-form vocabulary capped at the most frequent `cap` words.

    Out-of-vocabulary tokens map to a pseudo-token for their POS tag; an
    unseen tag falls back to <unk>. Ids are contiguous from 0: specials,
    then tag pseudo-tokens (lexicographic), then words by (frequency desc,
    form asc). Also carries per-word counts and majority-POS statistics for
    the probes.
    """

    def __init__(
        self,
        words: Sequence[str],
        tags: Sequence[str],
        cap: int,
        counts: Mapping[str, int],
        pos_majority: Mapping[str, tuple[str, float]],
    ):
        self.cap = cap
        self.id_to_token: list[str] = list(SPECIALS)
        self.id_to_token.extend(_tag_token(t) for t in tags)
        self.id_to_token.extend(words)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary entries collide")
        self._tags = tuple(tags)
        self._words = tuple(words)
        self._word_set = frozenset(self._words)
        self.counts = dict(counts)
        self.pos_majority = dict(pos_majority)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    def has_word(self, form: str) -> bool:
        return form.lower() in self._word_set

    def word_id(self, form: str) -> int | None:
        """Id of an in-vocabulary word, None if it would fall back to a tag."""
        lower = form.lower()
        if lower in self._word_set:
            return self.token_to_id[lower]
        return None

    def encode(self, form: str, pos: str) -> int:
        lower = form.lower()
        wid = self.token_to_id.get(lower)
        if wid is not None and lower in self._word_set:
            return wid
        tid = self.token_to_id.get(_tag_token(pos))
        return tid if tid is not None else self.unk_id

    def encode_pairs(self, pairs: Iterable[tuple[str, str]]) -> list[int]:
        return [self.encode(form, pos) for form, pos in pairs]

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "specials": list(SPECIALS),
            "tags": list(self._tags),
            "words": list(self._words),
            "counts": {w: self.counts[w] for w in sorted(self.counts)},
            "pos_majority": {
                w: [tag, frac] for w, (tag, frac) in sorted(self.pos_majority.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        if list(data.get("specials", [])) != list(SPECIALS):
            raise DataError("vocabulary file has unexpected reserved tokens")
        return cls(
            words=data["words"],
            tags=data["tags"],
            cap=data["cap"],
            counts=data.get("counts", {}),
            pos_majority={
                w: (tag, frac) for w, (tag, frac) in data.get("pos_majority", {}).items()
            },
        )


def build_vocab(sentences: Iterable[Sentence], cap: int = 10000) -> Vocab:
    """Build the vocabulary from training-split sentences only.

    Frequency ties at the cap boundary break lexicographically on the form.
    """
    counts: Counter[str] = Counter()
    tag_counts: Counter[str] = Counter()
    word_tag_counts: dict[str, Counter[str]] = defaultdict(Counter)
    n_sentences = 0
    for sentence in sentences:
        n_sentences += 1
        for token in sentence.tokens:
            counts[token.lower] += 1
            tag_counts[token.pos] += 1
            word_tag_counts[token.lower][token.pos] += 1
    if n_sentences == 0:
        raise DataError("cannot build a vocabulary from an empty training set")

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [form for form, _ in ranked[:cap]]
    pos_majority = {}
    for word in kept:
        tags = word_tag_counts[word]
        tag, tag_count = max(tags.items(), key=lambda item: (item[1], item[0]))
        pos_majority[word] = (tag, tag_count / counts[word])
    return Vocab(
        words=kept,
        tags=sorted(tag_counts),
        cap=cap,
        counts={w: counts[w] for w in kept},
        pos_majority=pos_majority,
    )


def instance_to_dict(inst: AgreementInstance, split: str | None = None) -> dict:
    """JSON-lines record for one instance; field names follow the type.

    `verb_form`, `suffix`, and `split` are carried additionally so that
    objective construction and dataset partitioning need no second pass
    over the corpus.
    """
    record = {
        "sentence_id": inst.sentence_id,
        "subject_index": inst.subject_index,
        "verb_index": inst.verb_index,
        "subject_number": inst.subject_number.value if inst.subject_number else None,
        "verb_number": inst.verb_number.value,
        "prefix": [[form, pos] for form, pos in inst.prefix],
        "verb_form": inst.verb_form,
        "suffix": [[form, pos] for form, pos in inst.suffix],
        "distance": inst.distance,
        "intervening_numbers": [n.value for n in inst.intervening_numbers],
        "n_attractors": inst.n_attractors,
        "homogeneous": inst.homogeneous,
        "last_intervening": inst.last_intervening.value if inst.last_intervening else None,
        "has_rel_clause": inst.has_rel_clause,
        "has_overt_relativizer": inst.has_overt_relativizer,
    }
    if split is not None:
        record["split"] = split
    return record


def instance_from_dict(record: dict) -> AgreementInstance:
    return AgreementInstance(
        sentence_id=record["sentence_id"],
        subject_index=record["subject_index"],
        verb_index=record["verb_index"],
        subject_number=(
            Number(record["subject_number"]) if record["subject_number"] else None
        ),
        verb_number=Number(record["verb_number"]),
        prefix=tuple((form, pos) for form, pos in record["prefix"]),
        verb_form=record["verb_form"],
        suffix=tuple((form, pos) for form, pos in record["suffix"]),
        distance=record["distance"],
        intervening_numbers=tuple(Number(n) for n in record["intervening_numbers"]),
        n_attractors=record["n_attractors"],
        homogeneous=record["homogeneous"],
        last_intervening=(
            LastIntervening(record["last_intervening"])
            if record["last_intervening"]
            else None
        ),
        has_rel_clause=record["has_rel_clause"],
        has_overt_relativizer=record["has_overt_relativizer"],
    )


def attractor_histogram(instances: Iterable[AgreementInstance]) -> dict[str, int]:
    """Counts of dependencies per attractor count, binned 0..3 and 4+.

    Emitted both ways the 0 bin can be read: `0` counts homogeneous
    dependencies with no attractor, `0_nointervening` the strictly
    noun-free ones.
    """
    hist = {"0": 0, "0_nointervening": 0, "1": 0, "2": 0, "3": 0, "4+": 0}
    for inst in instances:
        if not inst.intervening_numbers:
            hist["0_nointervening"] += 1
        if inst.n_attractors is None or not inst.homogeneous:
            continue
        if inst.n_attractors >= 4:
            hist["4+"] += 1
        else:
            hist[str(inst.n_attractors)] += 1
    return hist
