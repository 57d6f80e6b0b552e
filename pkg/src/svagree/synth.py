"""Synthetic dependency-parsed corpus generator.

Emits CoNLL-format sentences with gold-style parses covering the
constructions the analyses stratify on: adjacent subjects, adverb-separated
subjects, prepositional-phrase chains carrying agreement attractors, overt
and reduced object relative clauses, noun compounds, pronoun and proper-noun
subjects. Verbs always agree with their own subjects; attractor difficulty
comes from the structures, not from label noise.

This is tooling for desk-scale experiments and tests, not a model of any
natural corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

# (singular, plural) noun pairs; the first six sets keep the template-probe
# lexicon in vocabulary. "man/men" backs the long-modifier probe. The long
# Zipf tail keeps rare-word statistics in play and strains the language
# model relative to the binary classifiers.
_BASE_NOUNS = (
    ("toy", "toys"), ("boy", "boys"), ("house", "houses"), ("girl", "girls"),
    ("computer", "computers"), ("student", "students"), ("key", "keys"),
    ("cabinet", "cabinets"), ("man", "men"), ("office", "offices"),
    ("street", "streets"), ("door", "doors"), ("vase", "vases"),
    ("rose", "roses"), ("chair", "chairs"), ("table", "tables"),
    ("book", "books"), ("teacher", "teachers"), ("farmer", "farmers"),
    ("dog", "dogs"), ("cat", "cats"), ("garden", "gardens"),
    ("friend", "friends"), ("author", "authors"), ("painting", "paintings"),
    ("game", "games"), ("letter", "letters"), ("city", "cities"),
    ("river", "rivers"), ("bridge", "bridges"), ("picture", "pictures"),
    ("school", "schools"), ("village", "villages"), ("machine", "machines"),
    ("window", "windows"), ("farm", "farms"), ("market", "markets"),
    ("song", "songs"), ("store", "stores"), ("kid", "kids"),
    ("parent", "parents"), ("player", "players"), ("artist", "artists"),
    ("doctor", "doctors"), ("lawyer", "lawyers"), ("report", "reports"),
    ("museum", "museums"), ("station", "stations"), ("idea", "ideas"),
    ("plan", "plans"),
)

_TAIL_NOUNS = (
    "lamp", "spoon", "bottle", "basket", "ladder", "hammer", "mirror",
    "pillow", "blanket", "carpet", "candle", "bucket", "shovel", "wagon",
    "engine", "anchor", "sail", "rope", "barrel", "crate", "shelf", "drawer",
    "curtain", "fence", "gate", "path", "trail", "meadow", "valley", "hill",
    "cliff", "cave", "pond", "lake", "stream", "forest", "branch", "leaf",
    "stone", "pebble", "boulder", "tower", "castle", "cottage", "cabin",
    "attic", "cellar", "kitchen", "hall", "corridor", "balcony", "roof",
    "chimney", "garage", "yard", "porch", "bench", "stool", "couch", "desk",
    "notebook", "pencil", "eraser", "folder", "stamp", "envelope", "parcel",
    "ticket", "coin", "wallet", "pocket", "button", "ribbon", "scarf",
    "jacket", "glove", "boot", "helmet", "badge", "flag", "banner", "drum",
    "flute", "violin", "trumpet", "whistle", "bell", "clock", "calendar",
    "journal", "poster", "sticker", "magnet", "battery", "cable", "switch",
    "sensor", "camera", "speaker", "screen", "keyboard", "printer", "router",
    "apple", "pear", "plum", "grape", "melon", "carrot", "potato",
    "onion", "pepper", "mushroom", "walnut", "almond", "raisin", "cracker",
    "muffin", "pretzel", "noodle", "dumpling", "pancake",
)


def _plural_noun(noun: str) -> str:
    if noun.endswith("y") and noun[-2] not in "aeiou":
        return noun[:-1] + "ies"
    if noun.endswith(("s", "x", "z", "ch", "sh")):
        return noun + "es"
    return noun + "s"


NOUN_PAIRS: tuple[tuple[str, str], ...] = _BASE_NOUNS + tuple(
    (noun, _plural_noun(noun)) for noun in _TAIL_NOUNS
)

# (VBZ, VBP) pairs; the transitive subset serves the embedded clauses.
TRANSITIVE_VERBS: tuple[tuple[str, str], ...] = (
    ("watches", "watch"),
    ("likes", "like"),
    ("sees", "see"),
    ("knows", "know"),
    ("carries", "carry"),
    ("draws", "draw"),
    ("holds", "hold"),
    ("finds", "find"),
    ("keeps", "keep"),
    ("wants", "want"),
)
COPULA = ("is", "are")
INTRANSITIVE_VERBS: tuple[tuple[str, str], ...] = (
    ("walks", "walk"),
    ("plays", "play"),
    ("runs", "run"),
    ("sings", "sing"),
    ("sits", "sit"),
    ("stands", "stand"),
    ("waits", "wait"),
    ("works", "work"),
    ("sleeps", "sleep"),
    ("talks", "talk"),
    ("smiles", "smile"),
    ("laughs", "laugh"),
    ("dances", "dance"),
    ("travels", "travel"),
    ("arrives", "arrive"),
)

ADJECTIVES = (
    "red", "old", "new", "big", "small", "nice", "clean", "dark", "quiet",
    "bright", "green", "blue", "heavy", "light", "round", "narrow", "wide",
    "tall", "short", "soft", "warm", "cold", "plain", "fancy", "rough",
    "smooth", "empty", "full", "cheap", "rare",
)
ADVERBS = ("certainly", "probably", "often", "usually", "really", "still", "also", "now")
PREPOSITIONS = ("of", "to", "in", "by", "near", "from", "behind", "across")
SINGULAR_PRONOUNS = ("he", "she", "it")
PLURAL_PRONOUNS = ("they", "we")
PROPER_NOUNS = ("Mary", "John", "Paris", "Sarah", "Tom", "Anna")

SHAPES = ("simple", "pp_chain", "rc_overt", "rc_reduced", "intransitive", "pronoun", "proper", "compound")
SHAPE_WEIGHTS = (0.28, 0.34, 0.09, 0.07, 0.08, 0.06, 0.03, 0.05)
PP_CHAIN_LENGTH_WEIGHTS = (0.62, 0.22, 0.10, 0.06)  # lengths 1..4


@dataclass(frozen=True)
class SynthConfig:
    n_sentences: int = 1000
    seed: int = 1
    singular_fraction: float = 0.68  # subject number balance
    zipf_exponent: float = 0.7  # skews noun-pair frequencies


@dataclass
class TokenSpec:
    form: str
    pos: str
    head: int
    deprel: str


@dataclass
class _Builder:
    tokens: list[TokenSpec] = field(default_factory=list)

    def add(self, form: str, pos: str, head: int, deprel: str) -> int:
        self.tokens.append(TokenSpec(form, pos, head, deprel))
        return len(self.tokens)

    def reserve(self) -> int:
        """Placeholder slot whose head is patched once known."""
        self.tokens.append(TokenSpec("", "", 0, ""))
        return len(self.tokens)

    def patch(self, index: int, form: str, pos: str, head: int, deprel: str) -> None:
        self.tokens[index - 1] = TokenSpec(form, pos, head, deprel)


class SentenceSampler:
    def __init__(self, config: SynthConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        weights = 1.0 / np.arange(1, len(NOUN_PAIRS) + 1) ** config.zipf_exponent
        self._noun_p = weights / weights.sum()

    # -- lexical choices ----------------------------------------------------

    def noun(self, number: bool | None = None) -> tuple[str, str]:
        """(form, pos); number True=singular, False=plural, None=coin flip."""
        pair = NOUN_PAIRS[self.rng.choice(len(NOUN_PAIRS), p=self._noun_p)]
        if number is None:
            number = self.rng.random() < 0.5
        return (pair[0], "NN") if number else (pair[1], "NNS")

    def subject_singular(self) -> bool:
        return bool(self.rng.random() < self.config.singular_fraction)

    def pick(self, options) -> str:
        return options[int(self.rng.integers(len(options)))]

    def verb(self, options, singular: bool) -> tuple[str, str]:
        pair = options[int(self.rng.integers(len(options)))]
        return (pair[0], "VBZ") if singular else (pair[1], "VBP")

    def copula(self, singular: bool) -> tuple[str, str]:
        return (COPULA[0], "VBZ") if singular else (COPULA[1], "VBP")

    # -- structure pieces ----------------------------------------------------

    def _np(self, b: _Builder, head: int, deprel: str, singular: bool | None = None) -> int:
        """Emit "the (ADJ) NOUN" attached at `head`; returns the noun index."""
        det = b.reserve()
        adj = b.reserve() if self.rng.random() < 0.15 else None
        form, pos = self.noun(singular)
        noun = b.add(form, pos, head, deprel)
        b.patch(det, "the", "DT", noun, "det")
        if adj is not None:
            b.patch(adj, self.pick(ADJECTIVES), "JJ", noun, "amod")
        return noun

    def _pp_chain(self, b: _Builder, attach: int, length: int) -> None:
        """PP chain hanging off the noun at `attach`."""
        for _ in range(length):
            prep = b.add(self.pick(PREPOSITIONS), "IN", attach, "prep")
            attach = self._np(b, prep, "pobj")

    def _tail(self, b: _Builder, verb: int) -> None:
        """Post-verbal material: adjective, PP, or adverb."""
        roll = self.rng.random()
        if roll < 0.45:
            b.add(self.pick(ADJECTIVES), "JJ", verb, "acomp")
        elif roll < 0.8:
            prep = b.add(self.pick(PREPOSITIONS), "IN", verb, "prep")
            self._np(b, prep, "pobj")
        else:
            b.add(self.pick(ADVERBS), "RB", verb, "advmod")

    def _finish(self, b: _Builder, verb: int) -> list[TokenSpec]:
        b.add(".", ".", verb, "punct")
        return b.tokens

    def _preverb_adverbs(self, b: _Builder) -> list[int]:
        n = int(self.rng.choice(4, p=[0.72, 0.15, 0.08, 0.05]))
        return [b.reserve() for _ in range(n)]

    # -- sentence shapes -------------------------------------------------------

    def sentence(self) -> list[TokenSpec]:
        shape = SHAPES[self.rng.choice(len(SHAPES), p=SHAPE_WEIGHTS)]
        return getattr(self, f"_shape_{shape}")()

    def _shape_simple(self) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        subject = self._np(b, 0, "nsubj", singular)
        slots = self._preverb_adverbs(b)
        use_copula = self.rng.random() < 0.5
        form, pos = (
            self.copula(singular) if use_copula else self.verb(INTRANSITIVE_VERBS, singular)
        )
        verb = b.add(form, pos, 0, "root")
        for slot in slots:
            b.patch(slot, self.pick(ADVERBS), "RB", verb, "advmod")
        b.tokens[subject - 1].head = verb
        if use_copula:
            b.add(self.pick(ADJECTIVES), "JJ", verb, "acomp")
        else:
            self._tail(b, verb)
        return self._finish(b, verb)

    def _shape_pp_chain(self) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        subject = self._np(b, 0, "nsubj", singular)
        length = 1 + int(self.rng.choice(4, p=PP_CHAIN_LENGTH_WEIGHTS))
        self._pp_chain(b, subject, length)
        slots = [b.reserve()] if self.rng.random() < 0.12 else []
        form, pos = self.copula(singular)
        verb = b.add(form, pos, 0, "root")
        for slot in slots:
            b.patch(slot, self.pick(ADVERBS), "RB", verb, "advmod")
        b.tokens[subject - 1].head = verb
        b.add(self.pick(ADJECTIVES), "JJ", verb, "acomp")
        return self._finish(b, verb)

    def _rc(self, overt: bool) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        subject = self._np(b, 0, "nsubj", singular)
        relativizer = b.reserve() if overt else None
        embedded_singular = bool(self.rng.random() < 0.5)
        embedded_subject = self._np(b, 0, "nsubj", embedded_singular)
        if self.rng.random() < 0.15:  # deeper intervention inside the clause
            prep = b.add(self.pick(PREPOSITIONS), "IN", embedded_subject, "prep")
            self._np(b, prep, "pobj")
        vform, vpos = self.verb(TRANSITIVE_VERBS, embedded_singular)
        embedded_verb = b.add(vform, vpos, subject, "rcmod")
        if relativizer is not None:
            b.patch(relativizer, "that", "WDT", embedded_verb, "dobj")
        b.tokens[embedded_subject - 1].head = embedded_verb
        form, pos = self.copula(singular)
        verb = b.add(form, pos, 0, "root")
        b.tokens[subject - 1].head = verb
        b.add(self.pick(ADJECTIVES), "JJ", verb, "acomp")
        return self._finish(b, verb)

    def _shape_rc_overt(self) -> list[TokenSpec]:
        return self._rc(overt=True)

    def _shape_rc_reduced(self) -> list[TokenSpec]:
        return self._rc(overt=False)

    def _shape_intransitive(self) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        subject = self._np(b, 0, "nsubj", singular)
        if self.rng.random() < 0.25:
            self._pp_chain(b, subject, 1)
        form, pos = self.verb(INTRANSITIVE_VERBS, singular)
        verb = b.add(form, pos, 0, "root")
        b.tokens[subject - 1].head = verb
        self._tail(b, verb)
        return self._finish(b, verb)

    def _shape_pronoun(self) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        form = self.pick(SINGULAR_PRONOUNS if singular else PLURAL_PRONOUNS)
        subject = b.add(form, "PRP", 0, "nsubj")
        vform, vpos = self.verb(INTRANSITIVE_VERBS, singular)
        verb = b.add(vform, vpos, 0, "root")
        b.tokens[subject - 1].head = verb
        self._tail(b, verb)
        return self._finish(b, verb)

    def _shape_proper(self) -> list[TokenSpec]:
        b = _Builder()
        subject = b.add(self.pick(PROPER_NOUNS), "NNP", 0, "nsubj")
        vform, vpos = self.verb(INTRANSITIVE_VERBS, True)
        verb = b.add(vform, vpos, 0, "root")
        b.tokens[subject - 1].head = verb
        self._tail(b, verb)
        return self._finish(b, verb)

    def _shape_compound(self) -> list[TokenSpec]:
        b = _Builder()
        singular = self.subject_singular()
        det = b.reserve()
        modifier_form, modifier_pos = self.noun(None)
        modifier = b.add(modifier_form, modifier_pos, 0, "nn")
        head_form, head_pos = self.noun(singular)
        subject = b.add(head_form, head_pos, 0, "nsubj")
        b.patch(det, "the", "DT", subject, "det")
        b.tokens[modifier - 1].head = subject
        form, pos = self.copula(singular)
        verb = b.add(form, pos, 0, "root")
        b.tokens[subject - 1].head = verb
        b.add(self.pick(ADJECTIVES), "JJ", verb, "acomp")
        return self._finish(b, verb)


def generate(config: SynthConfig) -> Iterator[list[TokenSpec]]:
    sampler = SentenceSampler(config)
    for _ in range(config.n_sentences):
        yield sampler.sentence()


def to_conll_lines(tokens: list[TokenSpec]) -> str:
    lines = []
    for i, t in enumerate(tokens, start=1):
        lines.append(
            "\t".join([str(i), t.form, "_", t.pos, t.pos, "_", str(t.head), t.deprel])
        )
    return "\n".join(lines) + "\n"


def write_corpus(path: str | Path, config: SynthConfig) -> int:
    """Write the corpus as CoNLL text; returns the sentence count."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for tokens in generate(config):
            handle.write(to_conll_lines(tokens))
            handle.write("\n")
            count += 1
    return count
