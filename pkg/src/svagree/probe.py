"""Constructed-sentence probes and representation diagnostics.

The template probe builds "the N1 of/that the N2" prefixes: with a
prepositional-phrase modifier the upcoming verb agrees with N1, with an
object relative clause it agrees with N2. Activation traces record every
hidden unit word by word; the embedding analysis projects noun vectors
onto their top two principal components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .extract import Number, Vocab
from .nn import RecurrentModel, TraceRecord

# Lexical sets from the constructed-prefix experiments; build_lexicon pads
# the list to ten with frequent regular nouns from the training vocabulary.
BASE_LEXICON: tuple[tuple[tuple[str, str], tuple[str, str]], ...] = (
    (("toy", "toys"), ("boy", "boys")),
    (("house", "houses"), ("girl", "girls")),
    (("computer", "computers"), ("student", "students")),
)

LONG_MODIFIER_TAIL = ("the", "man", "from", "the", "office", "across", "the", "street")


@dataclass(frozen=True)
class NounPair:
    singular: str
    plural: str

    def form(self, number: Number) -> str:
        return self.singular if number is Number.SINGULAR else self.plural


@dataclass(frozen=True)
class TemplateSentence:
    modifier: str  # "PP" | "RC"
    n1: NounPair
    n2: NounPair
    n1_number: Number
    n2_number: Number
    tokens: tuple[str, ...]
    expected: Number


def _template_tokens(
    modifier: str, n1: NounPair, n1_num: Number, n2: NounPair, n2_num: Number
) -> tuple[str, ...]:
    connective = "of" if modifier == "PP" else "that"
    return ("the", n1.form(n1_num), connective, "the", n2.form(n2_num))


def generate_templates(
    lexicon: Sequence[tuple[tuple[str, str], tuple[str, str]]],
    vocab: Vocab | None = None,
) -> list[TemplateSentence]:
    """All 2 modifiers x 2 numbers x 2 numbers combinations for each lexical
    set: 80 prefixes for the standard ten-set lexicon.

    With a vocabulary given, any out-of-vocabulary lexical item is an error.
    """
    if vocab is not None:
        missing = sorted(
            {
                form
                for pair in lexicon
                for noun in pair
                for form in noun
                if not vocab.has_word(form)
            }
        )
        if missing:
            raise DataError(
                "template lexicon items missing from vocabulary: " + ", ".join(missing)
            )
    sentences = []
    for (n1_sg, n1_pl), (n2_sg, n2_pl) in lexicon:
        n1 = NounPair(n1_sg, n1_pl)
        n2 = NounPair(n2_sg, n2_pl)
        for modifier in ("PP", "RC"):
            for n1_num in (Number.SINGULAR, Number.PLURAL):
                for n2_num in (Number.SINGULAR, Number.PLURAL):
                    sentences.append(
                        TemplateSentence(
                            modifier=modifier,
                            n1=n1,
                            n2=n2,
                            n1_number=n1_num,
                            n2_number=n2_num,
                            tokens=_template_tokens(modifier, n1, n1_num, n2, n2_num),
                            expected=n1_num if modifier == "PP" else n2_num,
                        )
                    )
    return sentences


def build_lexicon(
    vocab: Vocab, size: int = 10
) -> list[tuple[tuple[str, str], tuple[str, str]]]:
    """The base lexical sets padded to `size` with frequent regular nouns
    whose singular and plural forms are both in the vocabulary."""
    lexicon = [pair for pair in BASE_LEXICON]
    used = {form for pair in lexicon for noun in pair for form in noun}

    def in_vocab_pair(pair: tuple[tuple[str, str], tuple[str, str]]) -> bool:
        return all(vocab.has_word(form) for noun in pair for form in noun)

    lexicon = [pair for pair in lexicon if in_vocab_pair(pair)]

    candidates = []
    for word, (tag, frac) in vocab.pos_majority.items():
        if tag != "NN" or frac < 0.9:
            continue
        plural = word + "s"
        if word in used or plural in used or not vocab.has_word(plural):
            continue
        candidates.append((-(vocab.counts.get(word, 0)), word, plural))
    candidates.sort()

    queue = list(candidates)
    while len(lexicon) < size and len(queue) >= 2:
        _, w1, p1 = queue.pop(0)
        _, w2, p2 = queue.pop(0)
        lexicon.append(((w1, p1), (w2, p2)))
    if len(lexicon) < size:
        raise DataError(
            f"vocabulary supports only {len(lexicon)} template lexical sets, "
            f"need {size}"
        )
    return lexicon[:size]


@dataclass
class ActivationTrace:
    tokens: tuple[str, ...]
    hidden: np.ndarray  # (T, h)
    cell: np.ndarray | None
    p_plural: np.ndarray  # (T,) classifier P(PLURAL) from each prefix state


def _probe_ids(vocab: Vocab, tokens: Sequence[str]) -> list[int]:
    missing = sorted({form for form in tokens if not vocab.has_word(form)})
    if missing:
        raise DataError("probe tokens missing from vocabulary: " + ", ".join(missing))
    return [vocab.word_id(form) for form in tokens]


def trace(model: RecurrentModel, tokens: Sequence[str], vocab: Vocab) -> ActivationTrace:
    """Word-by-word hidden states plus the classifier's PLURAL probability
    computed from every intermediate state."""
    ids = _probe_ids(vocab, tokens)
    result = model.forward(ids, want_trace=True)
    record: TraceRecord = result.trace
    return ActivationTrace(
        tokens=tuple(tokens),
        hidden=record.hidden,
        cell=record.cell,
        p_plural=record.probs[:, 1].copy(),
    )


def classify_templates(
    model: RecurrentModel,
    templates: Sequence[TemplateSentence],
    vocab: Vocab,
) -> list[dict]:
    """Predict the upcoming verb number for each template prefix."""
    rows = []
    for template in templates:
        ids = _probe_ids(vocab, template.tokens)
        probs = model.forward(ids).probs
        predicted = Number.PLURAL if probs[1] > probs[0] else Number.SINGULAR
        rows.append(
            {
                "sentence": " ".join(template.tokens),
                "modifier": template.modifier,
                "n1_number": template.n1_number.value,
                "n2_number": template.n2_number.value,
                "expected": template.expected.value,
                "predicted": predicted.value,
                "p_plural": float(probs[1]),
                "correct": predicted == template.expected,
            }
        )
    return rows


def long_modifier_probe(
    model: RecurrentModel, vocab: Vocab
) -> tuple[ActivationTrace, ActivationTrace]:
    """Trace the PP/RC pair with a long embedded modifier; the two prefixes
    differ in exactly one token. Correct answers: PLURAL (PP), SINGULAR (RC).
    """
    pp_tokens = ("the", "houses", "of") + LONG_MODIFIER_TAIL
    rc_tokens = ("the", "houses", "that") + LONG_MODIFIER_TAIL
    return trace(model, pp_tokens, vocab), trace(model, rc_tokens, vocab)


# --- Principal components ---------------------------------------------------


def top_principal_components(
    matrix: np.ndarray, k: int = 2, max_iter: int = 10000, tol: float = 1e-13
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k eigenvectors/values of the covariance of the (centered) rows,
    by power iteration with deflation.

    Returns (components (k, dims), explained variances (k,)). Component signs
    are fixed so each vector's largest-magnitude entry is positive.
    """
    centered = matrix - matrix.mean(axis=0)
    cov = centered.T @ centered / max(1, centered.shape[0] - 1)
    dims = cov.shape[0]
    if k > dims:
        raise ValueError(f"cannot extract {k} components from {dims} dimensions")
    components = np.zeros((k, dims))
    variances = np.zeros(k)
    work = cov.copy()
    for j in range(k):
        vec = np.full(dims, 1.0 / np.sqrt(dims))
        eigenvalue = 0.0
        for _ in range(max_iter):
            nxt = work @ vec
            norm = float(np.linalg.norm(nxt))
            if norm == 0.0:
                break
            nxt /= norm
            if float(np.linalg.norm(nxt - vec)) < tol:
                vec = nxt
                eigenvalue = norm
                break
            vec = nxt
            eigenvalue = norm
        pivot = int(np.argmax(np.abs(vec)))
        if vec[pivot] < 0:
            vec = -vec
        components[j] = vec
        variances[j] = eigenvalue
        work = work - eigenvalue * np.outer(vec, vec)
    return components, variances


@dataclass
class PcaResult:
    words: list[str]
    coords: np.ndarray  # (n_words, 2)
    numbers: list[Number]
    explained_variance: np.ndarray  # (2,)


def pca_embeddings(
    model: RecurrentModel,
    vocab: Vocab,
    threshold: float = 0.9,
) -> PcaResult:
    """Project noun embeddings onto their top two principal components.

    Candidates are vocabulary words whose majority POS is NN or NNS with at
    least `threshold` of their occurrences, labeled singular/plural by that
    tag. Requires at least 3 candidates.
    """
    words: list[str] = []
    numbers: list[Number] = []
    rows: list[np.ndarray] = []
    E = model.ps.params["E"]
    for word, (tag, frac) in sorted(vocab.pos_majority.items()):
        if tag not in ("NN", "NNS") or frac < threshold:
            continue
        wid = vocab.word_id(word)
        if wid is None:
            continue
        words.append(word)
        numbers.append(Number.SINGULAR if tag == "NN" else Number.PLURAL)
        rows.append(E[wid])
    if len(words) < 3:
        raise DataError(
            f"only {len(words)} noun candidates pass the {threshold:.0%} "
            "majority-POS threshold; need at least 3"
        )
    matrix = np.stack(rows)
    components, variances = top_principal_components(matrix, k=2)
    centered = matrix - matrix.mean(axis=0)
    coords = centered @ components.T
    return PcaResult(
        words=words, coords=coords, numbers=numbers, explained_variance=variances
    )
