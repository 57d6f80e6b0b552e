from collections import Counter

from svagree.corpus import ReadStats, read_conll
from svagree.extract import ExtractConfig, extract_instances
from svagree.synth import SynthConfig, write_corpus


def test_corpus_parses_cleanly(tmp_path):
    path = tmp_path / "synth.conll"
    n = write_corpus(path, SynthConfig(n_sentences=500, seed=3))
    assert n == 500
    stats = ReadStats()
    sentences = list(read_conll(path, stats=stats))
    assert stats.dropped_malformed == 0
    assert len(sentences) == 500


def test_corpus_deterministic(tmp_path):
    a, b = tmp_path / "a.conll", tmp_path / "b.conll"
    write_corpus(a, SynthConfig(n_sentences=200, seed=9))
    write_corpus(b, SynthConfig(n_sentences=200, seed=9))
    assert a.read_bytes() == b.read_bytes()


def test_corpus_covers_strata(tmp_path):
    path = tmp_path / "synth.conll"
    write_corpus(path, SynthConfig(n_sentences=2000, seed=4))
    config = ExtractConfig(select_one=False)
    instances = [
        inst
        for sentence in read_conll(path)
        for inst in extract_instances(sentence, config)
    ]
    assert len(instances) >= 2000

    attractors = Counter(
        inst.n_attractors
        for inst in instances
        if inst.homogeneous and inst.n_attractors is not None
    )
    assert attractors[0] > attractors[1] > attractors[2] > 0
    rc_conditions = Counter(
        inst.rc_condition
        for inst in instances
        if inst.n_attractors == 1 and len(inst.intervening_numbers) == 1
    )
    assert rc_conditions["NO_RC"] > 0
    assert rc_conditions["OVERT_RC"] > 0
    assert rc_conditions["REDUCED_RC"] > 0


def test_verbs_agree_with_their_subjects(tmp_path):
    path = tmp_path / "synth.conll"
    write_corpus(path, SynthConfig(n_sentences=1000, seed=5))
    config = ExtractConfig(select_one=False)
    disagreements = 0
    total = 0
    for sentence in read_conll(path):
        for inst in extract_instances(sentence, config):
            if inst.subject_number is None:
                continue
            total += 1
            if inst.subject_number != inst.verb_number:
                disagreements += 1
    assert total > 500
    assert disagreements == 0


def test_subject_number_balance(tmp_path):
    path = tmp_path / "synth.conll"
    write_corpus(path, SynthConfig(n_sentences=4000, seed=6, singular_fraction=0.68))
    singular = plural = 0
    for sentence in read_conll(path):
        for inst in extract_instances(sentence, ExtractConfig(select_one=False)):
            if inst.subject_number is None:
                continue
            if inst.subject_number.value == "SINGULAR":
                singular += 1
            else:
                plural += 1
    fraction = singular / (singular + plural)
    assert 0.60 <= fraction <= 0.76


def test_template_probe_lexicon_is_present(tmp_path):
    path = tmp_path / "synth.conll"
    write_corpus(path, SynthConfig(n_sentences=4000, seed=7))
    forms = set()
    for sentence in read_conll(path):
        forms.update(t.lower for t in sentence.tokens)
    for needed in (
        "toy", "toys", "boy", "boys", "house", "houses", "girl", "girls",
        "computer", "computers", "student", "students",
        "of", "that", "the", "man", "from", "office", "across", "street",
    ):
        assert needed in forms, needed
