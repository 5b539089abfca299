import json
import random

import pytest

from csforge.dataset import CHOICE_LABELS, DatasetManifest, McqItem
from csforge.generate import BilingualLexicon

# Devanagari consonants, all letter codepoints.
_DEV_LETTERS = [chr(c) for c in range(0x0915, 0x093A)]
_CONS = "bcdfghklmnprstvz"
_VOWELS = "aeiou"


def synthetic_lexicon(n_entries: int = 1200, seed: int = 7) -> BilingualLexicon:
    """Deterministic pseudo-word English->Devanagari lexicon for fixtures."""
    rng = random.Random(seed)
    entries = {}
    while len(entries) < n_entries:
        word = "".join(rng.choice(_CONS) + rng.choice(_VOWELS) for _ in range(rng.randint(2, 4)))
        if word in entries:
            continue
        entries[word] = "".join(rng.choice(_DEV_LETTERS) for _ in range(rng.randint(2, 5)))
    return BilingualLexicon(entries=entries)


def fixture_sentences(lexicon: BilingualLexicon, n_sentences: int = 200, seed: int = 11):
    """Sentences fully covered by the lexicon, 8-16 words plus punctuation."""
    rng = random.Random(seed)
    keys = sorted(lexicon.entries)
    sentences = []
    for _ in range(n_sentences):
        words = [rng.choice(keys) for _ in range(rng.randint(8, 16))]
        sentences.append(" ".join(words) + rng.choice([".", "?", "!"]))
    return sentences


def make_item(item_id: str, stem: str, answer_key: str = "A", choice_prefix: str = "choice") -> McqItem:
    choices = tuple((label, f"{choice_prefix} {label.lower()} {item_id}") for label in CHOICE_LABELS)
    return McqItem(id=item_id, stem=stem, choices=choices, answer_key=answer_key)


def make_manifest(n_items: int, lexicon: BilingualLexicon = None, seed: int = 3) -> DatasetManifest:
    rng = random.Random(seed)
    if lexicon is None:
        lexicon = synthetic_lexicon()
    keys = sorted(lexicon.entries)
    items = []
    for i in range(n_items):
        stem = " ".join(rng.choice(keys) for _ in range(rng.randint(8, 16))) + "?"
        items.append(make_item(f"q{i:04d}", stem, answer_key=rng.choice(CHOICE_LABELS)))
    return DatasetManifest(items=items)


def write_csqa_jsonl(path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in manifest.items:
            fh.write(
                json.dumps(
                    {
                        "id": item.id,
                        "question": {
                            "stem": item.stem,
                            "choices": [{"label": lab, "text": text} for lab, text in item.choices],
                        },
                        "answerKey": item.answer_key,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


@pytest.fixture(scope="session")
def big_lexicon() -> BilingualLexicon:
    return synthetic_lexicon()


@pytest.fixture(scope="session")
def sentences(big_lexicon) -> list:
    return fixture_sentences(big_lexicon)
