"""Seeded planted-signal review corpus for tests, benchmarks and demos.

Each review is neutral filler text with one or two planted sentiment words
whose polarity matches the label.  Optional knobs make the task harder:

* ``negation_rate``: a review expresses its label as "not" + a word of the
  opposite polarity, and stray "not" tokens appear in filler so that the
  word alone carries no signal.  Bag-of-words pipelines that drop "not" as
  a stopword see the opposite-polarity word only.
* ``label_noise``: the final label is flipped with this probability after
  the text is written, so the text disagrees with it; meta attributes are
  drawn from the final label.
* ``meta_signal``: strength of the label correlation in the
  ``restaurant_rating`` meta attribute (0 disables it).
"""

from __future__ import annotations

import numpy as np

from revsent.ingest import LabeledDataset, RawReview, afinn_score, load_lexicon

POSITIVE = ("delicious", "amazing", "friendly", "fresh", "excellent", "wonderful", "tasty", "perfect")
NEGATIVE = ("awful", "bland", "rude", "stale", "terrible", "greasy", "soggy", "dirty")
FILLER = (
    "we", "ordered", "the", "pasta", "table", "menu", "waiter", "evening", "lunch", "dinner", "came", "with",
    "friends", "and", "a", "side", "of", "fries", "parking", "was", "near", "corner", "street", "sauce",
    "burger", "pizza", "salad", "drinks", "dessert", "portion", "chicken", "rice", "soup", "coffee", "staff",
    "kitchen", "booth", "window", "weekend", "tuesday", "family", "place", "downtown", "plate", "order",
    "bread", "cheese", "noodles", "bill", "seat",
)
RESTAURANTS = tuple(f"Restaurant {c}" for c in "ABCDEFGHIJKLMNOPQRSTUVWX")
CATEGORIES = ("Pizza", "Sushi", "Burgers", "Mexican", "Thai", "Cafes", "Bars", "Vegan", "Seafood", "Diners")
SIGNAL_WORDS = frozenset(POSITIVE + NEGATIVE)


def _sentence(rng, length: int, stray_not: float) -> list[list[str]]:
    """Filler as one-token chunks; planted phrases go between chunks."""
    chunks = [[str(w)] for w in rng.choice(FILLER, size=length)]
    if stray_not and rng.random() < stray_not:
        chunks.insert(int(rng.integers(0, len(chunks) + 1)), ["not"])
    return chunks


def _plant(rng, chunks: list[list[str]], phrase: list[str]) -> None:
    # never directly after a stray "not", which would negate the planted word
    slots = [i for i in range(len(chunks) + 1) if i == 0 or chunks[i - 1] != ["not"]]
    chunks.insert(slots[int(rng.integers(0, len(slots)))], phrase)


def synthetic_reviews(n: int, seed: int = 0, label_noise: float = 0.0, negation_rate: float = 0.0,
                      meta_signal: float = 1.0, n_sentences=(1, 3), sentence_len=(4, 8)) -> LabeledDataset:
    """Generate ``n`` reviews; labels balanced in expectation.  Deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    lexicon = load_lexicon()
    weights = 1.0 / np.arange(1, len(RESTAURANTS) + 1)
    weights /= weights.sum()
    stray_not = 0.5 if negation_rate > 0 else 0.0
    records = []
    for i in range(n):
        y = int(rng.random() < 0.5)
        sents = [_sentence(rng, int(rng.integers(sentence_len[0], sentence_len[1] + 1)), stray_not)
                 for _ in range(int(rng.integers(n_sentences[0], n_sentences[1] + 1)))]
        for _ in range(int(rng.integers(1, 3))):
            if rng.random() < negation_rate:
                planted = ["not", str(rng.choice(NEGATIVE if y else POSITIVE))]
            else:
                planted = [str(rng.choice(POSITIVE if y else NEGATIVE))]
            _plant(rng, sents[int(rng.integers(0, len(sents)))], planted)
        text = " ".join(" ".join(w for c in s for w in c).capitalize() + "." for s in sents)
        if rng.random() < label_noise:
            y = 1 - y
        stars = int(rng.choice([4, 5])) if y else int(rng.choice([1, 2, 3]))
        rating = 3.5 + meta_signal * 0.4 * (2 * y - 1) + 0.5 * rng.normal()
        records.append(RawReview(
            review_id=f"syn{seed}-{i:05d}",
            stars=stars,
            text=text,
            sentiment_score=afinn_score(text, lexicon),
            restaurant_name=str(rng.choice(RESTAURANTS, p=weights)),
            date=int(1_420_070_400 + rng.integers(0, 5 * 365 * 86_400)),
            categories=sorted({str(c) for c in rng.choice(CATEGORIES, size=int(rng.integers(1, 3)))}),
            meta={
                "restaurant_rating": round(float(np.clip(rating, 1.0, 5.0)) * 2) / 2,
                "useful": int(rng.poisson(2.0)),
                "funny": int(rng.poisson(1.0)),
                "price_range": int(rng.integers(1, 5)),
                "outdoor_seating": bool(rng.random() < 0.4),
                "is_open": bool(rng.random() < 0.9),
            },
        ))
    return LabeledDataset(records)
