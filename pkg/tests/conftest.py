import json

import pytest

from revsent.ingest import LabeledDataset, RawReview


def make_review(i, stars=5, text="good food", score=1.0, **meta):
    categories = meta.pop("categories", [])
    return RawReview(review_id=f"r{i}", stars=stars, text=text, sentiment_score=score,
                     restaurant_name=meta.pop("name", f"place{i % 3}"), date=meta.pop("date", None),
                     categories=categories, meta=meta)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(rows, name="reviews.jsonl"):
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        return path
    return _write


@pytest.fixture
def small_dataset():
    recs = [make_review(i, stars=1 + i % 5, text=f"text {i}", score=float(i % 5) - 2,
                        useful=float(i), is_open=bool(i % 2), categories=["Pizza"] if i % 2 else ["Bars"])
            for i in range(20)]
    return LabeledDataset(recs)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance-criteria verdicts collected by test_acceptance."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k)):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
