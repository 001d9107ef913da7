"""Sequence difficulty and evaluation metrics.

edit_distance is the difficulty signal of the training loop and operates on
raw strings (unicode scalar values, unit costs). The normalized metrics cer
and wer divide by ground-truth length at character and word granularity.
word_accuracy applies the usual scene-text protocol of case-insensitive
comparison over alphanumerics only; the raw loop never uses it.
"""

from __future__ import annotations

from .errors import EmptyGroundTruth, LengthMismatch


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    return _levenshtein(list(a), list(b))


def _levenshtein(a: list, b: list) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) < len(a):
        a, b = b, a
    # two-row DP; prev[j] = distance(a[:i], b[:j])
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


def cer(pred: str, gt: str) -> float:
    """Character error rate: edit_distance(pred, gt) / len(gt)."""
    if len(gt) == 0:
        raise EmptyGroundTruth("cer needs a nonempty ground truth")
    return edit_distance(pred, gt) / len(gt)


def _words(text: str) -> list[str]:
    # single-space tokenization; runs of spaces do not create empty words
    return [t for t in text.split(" ") if t]


def wer(pred: str, gt: str) -> float:
    """Word error rate: word-level Levenshtein over space-split tokens,
    normalized by the ground-truth word count."""
    gt_words = _words(gt)
    if not gt_words:
        raise EmptyGroundTruth("wer needs at least one ground-truth word")
    return _levenshtein(_words(pred), gt_words) / len(gt_words)


def _canonical(text: str, case_sensitive: bool) -> str:
    kept = [c for c in text if c.isalnum()]
    s = "".join(kept)
    return s if case_sensitive else s.lower()


def word_accuracy(preds: list[str], gts: list[str], case_sensitive: bool = False) -> float:
    """Fraction of exact full-string matches after canonicalization.

    Default protocol strips non-alphanumerics and lowercases both sides;
    pass case_sensitive=True to keep case (non-alphanumerics still stripped).
    """
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not gts:
        raise EmptyGroundTruth("word_accuracy needs at least one pair")
    hits = sum(
        1
        for p, g in zip(preds, gts)
        if _canonical(p, case_sensitive) == _canonical(g, case_sensitive)
    )
    return hits / len(gts)
