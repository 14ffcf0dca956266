"""Unsupervised keyword extraction (YAKE-style statistical scoring).

Scores are "lower is better": a word or phrase with a small score is more
characteristic of the text.
"""
from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import EmptyInput, NoCandidates

_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*|[.?!]")
_SENTENCE_END = frozenset(".?!")


@lru_cache(maxsize=None)
def load_stopwords() -> frozenset[str]:
    """The bundled SMART stopword list, one case-folded word per line."""
    text = resources.files("fasemcom.data").joinpath("stopwords_smart.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.split("\n") if line.strip())


def fold(word: str) -> str:
    return word.lower()


@dataclass(frozen=True)
class Token:
    surface: str
    sentence_index: int
    position_index: int
    is_stopword: bool
    sentence_start: bool = False

    @property
    def key(self) -> str:
        return fold(self.surface)


@dataclass(frozen=True)
class WordStats:
    word: str
    tf: int
    w_case: float
    w_position: float
    w_freq: float
    w_rel: float
    w_difsentence: float
    score: float


@dataclass(frozen=True)
class KeywordCandidate:
    phrase: tuple[str, ...]
    score: float
    term_frequency: int
    members: tuple[str, ...]  # non-stopword words entering the score

    @property
    def text(self) -> str:
        return " ".join(self.phrase)


def tokenize(text: str, stopwords=None) -> list[Token]:
    """Split ``text`` into word tokens with sentence and stopword annotations.

    Words are runs of letters/digits (an inner apostrophe is kept); every other
    character separates tokens. ``.``, ``?`` and ``!`` close a sentence.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    tokens: list[Token] = []
    sentence = 0
    in_sentence = 0
    for m in _TOKEN_RE.finditer(text):
        frag = m.group()
        if frag in _SENTENCE_END:
            if in_sentence:
                sentence += 1
                in_sentence = 0
            continue
        tokens.append(
            Token(
                surface=frag,
                sentence_index=sentence,
                position_index=len(tokens),
                is_stopword=fold(frag) in stopwords,
                sentence_start=in_sentence == 0,
            )
        )
        in_sentence += 1
    if not tokens:
        raise EmptyInput("no word tokens in input text")
    return tokens


def combine(w_case, w_position, w_freq, w_rel, w_difsentence) -> float:
    """Fold the five word features into one score (lower = more important)."""
    return (w_rel * w_position) / (w_case + w_freq / w_rel + w_difsentence / w_rel)


def score_words(tokens: list[Token]) -> dict[str, WordStats]:
    if not tokens:
        raise EmptyInput("no tokens to score")
    n_sentences = tokens[-1].sentence_index + 1

    occurrences: dict[str, list[Token]] = {}
    for tok in tokens:
        if not tok.is_stopword:
            occurrences.setdefault(tok.key, []).append(tok)
    if not occurrences:
        return {}

    # neighbour sets over a one-token window, never across sentences
    left: dict[str, list[str]] = {w: [] for w in occurrences}
    right: dict[str, list[str]] = {w: [] for w in occurrences}
    for a, b in zip(tokens, tokens[1:]):
        if a.sentence_index != b.sentence_index:
            continue
        if b.key in left:
            left[b.key].append(a.key)
        if a.key in right:
            right[a.key].append(b.key)

    tfs = [len(v) for v in occurrences.values()]
    mean_tf = statistics.fmean(tfs)
    std_tf = statistics.pstdev(tfs)
    max_tf = max(tfs)

    stats = {}
    for word, occ in occurrences.items():
        tf = len(occ)
        n_acronym = sum(1 for t in occ if len(t.surface) > 1 and t.surface.isupper())
        n_capital = sum(
            1
            for t in occ
            if t.surface[0].isupper() and not t.sentence_start
            and not (len(t.surface) > 1 and t.surface.isupper())
        )
        w_case = max(n_capital, n_acronym) / (1.0 + math.log(tf))
        w_position = math.log(math.log(3.0 + statistics.median(t.sentence_index for t in occ)))
        w_freq = tf / (mean_tf + std_tf)
        dl = len(set(left[word])) / len(left[word]) if left[word] else 0.0
        dr = len(set(right[word])) / len(right[word]) if right[word] else 0.0
        w_rel = 1.0 + (dl + dr) * tf / max_tf
        w_dif = len({t.sentence_index for t in occ}) / n_sentences
        stats[word] = WordStats(
            word, tf, w_case, w_position, w_freq, w_rel, w_dif,
            combine(w_case, w_position, w_freq, w_rel, w_dif),
        )
    return stats


def phrase_score(member_scores, tf: int) -> float:
    """Score of a candidate phrase from its member word scores and frequency."""
    return math.prod(member_scores) / (tf * (1.0 + math.fsum(member_scores)))


def candidates(tokens: list[Token], stats: dict[str, WordStats], max_len: int = 3) -> list[KeywordCandidate]:
    """All stopword-unbounded n-grams (n <= max_len) within sentences, scored."""
    if max_len not in (1, 2, 3):
        raise ValueError(f"max_len must be 1, 2 or 3, got {max_len}")
    counts: dict[tuple[str, ...], list] = {}
    for i in range(len(tokens)):
        for n in range(1, max_len + 1):
            gram = tokens[i:i + n]
            if len(gram) < n or gram[-1].sentence_index != gram[0].sentence_index:
                break
            if gram[0].is_stopword or gram[-1].is_stopword:
                continue
            key = tuple(t.key for t in gram)
            if key in counts:
                counts[key][0] += 1
            else:
                counts[key] = [1, tuple(t.key for t in gram if not t.is_stopword)]
    out = []
    for phrase, (tf, members) in counts.items():
        score = phrase_score([stats[w].score for w in members], tf)
        out.append(KeywordCandidate(phrase, score, tf, members))
    out.sort(key=lambda c: (c.score, c.text))
    return out


def extract_keywords(text: str, max_len: int = 3, top_k: int = 5, stopwords=None) -> list[KeywordCandidate]:
    """Top ``top_k`` keyword phrases of ``text``, best (lowest score) first."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    tokens = tokenize(text, stopwords)
    stats = score_words(tokens)
    found = candidates(tokens, stats, max_len)
    if not found:
        raise NoCandidates(f"every n-gram of {text!r} is stopword-bounded")
    return found[:top_k]
