"""Keyword-to-detection matching over word embeddings, and slice cropping."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllOutOfVocabulary, EmptyBoxes, EmptyTable, FormatError, InputError, ZeroNorm
from .kwx import KeywordCandidate, fold

DEFAULT_THRESHOLD = 0.35
SLICE_MARGIN = 0.10
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    entries: dict

    def get(self, word):
        return self.entries.get(fold(word))

    def __contains__(self, word):
        return fold(word) in self.entries

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class Detection:
    label: str
    bbox: tuple[int, int, int, int]
    confidence: float = 1.0

    def check_bounds(self, width, height):
        x0, y0, x1, y1 = self.bbox
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise InputError(f"bbox {self.bbox} of {self.label!r} outside {width}x{height} image")


@dataclass(frozen=True)
class MatchResult:
    matched_label: str
    matched_boxes: list
    similarity: float
    keyword: str


@dataclass(frozen=True)
class SliceSpec:
    crop_box: tuple[int, int, int, int]
    target_resolution: int

    @property
    def side(self):
        return self.crop_box[2] - self.crop_box[0]


def load_embeddings(source) -> EmbeddingTable:
    """Parse a GloVe-style text table: ``word v1 ... vd`` per line.

    ``source`` is a path or an open text stream. Blank lines are ignored; the
    first entry fixes the dimension.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return load_embeddings(fh)
    entries = {}
    dim = None
    for lineno, line in enumerate(source, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise FormatError("expected a word followed by at least one component", lineno)
        try:
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise FormatError(f"dimension {len(vec)} != {dim}", lineno)
        if not np.all(np.isfinite(vec)):
            raise FormatError("non-finite component", lineno)
        vec.setflags(write=False)
        entries[fold(parts[0])] = vec
    if not entries:
        raise EmptyTable("embedding source contains no entries")
    return EmbeddingTable(dim, entries)


def loads_embeddings(text: str) -> EmbeddingTable:
    return load_embeddings(io.StringIO(text))


def load_detections(path) -> list[Detection]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(raw, list):
        raise FormatError(f"{path}: expected a JSON array of detections")
    out = []
    for i, item in enumerate(raw):
        try:
            bbox = tuple(int(v) for v in item["bbox"])
            det = Detection(str(item["label"]), bbox, float(item.get("confidence", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: detection {i}: {exc!r}") from None
        if len(bbox) != 4 or not 0.0 <= det.confidence <= 1.0:
            raise FormatError(f"{path}: detection {i}: bad bbox or confidence")
        out.append(det)
    return out


def phrase_vector(phrase, table: EmbeddingTable) -> np.ndarray:
    """Mean embedding of the in-vocabulary words of ``phrase``.

    ``phrase`` may be a list of words or a space-separated string.
    Out-of-vocabulary words are skipped and do not count towards the mean.
    """
    words = phrase.split() if isinstance(phrase, str) else list(phrase)
    if not words:
        raise ValueError("empty phrase")
    vecs = [v for v in (table.get(w) for w in words) if v is not None]
    if not vecs:
        raise AllOutOfVocabulary(f"no word of {' '.join(words)!r} is in the embedding table")
    return np.mean(vecs, axis=0)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise ZeroNorm("cosine similarity of a zero vector")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def best_match(keywords, detections, table: EmbeddingTable, threshold: float = DEFAULT_THRESHOLD):
    """Pick the (label, keyword) pair with the highest cosine similarity.

    Returns a :class:`MatchResult`, or ``None`` when the best similarity is
    below ``threshold`` (or no keyword/label pair is embeddable). Ties go to
    the keyword with the lower YAKE score, then to the lexicographically
    smaller label.
    """
    if not keywords or not detections:
        raise ValueError("keywords and detections must be nonempty")

    def embed(text):
        try:
            return phrase_vector(text, table)
        except AllOutOfVocabulary:
            return None

    kw_vecs = []
    for kw in keywords:
        text, score = (kw.text, kw.score) if isinstance(kw, KeywordCandidate) else (kw, 0.0)
        kw_vecs.append((text, score, embed(text)))
    labels = sorted({d.label for d in detections})
    label_vecs = {lab: embed(lab) for lab in labels}
    if all(v is None for _, _, v in kw_vecs) and all(v is None for v in label_vecs.values()):
        raise AllOutOfVocabulary("every keyword and every detection label is out of vocabulary")

    best = None  # (sim, kw_score, label, kw_text)
    for text, score, kv in kw_vecs:
        if kv is None or np.linalg.norm(kv) < 1e-12:
            continue
        for lab in labels:
            lv = label_vecs[lab]
            if lv is None or np.linalg.norm(lv) < 1e-12:
                continue
            sim = cosine_similarity(kv, lv)
            cand = (sim, score, lab, text)
            if best is None or _better(cand, best):
                best = cand
    if best is None or best[0] < threshold:
        return None
    sim, _, lab, text = best
    boxes = [d.bbox for d in detections if d.label == lab]
    return MatchResult(lab, boxes, sim, text)


def _better(a, b) -> bool:
    if abs(a[0] - b[0]) > _TIE_EPS:
        return a[0] > b[0]
    return (a[1], a[2]) < (b[1], b[2])


def union_box(boxes):
    if not boxes:
        raise EmptyBoxes("no boxes to enclose")
    xs0, ys0, xs1, ys1 = zip(*boxes)
    return min(xs0), min(ys0), max(xs1), max(ys1)


def select_slice(image_size, boxes, target: int) -> SliceSpec:
    """Square crop around the union of ``boxes`` with a 10% margin per side.

    The square is shifted inward at the image border; if it cannot fit it is
    capped at ``min(W, H)``.
    """
    if target < 1:
        raise ValueError("target resolution must be >= 1")
    width, height = image_size
    x0, y0, x1, y1 = union_box(boxes)
    bw, bh = x1 - x0, y1 - y0
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    side = max(bw, bh) * (1.0 + 2.0 * SLICE_MARGIN)
    side = min(int(math.ceil(side - 1e-9)), width, height)
    left = _clamp_start(cx - side / 2.0, side, width)
    top = _clamp_start(cy - side / 2.0, side, height)
    return SliceSpec((left, top, left + side, top + side), target)


def _clamp_start(start, side, limit):
    return int(min(max(round(start), 0), limit - side))


def token_count(num_slices: int, patches_per_tile: int) -> int:
    """Visual tokens for a base tile plus ``num_slices`` slices."""
    if num_slices < 0:
        raise ValueError("num_slices must be >= 0")
    return (1 + num_slices) * patches_per_tile
