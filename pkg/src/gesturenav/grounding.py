"""Deterministic stand-in for the zero-shot language grounding network:
phrase parsing against a synonym lexicon, proposal scoring with a presence
threshold, and pointing-ray disambiguation."""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyPhrase, NoCandidates
from .geometry import Ray3, wrap_angle

PRESENCE_THRESHOLD = 0.60
CLASS_WEIGHT = 0.7
ATTR_WEIGHT = 0.3
TIE_ANGLE = math.radians(0.5)

DEFAULT_STOPWORDS = frozenset(
    "a an the this that those these to go is are of on in at near by "
    "please robot me my your over there here and or with for".split()
)

DEFAULT_LEXICON = {
    "chair": "chair", "chairs": "chair", "seat": "chair", "stool": "chair",
    "table": "table", "desk": "table",
    "sofa": "sofa", "couch": "sofa",
    "door": "door", "doorway": "door",
    "plant": "plant",
    "cabinet": "cabinet", "cupboard": "cabinet", "shelf": "cabinet",
    "person": "person", "human": "person", "man": "person", "woman": "person",
    "guy": "person", "him": "person", "her": "person", "them": "person",
}


def load_lexicon(path) -> dict:
    """One 'synonym,class' entry per line; blank lines and # comments skipped."""
    lex = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        synonym, cls = (part.strip().lower() for part in line.split(",", 1))
        lex[synonym] = cls
    return lex


def load_stopwords(path) -> frozenset:
    words = [w.strip().lower() for w in Path(path).read_text().splitlines()]
    return frozenset(w for w in words if w)


@dataclass(frozen=True)
class Phrase:
    raw: str
    class_token: str | None
    attribute_tokens: frozenset


@dataclass(frozen=True)
class GroundingProposal:
    object_id: str
    bbox: tuple
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score out of [0, 1]")


def parse_phrase(raw: str, class_lexicon: dict | None = None,
                 stopwords: frozenset = DEFAULT_STOPWORDS) -> Phrase:
    """Lowercase, strip punctuation and tokenize; the class token is the
    last token found in the lexicon, the attributes are the remaining
    non-stopword tokens."""
    lexicon = DEFAULT_LEXICON if class_lexicon is None else class_lexicon
    cleaned = raw.lower().translate(str.maketrans("", "", string.punctuation))
    tokens = cleaned.split()
    if not tokens:
        raise EmptyPhrase(f"no tokens in {raw!r}")
    class_token = None
    class_index = None
    for i, tok in enumerate(tokens):
        if tok in lexicon:
            class_token = lexicon[tok]
            class_index = i
    attrs = {
        tok for i, tok in enumerate(tokens)
        if i != class_index and tok not in stopwords
    }
    return Phrase(raw, class_token, frozenset(attrs))


def score_entry(visible_fraction: float, class_match: bool, attr_overlap: float) -> float:
    """score = vf * (0.7 * class + 0.3 * attr); chosen so a correct class
    alone clears 0.60 while a wrong class never can."""
    return visible_fraction * (
        CLASS_WEIGHT * (1.0 if class_match else 0.0) + ATTR_WEIGHT * attr_overlap
    )


def ground(view, phrase: Phrase, threshold: float = PRESENCE_THRESHOLD):
    """Score every view entry against the phrase and keep those at or above
    the presence threshold, best first.

    `view` entries are (object_id, bbox, visible_fraction, class_label,
    attributes). An empty result means the queried object is not present.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold out of [0, 1]")
    proposals = []
    for object_id, bbox, vf, class_label, attributes in view:
        class_match = phrase.class_token is not None and class_label == phrase.class_token
        if phrase.attribute_tokens:
            overlap = len(frozenset(attributes) & phrase.attribute_tokens) / len(
                phrase.attribute_tokens
            )
        else:
            overlap = 1.0
        score = score_entry(vf, class_match, overlap)
        if score >= threshold:
            proposals.append(GroundingProposal(object_id, tuple(bbox), score))
    proposals.sort(key=lambda p: (-p.score, p.object_id))
    return proposals


def disambiguate(proposals, pointing_ray_map: Ray3, centroids: dict):
    """Pick the proposal whose map bearing from the pointing-ray origin is
    closest to the pointing azimuth.

    `centroids` maps object_id to its map-frame (x, y). Ties below half a
    degree go to the higher score, then to the nearer object.
    """
    if not proposals:
        raise NoCandidates("no proposals to disambiguate")
    ox, oy = float(pointing_ray_map.origin[0]), float(pointing_ray_map.origin[1])
    azimuth = math.atan2(pointing_ray_map.direction[1], pointing_ray_map.direction[0])
    ranked = []
    for p in proposals:
        cx, cy = centroids[p.object_id]
        bearing = math.atan2(cy - oy, cx - ox)
        off = abs(wrap_angle(bearing - azimuth))
        dist = math.hypot(cx - ox, cy - oy)
        ranked.append((off, p, dist))
    best_off = min(r[0] for r in ranked)
    tied = [r for r in ranked if r[0] <= best_off + TIE_ANGLE]
    tied.sort(key=lambda r: (-r[1].score, r[2]))
    return tied[0][1]
