"""Connected-frame retrieval across submaps.

Implements the adaptive two-stage keyframe-database filter: candidate
frames must share enough common words relative to the best hit, then score
high enough relative to the best bag-of-words score.  The two ratios are
recomputed per query frame from the query's own map instead of the fixed
0.8/0.75 constants.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyFrame, InsufficientHistory, ZeroBaseline
from .scene_sim import Frame, word_overlap_ratio
from .submap import Submap

RATIO_FLOOR = 0.05
RATIO_CEIL = 1.0

# The fixed constants the adaptive ratios replace (relocalization baseline).
FIXED_WORD_RATIO = 0.8
FIXED_SCORE_RATIO = 0.75


@dataclass
class AdaptiveThresholds:
    """Per-query ratios derived from the adjacent and half-overlap frames."""

    word_ratio: float  # common-word ratio applied to the best hit count
    score_ratio: float  # score ratio applied to the best candidate score
    adjacent_common_words: int
    nearby_common_words: int
    adjacent_score: float
    nearby_score: float

    @classmethod
    def fixed(cls) -> "AdaptiveThresholds":
        return cls(FIXED_WORD_RATIO, FIXED_SCORE_RATIO, 0, 0, 0.0, 0.0)


@dataclass
class ConnectedFrameMatch:
    query_frame_id: int
    matched_frame_id: int
    matched_submap_id: int
    common_words: int
    score: float


def common_words(a: Frame, b: Frame) -> int:
    """Size of the multiset intersection of the two frames' words."""
    if len(a.words) > len(b.words):
        a, b = b, a
    return sum(min(count, b.words[word]) for word, count in a.words.items())


def bow_score(a: Frame, b: Frame) -> float:
    """L1-normalized histogram similarity in [0, 1]; 1 for identical histograms."""
    total_a = sum(a.words.values())
    total_b = sum(b.words.values())
    if total_a == 0 or total_b == 0:
        raise EmptyFrame("cannot score a frame with no words")
    l1 = 0.0
    for word in a.words.keys() | b.words.keys():
        l1 += abs(a.words[word] / total_a - b.words[word] / total_b)
    return 1.0 - 0.5 * l1


def select_adjacent_and_nearby50(current: Frame, current_map: Submap) -> tuple[Frame, Frame]:
    """Pick the previous frame and the frame nearest 50% overlap with `current`.

    Ties on the overlap distance go to the most recent frame.
    """
    history = [f for f, _ in current_map.frames if f.id < current.id]
    if len(history) < 2:
        raise InsufficientHistory(
            f"submap {current_map.id} has {len(history)} frames before {current.id}, need >= 2"
        )
    adjacent = history[-1]
    best = None
    best_key = None
    for f in history:
        ratio = word_overlap_ratio(current, f)
        key = (abs(ratio - 0.5), -f.id)
        if best_key is None or key < best_key:
            best, best_key = f, key
    return adjacent, best


def compute_thresholds(current: Frame, adjacent: Frame, nearby50: Frame) -> AdaptiveThresholds:
    """Ratios from the (current, adjacent) and (current, nearby50) pairs."""
    n0 = common_words(current, adjacent)
    s0 = bow_score(current, adjacent)
    if n0 == 0 or s0 == 0:
        raise ZeroBaseline("query frame shares nothing with its predecessor")
    n1 = common_words(current, nearby50)
    s1 = bow_score(current, nearby50)
    word_ratio = min(max(n1 / n0, RATIO_FLOOR), RATIO_CEIL)
    score_ratio = min(max(s1 / s0, RATIO_FLOOR), RATIO_CEIL)
    return AdaptiveThresholds(word_ratio, score_ratio, n0, n1, s0, s1)


def retrieve_connected_frames(
    current: Frame, other_submaps: list, thresholds: AdaptiveThresholds
) -> list:
    """Two-stage filter over all keyframes of the other submaps.

    Stage 1 keeps frames whose common-word count reaches
    ``word_ratio * max_common_words``; stage 2 keeps candidates whose score
    reaches ``score_ratio * best_score``.  Output is canonicalized by
    (submap id, frame id).
    """
    if not current.words:
        return []
    hits = []
    for submap in other_submaps:
        for frame, _ in submap.keyframes:
            shared = common_words(current, frame)
            if shared >= 1:
                hits.append((submap.id, frame, shared))
    if not hits:
        return []

    max_common = max(shared for _, _, shared in hits)
    word_floor = thresholds.word_ratio * max_common
    candidates = [(sid, frame, shared) for sid, frame, shared in hits if shared >= word_floor]

    scored = [
        (sid, frame, shared, bow_score(current, frame)) for sid, frame, shared in candidates
    ]
    best_score = max(score for _, _, _, score in scored)
    score_floor = thresholds.score_ratio * best_score

    matches = [
        ConnectedFrameMatch(current.id, frame.id, sid, shared, score)
        for sid, frame, shared, score in scored
        if score >= score_floor
    ]
    matches.sort(key=lambda m: (m.matched_submap_id, m.matched_frame_id))
    return matches
