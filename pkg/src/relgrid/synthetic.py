"""Seeded synthetic-corpus generator with a controlled overlap-pattern mix.

Each sentence is built around one intended pattern (normal / epo / seo /
hto), optionally padded with extra non-overlapping triples for triple-count
variety. Candidate sentences are rejected until they classify as exactly
the intended pattern AND encode/decode losslessly with an empty collision
report, so every emitted sentence round-trips through the tag codec. The
intended pattern is recorded in the sentence id (``synth-00042-epo``) and
in the returned bookkeeping counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    EPO,
    HTO,
    NORMAL,
    SEO,
    AnnotatedSentence,
    RelationVocab,
    Sentence,
    Span,
    Triple,
    classify_pattern,
)
from .tagging import roundtrip_check


class GenerationError(RuntimeError):
    """The requested mix cannot be generated."""


def default_mix() -> dict[str, float]:
    return {NORMAL: 0.25, EPO: 0.25, SEO: 0.25, HTO: 0.25}


@dataclass
class SynthConfig:
    sentences: int = 100
    num_relations: int = 4
    mix: dict[str, float] = field(default_factory=default_mix)
    min_len: int = 6
    max_len: int = 14
    max_span_width: int = 3
    max_extra_triples: int = 2
    lexicon_size: int = 400
    seed: int = 0


def pattern_counts(config: SynthConfig) -> dict[str, int]:
    """Integer per-pattern sentence counts via largest-remainder rounding."""
    mix = config.mix
    unknown = set(mix) - {NORMAL, EPO, SEO, HTO}
    if unknown:
        raise GenerationError(f"unknown pattern(s) in mix: {sorted(unknown)}")
    if any(v < 0 for v in mix.values()) or sum(mix.values()) <= 0:
        raise GenerationError("mix proportions must be non-negative and sum > 0")
    total = sum(mix.values())
    shares = {p: config.sentences * v / total for p, v in mix.items() if v > 0}
    counts = {p: int(share) for p, share in shares.items()}
    remainder = config.sentences - sum(counts.values())
    by_frac = sorted(shares, key=lambda p: (counts[p] - shares[p], p))
    for p in by_frac[:remainder]:
        counts[p] += 1
    return {p: c for p, c in counts.items() if c > 0}


def _validate(config: SynthConfig, counts: dict[str, int]) -> None:
    if config.sentences < 1:
        raise GenerationError("need at least one sentence")
    if config.num_relations < 1:
        raise GenerationError("need at least one relation")
    if counts.get(EPO, 0) > 0 and config.num_relations < 2:
        raise GenerationError(
            "epo requires at least 2 relations "
            "(the same relation in both directions is disallowed)"
        )
    if config.min_len < 4 or config.max_len < config.min_len:
        raise GenerationError("need min_len >= 4 and max_len >= min_len")
    if config.lexicon_size < config.max_len:
        raise GenerationError("lexicon must cover the longest sentence")
    if config.max_span_width < 1:
        raise GenerationError("max_span_width must be >= 1")


def _carve_spans(
    rng: np.random.Generator, length: int, widths: list[tuple[int, int]]
) -> list[Span] | None:
    """Disjoint random spans with per-span (min, max) widths, or None."""
    spans: list[Span] = []
    for min_w, max_w in widths:
        placed = False
        for _ in range(60):
            w = int(rng.integers(min_w, max_w + 1))
            if w > length:
                break
            start = int(rng.integers(0, length - w + 1))
            candidate = Span(start, start + w - 1)
            if all(not candidate.overlaps(s) for s in spans):
                spans.append(candidate)
                placed = True
                break
        if not placed:
            return None
    return spans


def _hto_pair(rng: np.random.Generator, region: Span) -> tuple[Span, Span]:
    """Head/tail spans overlapping inside `region`."""
    variants = ["identical", "nested_tail", "nested_head"]
    if region.end - region.begin >= 2:
        variants.append("staggered")
    variant = variants[int(rng.integers(0, len(variants)))]
    if variant == "identical":
        return region, region
    if variant == "staggered":
        mid = int(rng.integers(region.begin + 1, region.end))
        return Span(region.begin, mid), Span(mid, region.end)
    # strict nesting; the inner span drops one edge token of the region
    if rng.random() < 0.5:
        inner = Span(region.begin, region.end - 1)
    else:
        inner = Span(region.begin + 1, region.end)
    if variant == "nested_tail":
        return region, inner
    return inner, region


def _build_triples(
    rng: np.random.Generator, pattern: str, length: int, config: SynthConfig
) -> list[Triple] | None:
    k = config.num_relations
    width = (1, config.max_span_width)
    extras = int(rng.integers(0, config.max_extra_triples + 1))

    def rel() -> int:
        return int(rng.integers(0, k))

    if pattern == NORMAL:
        main = 1 + int(rng.integers(0, 2))
        spans = _carve_spans(rng, length, [width] * (2 * (main + extras)))
        if spans is None:
            return None
        triples = [
            Triple(spans[2 * i], rel(), spans[2 * i + 1]) for i in range(main + extras)
        ]
    elif pattern == EPO:
        spans = _carve_spans(rng, length, [width] * (2 + 2 * extras))
        if spans is None:
            return None
        a, b = spans[0], spans[1]
        rels = rng.choice(k, size=2, replace=False)
        r1, r2 = int(rels[0]), int(rels[1])
        if rng.random() < 0.5:
            triples = [Triple(a, r1, b), Triple(a, r2, b)]
        else:
            triples = [Triple(a, r1, b), Triple(b, r2, a)]
        triples += [
            Triple(spans[2 + 2 * i], rel(), spans[3 + 2 * i]) for i in range(extras)
        ]
    elif pattern == SEO:
        spans = _carve_spans(rng, length, [width] * (3 + 2 * extras))
        if spans is None:
            return None
        a, b, c = spans[0], spans[1], spans[2]
        variant = int(rng.integers(0, 3))
        if variant == 0:  # shared head
            triples = [Triple(a, rel(), b), Triple(a, rel(), c)]
        elif variant == 1:  # shared tail
            triples = [Triple(b, rel(), a), Triple(c, rel(), a)]
        else:  # chain: tail of one is head of the other
            triples = [Triple(a, rel(), b), Triple(b, rel(), c)]
        triples += [
            Triple(spans[3 + 2 * i], rel(), spans[4 + 2 * i]) for i in range(extras)
        ]
    elif pattern == HTO:
        region_width = (2, max(2, config.max_span_width))
        spans = _carve_spans(rng, length, [region_width] + [width] * (2 * extras))
        if spans is None:
            return None
        head, tail = _hto_pair(rng, spans[0])
        triples = [Triple(head, rel(), tail)]
        triples += [
            Triple(spans[1 + 2 * i], rel(), spans[2 + 2 * i]) for i in range(extras)
        ]
    else:
        raise GenerationError(f"unknown pattern {pattern!r}")

    return triples if len(set(triples)) == len(triples) else None


def generate_sentence(
    rng: np.random.Generator,
    pattern: str,
    config: SynthConfig,
    sentence_id: str,
    max_attempts: int = 200,
) -> AnnotatedSentence:
    """One sentence that classifies as exactly `pattern` and round-trips."""
    for _ in range(max_attempts):
        length = int(rng.integers(config.min_len, config.max_len + 1))
        triples = _build_triples(rng, pattern, length, config)
        if triples is None:
            continue
        word_ids = rng.choice(config.lexicon_size, size=length, replace=False)
        tokens = tuple(f"w{int(i):04d}" for i in word_ids)
        candidate = AnnotatedSentence(
            sentence=Sentence(tokens=tokens, id=sentence_id),
            triples=frozenset(triples),
        )
        if classify_pattern(candidate).flags != frozenset({pattern}):
            continue
        result = roundtrip_check(candidate, config.num_relations)
        if result.exact and not result.collisions:
            return candidate
    raise GenerationError(
        f"could not generate a {pattern!r} sentence in {max_attempts} attempts"
    )


def generate_corpus(
    config: SynthConfig,
) -> tuple[list[AnnotatedSentence], RelationVocab, dict[str, int]]:
    """Corpus with the configured pattern mix, plus bookkeeping counts.

    Returns (corpus, relation vocab, intended-pattern counts); sentence ids
    carry the intended pattern. Deterministic under config.seed.
    """
    counts = pattern_counts(config)
    _validate(config, counts)
    rng = np.random.default_rng(config.seed)

    schedule = [p for p in (NORMAL, EPO, SEO, HTO) for _ in range(counts.get(p, 0))]
    order = rng.permutation(len(schedule))
    corpus = []
    for idx, slot in enumerate(order):
        pattern = schedule[slot]
        corpus.append(
            generate_sentence(rng, pattern, config, f"synth-{idx:05d}-{pattern}")
        )
    vocab = RelationVocab(names=tuple(f"rel{k}" for k in range(config.num_relations)))
    return corpus, vocab, counts
