"""Codec between a triple set and a relation-specific boundary-tag grid.

A triple (head = hb..he, relation k, tail = tb..te) is stored as up to three
cells of an L x K x L grid: the three corners of the rectangle spanned by
the head rows and tail columns:

    (hb, k, tb) -> HB_TB    head-begin row, tail-begin column
    (hb, k, te) -> HB_TE    head-begin row, tail-end column
    (he, k, te) -> HE_TE    head-end row, tail-end column

Every other cell is NONE. Decoding walks the HB_TE anchors: the head end is
the nearest HE_TE at or below the anchor row in the same column, the tail
begin the nearest HB_TB at or left of the anchor column in the same row;
a missing neighbour means a single-token head or tail.

Single-token heads or tails make two of the three corner assignments land
on the same cell; that collapse is resolved by the fixed tag priority
HB_TE > HE_TE > HB_TB and is lossless by construction. Cross-triple
assignments that overwrite an existing, different tag are recorded in the
collision report and may lose information.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import IntEnum

from .corpus import AnnotatedSentence, Span, Triple


class Tag(IntEnum):
    """Cell classes; integer values are the canonical classifier indices."""

    NONE = 0
    HB_TB = 1
    HB_TE = 2
    HE_TE = 3


NUM_TAGS = len(Tag)

# Losing HB_TE destroys a whole triple (it anchors decoding), while HE_TE
# and HB_TB can be reconstructed via the single-token collapse rules, so
# HB_TE wins every cell conflict and HB_TB loses every one.
TAG_PRIORITY = {Tag.HB_TE: 3, Tag.HE_TE: 2, Tag.HB_TB: 1}

TAG_GLYPHS = {Tag.NONE: "-", Tag.HB_TB: "HB-TB", Tag.HB_TE: "HB-TE", Tag.HE_TE: "HE-TE"}
TAG_NAMES = {Tag.NONE: "NONE", Tag.HB_TB: "HB-TB", Tag.HB_TE: "HB-TE", Tag.HE_TE: "HE-TE"}


@dataclass(frozen=True)
class Collision:
    """A cross-triple overwrite at one cell; `kept` won on priority."""

    cell: tuple[int, int, int]
    kept: Tag
    dropped: Tag


@dataclass
class TagMatrix:
    """Sparse L x K x L tag grid; absent cells mean NONE."""

    length: int
    num_relations: int
    cells: dict[tuple[int, int, int], Tag] = field(default_factory=dict)

    def get(self, i: int, k: int, j: int) -> Tag:
        return self.cells.get((i, k, j), Tag.NONE)

    def set(self, i: int, k: int, j: int, tag: Tag) -> None:
        if not (0 <= i < self.length and 0 <= j < self.length):
            raise ValueError(f"cell ({i}, {k}, {j}) outside length {self.length}")
        if not 0 <= k < self.num_relations:
            raise ValueError(f"relation index {k} outside [0, {self.num_relations})")
        if tag == Tag.NONE:
            self.cells.pop((i, k, j), None)
        else:
            self.cells[(i, k, j)] = tag

    def relations_present(self) -> list[int]:
        return sorted({k for (_, k, _) in self.cells})

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TagMatrix)
            and self.length == other.length
            and self.num_relations == other.num_relations
            and self.cells == other.cells
        )


def _corner_assignments(t: Triple) -> dict[tuple[int, int, int], Tag]:
    """The (up to three) cells of one triple, collapse already resolved."""
    hb, he = t.head.begin, t.head.end
    tb, te = t.tail.begin, t.tail.end
    cells: dict[tuple[int, int, int], Tag] = {}
    for cell, tag in (
        ((hb, t.relation, tb), Tag.HB_TB),
        ((hb, t.relation, te), Tag.HB_TE),
        ((he, t.relation, te), Tag.HE_TE),
    ):
        old = cells.get(cell)
        if old is None or TAG_PRIORITY[tag] > TAG_PRIORITY[old]:
            cells[cell] = tag
    return cells


def encode(s: AnnotatedSentence, num_relations: int) -> tuple[TagMatrix, list[Collision]]:
    """Write every triple's corner cells into a fresh grid.

    Cross-triple overwrites resolve by TAG_PRIORITY and are returned as the
    collision report; an empty report means no tag was destroyed by another
    triple. Within-triple single-token collapses are silent (lossless).
    """
    matrix = TagMatrix(length=len(s.sentence), num_relations=num_relations)
    collisions: list[Collision] = []
    for t in s.sorted_triples():
        if t.relation >= num_relations:
            raise ValueError(
                f"relation index {t.relation} outside [0, {num_relations})"
            )
        for cell, tag in sorted(_corner_assignments(t).items()):
            old = matrix.cells.get(cell)
            if old is None or old == tag:
                matrix.cells[cell] = tag
                continue
            if TAG_PRIORITY[tag] > TAG_PRIORITY[old]:
                matrix.cells[cell] = tag
                collisions.append(Collision(cell=cell, kept=tag, dropped=old))
            else:
                collisions.append(Collision(cell=cell, kept=old, dropped=tag))
    return matrix, collisions


def decode(matrix: TagMatrix) -> frozenset[Triple]:
    """Recover the triple set from a tag grid; total, never raises.

    Per relation, each HB_TE cell (hb, te) anchors one triple: the head end
    is the smallest HE_TE row >= hb in column te (hb itself if none), the
    tail begin the largest HB_TB column <= te in row hb (te itself if none).
    """
    # Per relation: HB_TE anchors, HE_TE rows by column, HB_TB columns by row.
    anchors: dict[int, list[tuple[int, int]]] = {}
    he_rows: dict[tuple[int, int], list[int]] = {}
    tb_cols: dict[tuple[int, int], list[int]] = {}
    for (i, k, j), tag in matrix.cells.items():
        if tag == Tag.HB_TE:
            anchors.setdefault(k, []).append((i, j))
        elif tag == Tag.HE_TE:
            he_rows.setdefault((k, j), []).append(i)
        elif tag == Tag.HB_TB:
            tb_cols.setdefault((k, i), []).append(j)
    for rows in he_rows.values():
        rows.sort()
    for cols in tb_cols.values():
        cols.sort()

    triples = set()
    for k, cells in anchors.items():
        for hb, te in cells:
            rows = he_rows.get((k, te), ())
            pos = bisect_left(rows, hb)
            he = rows[pos] if pos < len(rows) else hb

            cols = tb_cols.get((k, hb), ())
            pos = bisect_right(cols, te)
            tb = cols[pos - 1] if pos > 0 else te

            if hb <= he and tb <= te:
                triples.add(Triple(Span(hb, he), k, Span(tb, te)))
    return frozenset(triples)


@dataclass(frozen=True)
class RoundtripResult:
    """Outcome of decode(encode(s)) compared against the gold triples."""

    exact: bool
    missing: frozenset[Triple]
    spurious: frozenset[Triple]
    collisions: tuple[Collision, ...]

    def __str__(self) -> str:
        if self.exact:
            return "exact"
        return f"lossy (missing {len(self.missing)}, spurious {len(self.spurious)})"


def roundtrip_check(s: AnnotatedSentence, num_relations: int) -> RoundtripResult:
    """Encode then decode and report the symmetric difference to the gold set."""
    matrix, collisions = encode(s, num_relations)
    decoded = decode(matrix)
    missing = frozenset(s.triples - decoded)
    spurious = frozenset(decoded - s.triples)
    return RoundtripResult(
        exact=not missing and not spurious,
        missing=missing,
        spurious=spurious,
        collisions=tuple(collisions),
    )


def render_relation_grid(
    matrix: TagMatrix, relation: int, tokens: tuple[str, ...], cell_width: int = 7
) -> str:
    """Fixed-width text rendering of one relation's sub-grid.

    Rows are head tokens, columns tail tokens; cells show HB-TB / HB-TE /
    HE-TE, and "-" for untagged cells. Tokens longer than the cell width are
    truncated.
    """
    width = max(cell_width, 5)

    def clip(text: str) -> str:
        return text[:width].ljust(width)

    header = clip("") + " " + " ".join(clip(tok) for tok in tokens)
    lines = [header]
    for i, tok in enumerate(tokens):
        row = [clip(tok)]
        for j in range(len(tokens)):
            row.append(clip(TAG_GLYPHS[matrix.get(i, relation, j)]))
        lines.append(" ".join(row))
    return "\n".join(lines)
