"""Ground-truth search tools: brute areas, certificates, samplers, towers.

Nothing here knows about corridors or pushing, so its answers can be trusted
as independent oracles in tests.  The area search walks level-synchronously
from the queried word toward the empty word; one step inserts a cyclic
relator variant so that its last letter cancels the letter at the insertion
point, which is exactly how deleting a boundary cell of a filling rewrites
the boundary word.  The scheme-filling search walks the opposite way,
assembling words up from the empty word, because its box constraint speaks
about the labels swept while building.  The tower builders produce
deliberately wasteful fillings used to exercise the pushing loop.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from vkpush.abelianization import (
    AbelianizationMap,
    Vector,
    dot,
    norm,
    prefix_labels,
    project,
    vec_sub,
)
from vkpush.diagram import Diagram, DiagramBuilder, expand_boundary
from vkpush.presentation import (
    Presentation,
    ValidationError,
    Word,
    free_reduce,
    invert,
    word_to_text,
)
from vkpush.scheme import (
    CertificationError,
    PushingScheme,
    SchemeEntry,
    conjugation_problems,
    hat_word,
    verify_entry,
)


class SearchBudgetError(RuntimeError):
    """A randomized search ran out of attempts before filling its quota."""


class FillingSearchError(RuntimeError):
    """The exhaustive filling search came up empty for some relators."""

    def __init__(self, message: str, unfilled: list[int]):
        super().__init__(message)
        self.unfilled = unfilled


@dataclass(frozen=True)
class FillingCertificate:
    """Factorization of a null-homotopic word as a product of conjugated relators.

    Each factor (u, r) stands for u r u^-1 with r a relator or inverse
    relator; the full product freely reduces to the certified word.
    """

    factors: tuple[tuple[Word, Word], ...]

    def product_word(self) -> Word:
        out: list[int] = []
        for u, r in self.factors:
            out.extend(u)
            out.extend(r)
            out.extend(invert(u))
        return tuple(out)

    def reduced_word(self) -> Word:
        return free_reduce(self.product_word())


def _check_letters(p: Presentation, w: Word) -> None:
    letters = set(p.letters())
    for x in w:
        if x not in letters:
            raise ValidationError(f"word uses letter {x!r} outside the presentation")


class _SearchTable:
    """Insertion-BFS table over freely reduced words, grown level by level.

    admit, when given, vetoes an insertion before it happens; it sees the
    current word, the variant, and the insertion position.
    """

    def __init__(self, p: Presentation, max_len: int, admit=None):
        self.p = p
        self.max_len = max_len
        self.admit = admit
        self.variants = sorted(p.variant_set)
        self.dist: dict[Word, int] = {(): 0}
        self.parent: dict[Word, tuple[Word, Word, int]] = {}
        self.frontier: list[Word] = [()]
        self.level = 0

    def grow(self) -> None:
        nxt: list[Word] = []
        for w in self.frontier:
            for v in self.variants:
                for pos in range(len(w) + 1):
                    if self.admit is not None and not self.admit(w, v, pos):
                        continue
                    cand = free_reduce(w[:pos] + v + w[pos:])
                    if len(cand) > self.max_len or cand in self.dist:
                        continue
                    self.dist[cand] = self.level + 1
                    self.parent[cand] = (w, v, pos)
                    nxt.append(cand)
        self.frontier = nxt
        self.level += 1


_TABLES: dict[tuple, _SearchTable] = {}

_BY_LAST: dict[Presentation, dict[int, tuple[Word, ...]]] = {}


def _variants_by_last(p: Presentation) -> dict[int, tuple[Word, ...]]:
    table = _BY_LAST.get(p)
    if table is None:
        grouped: dict[int, list[Word]] = {}
        for v in sorted(p.variant_set):
            grouped.setdefault(v[-1], []).append(v)
        table = _BY_LAST[p] = {x: tuple(vs) for x, vs in grouped.items()}
    return table


def _peel_search(
    p: Presentation, w: Word, max_area: int, max_len: int | None
) -> tuple[int | None, dict[Word, tuple[Word, Word, int]]]:
    """Level map from w toward the empty word, one cell deletion per step.

    Deleting a cell that meets the boundary in the letter at position pos
    replaces that letter by the rest of the cell's relator; as a word move
    this is the insertion of the variant ending in the cancelling inverse
    letter.  Every filling of w can be consumed this way cell by cell, so the
    first level containing the empty word is the exact filling area whenever
    max_len admits the rewritten boundaries.
    """
    word = free_reduce(w)
    _check_letters(p, word)
    if max_area < 0:
        raise ValidationError("max_area must be nonnegative")
    if max_len is None:
        max_len = len(word) + max_area * p.max_relator_length
    parent: dict[Word, tuple[Word, Word, int]] = {}
    if not word:
        return 0, parent
    if len(word) > max_len:
        return None, parent
    by_last = _variants_by_last(p)
    seen = {word}
    frontier = [word]
    level = 0
    while frontier and level < max_area:
        nxt: list[Word] = []
        for u in frontier:
            for pos, x in enumerate(u):
                for v in by_last.get(-x, ()):
                    cand = free_reduce(u[:pos] + v + u[pos:])
                    if len(cand) > max_len or cand in seen:
                        continue
                    seen.add(cand)
                    parent[cand] = (u, v, pos)
                    if not cand:
                        return level + 1, parent
                    nxt.append(cand)
        frontier = nxt
        level += 1
    return None, parent


def brute_area(p: Presentation, w: Word, max_area: int, max_len: int | None = None) -> int | None:
    """Minimal filling area of w, or None if not found within bounds.

    With the default max_len = |w| + max_area * B every cell-by-cell
    consumption of a minimal filling stays within bounds, so the returned
    count is the true minimum.  A tighter cap can lose fillings and report a
    larger count or None, but never undercounts.
    """
    return _peel_search(p, w, max_area, max_len)[0]


def _peel_certificate(
    parent: dict[Word, tuple[Word, Word, int]], p: Presentation
) -> FillingCertificate:
    # walking parents from the empty word back to the query yields the
    # conjugated relators in reverse application order
    factors: list[tuple[Word, Word]] = []
    cur: Word = ()
    while cur in parent:
        prev, v, pos = parent[cur]
        i, sign, j = p.variant_origin[v]
        s = p.relators[i] if sign == 1 else invert(p.relators[i])
        tail = s[j:] if j else ()
        factors.append((free_reduce(prev[:pos] + tail), invert(s)))
        cur = prev
    factors.reverse()
    return FillingCertificate(tuple(factors))


def _extract_certificate(tbl: _SearchTable, word: Word, p: Presentation) -> FillingCertificate:
    factors: list[tuple[Word, Word]] = []
    cur = word
    while cur:
        prev, v, pos = tbl.parent[cur]
        i, sign, j = p.variant_origin[v]
        s = p.relators[i] if sign == 1 else invert(p.relators[i])
        factors.append((free_reduce(prev[:pos] + invert(s[:j])), s))
        cur = prev
    return FillingCertificate(tuple(factors))


def search_filling(
    p: Presentation, w: Word, max_area: int, max_len: int | None = None
) -> FillingCertificate | None:
    """Certificate for free_reduce(w), or None if not found within bounds."""
    found, parent = _peel_search(p, w, max_area, max_len)
    if found is None:
        return None
    return _peel_certificate(parent, p)


def _boxed_filling(
    p: Presentation,
    m: AbelianizationMap,
    target: Word,
    base_label: Vector,
    max_area: int,
    max_len: int,
) -> FillingCertificate | None:
    """Certificate whose construction never leaves the target's label box.

    Every vertex of the resulting diagram is a prefix label of some
    intermediate insertion word, so vetoing insertions that step outside the
    coordinate-wise bounding box of the target boundary labels keeps the
    whole filling inside that box.  Such fillings never undercut the boundary
    in any linear direction, which is what a useful scheme filling must do;
    the unconstrained search happily returns smaller fillings that dip below
    the corridor and ruin the direction gap.
    """
    bounds = prefix_labels(m, target, base_label)
    lo = tuple(min(lbl[i] for lbl in bounds) for i in range(m.rank))
    hi = tuple(max(lbl[i] for lbl in bounds) for i in range(m.rank))

    def admit(w: Word, v: Word, pos: int) -> bool:
        start = project(m, w[:pos], base_label)
        for lbl in prefix_labels(m, v, start):
            if any(lbl[i] < lo[i] or lbl[i] > hi[i] for i in range(m.rank)):
                return False
        return True

    word = free_reduce(target)
    _check_letters(p, word)
    if len(word) > max_len:
        return None
    key = ("box", p, max_len, base_label, lo, hi)
    tbl = _TABLES.get(key)
    if tbl is None:
        tbl = _TABLES[key] = _SearchTable(p, max_len, admit=admit)
    while word not in tbl.dist and tbl.level < max_area and tbl.frontier:
        tbl.grow()
    found = tbl.dist.get(word)
    if found is None or found > max_area:
        return None
    return _extract_certificate(tbl, word, p)


def _fold_walk(bld: DiagramBuilder, walk: list[int]) -> list[int]:
    """Stack-fold a walk until its word is freely reduced.

    An inverse-letter pair over one edge is a backtrack and simply drops out;
    over two edges the second folds onto the first and then drops out.
    """
    out: list[int] = []
    for d in walk:
        if out and bld.letter[out[-1]] == -bld.letter[d]:
            if bld.rep(bld.twin[out[-1]]) != bld.rep(d):
                bld.alias(d, bld.twin[out[-1]], allow_fold=True)
            out.pop()
            continue
        out.append(d)
    return out


def certificate_to_diagram(
    p: Presentation,
    m: AbelianizationMap,
    cert: FillingCertificate,
    base_label: Vector,
    expected: Word | None = None,
) -> Diagram:
    """Realize a certificate as a based diagram with freely reduced boundary.

    Builds the wedge of lollipops the factors describe, then folds the walk
    until its word is reduced.  Cancelling petals that pinch off as spheres
    are discarded.
    """
    if expected is not None and free_reduce(expected) != cert.reduced_word():
        raise ValidationError("certificate product does not reduce to the expected word")
    bld = DiagramBuilder(p, m)
    walk: list[int] = []
    for u, r in cert.factors:
        _check_letters(p, u)
        if r not in p.variant_set:
            raise ValidationError(
                f"certificate factor {word_to_text(r, p)!r} is not a relator variant"
            )
        stem = bld.path(u)
        petal = bld.path(r)
        bld.add_cell(petal)
        walk.extend(stem)
        walk.extend(petal)
        walk.extend(bld.twin[s] for s in reversed(stem))
    return bld.build(_fold_walk(bld, walk), base_label, allow_bubbles=True)


def sample_corridor_certificates(
    p: Presentation,
    m: AbelianizationMap,
    q: float,
    target_len: int,
    count: int,
    rng_seed: int,
    variant_pool: tuple[Word, ...] | None = None,
) -> list[FillingCertificate]:
    """Seeded certificates whose reduced products stay in the norm-q corridor.

    Every prefix of each reduced product has label norm at most q.  The pool
    restricts which relator variants the petals draw from; conjugators stay
    short so the attachment labels remain deep inside the corridor.
    """
    if q < m.lipschitz:
        raise ValidationError("corridor radius is below the largest letter step")
    if count < 0:
        raise ValidationError("count must be nonnegative")
    pool = sorted(p.variant_set) if variant_pool is None else list(variant_pool)
    for v in pool:
        if v not in p.variant_set:
            raise ValidationError(f"pool word {word_to_text(v, p)!r} is not a relator variant")
    if not pool:
        raise ValidationError("variant pool is empty")
    letters = sorted(p.letters())
    rng = random.Random(rng_seed)
    results: list[FillingCertificate] = []
    attempts = 0
    budget = 400 * max(count, 1)

    def fits(word: Word) -> bool:
        if len(word) > target_len:
            return False
        return all(norm(lbl) <= q + 1e-9 for lbl in prefix_labels(m, word, m.zero))

    while len(results) < count:
        attempts += 1
        if attempts > budget:
            raise SearchBudgetError(
                f"sampling budget exhausted after {budget} attempts"
                f" (corridor {q} too tight for length {target_len})"
            )
        factors: list[tuple[Word, Word]] = []
        wanted = rng.randint(1, 4)
        for _ in range(wanted):
            v = rng.choice(pool)
            u = free_reduce(tuple(rng.choice(letters) for _ in range(rng.randint(0, 2))))
            trial = FillingCertificate(tuple(factors + [(u, v)]))
            if fits(trial.reduced_word()):
                factors.append((u, v))
        cert = FillingCertificate(tuple(factors))
        if factors and cert.reduced_word():
            results.append(cert)
    return results


def sample_corridor_loops(
    p: Presentation,
    m: AbelianizationMap,
    q: float,
    target_len: int,
    count: int,
    rng_seed: int,
) -> list[Word]:
    """Freely reduced null-homotopic words confined to the norm-q corridor."""
    certs = sample_corridor_certificates(p, m, q, target_len, count, rng_seed)
    return [c.reduced_word() for c in certs]


def build_scheme_entry(
    p: Presentation,
    m: AbelianizationMap,
    t: int,
    conj: dict[int, Word],
    max_area: int,
    max_len: int | None = None,
) -> SchemeEntry:
    """Assemble a verified scheme entry by searching fillings for every hat word.

    Fillings are searched box-first: a filling confined to the bounding box
    of its own boundary labels cannot dip below the corridor, so it keeps the
    direction gap positive.  Only when no boxed filling exists within the
    bounds does the unconstrained search get a say.

    A conjugation table that is not witnessed by the relators is rejected
    outright; missing fillings within the search bounds raise
    FillingSearchError listing the relators left unfilled.
    """
    problems = conjugation_problems(p, t, conj)
    if problems:
        raise CertificationError("; ".join(problems))
    probe = SchemeEntry(p, m, t, dict(conj), {})
    col = m.column(t)
    fillings: dict[int, Diagram] = {}
    unfilled: list[int] = []
    for i, r in enumerate(p.relators):
        target = hat_word(probe, r)
        cap = max_len if max_len is not None else len(free_reduce(target)) + max_area * p.max_relator_length
        cert = _boxed_filling(p, m, target, col, max_area, cap)
        if cert is None:
            cert = search_filling(p, target, max_area, max_len)
        if cert is None:
            unfilled.append(i)
            continue
        flat = certificate_to_diagram(p, m, cert, col)
        fillings[i] = expand_boundary(flat, target)
    if unfilled:
        raise FillingSearchError(
            f"no filling found within bounds for relators {unfilled}", unfilled
        )
    entry = SchemeEntry(p, m, t, dict(conj), fillings)
    leftover = verify_entry(entry, p, m)
    if leftover:
        raise CertificationError("; ".join(leftover))
    return entry


def annular_collar(inner: Diagram, e: SchemeEntry, outer_word: Word) -> Diagram:
    """Wrap one ring of conjugation cells around a diagram.

    The new boundary spells outer_word, whose hat word must equal the old
    boundary letter for letter.  Letters equal to the direction degenerate to
    shared edges exactly as in the open corridor.
    """
    want = hat_word(e, outer_word)
    if inner.boundary_word != want:
        raise ValidationError("collar outer word does not hat onto the inner boundary")
    p, m = e.presentation, e.amap
    bld = DiagramBuilder(p, m)
    bld.adopt(inner)
    for idx, face in enumerate(inner.faces):
        if idx != inner.boundary_face_index:
            bld.add_cell(list(face))
    k = len(outer_word)
    top = bld.path(outer_word)
    verticals = [bld.new_edge(e.t)[0] for _ in range(k)]
    iw = inner.boundary_walk
    pos = 0
    for i, x in enumerate(outer_word):
        vi, vj = verticals[i], verticals[(i + 1) % k]
        if x == e.t:
            bld.alias(vi, top[i])
            bld.alias(vj, iw[pos])
            pos += 1
        elif x == -e.t:
            bld.alias(vj, bld.twin[top[i]])
            bld.alias(vi, bld.twin[iw[pos]])
            pos += 1
        else:
            block = iw[pos : pos + len(e.conj[x])]
            pos += len(block)
            cell = [bld.twin[vi], top[i], vj]
            cell.extend(bld.twin[bk] for bk in reversed(block))
            bld.add_cell(cell)
    label = vec_sub(inner.base_label, m.column(e.t))
    return bld.build(top, label, vertex_hints=dict(inner.origin))


def tower_diagram(e: SchemeEntry, word: Word, depth: int, base_label: Vector) -> Diagram:
    """A maximally redundant filling of word: depth collars over one core cell.

    Requires the word to be a relator variant fixed by the entry's hat map,
    so each collar repeats the boundary while shifting labels by the
    direction image.  Area grows linearly in depth; so does the label norm.
    """
    if depth < 0:
        raise ValidationError("tower depth must be nonnegative")
    if word not in e.presentation.variant_set:
        raise ValidationError("tower core must be a relator variant")
    if hat_word(e, word) != word:
        raise ValidationError("tower word is not fixed by the entry's conjugations")
    col = e.amap.column(e.t)
    core_label = tuple(b + depth * c for b, c in zip(base_label, col))
    bld = DiagramBuilder(e.presentation, e.amap)
    cell = bld.path(word)
    bld.add_cell(cell)
    d = bld.build(cell, core_label)
    for _ in range(depth):
        d = annular_collar(d, e, word)
    return d


def _tower_choice(s: PushingScheme, v: Word, attach: Vector, q: float, slack: float):
    """Entry and depth making a tower over v at attach poke above norm q."""
    candidates = [e for e in s.entries if v in e.presentation.variant_set and hat_word(e, v) == v]
    if not candidates:
        return None
    best = max(candidates, key=lambda e: dot(e.amap.column(e.t), attach))
    step = norm(best.amap.column(best.t))
    if step == 0.0:
        return None
    # core norm >= depth*step - |attach| > q + slack
    depth = max(1, math.ceil((q + slack + norm(attach)) / step) + 1)
    return best, depth


def wasteful_diagram(
    s: PushingScheme,
    cert: FillingCertificate,
    q: float,
    slack: float = 2.0,
    base_label: Vector | None = None,
) -> Diagram:
    """Certificate diagram whose petals are replaced by towers breaching norm q.

    Petals whose variant no entry fixes stay single cells.  The boundary is
    the certificate's reduced product, as for certificate_to_diagram, but the
    interior carries vertices far outside the corridor for pushes to work on.
    """
    p, m = s.presentation, s.amap
    label0 = m.zero if base_label is None else base_label
    bld = DiagramBuilder(p, m)
    walk: list[int] = []
    for u, r in cert.factors:
        _check_letters(p, u)
        if r not in p.variant_set:
            raise ValidationError(
                f"certificate factor {word_to_text(r, p)!r} is not a relator variant"
            )
        stem = bld.path(u)
        attach = project(m, u, label0)
        choice = _tower_choice(s, r, attach, q, slack)
        if choice is None:
            petal = bld.path(r)
            bld.add_cell(petal)
        else:
            entry, depth = choice
            tower = tower_diagram(entry, r, depth, attach)
            mapping = bld.import_shifted(tower)
            for idx, face in enumerate(tower.faces):
                if idx != tower.boundary_face_index:
                    bld.add_cell([mapping[x] for x in face])
            petal = [mapping[x] for x in tower.boundary_walk]
        walk.extend(stem)
        walk.extend(petal)
        walk.extend(bld.twin[x] for x in reversed(stem))
    return bld.build(_fold_walk(bld, walk), label0, allow_bubbles=True)
