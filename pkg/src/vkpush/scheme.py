"""Pushing schemes: finite corridor data plus machine certification.

A scheme entry fixes a corridor direction t and, for every other letter x, a
conjugation word conj(x) that equals t^-1 x t in the group, witnessed by a
single relator cell.  It also stores one based filling diagram per relator r
whose boundary spells the hat word of r (the letterwise conjugate, not
reduced).  Certification measures the uniform valuation gap these fillings
provide over the whole character sphere and derives the corridor constants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from vkpush.abelianization import (
    AbelianizationMap,
    Character,
    Vector,
    dot,
    norm,
    prefix_labels,
    vec_sub,
)
from vkpush.diagram import Diagram, DiagramBuilder
from vkpush.presentation import (
    Presentation,
    ValidationError,
    Word,
    invert,
    letter_token,
    parse_letter,
    parse_word,
    word_to_text,
)


class CertificationError(Exception):
    """A scheme failed verification or coverage certification."""


@dataclass
class SchemeEntry:
    presentation: Presentation
    amap: AbelianizationMap
    t: int
    conj: dict[int, Word]
    fillings: dict[int, Diagram]


@dataclass
class PushingScheme:
    presentation: Presentation
    amap: AbelianizationMap
    entries: tuple[SchemeEntry, ...]

    def verify(self) -> None:
        """Raise CertificationError unless every entry checks out."""
        if not self.entries:
            raise CertificationError("scheme has no entries")
        problems: list[str] = []
        for i, e in enumerate(self.entries):
            for msg in verify_entry(e, self.presentation, self.amap):
                problems.append(f"entry {i}: {msg}")
        if problems:
            raise CertificationError("; ".join(problems))

    def to_json_dict(self) -> dict:
        p = self.presentation
        return {
            "entries": [
                {
                    "t": letter_token(e.t, p),
                    "conj": {
                        letter_token(x, p): word_to_text(w, p)
                        for x, w in sorted(e.conj.items())
                    },
                    "fillings": {str(i): e.fillings[i].to_json_dict() for i in sorted(e.fillings)},
                }
                for e in self.entries
            ]
        }

    @classmethod
    def from_json_dict(cls, obj: object, p: Presentation, m: AbelianizationMap) -> "PushingScheme":
        if not isinstance(obj, dict) or not isinstance(obj.get("entries"), list):
            raise ValidationError("scheme JSON must be an object with an 'entries' list")
        entries = []
        for raw in obj["entries"]:
            if not isinstance(raw, dict) or not {"t", "conj", "fillings"} <= set(raw):
                raise ValidationError(f"malformed scheme entry {raw!r}")
            t = parse_letter(raw["t"], p)
            if not isinstance(raw["conj"], dict) or not isinstance(raw["fillings"], dict):
                raise ValidationError("entry 'conj' and 'fillings' must be objects")
            conj = {
                parse_letter(tok, p): parse_word(text, p)
                for tok, text in raw["conj"].items()
            }
            fillings = {}
            for key, dia in raw["fillings"].items():
                try:
                    idx = int(key)
                except ValueError:
                    raise ValidationError(f"filling key {key!r} is not a relator index") from None
                fillings[idx] = Diagram.from_json_dict(dia, p, m)
            entries.append(SchemeEntry(p, m, t, conj, fillings))
        return cls(p, m, tuple(entries))


@dataclass(frozen=True)
class SchemeConstants:
    a: float
    b: float
    A: float
    B: int
    q_min: float
    lipschitz: float
    grid_spacing: float | None
    lipschitz_bound: float

    def to_json_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "A": self.A,
            "B": self.B,
            "q_min": self.q_min,
            "grid_spacing": self.grid_spacing,
            "lipschitz_bound": self.lipschitz_bound,
        }


def hat_word(e: SchemeEntry, w: Word) -> Word:
    """Letterwise conjugate of w; t itself passes through.  Not reduced."""
    out: list[int] = []
    for x in w:
        if x == e.t or x == -e.t:
            out.append(x)
        elif x in e.conj:
            out.extend(e.conj[x])
        else:
            raise ValidationError(
                f"letter {letter_token(x, e.presentation)!r} has no conjugation word"
            )
    return tuple(out)


def _hat_blocks(e: SchemeEntry, w: Word) -> list[Word]:
    return [(x,) if x in (e.t, -e.t) else e.conj[x] for x in w]


def t_ring(e: SchemeEntry, w: Word, start_label: Vector) -> Diagram:
    """Open corridor over w: boundary t^-1 w t hat(w)^-1, based at the hatted start.

    One conjugation cell per letter of w; letters t and t^-1 degenerate to
    shared edges, so the area can drop below |w|.
    """
    if not w:
        raise ValidationError("cannot build a corridor over the empty word")
    _hat_blocks(e, w)  # validates letters up front
    bld = DiagramBuilder(e.presentation, e.amap)
    top = bld.path(w)
    verticals = [bld.new_edge(e.t)[0] for _ in range(len(w) + 1)]
    bottom: list[int] = []
    for i, x in enumerate(w):
        if x == e.t:
            bld.alias(verticals[i], top[i])
            bottom.append(verticals[i + 1])
        elif x == -e.t:
            bld.alias(verticals[i + 1], bld.twin[top[i]])
            bottom.append(bld.twin[verticals[i]])
        else:
            block = bld.path(e.conj[x])
            cell = [bld.twin[verticals[i]], top[i], verticals[i + 1]]
            cell.extend(bld.twin[bk] for bk in reversed(block))
            bld.add_cell(cell)
            bottom.extend(block)
    walk = [bld.twin[verticals[0]], *top, verticals[-1]]
    walk.extend(bld.twin[bk] for bk in reversed(bottom))
    return bld.build(walk, start_label)


def conjugation_problems(p: Presentation, t: int, conj: dict[int, Word]) -> list[str]:
    """Violations of the conjugation table alone, independent of fillings."""
    letters = set(p.letters())
    if t not in letters:
        return [f"direction {t!r} is not a letter of the presentation"]
    problems: list[str] = []
    expected = letters - {t, -t}
    if set(conj) != expected:
        missing = sorted(expected - set(conj))
        extra = sorted(set(conj) - expected)
        return problems + [f"conjugation table mismatch (missing {missing}, extra {extra})"]
    for x in sorted(x for x in expected if x > 0):
        wx = conj[x]
        if not wx or any(y not in letters for y in wx):
            problems.append(f"conjugate of {letter_token(x, p)!r} is empty or uses unknown letters")
            continue
        if conj[-x] != invert(wx):
            problems.append(
                f"conjugates of {letter_token(x, p)!r} and its inverse are not inverse words"
            )
        cell = (-t, x, t) + invert(wx)
        if cell not in p.variant_set:
            problems.append(
                f"conjugation relation {word_to_text(cell, p)!r} is not a relator variant"
            )
    return problems


def verify_entry(e: SchemeEntry, p: Presentation, m: AbelianizationMap) -> list[str]:
    """All invariant violations of the entry; empty means the entry is valid."""
    problems: list[str] = []
    if e.presentation != p or e.amap != m:
        return ["entry was built against a different presentation or map"]
    letters = set(p.letters())
    if e.t not in letters:
        return [f"direction {e.t!r} is not a letter of the presentation"]
    if m.column(e.t) == m.zero:
        problems.append(f"direction {letter_token(e.t, p)!r} maps to zero; corridors cannot move")
    problems.extend(conjugation_problems(p, e.t, e.conj))
    if set(e.conj) != letters - {e.t, -e.t}:
        return problems  # hat words are undefined without a full table
    if set(e.fillings) != set(range(len(p.relators))):
        problems.append("fillings must cover exactly the relator indices")
        return problems
    col = m.column(e.t)
    for i, r in enumerate(p.relators):
        f = e.fillings[i]
        if f.presentation != p or f.amap != m:
            problems.append(f"filling {i} was built against a different presentation or map")
            continue
        want = hat_word(e, r)
        if f.boundary_word != want:
            problems.append(
                f"filling {i} boundary {word_to_text(f.boundary_word, p)!r}"
                f" differs from the hat word {word_to_text(want, p)!r}"
            )
        if f.base_label != col:
            problems.append(f"filling {i} base label {f.base_label} is not the direction image {col}")
    return problems


def gap(u: Character, e: SchemeEntry) -> float:
    """Worst valuation surplus of the entry's fillings over bare relator paths.

    Minimized over relators, inverses, and all rotations; the instance for a
    rotation is the stored filling re-based at the matching hat-block start.
    Mirrors keep vertex labels and rotations shift the whole prefix set, so
    the minimum collapses to one valuation difference per relator.
    Returns -inf when the direction does not advance along u.
    """
    m = e.amap
    if dot(u.direction, m.column(e.t)) <= 0.0:
        return float("-inf")
    worst = math.inf
    for i, r in enumerate(e.presentation.relators):
        fill_min = min(dot(u.direction, lbl) for lbl in e.fillings[i].labels.values())
        path_min = min(dot(u.direction, lbl) for lbl in prefix_labels(m, r, m.zero))
        worst = min(worst, fill_min - path_min)
    return worst


def choose_entry(s: PushingScheme, u: Character) -> tuple[SchemeEntry, float]:
    best: tuple[SchemeEntry, float] | None = None
    for e in s.entries:
        g = gap(u, e)
        if best is None or g > best[1]:
            best = (e, g)
    if best is None or best[1] <= 0.0:
        raise CertificationError(f"character {u.direction} not covered by scheme")
    return best


def _sphere_grid(n: int, delta: float) -> list[Vector]:
    """A delta-net of the unit sphere: cube-face lattices projected radially.

    The radial projection is 1-Lipschitz outside the unit ball and every face
    point has norm at least 1, so face spacing delta gives sphere spacing
    delta.
    """
    h = 2.0 * delta / math.sqrt(n - 1)
    steps = max(1, math.ceil(2.0 / h))
    coords = [-1.0 + 2.0 * k / steps for k in range(steps + 1)]
    points: list[Vector] = []
    for axis in range(n):
        for sign in (1.0, -1.0):
            for combo in itertools.product(coords, repeat=n - 1):
                x = list(combo)
                x.insert(axis, sign)
                scale = math.hypot(*x)
                points.append(tuple(c / scale for c in x))
    return points


def certify_coverage(s: PushingScheme, grid_spacing: float) -> SchemeConstants:
    """Certify sphere coverage and derive the corridor constants.

    Rank 1 is handled exactly over the two unit characters; higher rank takes
    the minimum over a grid_spacing-net and subtracts the certified Lipschitz
    slack.
    """
    if not isinstance(grid_spacing, (int, float)) or grid_spacing <= 0:
        raise ValidationError("grid spacing must be positive")
    s.verify()
    p, m = s.presentation, s.amap
    if not p.relators:
        raise CertificationError("presentation has no relators to certify against")
    n = m.rank

    relator_prefixes = [tuple(prefix_labels(m, r, m.zero)) for r in p.relators]

    b = 0.0
    cap_A = 0.0
    for e in s.entries:
        for i in range(len(p.relators)):
            cap_A = max(cap_A, float(len(p.relators[i]) + e.fillings[i].area))
            prefixes = relator_prefixes[i]
            for lbl in e.fillings[i].labels.values():
                for pref in prefixes:
                    b = max(b, norm(vec_sub(lbl, pref)))
    rotation_reach = max(
        norm(vec_sub(q2, q1))
        for prefixes in relator_prefixes
        for q1 in prefixes
        for q2 in prefixes
    )
    lip_bound = 2.0 * max(b, rotation_reach)

    def best_gap(direction: Vector) -> float:
        u = Character.from_vector(direction)
        return max(gap(u, e) for e in s.entries)

    if n == 1:
        a = min(best_gap((1.0,)), best_gap((-1.0,)))
        spacing: float | None = None
    else:
        a = min(best_gap(x) for x in _sphere_grid(n, grid_spacing)) - lip_bound * grid_spacing
        spacing = grid_spacing
    if not (math.isfinite(a) and a > 0.0):
        raise CertificationError("coverage not certified; refine grid or fix scheme")
    q_min = max(b * b / a, a)
    cap_B = p.max_relator_length
    return SchemeConstants(
        a=a,
        b=b,
        A=cap_A,
        B=cap_B,
        q_min=q_min,
        lipschitz=m.lipschitz,
        grid_spacing=spacing,
        lipschitz_bound=lip_bound,
    )
