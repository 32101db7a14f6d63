"""Van Kampen diagrams as rotation-system sphere maps.

A diagram stores darts (oriented half-edges), a twin involution, and a
counterclockwise rotation order of out-darts at every vertex.  Faces are the
orbits of phi(d) = sigma^-1(twin(d)) and are read with their interior on the
left; one face is the boundary face, every other face must spell a cyclic
variant of a relator.  The boundary walk of the diagram is the reversed twin
sequence of the boundary face orbit, and starts at the base vertex, which by
convention is the origin of ``boundary_face_dart``.

Vertex labels in Z^n are breadth-first propagated from the base label and
must be consistent along every edge.  ``Diagram.build`` is the single
validating constructor; every surgery here rebuilds through it.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from vkpush.abelianization import AbelianizationMap, Character, Vector, norm, vec_add
from vkpush.presentation import (
    Presentation,
    ValidationError,
    Word,
    letter_token,
    parse_letter,
    word_to_text,
)


class FoldCollision(ValidationError):
    """An identification tried to merge two distinct pre-existing edges."""

    def __init__(self, message: str, darts: tuple[int, int]):
        super().__init__(message)
        self.darts = darts


class Diagram:
    """Validated, effectively immutable sphere map with labelled vertices."""

    def __init__(self, **kw):
        # Use Diagram.build; this just stores what build validated.
        self.presentation: Presentation = kw["presentation"]
        self.amap: AbelianizationMap = kw["amap"]
        self.origin: dict[int, int] = kw["origin"]
        self.letter: dict[int, int] = kw["letter"]
        self.twin: dict[int, int] = kw["twin"]
        self.rotations: dict[int, tuple[int, ...]] = kw["rotations"]
        self.base: int = kw["base"]
        self.base_label: Vector = kw["base_label"]
        self.boundary_face_dart: int | None = kw["boundary_face_dart"]
        self.faces: tuple[tuple[int, ...], ...] = kw["faces"]
        self.boundary_face_index: int = kw["boundary_face_index"]
        self.labels: dict[int, Vector] = kw["labels"]
        self._face_of: dict[int, int] = kw["face_of"]
        self._walk: tuple[int, ...] = kw["walk"]

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        presentation: Presentation,
        amap: AbelianizationMap,
        *,
        origin: Mapping[int, int],
        letter: Mapping[int, int],
        twin: Mapping[int, int],
        rotations: Mapping[int, Sequence[int]],
        base: int,
        base_label: Sequence[int],
        boundary_face_dart: int | None,
    ) -> "Diagram":
        if len(amap.columns) != len(presentation.generators):
            raise ValidationError("abelianization map does not match the presentation")
        base_label = tuple(base_label)
        if len(base_label) != amap.rank or not all(isinstance(c, int) for c in base_label):
            raise ValidationError(f"base label {base_label!r} is not an integer vector of rank {amap.rank}")

        darts = set(origin)
        if set(letter) != darts or set(twin) != darts:
            raise ValidationError("origin, letter and twin must cover the same darts")
        for d in darts:
            if not isinstance(d, int) or d <= 0:
                raise ValidationError(f"dart id {d!r} must be a positive integer")
        k = len(presentation.generators)
        for d in darts:
            t = twin[d]
            if t not in darts or t == d or twin[t] != d:
                raise ValidationError(f"twin map is not a fixed-point-free involution at dart {d}")
            x = letter[d]
            if not isinstance(x, int) or x == 0 or abs(x) > k:
                raise ValidationError(f"dart {d} carries letter {x!r} outside the alphabet")
            if letter[t] != -x:
                raise ValidationError(f"darts {d} and {t} are twins but not inversely labelled")

        if base not in rotations:
            raise ValidationError(f"base vertex {base} is not a vertex of the diagram")
        seen: dict[int, int] = {}
        for v, rot in rotations.items():
            for d in rot:
                if d not in darts:
                    raise ValidationError(f"rotation of vertex {v} lists unknown dart {d}")
                if d in seen:
                    raise ValidationError(f"dart {d} appears in two rotations")
                seen[d] = v
                if origin[d] != v:
                    raise ValidationError(f"dart {d} has origin {origin[d]} but sits in the rotation of {v}")
        if len(seen) != len(darts):
            missing = next(iter(darts - set(seen)))
            raise ValidationError(f"dart {missing} appears in no rotation")

        if not darts:
            if boundary_face_dart is not None:
                raise ValidationError("a diagram without darts cannot name a boundary face dart")
            if set(rotations) != {base}:
                raise ValidationError("a diagram without darts must consist of the base vertex alone")
            return cls(
                presentation=presentation,
                amap=amap,
                origin={},
                letter={},
                twin={},
                rotations={base: ()},
                base=base,
                base_label=base_label,
                boundary_face_dart=None,
                faces=((),),
                boundary_face_index=0,
                labels={base: base_label},
                face_of={},
                walk=(),
            )

        if boundary_face_dart is None or boundary_face_dart not in darts:
            raise ValidationError("boundary_face_dart must name an existing dart")

        # phi(d) = sigma^-1(twin(d)): the face continuation with interior on the left
        rot_lists = {v: tuple(rot) for v, rot in rotations.items()}
        pos = {d: i for v, rot in rot_lists.items() for i, d in enumerate(rot)}

        def phi(d: int) -> int:
            t = twin[d]
            rot = rot_lists[origin[t]]
            return rot[(pos[t] - 1) % len(rot)]

        face_of: dict[int, int] = {}
        faces: list[tuple[int, ...]] = []
        for d0 in sorted(darts):
            if d0 in face_of:
                continue
            orbit = [d0]
            face_of[d0] = len(faces)
            d = phi(d0)
            while d != d0:
                if d in face_of:
                    raise ValidationError("rotation system does not define a permutation of faces")
                face_of[d] = len(faces)
                orbit.append(d)
                d = phi(d)
            faces.append(tuple(orbit))

        bindex = face_of[boundary_face_dart]
        orbit = faces[bindex]
        shift = orbit.index(boundary_face_dart)
        faces[bindex] = orbit[shift:] + orbit[:shift]

        nv, ne, nf = len(rotations), len(darts) // 2, len(faces)
        if nv - ne + nf != 2:
            raise ValidationError(f"Euler count V-E+F = {nv}-{ne}+{nf} != 2; not a sphere map")

        if origin[boundary_face_dart] != base:
            raise ValidationError("the boundary face dart must start at the base vertex")

        # connectivity over the 1-skeleton
        reached = {base}
        queue = deque([base])
        neighbours: dict[int, list[int]] = {v: [] for v in rotations}
        for d in darts:
            neighbours[origin[d]].append(origin[twin[d]])
        while queue:
            v = queue.popleft()
            for w in neighbours[v]:
                if w not in reached:
                    reached.add(w)
                    queue.append(w)
        if len(reached) != len(rotations):
            raise ValidationError("diagram is not connected")

        variant_set = presentation.variant_set
        for i, face in enumerate(faces):
            if i == bindex:
                continue
            w = tuple(letter[d] for d in face)
            if w not in variant_set:
                raise ValidationError(
                    f"interior face {word_to_text(w, presentation)!r} is not a relator variant"
                )

        labels: dict[int, Vector] = {base: base_label}
        queue = deque([base])
        out_darts = rot_lists
        while queue:
            v = queue.popleft()
            lv = labels[v]
            for d in out_darts[v]:
                w = origin[twin[d]]
                lw = vec_add(lv, amap.column(letter[d]))
                if w in labels:
                    if labels[w] != lw:
                        raise ValidationError(f"inconsistent labels at vertex {w}")
                else:
                    labels[w] = lw
                    queue.append(w)
        # connected, so every vertex got a label; recheck all edges once
        for d in darts:
            if labels[origin[twin[d]]] != vec_add(labels[origin[d]], amap.column(letter[d])):
                raise ValidationError(f"edge {d} violates label consistency")

        walk = tuple(twin[d] for d in reversed(faces[bindex]))
        return cls(
            presentation=presentation,
            amap=amap,
            origin=dict(origin),
            letter=dict(letter),
            twin=dict(twin),
            rotations=rot_lists,
            base=base,
            base_label=base_label,
            boundary_face_dart=boundary_face_dart,
            faces=tuple(faces),
            boundary_face_index=bindex,
            labels=labels,
            face_of=face_of,
            walk=walk,
        )

    # -- basic queries -----------------------------------------------------

    def head(self, d: int) -> int:
        return self.origin[self.twin[d]]

    def face_of(self, d: int) -> int:
        return self._face_of[d]

    def face_word(self, index: int) -> Word:
        return tuple(self.letter[d] for d in self.faces[index])

    @property
    def area(self) -> int:
        return len(self.faces) - 1

    @property
    def boundary_walk(self) -> tuple[int, ...]:
        return self._walk

    @property
    def boundary_word(self) -> Word:
        return tuple(self.letter[d] for d in self._walk)

    @property
    def boundary_vertices(self) -> frozenset[int]:
        if not self._walk:
            return frozenset({self.base})
        return frozenset(self.origin[d] for d in self._walk)

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted(self.rotations))

    def degree(self, v: int) -> int:
        return len(self.rotations[v])

    def is_interior(self, v: int) -> bool:
        return v not in self.boundary_vertices

    def max_norm_vertex(self) -> int:
        """Deterministic argmax of the label norm.

        Ties break toward the lexicographically smallest label, then the
        smallest vertex id; the comparison uses exact squared integers.
        """
        return min(
            self.vertices,
            key=lambda v: (-sum(c * c for c in self.labels[v]), self.labels[v], v),
        )

    def metrics(self, u: Character | None = None) -> dict:
        boundary = self.boundary_vertices
        dist = {v: 0 for v in boundary}
        queue = deque(boundary)
        while queue:
            v = queue.popleft()
            for d in self.rotations[v]:
                w = self.head(d)
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        out = {
            "area": self.area,
            "radius": max(dist.values(), default=0),
            "norm": max(norm(lbl) for lbl in self.labels.values()),
        }
        if u is not None:
            out["valuation"] = min(u.value(lbl) for lbl in self.labels.values())
        return out

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "base": self.base,
            "base_label": list(self.base_label),
            "darts": [
                {
                    "id": d,
                    "origin": self.origin[d],
                    "letter": letter_token(self.letter[d], self.presentation),
                    "twin": self.twin[d],
                }
                for d in sorted(self.origin)
            ],
            "rotations": {str(v): list(rot) for v, rot in sorted(self.rotations.items())},
            "boundary_face_dart": self.boundary_face_dart,
        }

    @classmethod
    def from_json_dict(cls, obj: object, p: Presentation, m: AbelianizationMap) -> "Diagram":
        if not isinstance(obj, dict):
            raise ValidationError("diagram JSON must be an object")
        for key in ("base", "base_label", "darts", "rotations"):
            if key not in obj:
                raise ValidationError(f"diagram JSON lacks {key!r}")
        if not isinstance(obj["darts"], list):
            raise ValidationError("'darts' must be a list")
        origin: dict[int, int] = {}
        letter: dict[int, int] = {}
        twin: dict[int, int] = {}
        for entry in obj["darts"]:
            if not isinstance(entry, dict) or not {"id", "origin", "letter", "twin"} <= set(entry):
                raise ValidationError(f"malformed dart entry {entry!r}")
            d = entry["id"]
            if not isinstance(d, int) or d in origin:
                raise ValidationError(f"bad or duplicate dart id {d!r}")
            origin[d] = entry["origin"]
            letter[d] = parse_letter(entry["letter"], p)
            twin[d] = entry["twin"]
        rot_obj = obj["rotations"]
        if not isinstance(rot_obj, dict):
            raise ValidationError("'rotations' must be an object")
        rotations: dict[int, tuple[int, ...]] = {}
        for key, rot in rot_obj.items():
            try:
                v = int(key)
            except ValueError:
                raise ValidationError(f"vertex key {key!r} is not an integer") from None
            if not isinstance(rot, list):
                raise ValidationError(f"rotation of vertex {key} must be a list")
            rotations[v] = tuple(rot)
        if not isinstance(obj["base_label"], list):
            raise ValidationError("'base_label' must be a list")
        return cls.build(
            p,
            m,
            origin=origin,
            letter=letter,
            twin=twin,
            rotations=rotations,
            base=obj["base"],
            base_label=tuple(obj["base_label"]),
            boundary_face_dart=obj.get("boundary_face_dart"),
        )


class DiagramBuilder:
    """Scratchpad for assembling diagrams from cells plus a boundary walk.

    Darts come in twin pairs.  ``alias`` declares two darts to be the same
    oriented edge (union-find, twin-synchronized).  ``build`` resolves all
    classes, derives rotations from the face system, and funnels everything
    through ``Diagram.build``.
    """

    def __init__(self, p: Presentation, m: AbelianizationMap):
        self.p = p
        self.m = m
        self.letter: dict[int, int] = {}
        self.twin: dict[int, int] = {}
        self.cells: list[list[int]] = []
        self._parent: dict[int, int] = {}
        self._hostclass: dict[int, bool] = {}
        self._next = 1

    # -- dart bookkeeping ---------------------------------------------------

    def _register(self, d: int, letter: int, twin: int, host: bool) -> None:
        self.letter[d] = letter
        self.twin[d] = twin
        self._parent[d] = d
        self._hostclass[d] = host

    def adopt(self, d: Diagram) -> None:
        """Copy a diagram's darts under their own ids, marking them as host."""
        clash = set(d.origin) & set(self.letter)
        if clash:
            raise ValidationError(f"cannot adopt: dart ids {sorted(clash)[:4]} already in use")
        for dart in d.origin:
            self._register(dart, d.letter[dart], d.twin[dart], host=True)
        if d.origin:
            self._next = max(self._next, max(d.origin) + 1)

    def import_shifted(self, d: Diagram) -> dict[int, int]:
        """Copy a diagram's darts under fresh ids; returns old id -> new id."""
        ids = sorted(d.origin)
        mapping = {old: self._next + i for i, old in enumerate(ids)}
        self._next += len(ids)
        for old, new in mapping.items():
            self._register(new, d.letter[old], mapping[d.twin[old]], host=False)
        return mapping

    def new_edge(self, letter: int) -> tuple[int, int]:
        d, t = self._next, self._next + 1
        self._next += 2
        self._register(d, letter, t, host=False)
        self._register(t, -letter, d, host=False)
        return d, t

    def path(self, word: Word) -> list[int]:
        return [self.new_edge(x)[0] for x in word]

    def add_cell(self, darts: Sequence[int]) -> None:
        if not darts:
            raise ValidationError("cells must have at least one side")
        self.cells.append(list(darts))

    # -- union-find ----------------------------------------------------------

    def rep(self, d: int) -> int:
        root = d
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[d] != root:
            self._parent[d], d = root, self._parent[d]
        return root

    def alias(self, a: int, b: int, allow_fold: bool = False) -> None:
        ra, rb = self.rep(a), self.rep(b)
        if ra == rb:
            return
        if self.rep(self.twin[ra]) == rb:
            raise ValidationError(f"cannot identify dart {a} with its own twin")
        if self.letter[ra] != self.letter[rb]:
            raise ValidationError(
                f"cannot identify darts with different letters ({self.letter[ra]} vs {self.letter[rb]})"
            )
        if not allow_fold and self._hostclass[ra] and self._hostclass[rb]:
            raise FoldCollision(
                f"identification would fold existing edges {a} and {b} together",
                (a, b),
            )
        ta, tb = self.rep(self.twin[ra]), self.rep(self.twin[rb])
        self._parent[rb] = ra
        self._hostclass[ra] = self._hostclass[ra] or self._hostclass[rb]
        if ta != tb:
            self._parent[tb] = ta
            self._hostclass[ta] = self._hostclass[ta] or self._hostclass[tb]

    # -- assembly -------------------------------------------------------------

    def build(
        self,
        walk: Sequence[int],
        base_label: Sequence[int],
        *,
        vertex_hints: Mapping[int, int] | None = None,
        allow_bubbles: bool = False,
        merge_hints: bool = False,
    ) -> Diagram:
        resolved_cells = [[self.rep(d) for d in cell] for cell in self.cells]
        resolved_walk = [self.rep(d) for d in walk]
        twin_rep = lambda d: self.rep(self.twin[self.rep(d)])

        orbit = [twin_rep(w) for w in reversed(resolved_walk)]
        faces: list[list[int]] = resolved_cells + ([orbit] if orbit else [])

        usage = Counter(d for face in faces for d in face)
        for d, count in usage.items():
            if count > 1:
                raise ValidationError(f"dart {d} is used {count} times across faces")

        # reachability from the boundary via twin and face succession
        succ: dict[int, int] = {}
        for face in faces:
            for i, d in enumerate(face):
                succ[d] = face[(i + 1) % len(face)]
        for d in succ:
            if twin_rep(d) not in succ:
                raise ValidationError(f"dart {d} has a twin outside every face")

        alive: set[int] = set()
        queue = deque(orbit)
        while queue:
            d = queue.popleft()
            if d in alive:
                continue
            alive.add(d)
            queue.append(succ[d])
            queue.append(twin_rep(d))
        dropped = [face for face in faces if face and face[0] not in alive]
        if dropped:
            if not allow_bubbles:
                raise ValidationError("construction left a detached sphere component")
            faces = [face for face in faces if face and face[0] in alive]

        if not alive:
            base = 0
            return Diagram.build(
                self.p,
                self.m,
                origin={},
                letter={},
                twin={},
                rotations={base: ()},
                base=base,
                base_label=tuple(base_label),
                boundary_face_dart=None,
            )

        # sigma(e) = twin(face predecessor of e); cycles are the vertices
        sigma: dict[int, int] = {}
        for face in faces:
            for i, d in enumerate(face):
                sigma[d] = twin_rep(face[i - 1])

        # hints speak about original dart ids; fold them onto class reps
        hints: dict[int, set[int]] = {}
        for dart, vid in (vertex_hints or {}).items():
            if dart in self._parent:
                hints.setdefault(self.rep(dart), set()).add(vid)

        cycle_of: dict[int, int] = {}
        cycles: list[list[int]] = []
        for d0 in sorted(alive):
            if d0 in cycle_of:
                continue
            cyc = [d0]
            cycle_of[d0] = len(cycles)
            d = sigma[d0]
            while d != d0:
                cycle_of[d] = len(cycles)
                cyc.append(d)
                d = sigma[d]
            cycles.append(cyc)

        hint_max = max((max(s) for s in hints.values()), default=-1)
        fresh = max(hint_max + 1, 0)
        vertex_id: list[int] = []
        used: set[int] = set()
        for cyc in cycles:
            wanted = sorted(set().union(*(hints.get(d, set()) for d in cyc)) or set())
            if len(wanted) > 1 and not merge_hints:
                raise ValidationError(f"vertex hints {wanted} collide on one vertex")
            vid = None
            if len(wanted) == 1:
                if wanted[0] not in used:
                    vid = wanted[0]
                elif not merge_hints:
                    raise ValidationError(f"vertex id {wanted[0]} claimed by two distinct vertices")
            # a class carrying several hints is a fold product: a new vertex,
            # not any one of its constituents, so it never usurps their ids
            if vid is None:
                vid = fresh
                fresh += 1
            used.add(vid)
            vertex_id.append(vid)

        rotations = {
            vertex_id[i]: tuple(cyc)
            for i, cyc in enumerate(cycles)
        }
        origin = {d: vertex_id[cycle_of[d]] for d in alive}
        letter = {d: self.letter[d] for d in alive}
        twin = {d: twin_rep(d) for d in alive}

        bfd = orbit[0]
        base = origin[bfd]
        return Diagram.build(
            self.p,
            self.m,
            origin=origin,
            letter=letter,
            twin=twin,
            rotations=rotations,
            base=base,
            base_label=tuple(base_label),
            boundary_face_dart=bfd,
        )


# -- orientation and base moves -------------------------------------------


def mirror(d: Diagram) -> Diagram:
    """Reverse the orientation; the boundary word becomes its inverse."""
    if not d.origin:
        return d
    orbit = d.faces[d.boundary_face_index]
    return Diagram.build(
        d.presentation,
        d.amap,
        origin=d.origin,
        letter=d.letter,
        twin=d.twin,
        rotations={v: tuple(reversed(rot)) for v, rot in d.rotations.items()},
        base=d.base,
        base_label=d.base_label,
        boundary_face_dart=d.twin[orbit[-1]],
    )


def rebase_on_boundary(d: Diagram, position: int, base_label: Sequence[int] | None = None) -> Diagram:
    """Move the base to the boundary-walk vertex at ``position``.

    Labels shift so the new base carries ``base_label`` (default: its current
    label, leaving all labels unchanged).
    """
    walk = d.boundary_walk
    if not walk:
        if position != 0:
            raise ValidationError("the trivial diagram has only boundary position 0")
        label = d.base_label if base_label is None else tuple(base_label)
        return Diagram.build(
            d.presentation,
            d.amap,
            origin={},
            letter={},
            twin={},
            rotations={d.base: ()},
            base=d.base,
            base_label=label,
            boundary_face_dart=None,
        )
    position %= len(walk)
    new_base = d.origin[walk[position]]
    new_bfd = d.boundary_face_dart if position == 0 else d.twin[walk[position - 1]]
    label = d.labels[new_base] if base_label is None else tuple(base_label)
    return Diagram.build(
        d.presentation,
        d.amap,
        origin=d.origin,
        letter=d.letter,
        twin=d.twin,
        rotations=d.rotations,
        base=new_base,
        base_label=label,
        boundary_face_dart=new_bfd,
    )


# -- vertex stars ------------------------------------------------------------


@dataclass(frozen=True)
class Corner:
    """One cell around the star center, between consecutive spokes."""

    face_index: int
    out_dart: int
    in_dart: int
    arc: tuple[int, ...]
    word: Word


@dataclass(frozen=True)
class StarView:
    center: int
    darts: tuple[int, ...]
    corners: tuple[Corner, ...]
    link_darts: tuple[int, ...]
    link_word: Word
    degree: int


def vertex_star(d: Diagram, v: int) -> StarView:
    """The closed star of an interior vertex with a regular neighbourhood.

    Errors if v lies on the boundary, carries a loop edge, or if some corner
    face visits v more than once.
    """
    if v not in d.rotations:
        raise ValidationError(f"no vertex {v} in the diagram")
    if v in d.boundary_vertices:
        raise ValidationError(f"vertex {v} lies on the boundary")
    spokes = d.rotations[v]
    for s in spokes:
        if d.head(s) == v:
            raise ValidationError(f"vertex {v} carries a loop edge; star is not regular")
    k = len(spokes)
    corners = []
    seen_faces = set()
    for i in range(k):
        out = spokes[i]
        inc = d.twin[spokes[(i + 1) % k]]
        # the face orbit entering along inc continues with out, so both sit
        # in the same face with inc as the face-predecessor of out
        fi = d.face_of(out)
        if fi in seen_faces:
            raise ValidationError(f"face {fi} has a repeated corner at vertex {v}")
        seen_faces.add(fi)
        face = d.faces[fi]
        shift = face.index(out)
        rotated = face[shift:] + face[:shift]
        corners.append(
            Corner(
                face_index=fi,
                out_dart=out,
                in_dart=inc,
                arc=rotated[1:-1],
                word=tuple(d.letter[x] for x in rotated),
            )
        )
    link: list[int] = []
    for corner in corners:
        link.extend(corner.arc)
    if not link:
        raise ValidationError(f"the link of vertex {v} has no edges")
    return StarView(
        center=v,
        darts=tuple(spokes),
        corners=tuple(corners),
        link_darts=tuple(link),
        link_word=tuple(d.letter[x] for x in link),
        degree=k,
    )


def star_diagram(d: Diagram, v: int) -> Diagram:
    """The closed star of v as a standalone diagram with the link as boundary."""
    star = vertex_star(d, v)
    bld = DiagramBuilder(d.presentation, d.amap)
    spoke_copy = {s: bld.new_edge(d.letter[s])[0] for s in star.darts}
    walk: list[int] = []
    for corner in star.corners:
        arc_copy = [bld.new_edge(d.letter[a])[0] for a in corner.arc]
        cell = [spoke_copy[corner.out_dart]]
        cell.extend(arc_copy)
        cell.append(bld.twin[spoke_copy[d.twin[corner.in_dart]]])
        bld.add_cell(cell)
        walk.extend(arc_copy)
    start = d.head(star.darts[0])
    return bld.build(walk, d.labels[start])


def splice(d: Diagram, v: int, replacement: Diagram) -> Diagram:
    """Replace the closed star of v by another diagram glued along the link."""
    star = vertex_star(d, v)
    if replacement.boundary_word != star.link_word:
        raise ValidationError(
            "replacement boundary "
            f"{word_to_text(replacement.boundary_word, d.presentation)!r} does not match the link "
            f"{word_to_text(star.link_word, d.presentation)!r}"
        )
    link_start = d.head(star.darts[0])
    if replacement.labels[replacement.base] != d.labels[link_start]:
        raise ValidationError("replacement base label does not match the link base label")
    removed = {corner.face_index for corner in star.corners}
    bld = DiagramBuilder(d.presentation, d.amap)
    bld.adopt(d)
    for i, face in enumerate(d.faces):
        if i != d.boundary_face_index and i not in removed:
            bld.add_cell(face)
    mapping = bld.import_shifted(replacement)
    for i, face in enumerate(replacement.faces):
        if i != replacement.boundary_face_index:
            bld.add_cell([mapping[x] for x in face])
    # allow_fold: a replacement whose boundary walk is pinched (one edge used
    # twice) legitimately folds the two host edges it glues onto; merge_hints
    # accepts the induced merge of same-label link vertices.  The full sphere,
    # relator and label validation in build still applies afterwards.
    for rep_dart, link_dart in zip(replacement.boundary_walk, star.link_darts):
        bld.alias(mapping[rep_dart], link_dart, allow_fold=True)
    return bld.build(
        d.boundary_walk, d.base_label, vertex_hints=dict(d.origin), merge_hints=True
    )


# -- boundary rewriting ------------------------------------------------------


def expand_boundary(d: Diagram, target: Word) -> Diagram:
    """Attach spur trees so the boundary word becomes exactly ``target``.

    The target must freely reduce to the current boundary word.
    """
    match: dict[int, int] = {}
    stack: list[int] = []
    for i, x in enumerate(target):
        if stack and target[stack[-1]] == -x:
            j = stack.pop()
            match[j] = i
            match[i] = j
        else:
            stack.append(i)
    residual = tuple(target[i] for i in sorted(set(range(len(target))) - set(match)))
    if residual != d.boundary_word:
        raise ValidationError(
            f"target {word_to_text(target, d.presentation)!r} does not reduce to the boundary word"
        )
    bld = DiagramBuilder(d.presentation, d.amap)
    bld.adopt(d)
    for i, face in enumerate(d.faces):
        if i != d.boundary_face_index:
            bld.add_cell(face)
    old_walk = iter(d.boundary_walk)
    opened: dict[int, int] = {}
    walk: list[int] = []
    for i, x in enumerate(target):
        if i not in match:
            walk.append(next(old_walk))
        elif match[i] > i:
            dart = bld.new_edge(x)[0]
            opened[i] = dart
            walk.append(dart)
        else:
            walk.append(bld.twin[opened[match[i]]])
    return bld.build(walk, d.base_label, vertex_hints=dict(d.origin))


# -- mirror-pair reduction -----------------------------------------------


def _mirror_candidate(d: Diagram, e: int) -> tuple[int, int] | None:
    """Return (face1, face2) if the edge at dart e separates a mirror pair."""
    t = d.twin[e]
    f1, f2 = d.face_of(e), d.face_of(t)
    if f1 == f2 or d.boundary_face_index in (f1, f2):
        return None
    face1, face2 = d.faces[f1], d.faces[f2]
    if len(face1) != len(face2):
        return None
    n = len(face1)
    s1 = face1.index(e)
    w1 = [d.letter[face1[(s1 + i) % n]] for i in range(n)]
    s2 = face2.index(t)
    w2 = [d.letter[face2[(s2 + i) % n]] for i in range(n)]
    if any(w2[j] != -w1[(n - j) % n] for j in range(n)):
        return None
    shared = sum(1 for x in face1 if d.twin[x] in set(face2))
    if shared != 1:
        return None
    return f1, f2


def _cancel_pair(d: Diagram, e: int, f1: int, f2: int) -> Diagram:
    t = d.twin[e]
    face1, face2 = d.faces[f1], d.faces[f2]
    n = len(face1)
    s1, s2 = face1.index(e), face2.index(t)
    flank1 = [face1[(s1 + i) % n] for i in range(1, n)]
    flank2 = [face2[(s2 + i) % n] for i in range(1, n)]
    bld = DiagramBuilder(d.presentation, d.amap)
    bld.adopt(d)
    for i, face in enumerate(d.faces):
        if i not in (f1, f2, d.boundary_face_index):
            bld.add_cell(face)
    for j in range(1, n):
        bld.alias(flank1[j - 1], d.twin[flank2[n - j - 1]], allow_fold=True)
    return bld.build(
        d.boundary_walk,
        d.base_label,
        vertex_hints=dict(d.origin),
        merge_hints=True,
    )


def reduce_mirror_pairs(d: Diagram) -> Diagram:
    """Cancel adjacent mirror-image cell pairs until none remain.

    The boundary word is preserved letter for letter; only interior area
    drops.  Scanning is deterministic (lowest dart id first, restart after
    every cancellation).  Pairings whose cancellation would pinch the
    surface are skipped.
    """
    while True:
        for e in sorted(d.origin):
            if e > d.twin[e]:
                continue
            cand = _mirror_candidate(d, e)
            if cand is None:
                continue
            try:
                d = _cancel_pair(d, e, *cand)
            except ValidationError:
                continue
            break
        else:
            return d


# -- isomorphism signatures ---------------------------------------------


def canonical_signature(d: Diagram) -> tuple:
    """A traversal signature equal exactly for isomorphic based maps.

    Darts are renumbered by a breadth-first sweep anchored at the boundary
    face dart, so the signature is independent of concrete dart and vertex
    ids.
    """
    if not d.origin:
        return ("trivial", d.base_label)
    dart_index: dict[int, int] = {}
    visit: list[tuple[int, ...]] = []
    queue = deque([(d.base, d.boundary_face_dart)])
    seen = {d.base}
    while queue:
        v, anchor = queue.popleft()
        rot = d.rotations[v]
        shift = rot.index(anchor)
        ordered = rot[shift:] + rot[:shift]
        visit.append(ordered)
        for dart in ordered:
            dart_index[dart] = len(dart_index)
        for dart in ordered:
            h = d.head(dart)
            if h not in seen:
                seen.add(h)
                queue.append((h, d.twin[dart]))
    body = tuple(
        tuple((dart_index[d.twin[x]], d.letter[x]) for x in ordered)
        for ordered in visit
    )
    return (d.base_label, body)
