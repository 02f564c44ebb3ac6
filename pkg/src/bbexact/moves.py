"""Markov basis moves for the first-order model on Box-Behnken designs.

The basis is the explicit quadratic (plus optional cubic) binomial family for
the centrally symmetric configuration of the root system D_n. Each binomial
``u - v`` over the variables ``x_ij^{pq}`` and ``z`` is turned into the integer
move ``exponent(u) - exponent(v)`` through the bijection variable <-> design run.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np

from bbexact.design import Design, build_design, model_matrix

CLASSES = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii")
QUADRATIC_CLASSES = CLASSES[:7]
PM = (1, -1)


@dataclass(frozen=True, order=True)
class VariableIndex:
    """A ring variable: ``z`` (the origin run) or ``x_ij^{pq}`` with ``i < j``."""

    kind: str
    i: int = 0
    j: int = 0
    p: int = 0
    q: int = 0

    @classmethod
    def pair(cls, i: int, j: int, p: int, q: int) -> "VariableIndex":
        if i == j:
            raise ValueError(f"x_{i}{j} has equal subscripts")
        if p not in PM or q not in PM:
            raise ValueError("signs must be +1 or -1")
        if i > j:
            # x_ij^{pq} is the same variable as x_ji^{qp}
            i, j, p, q = j, i, q, p
        return cls("pair", i, j, p, q)

    @classmethod
    def origin(cls) -> "VariableIndex":
        return cls("origin")

    def run(self, design: Design) -> int:
        if self.kind == "origin":
            return design.origin_index
        return design.pair_run(self.i, self.j, self.p, self.q)

    def __str__(self) -> str:
        if self.kind == "origin":
            return "z"
        s = {1: "+", -1: "-"}
        return f"x{self.i}{self.j}^{s[self.p]}{s[self.q]}"


def _x(i, j, p, q):
    return VariableIndex.pair(i, j, p, q)


Z = VariableIndex.origin()


@dataclass(frozen=True)
class Move:
    vector: tuple[int, ...]
    source_class: str
    source_binomial: tuple[tuple[VariableIndex, ...], tuple[VariableIndex, ...]]

    @property
    def degree(self) -> int:
        return sum(v for v in self.vector if v > 0)

    def support(self) -> tuple[tuple[int, int], ...]:
        """Nonzero ``(run, delta)`` pairs."""
        return tuple((r, v) for r, v in enumerate(self.vector) if v)

    def binomial_str(self) -> str:
        u, v = self.source_binomial
        return f"{''.join(map(str, u))} - {''.join(map(str, v))}"


@dataclass(frozen=True)
class MoveSet:
    moves: tuple[Move, ...]
    n: int
    includes_class_viii: bool = False

    def __len__(self) -> int:
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    @property
    def k(self) -> int:
        return 2 * self.n * (self.n - 1) + 1

    def as_array(self) -> np.ndarray:
        if not self.moves:
            return np.zeros((0, self.k), dtype=np.int64)
        return np.array([mv.vector for mv in self.moves], dtype=np.int64)

    def restrict(self, classes) -> "MoveSet":
        keep = set(classes)
        return MoveSet(
            tuple(mv for mv in self.moves if mv.source_class in keep),
            self.n,
            self.includes_class_viii and "viii" in keep,
        )


def _binomials(n: int, include_viii: bool):
    """Yield ``(class, first monomial, second monomial)`` for every template instance."""
    for i, j, k, l in combinations(range(1, n + 1), 4):
        for p, q, r, s in product(PM, repeat=4):
            yield "i", (_x(i, j, p, q), _x(k, l, r, s)), (_x(i, k, p, r), _x(j, l, q, s))
    for i, j, k, l in combinations(range(1, n + 1), 4):
        for p, q, r, s in product(PM, repeat=4):
            yield "ii", (_x(i, l, p, s), _x(j, k, q, r)), (_x(i, k, p, r), _x(j, l, q, s))
    for i, j, k in permutations(range(1, n + 1), 3):
        for p, q in product(PM, repeat=2):
            yield "iii", (_x(i, j, 1, p), _x(i, k, -1, q)), (_x(j, k, p, q), Z)
    for i, j in combinations(range(1, n + 1), 2):
        yield "iv", (_x(i, j, 1, 1), _x(i, j, -1, -1)), (Z, Z)
    for i, j in combinations(range(1, n + 1), 2):
        yield "v", (_x(i, j, 1, -1), _x(i, j, -1, 1)), (Z, Z)
    for i, j in permutations(range(2, n + 1), 2):
        for p in PM:
            yield "vi", (_x(i, j, p, 1), _x(i, j, p, -1)), (_x(1, i, 1, p), _x(1, i, -1, p))
    for j in range(2, n):
        for p in PM:
            yield "vii", (_x(1, j, p, 1), _x(1, j, p, -1)), (_x(1, n, p, 1), _x(1, n, p, -1))
    if include_viii:
        for i, j, k in permutations(range(2, n + 1), 3):
            for p, q, r in product(PM, repeat=3):
                yield (
                    "viii",
                    (_x(1, i, 1, p), _x(1, i, -1, p), _x(j, k, q, r)),
                    (_x(i, j, p, q), _x(i, k, p, r), Z),
                )


def binomial_to_vector(first, second, design: Design) -> tuple[int, ...]:
    b = [0] * design.k
    for var in first:
        b[var.run(design)] += 1
    for var in second:
        b[var.run(design)] -= 1
    return tuple(b)


def _sign_key(vec):
    first = next((v for v in vec if v), 0)
    return vec if first >= 0 else tuple(-v for v in vec)


def check_kernel(vectors, design: Design) -> np.ndarray:
    """Return the rows of ``vectors`` that are NOT in the kernel of ``M'``."""
    mt = model_matrix(design).transpose_view
    arr = np.asarray(vectors, dtype=np.int64).reshape(-1, design.k)
    bad = np.any(arr @ mt.T != 0, axis=1)
    return arr[bad]


def enumerate_basis(n: int, include_viii: bool = False) -> MoveSet:
    """Build the Markov basis of the n-factor first-order model.

    Classes (i)-(vii) already generate the toric ideal, so class (viii) is off
    by default. Moves identical up to sign are kept once (first occurrence).
    """
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise ValueError(f"need n >= 3, got {n!r}")
    n = int(n)
    design = build_design(n)
    seen = set()
    moves = []
    for cls, first, second in _binomials(n, include_viii):
        vec = binomial_to_vector(first, second, design)
        if not any(vec):
            continue
        key = _sign_key(vec)
        if key in seen:
            continue
        seen.add(key)
        moves.append(Move(vec, cls, (first, second)))
    bad = check_kernel([mv.vector for mv in moves], design) if moves else []
    if len(bad):
        raise AssertionError(f"{len(bad)} generated moves fail M'b = 0; first: {bad[0].tolist()}")
    return MoveSet(tuple(moves), n, bool(include_viii))


def move_degree_histogram(ms: MoveSet) -> dict[str, int]:
    counts = Counter(mv.source_class for mv in ms.moves)
    return {c: counts[c] for c in CLASSES if counts[c]}


def export_moves(ms: MoveSet, fmt: str = "4ti2") -> str:
    """Serialize moves as 4ti2-style matrix text or as JSON."""
    if fmt in ("4ti2", "fourtitwo"):
        lines = [f"{len(ms.moves)} {ms.k}"]
        lines += [" ".join(str(v) for v in mv.vector) for mv in ms.moves]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([{"class": mv.source_class, "vector": list(mv.vector)} for mv in ms.moves])
    raise ValueError(f"unknown move format {fmt!r}")


def parse_4ti2(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(body)}")
    return np.array([int(t) for t in body], dtype=np.int64).reshape(rows, cols)


def parse_moves_json(text: str) -> list[tuple[str, tuple[int, ...]]]:
    return [(d["class"], tuple(int(v) for v in d["vector"])) for d in json.loads(text)]
