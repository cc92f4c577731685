import itertools

import pytest

from urysohn_forge.globalization import Alphabet, QuotientAction
from urysohn_forge.spaces import (
    DistanceValueSet,
    build_space,
    canonical_form,
    path_space,
)


@pytest.fixture
def two_point():
    return build_space(("a", "b"), [[0, 1], [1, 0]], name="two")


@pytest.fixture
def triangle():
    return build_space(("a", "b", "c"), [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
                       name="triangle")


@pytest.fixture
def p3():
    return build_space(("a", "b", "c"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]],
                       name="p3")


@pytest.fixture
def p4():
    return path_space(4)


def dihedral_action(space, alphabet, n):
    """Letters of a path metric realized as rotations/reflections of Z_n.

    Every partial isometry of a subset of the integers is x -> x + c or
    x -> c - x; both lift to the dihedral action on the n-cycle.
    """
    gens = {}
    for i, p in enumerate(alphabet.letters):
        dom, img = p.domain, p.image
        shifts = {b - a for a, b in zip(dom, img)}
        if len(shifts) == 1:
            c = next(iter(shifts))
            gens[i] = tuple((x + c) % n for x in range(n))
        else:
            sums = {a + b for a, b in zip(dom, img)}
            assert len(sums) == 1
            c = next(iter(sums))
            gens[i] = tuple((c - x) % n for x in range(n))
    return QuotientAction(space, alphabet, 0, n, gens)


@pytest.fixture
def p4_z7_fixture(p4):
    alphabet = Alphabet(p4)
    return p4, alphabet, dihedral_action(p4, alphabet, 7)


def spaces_up_to_iso(max_points, values):
    """All spaces with <= max_points points and off-diagonal distances drawn
    from `values`, up to isomorphism (canonical-form dedup)."""
    out = []
    seen = set()
    vs = DistanceValueSet("finite", values=tuple([0, *values]))
    for n in range(1, max_points + 1):
        pairs = [(i, j) for i in range(n) for j in range(i)]
        for combo in itertools.product(values, repeat=len(pairs)):
            matrix = [[0] * n for _ in range(n)]
            for (i, j), v in zip(pairs, combo):
                matrix[i][j] = matrix[j][i] = v
            ok = all(matrix[b][c] <= matrix[b][a] + matrix[a][c]
                     for a, b, c in itertools.permutations(range(n), 3))
            if not ok:
                continue
            space = build_space([str(i) for i in range(n)], matrix,
                                value_set=vs, name=f"s{n}")
            key = canonical_form(space)
            if key not in seen:
                seen.add(key)
                out.append(space)
    return out
