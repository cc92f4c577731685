import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urysohn_forge.spaces import (
    PartialIsometry,
    SpaceError,
    build_space,
    check_almost_transitive,
    compute_isometry_group,
    empirical_envelopes,
    enumerate_partial_isometries,
    extract_epsilon_net,
    finite_values,
    integer_values,
    isometry_group_brute_force,
    load_space,
    path_space,
    save_space,
    validate_space,
)

from conftest import spaces_up_to_iso


# ---------------------------------------------------------------------------
# validate_space
# ---------------------------------------------------------------------------

def test_validate_rejects_broken_triangle():
    report = validate_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]], 1,
                            integer_values(3))
    assert not report.ok
    assert any(v.kind == "triangle" and set(v.where) == {0, 1, 2}
               for v in report.violations)


def test_validate_p4_is_valid():
    p4 = path_space(4)
    assert p4.validate().ok


def test_validate_any_one_two_matrix():
    # 1 + 1 >= 2, so every zero-diagonal symmetric {1,2} matrix is a metric.
    for combo in itertools.product((1, 2), repeat=6):
        m = [[0] * 4 for _ in range(4)]
        for (i, j), v in zip([(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)],
                             combo):
            m[i][j] = m[j][i] = v
        assert validate_space(m, 1, finite_values(1, 2)).ok


def test_validate_reports_negative_and_asymmetry_without_crash():
    report = validate_space([[0, -1], [2, 0]], 1, integer_values())
    kinds = {v.kind for v in report.violations}
    assert "nonpositive" in kinds and "asymmetry" in kinds


def test_validate_rejects_non_square():
    with pytest.raises(SpaceError):
        validate_space([[0, 1], [1, 0], [1, 1]], 1, integer_values())


def _triple_scan_oracle(matrix):
    n = len(matrix)
    for b, a, c in itertools.permutations(range(n), 3):
        if matrix[b][c] > matrix[b][a] + matrix[a][c]:
            return False
    return True


@given(st.integers(3, 5), st.data())
@settings(max_examples=60, deadline=None)
def test_triangle_scan_matches_ordered_oracle(n, data):
    matrix = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i):
            v = data.draw(st.integers(1, 4))
            matrix[i][j] = matrix[j][i] = v
    report = validate_space(matrix, 1, integer_values(4))
    has_triangle_violation = any(v.kind == "triangle" for v in report.violations)
    assert has_triangle_violation == (not _triple_scan_oracle(matrix))


# ---------------------------------------------------------------------------
# Distance value sets
# ---------------------------------------------------------------------------

def test_value_set_membership_and_convexity():
    s = finite_values(1, 2)
    assert s.contains(1) and s.contains(2) and s.contains(0)
    assert not s.contains(3) and not s.contains(Fraction(1, 2))
    assert s.is_convex()
    assert not finite_values(1, 5).is_convex()    # 2 = 1+1 is in the semigroup
    assert finite_values(2).is_convex()           # semigroup 2N
    assert integer_values().is_convex()
    assert integer_values(3).contains(3) and not integer_values(3).contains(4)


def test_value_set_members_upto():
    assert finite_values(1, 2, 5).members_upto(3) == (Fraction(1), Fraction(2))
    assert integer_values().members_upto(3) == (1, 2, 3)


# ---------------------------------------------------------------------------
# Partial isometries
# ---------------------------------------------------------------------------

def brute_force_partial_isometries(space, max_domain):
    count = 0
    for size in range(1, max_domain + 1):
        for dom in itertools.combinations(range(space.size), size):
            for img in itertools.permutations(range(space.size), size):
                if all(space.d(dom[i], dom[j]) == space.d(img[i], img[j])
                       for i in range(size) for j in range(i)):
                    count += 1
    return count


def test_enumerate_two_point_space(two_point):
    maps = enumerate_partial_isometries(two_point, 2)
    assert len(maps) == 6  # 4 singletons, identity, swap


def test_enumerate_equilateral_triangle(triangle):
    # 9 singletons + 18 two-point maps (3 domains x 6 injections); the
    # brute-force oracle is the reference count.
    maps = enumerate_partial_isometries(triangle, 2)
    assert len(maps) == brute_force_partial_isometries(triangle, 2) == 27


def test_enumerate_p4_singletons(p4):
    assert len(enumerate_partial_isometries(p4, 1)) == 16


def test_enumerate_matches_oracle_on_small_spaces():
    for space in spaces_up_to_iso(3, (1, 2, 3)):
        got = enumerate_partial_isometries(space, space.size)
        assert len(got) == brute_force_partial_isometries(space, space.size)
        assert len(set(got)) == len(got)
        assert got == sorted(got, key=lambda p: (len(p.domain), p.domain, p.image))


def test_partial_isometry_compose_and_inverse(p4):
    shift = PartialIsometry((0, 1, 2), (1, 2, 3))
    sq = shift.compose(shift)
    assert sq.domain == (0, 1) and sq.image == (2, 3)
    inv = shift.inverse()
    assert inv.domain == (1, 2, 3) and inv.image == (0, 1, 2)


# ---------------------------------------------------------------------------
# Isometry groups
# ---------------------------------------------------------------------------

def test_isometry_group_p4(p4):
    assert compute_isometry_group(p4).order() == 2


def test_isometry_group_triangle(triangle):
    assert compute_isometry_group(triangle).order() == 6


def test_isometry_group_singleton():
    single = build_space(("a",), [[0]])
    assert compute_isometry_group(single).order() == 1


def test_isometry_group_matches_brute_force():
    for space in spaces_up_to_iso(4, (1, 2)):
        assert compute_isometry_group(space).elements() == \
            isometry_group_brute_force(space)


def test_full_domain_enumeration_contains_group(p4):
    letters = enumerate_partial_isometries(p4, p4.size)
    group = compute_isometry_group(p4)
    pts = tuple(p4.points())
    for g in group.elements():
        assert PartialIsometry(pts, g) in letters


# ---------------------------------------------------------------------------
# Epsilon nets
# ---------------------------------------------------------------------------

def test_net_on_integer_line_keeps_all_points():
    line = path_space(11)
    net, to_net, bound = extract_epsilon_net(line, 1)
    assert len(net) == 11 and bound == 0


def test_net_on_half_integer_points():
    space = build_space(("0", "h", "1"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]],
                        scale=2)
    net, to_net, bound = extract_epsilon_net(space, Fraction(3, 5))
    assert net == (0, 2)
    assert to_net[1] in (0, 2)
    assert bound == Fraction(1, 2)


def test_net_integer_part_style_displacement():
    # Integers inside a scale-1 fragment with eps = 1: displacement < 1,
    # mirroring the real-line / integer coarse equivalence.
    space = path_space(7)
    net, to_net, bound = extract_epsilon_net(space, 1)
    assert bound < 1


@given(st.integers(2, 6), st.integers(1, 3), st.data())
@settings(max_examples=40, deadline=None)
def test_net_is_separated_and_maximal(n, eps, data):
    matrix = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i):
            v = data.draw(st.integers(1, 4))
            matrix[i][j] = matrix[j][i] = v
    for k in range(n):
        for i in range(n):
            for j in range(n):
                matrix[i][j] = min(matrix[i][j], matrix[i][k] + matrix[k][j])
    try:
        space = build_space([str(i) for i in range(n)], matrix)
    except SpaceError:
        return
    net, to_net, bound = extract_epsilon_net(space, eps)
    for a in net:
        for b in net:
            assert a == b or space.d(a, b) >= eps
    for p in space.points():
        assert space.true_d(p, to_net[p]) <= eps
    assert bound <= eps


# ---------------------------------------------------------------------------
# Embedding envelopes
# ---------------------------------------------------------------------------

def test_envelopes_identity_line(p4):
    env = empirical_envelopes(p4, [(0,), (1,), (2,), (3,)], 2)
    assert [r for r, _, _ in env.samples] == [1, 2, 3]
    assert list(env.rho1) == [1.0, 2.0, 3.0]
    assert list(env.rho2) == [1.0, 2.0, 3.0]
    assert not env.degenerate


def test_envelopes_collapsed_embedding(p4):
    env = empirical_envelopes(p4, [(0,)] * 4, 2)
    assert env.degenerate
    assert all(lo == hi == 0 for _, lo, hi in env.samples)


def test_envelopes_two_point_scaling(two_point):
    env = empirical_envelopes(two_point, [(0,), (3,)], 2)
    assert env.samples == ((1, 3.0, 3.0),)


def test_envelopes_monotone_and_sandwich(p4):
    images = [(0, 0), (2, 1), (1, 5), (4, 4)]
    env = empirical_envelopes(p4, images, 2)
    assert list(env.rho1) == sorted(env.rho1)
    assert list(env.rho2) == sorted(env.rho2)
    for (r, lo, hi), r1, r2 in zip(env.samples, env.rho1, env.rho2):
        assert r1 <= lo <= hi <= r2


# ---------------------------------------------------------------------------
# Almost n-transitivity
# ---------------------------------------------------------------------------

def test_triangle_is_two_transitive(triangle):
    group = compute_isometry_group(triangle)
    ok, _ = check_almost_transitive(triangle, group, 2, Fraction(1, 10))
    assert ok


def test_p4_small_group_fails_one_transitivity(p4):
    group = compute_isometry_group(p4)
    ok, counterexample = check_almost_transitive(p4, group, 1, Fraction(1, 2))
    assert not ok
    assert counterexample is not None
    # Inner points are not exchangeable with endpoints under {id, reversal}.
    assert counterexample.domain != counterexample.image


def test_full_group_is_n_transitive_at_full_cardinality(p4):
    group = compute_isometry_group(p4)
    ok, _ = check_almost_transitive(p4, group, p4.size, 0)
    assert ok


def test_non_isometry_group_rejected(p4):
    from urysohn_forge.spaces import PermutationGroup
    bogus = PermutationGroup(4, ((1, 0, 2, 3),))
    with pytest.raises(SpaceError):
        check_almost_transitive(p4, bogus, 1, 1)


# ---------------------------------------------------------------------------
# JSON round trips
# ---------------------------------------------------------------------------

def test_space_json_round_trip(tmp_path, p4):
    path = tmp_path / "p4.json"
    save_space(p4, path)
    again = load_space(path)
    assert again.dist == p4.dist and again.labels == p4.labels
    assert again.value_set.contains(3)


def test_loader_rejects_invalid(tmp_path):
    path = tmp_path / "bad.json"
    data = {"name": "bad", "scale": 1, "labels": ["a", "b", "c"],
            "dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]],
            "value_set": {"kind": "integers", "bound": 3}}
    path.write_text(json.dumps(data))
    with pytest.raises(SpaceError):
        load_space(path)


def test_isometry_group_matches_brute_force_five_and_six_points():
    five = build_space([str(i) for i in range(5)],
                       [[0 if i == j else min(abs(i - j), 2) for j in range(5)]
                        for i in range(5)])
    six = path_space(6)
    for space in (five, six):
        assert compute_isometry_group(space).elements() == \
            isometry_group_brute_force(space)
