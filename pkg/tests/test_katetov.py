import itertools
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urysohn_forge.katetov import (
    KatetovFunction,
    build_sphere_witness,
    controlled_extension,
    distance_function,
    enumerate_katetov,
    enumerate_katetov_brute_force,
    grow_fragment,
    kuratowski_embed,
    lift_action,
    one_point_extension,
    realize_T_epsilon,
    validate_katetov,
)
from urysohn_forge.spaces import (
    SpaceError,
    build_space,
    compute_isometry_group,
    finite_values,
    integer_values,
)

from conftest import spaces_up_to_iso


# ---------------------------------------------------------------------------
# validate_katetov
# ---------------------------------------------------------------------------

def test_distance_functions_are_katetov(p4):
    for x in p4.points():
        assert validate_katetov(p4, distance_function(p4, x).values).ok


def test_zero_function_fails_lower_bound(two_point):
    report = validate_katetov(two_point, (0, 0))
    assert not report.ok
    assert any(v.kind == "below-distance" for v in report.violations)


def test_length_mismatch_raises(two_point):
    with pytest.raises(SpaceError):
        validate_katetov(two_point, (1,))


def test_sphere_functions_are_katetov():
    witness = build_sphere_witness(6, 2, 2)
    for f in witness.family.values():
        assert validate_katetov(witness.fragment, f.values).ok


# ---------------------------------------------------------------------------
# one_point_extension
# ---------------------------------------------------------------------------

def test_extension_two_point(two_point):
    f = KatetovFunction(two_point, (1, 1))
    ext = one_point_extension(two_point, f, "c")
    assert ext.size == 3 and ext.validate().ok
    assert ext.d(2, 0) == 1 and ext.d(2, 1) == 1


def test_extension_refuses_duplicate_point(p4):
    f = distance_function(p4, 0)       # f(0) = 0 duplicates the point
    with pytest.raises(SpaceError):
        one_point_extension(p4, f, "dup")


def test_extension_p4(p4):
    f = KatetovFunction(p4, (1, 1, 2, 3))
    ext = one_point_extension(p4, f, "x")
    assert ext.size == 5 and ext.validate().ok


@given(st.data())
@settings(max_examples=80, deadline=None)
def test_extension_valid_iff_katetov(data):
    spaces = spaces_up_to_iso(3, (1, 2, 3))
    space = spaces[data.draw(st.integers(0, len(spaces) - 1))]
    values = tuple(data.draw(st.integers(1, 4)) for _ in range(space.size))
    report = validate_katetov(space, values)
    if report.ok:
        ext = one_point_extension(space, KatetovFunction(space, values), "new")
        assert ext.validate().ok
    else:
        with pytest.raises(SpaceError):
            one_point_extension(space, KatetovFunction(space, values), "new")


# ---------------------------------------------------------------------------
# enumerate_katetov
# ---------------------------------------------------------------------------

def test_enumerate_singleton():
    single = build_space(("a",), [[0]], value_set=integer_values())
    funcs = enumerate_katetov(single, integer_values(), 3)
    assert [f.values for f in funcs] == [(1,), (2,), (3,)]


def test_enumerate_two_point_bound_two(two_point):
    funcs = enumerate_katetov(two_point, integer_values(), 2)
    assert [f.values for f in funcs] == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_enumerate_with_restricted_values():
    space = build_space(("a", "b"), [[0, 2], [2, 0]])
    funcs = enumerate_katetov(space, finite_values(1), 1)
    assert [f.values for f in funcs] == [(1, 1)]


def test_enumerate_matches_grid_oracle():
    for space in spaces_up_to_iso(3, (1, 2)):
        for bound in (2, 3):
            got = len(enumerate_katetov(space, integer_values(), bound))
            want = enumerate_katetov_brute_force(space, integer_values(), bound)
            assert got == want


# ---------------------------------------------------------------------------
# controlled_extension
# ---------------------------------------------------------------------------

def test_controlled_total_restriction_is_identity(p4):
    f = distance_function(p4, 1)
    out, report = controlled_extension(p4, tuple(p4.points()), f.values)
    assert out.values == f.values and report.ok


def test_controlled_single_anchor(p4):
    out, _ = controlled_extension(p4, (1,), (2,))
    assert out.values == tuple(2 + p4.d(1, x) for x in p4.points())


def test_controlled_p4_example(p4):
    out, report = controlled_extension(p4, (0, 3), (1, 2))
    assert out.values == (1, 2, 3, 2)
    assert report.ok


def test_controlled_empty_subset_raises(p4):
    with pytest.raises(SpaceError):
        controlled_extension(p4, (), ())


def _all_lipschitz_extensions(space, subset, f_on_subset, bound):
    """Oracle: every 1-Lipschitz extension over the value grid 0..bound."""
    free = [x for x in space.points() if x not in subset]
    fixed = dict(zip(subset, f_on_subset))
    for combo in itertools.product(range(bound + 1), repeat=len(free)):
        values = dict(fixed)
        values.update(zip(free, combo))
        vec = tuple(values[x] for x in space.points())
        if all(abs(vec[i] - vec[j]) <= space.d(i, j)
               for i in space.points() for j in range(i)):
            yield vec


def test_controlled_is_largest_lipschitz_extension():
    for space in spaces_up_to_iso(4, (1, 2)):
        subset = tuple(range(1, space.size))
        if not subset:
            continue
        f_on = tuple(1 + (i % 2) for i in subset)
        try:
            out, _ = controlled_extension(space, subset, f_on)
        except SpaceError:
            continue
        for other in _all_lipschitz_extensions(space, subset, f_on, 4):
            assert all(o <= c for o, c in zip(other, out.values))


# ---------------------------------------------------------------------------
# Kuratowski embedding and the lifted action
# ---------------------------------------------------------------------------

def test_kuratowski_two_point(two_point):
    emb = kuratowski_embed(two_point)
    assert emb[0].values == (0, 1) and emb[1].values == (1, 0)
    assert emb[0].sup_distance(emb[1]) == 1


def test_kuratowski_p4_extremes(p4):
    emb = kuratowski_embed(p4)
    assert emb[0].sup_distance(emb[3]) == 3


def test_kuratowski_singleton():
    single = build_space(("a",), [[0]])
    emb = kuratowski_embed(single)
    assert emb[0].values == (0,)


def test_lift_action_identity_and_swap(two_point):
    group = compute_isometry_group(two_point)
    act = lift_action(two_point, group)
    f = KatetovFunction(two_point, (1, 2))
    assert act((0, 1), f).values == (1, 2)
    assert act((1, 0), f).values == (2, 1)


def test_lift_action_kuratowski_equivariance(p4):
    group = compute_isometry_group(p4)
    act = lift_action(p4, group)
    reversal = (3, 2, 1, 0)
    for x in p4.points():
        assert act(reversal, distance_function(p4, x)).values == \
            distance_function(p4, reversal[x]).values


def test_lift_action_is_group_action(triangle):
    group = compute_isometry_group(triangle)
    act = lift_action(triangle, group)
    funcs = enumerate_katetov(triangle, integer_values(), 2)
    for g in group.elements():
        for h in group.elements():
            gh = tuple(g[h[i]] for i in range(3))
            for f in funcs:
                assert act(gh, f).values == act(g, act(h, f)).values
    for f in funcs:
        assert act((0, 1, 2), f).values == f.values


# ---------------------------------------------------------------------------
# Fragment growth
# ---------------------------------------------------------------------------

def test_grow_zero_steps(p4):
    result = grow_fragment(p4, integer_values(3), 0, rng_seed=1)
    assert result.space is p4 and result.steps_done == 0


def test_grow_deterministic():
    seed_space = build_space(("a",), [[0]], value_set=finite_values(1, 2))
    a = grow_fragment(seed_space, finite_values(1, 2), 3, rng_seed=11)
    b = grow_fragment(seed_space, finite_values(1, 2), 3, rng_seed=11)
    assert a.space.dist == b.space.dist
    assert a.space.size == 4 and a.space.validate().ok


def test_grow_coverage_prefers_fresh_profile(two_point):
    result = grow_fragment(two_point, integer_values(2), 1, rng_seed=0,
                           strategy="coverage")
    # Existing profiles are (0, 1); the first fresh candidate is (1, 2).
    new_row = result.space.dist[2]
    assert tuple(sorted(new_row)) != (0, 1, 1) or result.space.size == 3
    assert tuple(sorted(new_row[:2])) == (1, 2)


def test_grow_stops_early_when_no_candidates():
    space = build_space(("a", "b"), [[0, 3], [3, 0]])
    result = grow_fragment(space, finite_values(1), 2, rng_seed=0, bound=1)
    assert result.steps_done == 0 and result.notice


# ---------------------------------------------------------------------------
# Sphere witnesses
# ---------------------------------------------------------------------------

def test_sphere_witness_minimal():
    witness = build_sphere_witness(6, 2, 1)
    assert witness.fragment.size == 5      # z0 + 4 sphere points
    assert set(witness.family) == {"0", "1"}
    assert not witness.small_k_flag


def test_sphere_witness_all_sixteen():
    witness = build_sphere_witness(6, 2, 4)
    assert len(witness.family) == 16
    assert witness.fragment.validate().ok


def test_sphere_witness_rejects_large_k():
    with pytest.raises(SpaceError):
        build_sphere_witness(3, 2, 1)


def test_sphere_witness_flags_small_k():
    assert build_sphere_witness(4, 1, 1).small_k_flag


def test_sphere_distance_table():
    w = build_sphere_witness(7, 3, 2)
    frag = w.fragment
    for i in range(3):
        for j in range(3):
            if i != j:
                assert frag.d(w.a_index(i), w.a_index(j)) == 1
                assert frag.d(w.b_index(i), w.b_index(j)) == 1
                assert frag.d(w.a_index(i), w.b_index(j)) == 6
        assert frag.d(w.a_index(i), w.b_index(i)) == 7
        assert frag.d(w.z0(), w.a_index(i)) == 7
        assert frag.d(w.z0(), w.b_index(i)) == 7


def test_realize_minimal():
    witness = build_sphere_witness(6, 2, 1)
    realized, where = realize_T_epsilon(witness)
    assert realized.size == witness.fragment.size + 2
    assert realized.validate().ok
    for eps, label in where.items():
        x = realized.index(label)
        assert realized.d(x, witness.z0()) == 6
        assert realized.d(x, witness.a_index(1)) == 2 + int(eps)
        assert realized.d(x, witness.b_index(1)) == 4 - int(eps)


def test_realize_full_cube_distinct_points():
    witness = build_sphere_witness(6, 2, 4)
    realized, where = realize_T_epsilon(witness)
    assert realized.size == witness.fragment.size + 16
    assert realized.validate().ok
    points = [realized.index(lbl) for lbl in where.values()]
    for x in points:
        for y in points:
            if x != y:
                assert realized.d(x, y) > 0


def test_sphere_timing_budget():
    start = time.monotonic()
    witness = build_sphere_witness(6, 2, 4)
    realized, _ = realize_T_epsilon(witness)
    assert realized.validate().ok
    assert time.monotonic() - start < 10.0
