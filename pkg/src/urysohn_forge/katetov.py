"""Katetov functions, one-point extensions, fragment growth, sphere witnesses.

A Katetov function f on a space X satisfies |f(x) - f(y)| <= d(x,y) <= f(x) + f(y)
for all x, y; these are exactly the distance profiles of one-point metric
extensions of X.  Values are scaled integers over the space's denominator.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .spaces import (
    ConsistencyError,
    DistanceValueSet,
    FiniteMetricSpace,
    SpaceError,
    ValidationReport,
    Violation,
    build_space,
    validate_space,
)
from .util import pmap


@dataclass(frozen=True)
class KatetovFunction:
    space: FiniteMetricSpace
    values: tuple  # scaled ints, one per point

    def __post_init__(self):
        if len(self.values) != self.space.size:
            raise SpaceError("one value per point required")

    def true_value(self, i):
        return Fraction(self.values[i], self.space.scale)

    def sup_distance(self, other) -> int:
        """Scaled sup-metric distance to another function on the same space."""
        return max(abs(a - b) for a, b in zip(self.values, other.values))


def validate_katetov(space, values) -> ValidationReport:
    """List every pair violating either side of the Katetov double inequality."""
    if len(values) != space.size:
        raise SpaceError("length mismatch")
    bad = []
    for i in space.points():
        if values[i] < 0:
            bad.append(Violation("negative", (i,), f"f = {values[i]}"))
    for i in space.points():
        for j in range(i):
            d = space.d(i, j)
            if abs(values[i] - values[j]) > d:
                bad.append(Violation(
                    "not-1-lipschitz", (i, j),
                    f"|{values[i]} - {values[j]}| > {d}"))
            if values[i] + values[j] < d:
                bad.append(Violation(
                    "below-distance", (i, j),
                    f"{values[i]} + {values[j]} < {d}"))
    return ValidationReport(tuple(bad))


def distance_function(space, x0) -> KatetovFunction:
    """The Kuratowski image d(x0, -)."""
    return KatetovFunction(space, tuple(space.dist[x0]))


def one_point_extension(space, f, label) -> FiniteMetricSpace:
    """Add one point at the distances given by f.

    Zero values are refused: they would duplicate an existing point, and
    genuine extensions need positive distances between distinct points.
    """
    report = validate_katetov(space, f.values)
    if not report:
        raise SpaceError("not a Katetov function:\n" + report.render())
    if any(v == 0 for v in f.values):
        raise SpaceError("zero value duplicates an existing point; "
                         "remap the function before extending")
    if label in space.labels:
        raise SpaceError(f"label {label!r} already present")
    n = space.size
    dist = [list(row) + [f.values[i]] for i, row in enumerate(space.dist)]
    dist.append(list(f.values) + [0])
    out = FiniteMetricSpace(space.labels + (label,), space.scale,
                            tuple(tuple(r) for r in dist), space.value_set,
                            name=space.name)
    check = validate_space(out.dist, out.scale, out.value_set)
    value_ok = all(check_v.kind != "value-set" for check_v in check.violations)
    metric_ok = all(check_v.kind == "value-set" for check_v in check.violations)
    if not metric_ok:
        raise ConsistencyError("one-point extension broke the metric axioms:\n"
                               + check.render())
    if not value_ok:
        # The function left the declared value set; widen to the attained list.
        attained = sorted({out.dist[i][j] for i in out.points() for j in range(i)})
        vs = DistanceValueSet("finite", values=tuple(
            Fraction(v, out.scale) for v in [0, *attained]))
        out = FiniteMetricSpace(out.labels, out.scale, out.dist, vs, out.name)
    return out


def enumerate_katetov(space, value_set, bound) -> list:
    """All Katetov functions with values in value_set ∩ (0, bound], lex order.

    bound is a scaled integer.  Backtracking over points with pairwise
    pruning; the flat-grid filter in the tests is the independent oracle.
    """
    if bound <= 0:
        raise SpaceError("bound must be a positive scaled integer")
    cands = [int(v * space.scale)
             for v in value_set.members_upto(Fraction(bound, space.scale))]
    if any(Fraction(c, space.scale) != Fraction(v) for c, v in
           zip(cands, value_set.members_upto(Fraction(bound, space.scale)))):
        raise SpaceError("value set is not representable at the space's scale")
    n = space.size
    out = []
    vals = [0] * n

    def bt(k):
        if k == n:
            out.append(KatetovFunction(space, tuple(vals)))
            return
        for c in cands:
            ok = True
            for j in range(k):
                d = space.d(k, j)
                if abs(c - vals[j]) > d or c + vals[j] < d:
                    ok = False
                    break
            if ok:
                vals[k] = c
                bt(k + 1)

    bt(0)
    return out


def enumerate_katetov_brute_force(space, value_set, bound) -> int:
    """Oracle count: filter the full value grid by the double inequality."""
    cands = [int(v * space.scale)
             for v in value_set.members_upto(Fraction(bound, space.scale))]
    count = 0
    for vals in product(cands, repeat=space.size):
        if validate_katetov(space, vals).ok:
            count += 1
    return count


def controlled_extension(space, subset, f_on_subset):
    """Largest 1-Lipschitz extension of f from the subset: min_a (f(a) + d(a, x)).

    Returns (KatetovFunction, ValidationReport); the upper (1-Lipschitz) side
    always holds, the lower Katetov bound d <= f + f can fail off the subset
    and is reported rather than assumed.
    """
    subset = tuple(subset)
    if not subset:
        raise SpaceError("subset must be nonempty")
    if len(f_on_subset) != len(subset):
        raise SpaceError("one value per subset point required")
    sub_pairs = list(zip(subset, f_on_subset))
    for (a, fa), (b, fb) in product(sub_pairs, sub_pairs):
        d = space.d(a, b)
        if abs(fa - fb) > d or fa + fb < d:
            raise SpaceError("restriction is not Katetov on the subspace")
    values = tuple(min(fa + space.d(a, x) for a, fa in sub_pairs)
                   for x in space.points())
    return KatetovFunction(space, values), validate_katetov(space, values)


def kuratowski_embed(space):
    """x -> d(x, -), with the sup-metric isometry identity asserted."""
    embedding = [distance_function(space, x) for x in space.points()]
    for i in space.points():
        for j in range(i):
            if embedding[i].sup_distance(embedding[j]) != space.d(i, j):
                raise ConsistencyError("Kuratowski embedding failed the "
                                       "sup-metric identity")
    return embedding


def lift_action(space, group):
    """Left-regular lift (g . f)(x) = f(g^{-1} x) of a group of isometries.

    Returns an `act(g, f)` callable; permutes any Katetov-closed function
    list, and on Kuratowski images satisfies g . d(x,-) = d(gx,-).
    """
    from .spaces import is_distance_preserving, perm_inv

    for g in group.elements():
        if not is_distance_preserving(space, tuple(range(space.size)), g):
            raise SpaceError("group element is not an isometry")

    def act(g, f):
        ginv = perm_inv(tuple(g))
        return KatetovFunction(space, tuple(f.values[ginv[x]]
                                            for x in space.points()))

    return act


# ---------------------------------------------------------------------------
# Fragment growth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthResult:
    space: FiniteMetricSpace
    steps_done: int
    notice: str = ""


def grow_fragment(seed, value_set, steps, rng_seed, strategy="uniform",
                  bound=None) -> GrowthResult:
    """Iterated one-point extension, deterministic for a fixed rng_seed.

    strategy "uniform" draws uniformly from the enumerated candidates;
    "coverage" prefers the first candidate realizing a set of distance values
    no existing point realizes, falling back to a uniform draw.  Stops early
    with a notice when no candidate exists.
    """
    if steps < 0:
        raise SpaceError("steps must be >= 0")
    if strategy not in ("uniform", "coverage"):
        raise SpaceError(f"unknown strategy {strategy!r}")
    if bound is None:
        top = value_set.max_value()
        if top is None:
            raise SpaceError("unbounded value set needs an explicit bound")
        bound = int(Fraction(top) * seed.scale)
    rng = random.Random(rng_seed)
    space = seed
    for step in range(steps):
        cands = enumerate_katetov(space, value_set, bound)
        cands = [f for f in cands if all(v > 0 for v in f.values)]
        if not cands:
            return GrowthResult(space, step, "no admissible extension; stopped early")
        if strategy == "coverage":
            profiles = {frozenset(v for v in space.dist[i] if v > 0)
                        for i in space.points()}
            fresh = [f for f in cands if frozenset(f.values) not in profiles]
            choice = fresh[0] if fresh else rng.choice(cands)
        else:
            choice = rng.choice(cands)
        space = one_point_extension(space, choice, f"g{space.size}")
    return GrowthResult(space, steps)


# ---------------------------------------------------------------------------
# Sphere witnesses (the uniform-convexity obstruction combinatorics)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereWitness:
    """The z0 / a_i / b_i sphere configuration with its f_eps family.

    Fragment points are z0, a_0..a_N, b_0..b_N with d(a_i,a_j) = d(b_i,b_j) = 1
    (i != j), d(a_i,b_i) = m, d(a_i,b_j) = m-1 (i != j) and all points at
    distance m from z0.  The cube coordinate eps_i toggles pair i for
    i = 1..N; the reference pair (a_0, b_0) is pinned at eps_0 = 0, so
    f_eps(a_0) = k and f_eps(b_0) = m - k.
    """

    m: int
    k: int
    n_coords: int
    fragment: FiniteMetricSpace
    family: dict   # bitstring of length n_coords -> KatetovFunction
    small_k_flag: bool

    def z0(self):
        return 0

    def a_index(self, i):
        return 1 + i

    def b_index(self, i):
        return 2 + self.n_coords + i

    def to_json(self):
        data = self.fragment.to_json()
        data["witness"] = {
            "m": self.m,
            "k": self.k,
            "N": self.n_coords,
            "z0": self.fragment.labels[self.z0()],
            "a": [self.fragment.labels[self.a_index(i)]
                  for i in range(self.n_coords + 1)],
            "b": [self.fragment.labels[self.b_index(i)]
                  for i in range(self.n_coords + 1)],
            "f_eps": {eps: list(f.values) for eps, f in sorted(self.family.items())},
            "small_k_flag": self.small_k_flag,
        }
        return data


def build_sphere_witness(m, k, n_coords, workers=None) -> SphereWitness:
    """Construct the sphere fragment and validate all 2^N Katetov functions.

    Requires 1 <= k <= m-2 and N >= 1 (derived from the Katetov inequalities
    on the distance table); k < 2 is allowed but flagged, since the paper's
    parameter choice additionally forces k >= 2.  The 2^N validations fan out
    over `workers` threads (order-deterministic either way).
    """
    if n_coords < 1:
        raise SpaceError("N must be >= 1")
    if not 1 <= k <= m - 2:
        raise SpaceError("need 1 <= k <= m-2")
    npairs = n_coords + 1
    labels = ["z0"] + [f"a{i}" for i in range(npairs)] + [f"b{i}" for i in range(npairs)]
    size = 1 + 2 * npairs

    def dd(i, j):
        if i == j:
            return 0
        if i > j:
            i, j = j, i
        if i == 0:
            return m                      # z0 to anything
        ai = i - 1 if i <= npairs else None
        bi = i - 1 - npairs if i > npairs else None
        aj = j - 1 if j <= npairs else None
        bj = j - 1 - npairs if j > npairs else None
        if ai is not None and aj is not None:
            return 1
        if bi is not None and bj is not None:
            return 1
        return m if ai == bj else m - 1   # a_i vs b_j

    dist = tuple(tuple(dd(i, j) for j in range(size)) for i in range(size))
    fragment = build_space(tuple(labels), dist, name=f"sphere_m{m}_k{k}_N{n_coords}")

    keys = ["".join(bits) for bits in product("01", repeat=n_coords)]

    def make(eps):
        coord = [0] + [int(b) for b in eps]    # eps_0 pinned at 0
        values = [m]
        values += [k + coord[i] for i in range(npairs)]
        values += [m - k - coord[i] for i in range(npairs)]
        report = validate_katetov(fragment, tuple(values))
        if not report:
            raise ConsistencyError(
                f"f_{eps} failed Katetov validation for m={m}, k={k}:\n"
                + report.render())
        return KatetovFunction(fragment, tuple(values))

    family = dict(zip(keys, pmap(make, keys, workers)))
    return SphereWitness(m, k, n_coords, fragment, family, small_k_flag=k < 2)


def realize_T_epsilon(witness):
    """Add one point per eps realizing all the sphere memberships of T_eps.

    Each f_eps is extended to previously added witnesses by the controlled
    extension over the original fragment, in lexicographic eps order; the
    mutual witness distances are therefore canonical.  Returns
    (realized space, {eps: label}).
    """
    space = witness.fragment
    base = tuple(range(witness.fragment.size))
    where = {}
    for eps in sorted(witness.family):
        f = witness.family[eps]
        extended, report = controlled_extension(space, base, f.values)
        if not report:
            raise ConsistencyError(
                "controlled extension failed the lower Katetov bound at "
                + report.render())
        label = f"x{eps}"
        space = one_point_extension(space, extended, label)
        where[eps] = label
    # Membership distances are the defining values; check them outright.
    for eps, label in where.items():
        x = space.index(label)
        coord = [0] + [int(b) for b in eps]
        for i in range(witness.n_coords + 1):
            if space.d(x, witness.a_index(i)) != witness.k + coord[i]:
                raise ConsistencyError("a-sphere membership broken")
            if space.d(x, witness.b_index(i)) != witness.m - witness.k - coord[i]:
                raise ConsistencyError("b-sphere membership broken")
        if space.d(x, witness.z0()) != witness.m:
            raise ConsistencyError("z0-sphere membership broken")
    return space, where
