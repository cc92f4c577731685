"""Exact finite metric spaces over restricted distance-value sets.

Distances are stored as nonnegative integers over a global scale denominator
``q`` (true distance = entry / q), so every metric and Katetov inequality is
decided exactly.  No floating point enters this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations


class SpaceError(ValueError):
    """Structurally malformed input (wrong shapes, unknown labels, ...)."""


class ConsistencyError(RuntimeError):
    """An internal invariant that should be unreachable was violated."""


# ---------------------------------------------------------------------------
# Validation reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    message: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def render(self):
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)

    @staticmethod
    def valid():
        return ValidationReport(())


# ---------------------------------------------------------------------------
# Distance value sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceValueSet:
    """The set S of admissible distance values.

    kind:
      * ``finite``   explicit list of nonnegative rationals (must contain 0);
      * ``integers`` all integers 0..bound (bound None means all of N);
      * ``scaled``   all k/denominator with 0 <= k/denominator <= bound.
    """

    kind: str
    values: tuple = ()
    bound: Fraction | None = None
    denominator: int = 1

    def __post_init__(self):
        if self.kind not in ("finite", "integers", "scaled"):
            raise SpaceError(f"unknown value-set kind {self.kind!r}")
        if self.kind == "finite":
            vals = tuple(sorted(set(Fraction(v) for v in self.values)))
            if not vals or vals[0] != 0:
                raise SpaceError("finite value set must contain 0")
            if any(v < 0 for v in vals):
                raise SpaceError("value set members must be nonnegative")
            object.__setattr__(self, "values", vals)
        else:
            if self.denominator < 1:
                raise SpaceError("denominator must be positive")
            if self.bound is not None:
                object.__setattr__(self, "bound", Fraction(self.bound))

    def contains(self, value) -> bool:
        value = Fraction(value)
        if value < 0:
            return False
        if self.kind == "finite":
            return value in self.values
        if self.kind == "integers":
            if value.denominator != 1:
                return False
            return self.bound is None or value <= self.bound
        if (value * self.denominator).denominator != 1:
            return False
        return self.bound is None or value <= self.bound

    def max_value(self):
        """Largest member, or None when unbounded."""
        if self.kind == "finite":
            return self.values[-1]
        return self.bound

    def min_positive(self):
        """Smallest positive member, or None when there is none."""
        if self.kind == "finite":
            pos = [v for v in self.values if v > 0]
            return pos[0] if pos else None
        step = Fraction(1) if self.kind == "integers" else Fraction(1, self.denominator)
        if self.bound is not None and self.bound < step:
            return None
        return step

    def members_upto(self, bound) -> tuple:
        """All members v with 0 < v <= bound, ascending."""
        bound = Fraction(bound)
        if self.kind == "finite":
            return tuple(v for v in self.values if 0 < v <= bound)
        step = Fraction(1) if self.kind == "integers" else Fraction(1, self.denominator)
        if self.bound is not None:
            bound = min(bound, self.bound)
        n = int(bound / step)
        return tuple(step * k for k in range(1, n + 1))

    def is_convex(self) -> bool:
        """Computed convexity in the generated additive semigroup.

        S is convex iff every semigroup element y with x <= y <= z for some
        x, z in S lies in S.  Since 0 is a member this reduces to: every
        nonnegative semigroup combination of members that is <= max(S)
        belongs to S.  Unbounded integer/scaled sets are convex outright.
        """
        if self.kind in ("integers", "scaled"):
            return True
        top = self.values[-1]
        if top == 0:
            return True
        # Common denominator grid; subset-sum reachability up to top.
        den = 1
        for v in self.values:
            den = den * v.denominator // _gcd(den, v.denominator)
        scaled = [int(v * den) for v in self.values if v > 0]
        limit = int(top * den)
        reachable = [False] * (limit + 1)
        reachable[0] = True
        for s in range(1, limit + 1):
            reachable[s] = any(s >= v and reachable[s - v] for v in scaled)
        members = {int(v * den) for v in self.values}
        return all(not reachable[s] or s in members
                   for s in range(limit + 1))

    def to_json(self, scale=1):
        data = {"kind": self.kind}
        if self.kind == "finite":
            data["values"] = [int(v * scale) for v in self.values]
        else:
            data["bound"] = None if self.bound is None else int(self.bound)
            if self.kind == "scaled":
                data["denominator"] = self.denominator
        return data

    @staticmethod
    def from_json(data, scale=1):
        kind = data.get("kind", "finite")
        if kind == "finite":
            return DistanceValueSet(
                "finite", values=tuple(Fraction(v, scale) for v in data["values"]))
        bound = data.get("bound")
        return DistanceValueSet(
            kind, bound=None if bound is None else Fraction(bound),
            denominator=int(data.get("denominator", scale)))


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def integer_values(bound=None):
    return DistanceValueSet("integers", bound=bound)


def finite_values(*values):
    return DistanceValueSet("finite", values=tuple(Fraction(v) for v in (0, *values)))


# ---------------------------------------------------------------------------
# Finite metric spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteMetricSpace:
    labels: tuple
    scale: int
    dist: tuple  # tuple of tuples of nonnegative ints; true distance = entry/scale
    value_set: DistanceValueSet
    name: str = ""

    @property
    def size(self):
        return len(self.labels)

    def d(self, i, j):
        """Scaled integer distance."""
        return self.dist[i][j]

    def true_d(self, i, j):
        return Fraction(self.dist[i][j], self.scale)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise SpaceError(f"unknown label {label!r}") from None

    def points(self):
        return range(len(self.labels))

    def attained(self):
        """Sorted scaled distances attained by distinct pairs."""
        return tuple(sorted({self.dist[i][j]
                             for i in self.points() for j in range(i)}))

    def row_profile(self, i):
        """Multiset of distances from point i, as a sorted tuple."""
        return tuple(sorted(self.dist[i]))

    def validate(self):
        return validate_space(self.dist, self.scale, self.value_set)

    def to_json(self):
        return {
            "name": self.name,
            "scale": self.scale,
            "labels": list(self.labels),
            "dist": [list(row) for row in self.dist],
            "value_set": self.value_set.to_json(self.scale),
        }

    @staticmethod
    def from_json(data):
        scale = int(data.get("scale", 1))
        vs = DistanceValueSet.from_json(data["value_set"], scale)
        space = FiniteMetricSpace(
            labels=tuple(str(x) for x in data["labels"]),
            scale=scale,
            dist=tuple(tuple(int(x) for x in row) for row in data["dist"]),
            value_set=vs,
            name=str(data.get("name", "")),
        )
        if len(space.labels) != len(space.dist):
            raise SpaceError("label/matrix size mismatch")
        return space


def build_space(labels, matrix, scale=1, value_set=None, name=""):
    """Construct and validate a space; raises SpaceError when invalid."""
    labels = tuple(labels)
    dist = tuple(tuple(int(x) for x in row) for row in matrix)
    if value_set is None:
        attained = sorted({dist[i][j] for i in range(len(dist)) for j in range(i)})
        value_set = DistanceValueSet(
            "finite", values=tuple(Fraction(v, scale) for v in [0, *attained]))
    report = validate_space(dist, scale, value_set)
    if not report:
        raise SpaceError("invalid metric space:\n" + report.render())
    return FiniteMetricSpace(labels, scale, dist, value_set, name)


def validate_space(matrix, scale, value_set) -> ValidationReport:
    """Check the metric axioms and value-set membership, listing every violation."""
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise SpaceError("matrix is not square")
    if scale < 1:
        raise SpaceError("scale must be a positive integer")
    bad = []
    for i in range(n):
        if matrix[i][i] != 0:
            bad.append(Violation("nonzero-diagonal", (i,), f"d[{i}][{i}] = {matrix[i][i]}"))
    for i in range(n):
        for j in range(i + 1, n):
            if matrix[i][j] != matrix[j][i]:
                bad.append(Violation("asymmetry", (i, j),
                                     f"{matrix[i][j]} != {matrix[j][i]}"))
            if matrix[i][j] <= 0:
                bad.append(Violation("nonpositive", (i, j), f"d = {matrix[i][j]}"))
            elif not value_set.contains(Fraction(matrix[i][j], scale)):
                bad.append(Violation("value-set", (i, j),
                                     f"{matrix[i][j]}/{scale} not in value set"))
    for i, j, k in combinations(range(n), 3):
        # One check per pivot: d(b, c) <= d(b, a) + d(a, c) with pivot a.
        for a, b, c in ((i, j, k), (j, i, k), (k, i, j)):
            if matrix[b][c] > matrix[b][a] + matrix[a][c]:
                bad.append(Violation(
                    "triangle", (b, a, c),
                    f"d[{b}][{c}] = {matrix[b][c]} > {matrix[b][a]} + {matrix[a][c]}"))
    return ValidationReport(tuple(bad))


def path_space(n, scale=1, bound=None, name="P"):
    """The path {0,..,n-1} with d(i,j) = |i-j|, integer values."""
    vs = integer_values(bound if bound is not None else Fraction(n - 1))
    dist = tuple(tuple(abs(i - j) * scale for j in range(n)) for i in range(n))
    return FiniteMetricSpace(tuple(str(i) for i in range(n)), scale, dist, vs,
                             name=f"{name}{n}")


def cycle_space(n, weight=1, scale=1, name="C"):
    """The n-cycle with uniform edge weight, carrying its attained values."""
    def cd(i, j):
        k = abs(i - j)
        return min(k, n - k) * weight
    dist = tuple(tuple(cd(i, j) for j in range(n)) for i in range(n))
    attained = sorted({cd(i, j) for i in range(n) for j in range(i)})
    vs = DistanceValueSet("finite", values=tuple(
        Fraction(v, scale) for v in [0, *attained]))
    return FiniteMetricSpace(tuple(str(i) for i in range(n)), scale, dist, vs,
                             name=f"{name}{n}w{weight}")


def two_distance_space(blocks, close, far, scale=1, name=""):
    """Points grouped into blocks: distance `close` inside a block, `far` across.

    Valid whenever far <= 2*close or there is at most one block of size > 1.
    """
    labels = []
    block_of = []
    for bi, size in enumerate(blocks):
        for k in range(size):
            labels.append(f"{bi}.{k}")
            block_of.append(bi)
    n = len(labels)
    dist = tuple(tuple(0 if i == j else (close if block_of[i] == block_of[j] else far)
                       for j in range(n)) for i in range(n))
    return build_space(tuple(labels), dist, scale=scale, name=name)


def canonical_form(space) -> tuple:
    """Minimum of the flattened matrix over all label permutations.

    Exponential in the point count; used for isomorphism pruning on small
    instances only.
    """
    n = space.size
    best = None
    for perm in permutations(range(n)):
        flat = tuple(space.dist[perm[i]][perm[j]] for i in range(n) for j in range(n))
        if best is None or flat < best:
            best = flat
    return (n, space.scale, best)


# ---------------------------------------------------------------------------
# Partial isometries
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class PartialIsometry:
    """A distance-preserving partial injection, as parallel index tuples."""

    domain: tuple
    image: tuple

    def __post_init__(self):
        if not self.domain:
            raise SpaceError("partial isometry must have nonempty domain")
        if len(self.domain) != len(self.image):
            raise SpaceError("domain/image length mismatch")
        if tuple(sorted(self.domain)) != self.domain:
            raise SpaceError("domain must be sorted")
        if len(set(self.image)) != len(self.image):
            raise SpaceError("image must be injective")

    def __call__(self, point):
        return self.image[self.domain.index(point)]

    def defined_at(self, point):
        return point in self.domain

    def mapping(self):
        return dict(zip(self.domain, self.image))

    def inverse(self):
        pairs = sorted(zip(self.image, self.domain))
        return PartialIsometry(tuple(p for p, _ in pairs), tuple(q for _, q in pairs))

    def compose(self, other):
        """self after other, on the largest domain; None when empty."""
        pairs = []
        for a in other.domain:
            b = other(a)
            if b in self.domain:
                pairs.append((a, self(b)))
        if not pairs:
            return None
        pairs.sort()
        return PartialIsometry(tuple(a for a, _ in pairs), tuple(b for _, b in pairs))

    def is_total(self, n):
        return len(self.domain) == n

    def as_permutation(self, n):
        if not self.is_total(n):
            raise SpaceError("not a total map")
        return tuple(self(i) for i in range(n))


def is_distance_preserving(space, domain, image) -> bool:
    return all(space.d(domain[i], domain[j]) == space.d(image[i], image[j])
               for i in range(len(domain)) for j in range(i))


def identity_isometry(space):
    pts = tuple(space.points())
    return PartialIsometry(pts, pts)


def enumerate_partial_isometries(space, max_domain) -> list:
    """All distance-preserving partial injections with 1 <= |domain| <= max_domain.

    Canonical order: by domain size, then domain tuple, then image tuple
    (images produced lexicographically by the backtracking).
    """
    if not 1 <= max_domain <= space.size:
        raise SpaceError("max_domain out of range")
    out = []
    points = list(space.points())

    def extend(domain, image):
        k = len(image)
        if k == len(domain):
            out.append(PartialIsometry(tuple(domain), tuple(image)))
            return
        for cand in points:
            if cand in image:
                continue
            if all(space.d(domain[k], domain[i]) == space.d(cand, image[i])
                   for i in range(k)):
                extend(domain, image + [cand])

    for size in range(1, max_domain + 1):
        for domain in combinations(points, size):
            extend(list(domain), [])
    return out


# ---------------------------------------------------------------------------
# Permutations and permutation groups
# ---------------------------------------------------------------------------

def perm_identity(n):
    return tuple(range(n))

def perm_mul(p, q):
    """p after q: (p*q)(i) = p(q(i))."""
    return tuple(p[q[i]] for i in range(len(p)))

def perm_inv(p):
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


class GroupTooLarge(RuntimeError):
    pass


class PermutationGroup:
    """A permutation group given by generators, with an on-demand element cache."""

    def __init__(self, degree, generators, elements=None):
        self.degree = degree
        self.generators = tuple(tuple(g) for g in generators)
        for g in self.generators:
            if sorted(g) != list(range(degree)):
                raise SpaceError("generator is not a permutation of the degree")
        self._elements = None if elements is None else tuple(elements)

    def elements(self, cap=1_000_000):
        """Full element tuple in sorted order (closure BFS, capped)."""
        if self._elements is None:
            els = {perm_identity(self.degree)}
            frontier = list(els)
            gens = self.generators + tuple(perm_inv(g) for g in self.generators)
            while frontier:
                new = []
                for x in frontier:
                    for g in gens:
                        y = perm_mul(g, x)
                        if y not in els:
                            els.add(y)
                            new.append(y)
                            if len(els) > cap:
                                raise GroupTooLarge(f"closure exceeds cap {cap}")
                frontier = new
            self._elements = tuple(sorted(els))
        return self._elements

    def order(self, cap=1_000_000):
        return len(self.elements(cap))

    def __contains__(self, perm):
        return tuple(perm) in self.elements()

    def orbit(self, point):
        seen = {point}
        frontier = [point]
        gens = self.generators + tuple(perm_inv(g) for g in self.generators)
        while frontier:
            new = []
            for x in frontier:
                for g in gens:
                    y = g[x]
                    if y not in seen:
                        seen.add(y)
                        new.append(y)
            frontier = new
        return tuple(sorted(seen))


def trivial_group(degree):
    return PermutationGroup(degree, (), elements=(perm_identity(degree),))


def extend_to_isometry(space, domain, image, avoid=None):
    """Complete a distance-preserving partial map to a full self-isometry.

    Backtracking with distance-profile pruning; returns an image tuple or
    None.  `avoid` is a set of full permutations to skip (used to enumerate
    several extensions).
    """
    n = space.size
    if not is_distance_preserving(space, domain, image):
        return None
    profiles = [space.row_profile(i) for i in range(n)]
    assign = {a: b for a, b in zip(domain, image)}
    used = set(image)
    rest = [p for p in range(n) if p not in assign]

    def bt(k):
        if k == len(rest):
            perm = tuple(assign[i] for i in range(n))
            if avoid and perm in avoid:
                return None
            return perm
        p = rest[k]
        for cand in range(n):
            if cand in used or profiles[cand] != profiles[p]:
                continue
            if all(space.d(p, a) == space.d(cand, b) for a, b in assign.items()):
                assign[p] = cand
                used.add(cand)
                got = bt(k + 1)
                if got is not None:
                    return got
                del assign[p]
                used.discard(cand)
        return None

    return bt(0)


def compute_isometry_group(space) -> PermutationGroup:
    """All distance-preserving permutations, by profile-pruned backtracking."""
    n = space.size
    profiles = [space.row_profile(i) for i in range(n)]
    found = []
    assign = {}
    used = set()

    def bt(p):
        if p == n:
            found.append(tuple(assign[i] for i in range(n)))
            return
        for cand in range(n):
            if cand in used or profiles[cand] != profiles[p]:
                continue
            if all(space.d(p, a) == space.d(cand, b) for a, b in assign.items()):
                assign[p] = cand
                used.add(cand)
                bt(p + 1)
                del assign[p]
                used.discard(cand)

    bt(0)
    found.sort()
    return PermutationGroup(n, tuple(found), elements=tuple(found))


def isometry_group_brute_force(space) -> tuple:
    """Oracle: filter all |X|! permutations by distance preservation."""
    pts = tuple(space.points())
    out = []
    for perm in permutations(pts):
        if is_distance_preserving(space, pts, perm):
            out.append(perm)
    return tuple(sorted(out))


# ---------------------------------------------------------------------------
# Epsilon nets and embedding envelopes
# ---------------------------------------------------------------------------

def extract_epsilon_net(space, epsilon, order=None):
    """Greedy maximal epsilon-separated subset in the given point order.

    Keeps a point iff its distance to the current net is >= epsilon.  Returns
    (net, to_net, bound) where to_net maps every point to a nearest net point
    and bound = max displacement (a Fraction, always < epsilon for dropped
    points by maximality).
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise SpaceError("epsilon must be positive")
    order = tuple(space.points()) if order is None else tuple(order)
    eps_scaled = epsilon * space.scale
    net = []
    for p in order:
        if all(Fraction(space.d(p, q)) >= eps_scaled for q in net):
            net.append(p)
    to_net = {}
    bound = Fraction(0)
    for p in space.points():
        best = min(net, key=lambda q: (space.d(p, q), q))
        to_net[p] = best
        bound = max(bound, space.true_d(p, best))
    if bound > epsilon:
        raise ConsistencyError("net displacement exceeds epsilon")
    return tuple(net), to_net, bound


@dataclass(frozen=True)
class EmbeddingEnvelope:
    """Empirical lower/upper envelopes of image distances per source distance."""

    samples: tuple      # ((r_scaled, min_dist, max_dist), ...) ascending in r
    rho1: tuple         # monotone lower staircase, aligned with samples
    rho2: tuple         # monotone upper staircase
    degenerate: bool    # some positive distance collapsed to 0

    def pairs(self):
        return tuple((r, lo, hi) for (r, _, _), lo, hi
                     in zip(self.samples, self.rho1, self.rho2))


def _is_inf(p):
    return p == "inf" or (isinstance(p, float) and p == float("inf"))


def _norm_p(vec, p):
    if _is_inf(p):
        return max(abs(float(x)) for x in vec) if vec else 0.0
    p = float(p)
    return sum(abs(float(x)) ** p for x in vec) ** (1.0 / p)


def empirical_envelopes(space, images, p_norm=2) -> EmbeddingEnvelope:
    """Min/max image distance for each attained source distance, plus staircases."""
    if len(images) != space.size:
        raise SpaceError("one image vector per point required")
    dims = {len(v) for v in images}
    if len(dims) > 1:
        raise SpaceError("image vectors have mismatched dimensions")
    if not _is_inf(p_norm) and Fraction(p_norm) < 1:
        raise SpaceError("p_norm must be >= 1")
    by_r = {}
    for i in space.points():
        for j in range(i):
            r = space.d(i, j)
            dv = [a - b for a, b in zip(images[i], images[j])]
            d = _norm_p(dv, p_norm)
            lo, hi = by_r.get(r, (d, d))
            by_r[r] = (min(lo, d), max(hi, d))
    rs = sorted(by_r)
    samples = tuple((r, *by_r[r]) for r in rs)
    # Lower staircase: suffix-min of the minima; upper: prefix-max of the maxima.
    rho1 = []
    running = None
    for r in reversed(rs):
        running = by_r[r][0] if running is None else min(running, by_r[r][0])
        rho1.append(running)
    rho1.reverse()
    rho2 = []
    running = None
    for r in rs:
        running = by_r[r][1] if running is None else max(running, by_r[r][1])
        rho2.append(running)
    degenerate = any(r > 0 and by_r[r][0] == 0 for r in rs)
    return EmbeddingEnvelope(samples, tuple(rho1), tuple(rho2), degenerate)


# ---------------------------------------------------------------------------
# Almost n-transitivity
# ---------------------------------------------------------------------------

def check_almost_transitive(space, group, n, epsilon):
    """Whether every isometry between n-point subspaces is epsilon-tracked by the group.

    epsilon is exact rational; the paper's strict inequality d(i(a), ga) < eps
    is used, and epsilon = 0 means exact transitivity (d = 0).  Returns
    (True, None) or (False, failing PartialIsometry).
    """
    epsilon = Fraction(epsilon)
    if epsilon < 0:
        raise SpaceError("epsilon must be >= 0")
    for g in group.elements():
        if not is_distance_preserving(space, tuple(range(space.size)), g):
            raise SpaceError("group element is not an isometry of the space")
    eps_scaled = epsilon * space.scale
    for iso in enumerate_partial_isometries(space, n):
        if len(iso.domain) != n:
            continue
        tracked = False
        for g in group.elements():
            if epsilon == 0:
                good = all(g[a] == iso(a) for a in iso.domain)
            else:
                good = all(Fraction(space.d(iso(a), g[a])) < eps_scaled
                           for a in iso.domain)
            if good:
                tracked = True
                break
        if not tracked:
            return False, iso
    return True, None


# ---------------------------------------------------------------------------
# JSON loading (metric-space file format)
# ---------------------------------------------------------------------------

def load_space(path):
    """Load and validate a metric-space JSON file; SpaceError when invalid."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    space = FiniteMetricSpace.from_json(data)
    report = space.validate()
    if not report:
        raise SpaceError(report.render())
    return space


def save_space(space, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(space.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
