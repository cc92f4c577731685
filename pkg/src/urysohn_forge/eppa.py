"""EPPA witness search and verification.

A witness for a finite metric space X is a finite metric space Z together
with an isometric embedding X -> Z and, for every partial isometry of X, a
global self-isometry of Z extending it.  The quotient-based search realizes
each candidate as a finite permutation action of the free group on the
partial isometries and derives Z as the metric quotient of the coset orbit
with its exact path metric; every witness returned by any search path passes
verify_witness before it is handed out.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .globalization import (
    Alphabet,
    QuotientAction,
    build_coset_graph,
    check_quotient,
    detect_bad_configuration,
)
from .katetov import enumerate_katetov, one_point_extension
from .spaces import (
    ConsistencyError,
    DistanceValueSet,
    FiniteMetricSpace,
    PartialIsometry,
    PermutationGroup,
    SpaceError,
    ValidationReport,
    Violation,
    build_space,
    canonical_form,
    cycle_space,
    enumerate_partial_isometries,
    extend_to_isometry,
    is_distance_preserving,
    two_distance_space,
)


@dataclass(frozen=True)
class EppaWitness:
    base: FiniteMetricSpace
    witness: FiniteMetricSpace
    embed: tuple                 # base point index -> witness point index
    extensions: dict             # PartialIsometry -> permutation of the witness
    provenance: str
    stats: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.witness.size

    def to_json(self):
        wl = self.witness.labels
        bl = self.base.labels
        return {
            "base": self.base.to_json(),
            "witness": self.witness.to_json(),
            "embed": {bl[i]: wl[self.embed[i]] for i in range(len(bl))},
            "extensions": [
                {"partial": {"dom": [bl[a] for a in p.domain],
                             "img": [bl[b] for b in p.image]},
                 "global": list(perm)}
                for p, perm in sorted(self.extensions.items())
            ],
            "provenance": self.provenance,
            "stats": self.stats,
        }

    @staticmethod
    def from_json(data):
        base = FiniteMetricSpace.from_json(data["base"])
        witness = FiniteMetricSpace.from_json(data["witness"])
        embed = tuple(witness.index(data["embed"][lbl]) for lbl in base.labels)
        extensions = {}
        for entry in data["extensions"]:
            p = PartialIsometry(
                tuple(base.index(a) for a in entry["partial"]["dom"]),
                tuple(base.index(b) for b in entry["partial"]["img"]))
            extensions[p] = tuple(int(x) for x in entry["global"])
        return EppaWitness(base, witness, embed, extensions,
                           str(data.get("provenance", "manual")),
                           dict(data.get("stats", {})))


def verify_witness(w) -> ValidationReport:
    """Exhaustive check of the witness invariants; the hard gate for all searches."""
    bad = []
    base, z = w.base, w.witness
    if base.scale != z.scale:
        bad.append(Violation("scale", (), "base and witness scales differ"))
        return ValidationReport(tuple(bad))
    bad.extend(z.validate().violations)
    if len(set(w.embed)) != base.size:
        bad.append(Violation("embedding", (), "embedding is not injective"))
    for a in base.points():
        for b in range(a):
            if z.d(w.embed[a], w.embed[b]) != base.d(a, b):
                bad.append(Violation(
                    "embedding", (a, b),
                    f"d_Z = {z.d(w.embed[a], w.embed[b])} != d_X = {base.d(a, b)}"))
    wanted = enumerate_partial_isometries(base, base.size)
    for p in wanted:
        if p not in w.extensions:
            bad.append(Violation("coverage", tuple(p.domain),
                                 "partial isometry has no extension"))
            break
    pts = tuple(z.points())
    for p, perm in w.extensions.items():
        if sorted(perm) != list(range(z.size)):
            bad.append(Violation("extension", tuple(p.domain),
                                 "extension is not a permutation"))
            continue
        if not is_distance_preserving(z, pts, perm):
            bad.append(Violation("extension", tuple(p.domain),
                                 "extension is not a self-isometry"))
            continue
        for a in p.domain:
            if perm[w.embed[a]] != w.embed[p(a)]:
                bad.append(Violation(
                    "restriction", (tuple(p.domain), a),
                    "extension does not restrict to the partial isometry"))
                break
    return ValidationReport(tuple(bad))


@dataclass
class SearchBudget:
    max_omega: int = 64
    max_attempts: int = 200
    rng_seed: int = 0
    time_limit_s: float | None = None


# ---------------------------------------------------------------------------
# Witness assembly from an accepted quotient action
# ---------------------------------------------------------------------------

def _metric_quotient(nodes, path):
    """Group nodes at path distance zero; classes sorted by least member.

    With positive edge labels no collapsing happens, but the quotient is
    always applied (zero-distance classes would otherwise break positivity).
    """
    parent = {u: u for u in nodes}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for u in nodes:
        for v in nodes:
            if u < v and path[(u, v)] == 0:
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[max(ru, rv)] = min(ru, rv)
    classes = {}
    for u in nodes:
        classes.setdefault(find(u), []).append(u)
    reps = sorted(classes)
    return reps, {u: reps.index(find(u)) for u in nodes}


def witness_from_action(action, provenance="quotient", stats=None) -> EppaWitness:
    """Run the full pipeline on a quotient action and assemble a witness.

    check_quotient, build_coset_graph and detect_bad_configuration must all
    succeed; the witness is the metric quotient of the orbit under the exact
    path metric, truncated at max(S) for a bounded convex value set, with
    extensions given by the letter translations.  Raises SpaceError when the
    action is rejected and ConsistencyError when assembly breaks its own
    invariants.
    """
    space = action.space
    report = check_quotient(space, action)
    if not report:
        raise SpaceError("quotient action rejected:\n" + report.render())
    graph = build_coset_graph(action)
    bad = detect_bad_configuration(space, graph, action)
    if bad is not None:
        raise SpaceError(
            f"bad configuration: cost {bad.total_cost} < required {bad.required}")

    nodes = graph.nodes
    reps, class_of = _metric_quotient(nodes, graph.path_matrix)
    size = len(reps)
    dist = [[0] * size for _ in range(size)]
    for i, u in enumerate(reps):
        for j, v in enumerate(reps):
            d = graph.path_matrix[(u, v)]
            if d is None:
                raise ConsistencyError("orbit graph disconnected")
            dist[i][j] = d

    vs = space.value_set
    clamped = False
    top = vs.max_value()
    if top is not None and vs.is_convex():
        cap = int(Fraction(top) * space.scale)
        for i in range(size):
            for j in range(size):
                if i != j and dist[i][j] > cap:
                    dist[i][j] = cap
                    clamped = True
    attained = {dist[i][j] for i in range(size) for j in range(i)}
    if all(vs.contains(Fraction(v, space.scale)) for v in attained):
        witness_vs = vs
        outside = False
    else:
        witness_vs = DistanceValueSet("finite", values=tuple(
            Fraction(v, space.scale) for v in sorted({0, *attained})))
        outside = True

    z = FiniteMetricSpace(
        labels=tuple(f"w{i}" for i in range(size)),
        scale=space.scale,
        dist=tuple(tuple(row) for row in dist),
        value_set=witness_vs,
        name=(space.name + "_witness") if space.name else "witness")
    zcheck = z.validate()
    if not zcheck:
        raise ConsistencyError("assembled witness is not a metric space:\n"
                               + zcheck.render())

    phi = action.phi()
    embed = tuple(class_of[phi[a]] for a in space.points())
    extensions = {}
    for i, p in enumerate(action.alphabet.letters):
        perm = action.gens[i]
        images = [None] * size
        for u in nodes:
            images[class_of[u]] = class_of[perm[u]]
        if None in images or sorted(images) != list(range(size)):
            raise ConsistencyError("letter translation does not act on the quotient")
        extensions[p] = tuple(images)

    all_stats = {"omega": action.omega, "orbit": len(nodes),
                 "clamped": clamped, "values_outside_declared_set": outside}
    if stats:
        all_stats.update(stats)
    w = EppaWitness(space, z, embed, extensions, provenance, all_stats)
    gate = verify_witness(w)
    if not gate:
        raise ConsistencyError("assembled witness failed verification:\n"
                               + gate.render())
    return w


def action_from_metric_extensions(space, z, embedding, extensions,
                                  alphabet=None) -> QuotientAction:
    """Quotient action on Z's points, relabeled so the base coset phi(a0) is 0."""
    alphabet = alphabet or Alphabet(space)
    a0 = 0
    base_image = embedding[a0]
    relabel = [base_image] + [i for i in range(z.size) if i != base_image]
    position = {old: new for new, old in enumerate(relabel)}
    gens = {}
    for i, p in enumerate(alphabet.letters):
        perm = extensions[p]
        gens[i] = tuple(position[perm[relabel[new]]] for new in range(z.size))
    return QuotientAction(space, alphabet, a0, z.size, gens)


# ---------------------------------------------------------------------------
# Candidate generators for the quotient search
# ---------------------------------------------------------------------------

def _gcd_all(values):
    g = 0
    for v in values:
        while v:
            g, v = v, g % v
    return g


def _candidate_library(space, max_omega):
    """Deterministic stream of small homogeneous candidate spaces.

    Two-value patterns (clique unions, complete multipartite, pentagon and
    3x3-rook patterns) for spaces attaining at most two distances, and
    uniformly weighted cycles; ordered by size.
    """
    attained = space.attained()
    candidates = []
    if len(attained) in (1, 2):
        close = attained[0]
        far = attained[-1]
        sizes = []
        for parts in range(1, max_omega + 1):
            for per in range(1, max_omega + 1):
                n = parts * per
                if space.size <= n <= max_omega and parts * per > 1:
                    sizes.append((parts, per))
        for parts, per in sizes:
            # Unions of equal cliques: close inside, far across (any values).
            candidates.append((parts * per, "cliques", (parts, per, close, far)))
            # Complete multipartite: far inside a part, close across.
            if far <= 2 * close:
                candidates.append((parts * per, "multipartite",
                                   (parts, per, close, far)))
        if far <= 2 * close:
            if space.size <= 5 <= max_omega:
                candidates.append((5, "pentagon", (close, far)))
            if space.size <= 9 <= max_omega:
                candidates.append((9, "rook", (close, far)))
    g = _gcd_all(attained) or 1
    diameter = attained[-1] if attained else 0
    for n in range(max(3, space.size), max_omega + 1):
        if g * (n // 2) >= diameter:
            candidates.append((n, "cycle", (n, g)))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    for _, kind, args in candidates:
        if kind == "cliques":
            parts, per, close, far = args
            yield two_distance_space([per] * parts, close, far, scale=space.scale,
                                     name=f"cliques{parts}x{per}")
        elif kind == "multipartite":
            parts, per, close, far = args
            yield _complement_blocks([per] * parts, close, far, space.scale)
        elif kind == "pentagon":
            close, far = args
            yield _pattern_space(_pentagon_adjacency(), close, far, space.scale,
                                 "pentagon")
        elif kind == "rook":
            close, far = args
            yield _pattern_space(_rook_adjacency(), close, far, space.scale, "rook9")
        else:
            n, weight = args
            yield cycle_space(n, weight=weight, scale=space.scale)


def _complement_blocks(blocks, close, far, scale):
    """Complete multipartite pattern: far within a block, close across."""
    labels = []
    block_of = []
    for bi, sz in enumerate(blocks):
        for k in range(sz):
            labels.append(f"{bi}.{k}")
            block_of.append(bi)
    n = len(labels)
    dist = tuple(tuple(0 if i == j else
                       (int(far) if block_of[i] == block_of[j] else int(close))
                       for j in range(n)) for i in range(n))
    return build_space(tuple(labels), dist, scale=scale,
                       name=f"multipartite{len(blocks)}x{blocks[0]}")


def _pentagon_adjacency():
    return {frozenset((i, (i + 1) % 5)) for i in range(5)}


def _rook_adjacency():
    cells = [(r, c) for r in range(3) for c in range(3)]
    adj = set()
    for i, (r1, c1) in enumerate(cells):
        for j, (r2, c2) in enumerate(cells):
            if i < j and (r1 == r2 or c1 == c2):
                adj.add(frozenset((i, j)))
    return adj


def _pattern_space(adjacency, close, far, scale, name):
    n = max(max(e) for e in adjacency) + 1
    dist = tuple(tuple(0 if i == j else
                       (int(close) if frozenset((i, j)) in adjacency else int(far))
                       for j in range(n)) for i in range(n))
    return build_space(tuple(str(i) for i in range(n)), dist, scale=scale, name=name)


def _find_isometric_embedding(space, z):
    """Backtracking search for an isometric copy of space inside z."""
    n = space.size

    def bt(assign):
        k = len(assign)
        if k == n:
            return tuple(assign)
        for cand in z.points():
            if cand in assign:
                continue
            if all(z.d(cand, assign[j]) == space.d(k, j) for j in range(k)):
                got = bt(assign + [cand])
                if got is not None:
                    return got
        return None

    return bt([])


def _extend_all_letters(space, z, embedding, letters):
    """One extending self-isometry of z per letter, or None."""
    extensions = {}
    for p in letters:
        dom = tuple(embedding[a] for a in p.domain)
        img = tuple(embedding[p(a)] for a in p.domain)
        pairs = sorted(zip(dom, img))
        perm = extend_to_isometry(z, tuple(a for a, _ in pairs),
                                  tuple(b for _, b in pairs))
        if perm is None:
            return None
        extensions[p] = perm
    return extensions


# ---------------------------------------------------------------------------
# Search strategies
# ---------------------------------------------------------------------------

def _try_candidate(space, z, alphabet, stats):
    embedding = _find_isometric_embedding(space, z)
    if embedding is None:
        return None
    extensions = _extend_all_letters(space, z, embedding, alphabet.letters)
    if extensions is None:
        return None
    action = action_from_metric_extensions(space, z, embedding, extensions,
                                           alphabet)
    stats["attempts"] = stats.get("attempts", 0) + 1
    try:
        return witness_from_action(action, provenance="quotient", stats=stats)
    except SpaceError:
        return None


def _random_completion(space, alphabet, omega, rng):
    """Random completion of the forced entries phi = identity embedding.

    Forced: h(p) maps a to p(a) for a in dom p; remaining values are a random
    completion.  Base point is 0 so the omega0 = 0 convention holds.
    """
    gens = {}
    for i, p in enumerate(alphabet.letters):
        image = [None] * omega
        used = set()
        for a in p.domain:
            image[a] = p(a)
            used.add(p(a))
        free_targets = [t for t in range(omega) if t not in used]
        rng.shuffle(free_targets)
        it = iter(free_targets)
        for spot in range(omega):
            if image[spot] is None:
                image[spot] = next(it)
        gens[i] = tuple(image)
    return QuotientAction(space, alphabet, 0, omega, gens)


def search_witness_quotient(space, budget=None) -> EppaWitness | None:
    """Quotient-pipeline witness search.

    Strategy order: (1) Z = X shortcut; (2) greedy completion over the
    deterministic candidate library (embed X, extend every letter by
    backtracking); (3) seeded random completions of the forced partial
    permutations.  Deterministic for identical budgets.  Returns None with
    search statistics attached under `search_witness_quotient.last_stats`
    when the budget is exhausted; never claims nonexistence.
    """
    budget = budget or SearchBudget()
    started = time.monotonic()
    rng = random.Random(budget.rng_seed)
    alphabet = Alphabet(space)
    stats = {"attempts": 0, "strategy": None, "rng_seed": budget.rng_seed}
    search_witness_quotient.last_stats = stats

    def out_of_time():
        return (budget.time_limit_s is not None
                and time.monotonic() - started > budget.time_limit_s)

    # Z = X shortcut (covers all-equal-distance spaces exactly).
    if space.size <= budget.max_omega:
        stats["strategy"] = "shortcut"
        got = _try_candidate(space, space, alphabet, dict(stats))
        if got is not None:
            got.stats["strategy"] = "shortcut"
            return got

    stats["strategy"] = "library"
    for z in _candidate_library(space, budget.max_omega):
        if out_of_time():
            stats["exhausted"] = "time"
            return None
        attempt_stats = dict(stats)
        got = _try_candidate(space, z, alphabet, attempt_stats)
        stats["attempts"] += 1
        if got is not None:
            got.stats["strategy"] = "library"
            got.stats["candidate"] = z.name
            return got

    stats["strategy"] = "random-completion"
    if budget.max_omega < space.size:
        stats["exhausted"] = "omega"
        return None
    for attempt in range(budget.max_attempts):
        if out_of_time():
            stats["exhausted"] = "time"
            return None
        omega = rng.randrange(space.size, budget.max_omega + 1)
        action = _random_completion(space, alphabet, omega, rng)
        stats["attempts"] += 1
        if not check_quotient(space, action):
            continue
        try:
            graph = build_coset_graph(action)
            if detect_bad_configuration(space, graph, action) is not None:
                continue
            return witness_from_action(action, provenance="quotient",
                                       stats=dict(stats))
        except SpaceError:
            continue
    stats["exhausted"] = "attempts"
    return None


search_witness_quotient.last_stats = {}


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_witness(space, max_size, value_set=None, distance_bound=None):
    """Size-ordered exhaustive search over metric extensions of X.

    Enumerates extensions point by point through Katetov functions with
    values in value_set up to distance_bound (scaled), pruning isomorphic
    extensions by canonical matrix forms, and returns the first candidate
    all of whose base partial isometries extend.  Exponential; meant as the
    desk-scale oracle.  Returns None (with .last_stats) when exhausted.
    """
    value_set = value_set or space.value_set
    if distance_bound is None:
        top = value_set.max_value()
        if top is None:
            raise SpaceError("unbounded enumeration needs a distance bound")
        distance_bound = int(Fraction(top) * space.scale)
    letters = enumerate_partial_isometries(space, space.size)
    stats = {"examined": 0}
    brute_force_witness.last_stats = stats

    def as_witness(z):
        embedding = tuple(range(space.size))
        extensions = _extend_all_letters(space, z, embedding, letters)
        if extensions is None:
            return None
        return EppaWitness(space, z, embedding, extensions,
                           provenance="brute-force", stats=dict(stats))

    level = [space]
    seen = {canonical_form(space)}
    for size in range(space.size, max_size + 1):
        for z in level:
            stats["examined"] += 1
            got = as_witness(z)
            if got is not None:
                gate = verify_witness(got)
                if not gate:
                    raise ConsistencyError("oracle witness failed verification:\n"
                                           + gate.render())
                return got
        if size == max_size:
            break
        nxt = []
        for z in level:
            for f in enumerate_katetov(z, value_set, distance_bound):
                if any(v == 0 for v in f.values):
                    continue
                ext = one_point_extension(z, f, f"e{z.size}")
                key = canonical_form(ext)
                if key not in seen:
                    seen.add(key)
                    nxt.append(ext)
        level = nxt
    return None


brute_force_witness.last_stats = {}


# ---------------------------------------------------------------------------
# Graph specialization (S = {0, 1, 2})
# ---------------------------------------------------------------------------

def graph_to_space(n, edges, scale=1, name="graph"):
    """Encode a simple graph as the {1,2}-valued metric space."""
    if n < 1:
        raise SpaceError("graph must be nonempty")
    edge_set = {frozenset(e) for e in edges}
    for e in edge_set:
        if len(e) != 2 or not all(0 <= v < n for v in e):
            raise SpaceError("edges must join two distinct vertices")
    if n == 1:
        return build_space(("0",), ((0,),), scale=scale, name=name)
    dist = tuple(tuple(0 if i == j else
                       (scale if frozenset((i, j)) in edge_set else 2 * scale)
                       for j in range(n)) for i in range(n))
    vs = DistanceValueSet("finite", values=(Fraction(0), Fraction(1), Fraction(2)))
    return FiniteMetricSpace(tuple(str(i) for i in range(n)), scale, dist, vs,
                             name=name)


def space_to_graph(space):
    """Decode distance-1 pairs as edges."""
    edges = {frozenset((i, j)) for i in space.points() for j in range(i)
             if space.true_d(i, j) == 1}
    return space.size, edges


def graph_eppa(n, edges, budget=None):
    """EPPA for a simple graph via the metric engine; returns (witness, graph)."""
    space = graph_to_space(n, edges)
    w = search_witness_quotient(space, budget)
    if w is None:
        w = brute_force_witness(space, max_size=(budget or SearchBudget()).max_omega)
    if w is None:
        return None
    return w, space_to_graph(w.witness)


# ---------------------------------------------------------------------------
# Towers
# ---------------------------------------------------------------------------

@dataclass
class Tower:
    levels: tuple        # chain of spaces, X = levels[0]
    witnesses: tuple     # one EppaWitness per step
    groups: tuple        # PermutationGroup generated by each step's extensions
    complete: bool
    note: str = ""


def build_tower(space, levels, budget=None) -> Tower:
    """Iterate the witness search: Z_{i+1} is a witness for Z_i.

    Each G_i is generated by the extension permutations of level i's partial
    isometries, acting on Z_{i+1}.  A G_i generator is itself a total partial
    isometry of Z_{i+1}, hence a letter at the next level, so its extension
    into G_{i+1} is recorded in the next witness's table.  Stops with a
    partial tower when a level fails within budget.
    """
    if levels < 1:
        raise SpaceError("levels must be >= 1")
    chain = [space]
    witnesses = []
    groups = []
    for _ in range(levels):
        w = search_witness_quotient(chain[-1], budget)
        if w is None:
            return Tower(tuple(chain), tuple(witnesses), tuple(groups), False,
                         note="budget exhausted before the requested depth")
        witnesses.append(w)
        groups.append(PermutationGroup(
            w.witness.size, tuple(sorted(set(w.extensions.values())))))
        chain.append(w.witness)
    return Tower(tuple(chain), tuple(witnesses), tuple(groups), True)


# ---------------------------------------------------------------------------
# Negative control: line-metric constrained search
# ---------------------------------------------------------------------------

def line_witness_search(coords, required_letter, max_size, coord_bound):
    """Search witnesses constrained to subsets of the integer line.

    coords: the base points as integers; required_letter: (domain coords,
    image coords) that must extend.  A self-isometry of a finite subset of
    the line is x -> x + c or x -> c - x, so the check per candidate set is
    immediate.  Returns the witness subset or None; the theory says None for
    the translation letter, since extending it forces an infinite orbit.
    """
    coords = tuple(sorted(coords))
    dom, img = required_letter
    grid = [x for x in range(-coord_bound, coord_bound + 1) if x not in coords]
    base = set(coords)

    def extends(zset):
        # A self-isometry of a finite subset of the line is x -> x + c or
        # x -> c - x, so the letter extends iff one of the two closures holds.
        shifts = {b - a for a, b in zip(dom, img)}
        if len(shifts) == 1:
            c = next(iter(shifts))
            if all((x + c) in zset for x in zset):
                return True
        sums = {a + b for a, b in zip(dom, img)}
        if len(sums) == 1:
            c = next(iter(sums))
            if all((c - x) in zset for x in zset):
                return True
        return False

    for extra in range(0, max_size - len(coords) + 1):
        for added in combinations(grid, extra):
            zset = base | set(added)
            if extends(zset):
                return tuple(sorted(zset))
    return None
