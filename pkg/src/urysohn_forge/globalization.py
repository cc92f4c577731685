"""Free group on partial isometries: partial actions, truncated globalization,
finite-quotient coset actions, labeled coset graphs, path pseudometrics,
bad-configuration detection, and left-system solving.

Words over the alphabet P (all partial isometries of a space X) are tuples of
signed 1-based letter indices; +i is letter i-1, -i its formal inverse, and
the empty tuple is the identity.  A QuotientAction is a concrete permutation
realization of F(P): it fixes a base point a0 in X, a finite carrier set
omega with the convention omega0 = 0, and one permutation per letter.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .spaces import (
    ConsistencyError,
    FiniteMetricSpace,
    PartialIsometry,
    SpaceError,
    ValidationReport,
    Violation,
    enumerate_partial_isometries,
    identity_isometry,
    perm_identity,
    perm_inv,
    perm_mul,
)


# ---------------------------------------------------------------------------
# Alphabet and words
# ---------------------------------------------------------------------------

class Alphabet:
    """Canonical letter list: every partial isometry of the space."""

    def __init__(self, space, letters=None):
        self.space = space
        if letters is None:
            letters = enumerate_partial_isometries(space, space.size)
        self.letters = tuple(letters)
        self.index = {p: i for i, p in enumerate(self.letters)}
        if len(self.index) != len(self.letters):
            raise SpaceError("alphabet letters must be distinct")
        self.inverse_index = tuple(self.index[p.inverse()] for p in self.letters)

    def __len__(self):
        return len(self.letters)

    def letter(self, signed):
        """The partial isometry for a signed index (inverse for negatives)."""
        if signed > 0:
            return self.letters[signed - 1]
        return self.letters[-signed - 1].inverse()

    def singleton(self, a, b):
        """Index of the letter with domain {a} mapped to b."""
        return self.index[PartialIsometry((a,), (b,))]

    def word_str(self, word):
        if not word:
            return "e"
        return ".".join((f"p{s - 1}" if s > 0 else f"p{-s - 1}^-1") for s in word)


def reduce_word(word) -> tuple:
    """Free reduction: cancel adjacent s, -s pairs."""
    stack = []
    for s in word:
        if s == 0:
            raise SpaceError("0 is not a letter index")
        if stack and stack[-1] == -s:
            stack.pop()
        else:
            stack.append(s)
    return tuple(stack)


def word_inverse(word):
    return tuple(-s for s in reversed(word))


def word_concat(*words):
    out = ()
    for w in words:
        out = reduce_word(out + tuple(w))
    return out


def eval_partial_action(alphabet, word):
    """The partial isometry defined by a word; None when the domain is empty.

    The empty word acts as the identity.  Letters compose right to left:
    (uv).x = u.(v.x) wherever defined.
    """
    word = reduce_word(word)
    current = identity_isometry(alphabet.space)
    for s in reversed(word):
        current = alphabet.letter(s).compose(current)
        if current is None:
            return None
    return current


# ---------------------------------------------------------------------------
# Truncated Megrelishvili-Schroeder globalization
# ---------------------------------------------------------------------------

@dataclass
class TruncatedGlobalization:
    """Window of the universal globalization: classes of pairs (u, x), |u| <= L.

    The full object is the quotient of F x X by (uv, x) ~ (u, v.x); it is
    infinite, so only the window of representatives with |u| <= L is
    materialized.  Since the single shrinking move (strip the last letter of
    u when it acts on x) is deterministic, window classes agree with the
    classes of the full quotient restricted to the window, and the classes
    at L embed into the classes at L+1.
    """

    space: FiniteMetricSpace
    alphabet: Alphabet
    length: int
    classes: tuple          # tuple of frozensets of (word, point)
    class_of: dict          # (word, point) -> class index

    def class_count(self):
        return len(self.classes)

    def act(self, signed, cls):
        """g . [u, x] = [gu, x] when some representative stays in the window."""
        for word, x in self.classes[cls]:
            gw = reduce_word((signed,) + word)
            if len(gw) <= self.length and (gw, x) in self.class_of:
                return self.class_of[(gw, x)]
        return None


def _words_upto(alphabet, length):
    """All reduced words of length <= `length`, BFS order."""
    out = [()]
    frontier = [()]
    letters = [s for i in range(len(alphabet)) for s in (i + 1, -(i + 1))]
    for _ in range(length):
        new = []
        for w in frontier:
            for s in letters:
                if w and w[-1] == -s:
                    continue
                new.append(w + (s,))
        out.extend(new)
        frontier = new
    return out


def build_truncated_globalization(space, length, alphabet=None):
    """Close the relation (u s, x) ~ (u, s.x) over the window |u| <= length."""
    if length < 0:
        raise SpaceError("length must be >= 0")
    alphabet = alphabet or Alphabet(space)
    pairs = [(w, x) for w in _words_upto(alphabet, length) for x in space.points()]
    parent = {p: p for p in pairs}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    def union(p, q):
        rp, rq = find(p), find(q)
        if rp != rq:
            parent[max(rp, rq)] = min(rp, rq)

    for w, x in pairs:
        if not w:
            continue
        s = w[-1]
        letter = alphabet.letter(s)
        if letter.defined_at(x):
            union((w, x), (w[:-1], letter(x)))
    roots = {}
    members = {}
    for p in pairs:
        r = find(p)
        members.setdefault(r, []).append(p)
    classes = tuple(frozenset(members[r]) for r in sorted(members))
    class_of = {}
    for ci, cls in enumerate(classes):
        for p in cls:
            class_of[p] = ci
    return TruncatedGlobalization(space, alphabet, length, classes, class_of)


# ---------------------------------------------------------------------------
# Subgroup data X0 / X1
# ---------------------------------------------------------------------------

def emit_subgroup_data(space, a0, alphabet=None):
    """Exact generator/avoidance word lists at the base point.

    X0 = {p^-1 p' : p(a0) = p'(a0)} together with {p3^-1 p1 p2 :
    p1(p2(a0)) = p3(a0)}; X1 = {p^-1 p' : p(a0) != p'(a0)}.  Words are
    reduced and deduplicated.  Cubic in the alphabet; meant for small spaces
    (check_quotient uses the equivalent per-letter conditions instead).
    """
    alphabet = alphabet or Alphabet(space)
    at_a0 = [(i, p(a0)) for i, p in enumerate(alphabet.letters) if p.defined_at(a0)]
    x0, x1 = [], []
    for i, pi_val in at_a0:
        for j, pj_val in at_a0:
            word = reduce_word((-(i + 1), j + 1))
            (x0 if pi_val == pj_val else x1).append(word)
    by_value = {}
    for i, v in at_a0:
        by_value.setdefault(v, []).append(i)
    for j, pj_val in at_a0:                       # p2 with p2(a0) defined
        for i, p1 in enumerate(alphabet.letters):  # p1 defined at p2(a0)
            if not p1.defined_at(pj_val):
                continue
            c = p1(pj_val)
            for k in by_value.get(c, ()):          # p3 with p3(a0) = c
                x0.append(reduce_word((-(k + 1), i + 1, j + 1)))
    x0 = sorted(set(x0), key=lambda w: (len(w), w))
    x1 = sorted(set(x1), key=lambda w: (len(w), w))
    return x0, x1


# ---------------------------------------------------------------------------
# Quotient actions
# ---------------------------------------------------------------------------

class QuotientAction:
    """A finite permutation realization of F(P) with base coset omega0 = 0."""

    def __init__(self, space, alphabet, base_point, omega, gens):
        self.space = space
        self.alphabet = alphabet
        self.base_point = base_point
        self.omega = omega
        self.gens = {int(i): tuple(p) for i, p in gens.items()}
        self._phi = None
        self._orbit = None

    def gen(self, signed):
        """Permutation image of a signed letter index."""
        perm = self.gens[abs(signed) - 1]
        return perm if signed > 0 else perm_inv(perm)

    def eval_word(self, word):
        perm = perm_identity(self.omega)
        for s in word:
            perm = perm_mul(perm, self.gen(s))   # rightmost letter acts first
        return perm

    def apply_word(self, word, point):
        for s in reversed(word):
            point = self.gen(s)[point]
        return point

    def phi(self):
        """The map X -> omega, phi(a) = h(p).0 for any letter p with p(a0) = a."""
        if self._phi is None:
            phi = {}
            for i, p in enumerate(self.alphabet.letters):
                if not p.defined_at(self.base_point):
                    continue
                a = p(self.base_point)
                value = self.gens[i][0]
                if phi.setdefault(a, value) != value:
                    raise SpaceError("phi is not well-defined for this action")
            if set(phi) != set(self.space.points()):
                raise ConsistencyError("alphabet lacks a singleton letter")
            self._phi = tuple(phi[a] for a in self.space.points())
        return self._phi

    def orbit(self):
        if self._orbit is None:
            seen = {0}
            frontier = [0]
            perms = [self.gens[i] for i in sorted(self.gens)]
            perms += [perm_inv(p) for p in perms]
            while frontier:
                new = []
                for x in frontier:
                    for p in perms:
                        y = p[x]
                        if y not in seen:
                            seen.add(y)
                            new.append(y)
                frontier = new
            self._orbit = tuple(sorted(seen))
        return self._orbit

    def to_json(self):
        return {
            "space": self.space.name,
            "base_point": self.space.labels[self.base_point],
            "omega": self.omega,
            "gens": {str(i): list(p) for i, p in sorted(self.gens.items())},
            "alphabet": [
                {"dom": [self.space.labels[a] for a in p.domain],
                 "img": [self.space.labels[b] for b in p.image]}
                for p in self.alphabet.letters
            ],
        }

    @staticmethod
    def from_json(data, space, alphabet=None):
        if data.get("space") and space.name and data["space"] != space.name:
            raise SpaceError(f"action references space {data['space']!r}, "
                             f"got {space.name!r}")
        alphabet = alphabet or Alphabet(space)
        if "alphabet" in data:
            listed = [
                PartialIsometry(tuple(space.index(a) for a in e["dom"]),
                                tuple(space.index(b) for b in e["img"]))
                for e in data["alphabet"]
            ]
            if tuple(listed) != alphabet.letters:
                raise SpaceError("alphabet order in file does not match the "
                                 "canonical enumeration")
        gens = {int(i): tuple(int(x) for x in p) for i, p in data["gens"].items()}
        return QuotientAction(space, alphabet, space.index(data["base_point"]),
                              int(data["omega"]), gens)


def check_quotient(space, action) -> ValidationReport:
    """Verify the subgroup conditions for the action.

    Checks, in an exactly equivalent per-letter form (see module notes):
      * every generator image is a permutation of omega;
      * phi well-definedness  (= the pair part of X0 stabilizing 0);
      * phi injectivity       (= X1 avoiding the stabilizer of 0);
      * h(p) . phi(a) = phi(p(a)) for every letter and a in dom p
        (= the triple part of X0, since every b in X is p2(a0) for some p2).
    """
    bad = []
    if set(action.gens) != set(range(len(action.alphabet))):
        return ValidationReport((Violation(
            "structural", (), "one permutation per alphabet letter required"),))
    for i, perm in action.gens.items():
        if sorted(perm) != list(range(action.omega)):
            bad.append(Violation("structural", (i,),
                                 "generator image is not a permutation of omega"))
    if bad:
        return ValidationReport(tuple(bad))

    phi = {}
    for i, p in enumerate(action.alphabet.letters):
        if not p.defined_at(action.base_point):
            continue
        a = p(action.base_point)
        value = action.gens[i][0]
        if a in phi and phi[a] != value:
            bad.append(Violation(
                "x0-stabilization", (i,),
                f"letters p{i} and a previous letter send a0 to "
                f"{space.labels[a]} but move the base coset differently"))
        phi.setdefault(a, value)
    if bad:
        return ValidationReport(tuple(bad))
    values = [phi[a] for a in space.points()]
    if values[action.base_point] != 0:
        # Letters fixing a0 are themselves X0 words (p3^-1 p1 p2 with
        # p1 = p3 reduces to p2), so the base coset must be fixed.
        bad.append(Violation(
            "x0-stabilization", (action.base_point,),
            "letters fixing the base point must stabilize coset 0"))
    for a in space.points():
        for b in range(a):
            if values[a] == values[b]:
                bad.append(Violation(
                    "x1-avoidance", (a, b),
                    f"phi({space.labels[a]}) = phi({space.labels[b]}); a word of "
                    "X1 lands in the stabilizer"))
    for i, p in enumerate(action.alphabet.letters):
        perm = action.gens[i]
        for a in p.domain:
            if perm[values[a]] != values[p(a)]:
                bad.append(Violation(
                    "restriction", (i, a),
                    f"translation of letter p{i} does not extend it at "
                    f"{space.labels[a]}"))
    return ValidationReport(tuple(bad))


def trivial_quotient(space, alphabet=None):
    """The one-point quotient; rejected whenever X1 is nonempty."""
    alphabet = alphabet or Alphabet(space)
    gens = {i: (0,) for i in range(len(alphabet))}
    return QuotientAction(space, alphabet, 0, 1, gens)


# ---------------------------------------------------------------------------
# Labeled coset graphs and the path pseudometric
# ---------------------------------------------------------------------------

INF = None  # unreachable marker in path matrices


@dataclass
class LabeledCosetGraph:
    """Edge-labeled graph on the orbit of the base coset, with exact paths.

    Edges are seeded by {(phi(a), phi(a'), d_X(a, a'))} and closed under the
    diagonal pair action of the generated permutation group; the paper
    quantifies the edge rule over all of F, which agrees because an edge
    only depends on the permutation image of the group element.  Labels are
    scaled integers; path_matrix holds exact shortest-path values.
    """

    action: QuotientAction
    nodes: tuple                 # sorted orbit
    edge_labels: dict            # (u, v) -> sorted tuple of labels, u < v
    edge_witness: dict           # (u, v, label) -> (word, c, d) with u=w.phi(c)
    path_matrix: dict            # (u, v) -> scaled int
    connected: bool

    def node_index(self):
        return {v: i for i, v in enumerate(self.nodes)}

    def path(self, u, v):
        return self.path_matrix[(u, v)]

    def min_label(self, u, v):
        key = (u, v) if u < v else (v, u)
        labels = self.edge_labels.get(key)
        return labels[0] if labels else None


def build_coset_graph(action) -> LabeledCosetGraph:
    """Seed edges from X, close under the pair action, run exact Dijkstra."""
    space = action.space
    phi = action.phi()
    nodes = action.orbit()
    node_set = set(nodes)

    # Pair-orbit closure with witness words.  States are (u, v, label).
    edge_labels = {}
    edge_witness = {}
    queue = []
    for c in space.points():
        for d_ in space.points():
            if c == d_:
                continue
            u, v = phi[c], phi[d_]
            if u == v:
                continue
            r = space.d(c, d_)
            state = (u, v, r)
            if state not in edge_witness:
                edge_witness[state] = ((), c, d_)
                queue.append(state)
    signed_letters = [s for i in sorted(action.gens) for s in (i + 1, -(i + 1))]
    head = 0
    while head < len(queue):
        u, v, r = queue[head]
        head += 1
        word, c, d_ = edge_witness[(u, v, r)]
        for s in signed_letters:
            perm = action.gen(s)
            state = (perm[u], perm[v], r)
            if state not in edge_witness:
                edge_witness[state] = (reduce_word((s,) + word), c, d_)
                queue.append(state)
    for (u, v, r) in edge_witness:
        key = (u, v) if u < v else (v, u)
        edge_labels.setdefault(key, set()).add(r)
    edge_labels = {k: tuple(sorted(vs)) for k, vs in edge_labels.items()}

    # Exact Dijkstra from every orbit node over minimum labels.
    adjacency = {u: [] for u in nodes}
    for (u, v), labels in edge_labels.items():
        if u in node_set and v in node_set:
            adjacency[u].append((v, labels[0]))
            adjacency[v].append((u, labels[0]))
    path_matrix = {}
    connected = True
    for src in nodes:
        dist = {src: 0}
        heap = [(0, src)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            for v, w in adjacency[u]:
                nd = du + w
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        for v in nodes:
            if v not in dist:
                connected = False
                path_matrix[(src, v)] = INF
            else:
                path_matrix[(src, v)] = dist[v]
    return LabeledCosetGraph(action, nodes, edge_labels, edge_witness,
                             path_matrix, connected)


# ---------------------------------------------------------------------------
# Bad configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BadConfiguration:
    """A witness chain undercutting d_X in the coset graph.

    Conditions, modulo the stabilizer subgroup H of the base coset:
      (1) x_1 p_1 = p,  (2) x_{i+1} p_{i+1} = x_i q_i for i < n,
      (3) x_n q_n = q,  (4) sum d_X(p_i(a0), q_i(a0)) < d_X(p(a0), q(a0)).
    Letters are indices into the alphabet; x_i are reduced words.
    """

    n: int
    pairs: tuple        # ((p_i, q_i), ...) letter indices
    words: tuple        # (x_1, ..., x_n)
    endpoint_p: int
    endpoint_q: int
    total_cost: int
    required: int


def _verify_bad_configuration(action, cfg):
    a0 = action.base_point
    alphabet = action.alphabet

    def coset(word):
        return action.apply_word(word, 0)

    lhs = coset(cfg.words[0] + (cfg.pairs[0][0] + 1,))
    if lhs != coset((cfg.endpoint_p + 1,)):
        return False
    for i in range(cfg.n - 1):
        a = coset(cfg.words[i + 1] + (cfg.pairs[i + 1][0] + 1,))
        b = coset(cfg.words[i] + (cfg.pairs[i][1] + 1,))
        if a != b:
            return False
    if coset(cfg.words[-1] + (cfg.pairs[-1][1] + 1,)) != coset((cfg.endpoint_q + 1,)):
        return False
    space = action.space
    cost = sum(space.d(alphabet.letters[p](a0), alphabet.letters[q](a0))
               for p, q in cfg.pairs)
    need = space.d(alphabet.letters[cfg.endpoint_p](a0),
                   alphabet.letters[cfg.endpoint_q](a0))
    return cost == cfg.total_cost and need == cfg.required and cost < need


def detect_bad_configuration(space, graph, action):
    """Shortest-path detection: a bad configuration exists iff some pair of
    X-points has coset path distance strictly below d_X.  Returns a fully
    verified witness chain, or None.
    """
    phi = action.phi()
    a0 = action.base_point
    alphabet = action.alphabet
    for a in space.points():
        for b in space.points():
            if a == b:
                continue
            need = space.d(a, b)
            pa, pb = phi[a], phi[b]
            p_letter = alphabet.singleton(a0, a)
            q_letter = alphabet.singleton(a0, b)
            if pa == pb:
                # Collapsed pair: the one-step chain with p_1 = q_1 = id at a0
                # has cost 0 < d_X(a, b).  x_1 = p . id^-1 moves phi(a0) to
                # phi(a) whatever coset phi(a0) occupies.
                id_letter = alphabet.singleton(a0, a0)
                cfg = BadConfiguration(
                    n=1,
                    pairs=((id_letter, id_letter),),
                    words=(reduce_word((p_letter + 1, -(id_letter + 1))),),
                    endpoint_p=p_letter,
                    endpoint_q=q_letter,
                    total_cost=0,
                    required=need)
                if not _verify_bad_configuration(action, cfg):
                    raise ConsistencyError("collapsed-pair witness failed checks")
                return cfg
            dp = graph.path(pa, pb)
            if dp is INF or dp >= need:
                continue
            chain = _shortest_chain(graph, pa, pb)
            pairs = []
            words = []
            for (u, v, r) in chain:
                if (u, v, r) in graph.edge_witness:
                    word, c, d_ = graph.edge_witness[(u, v, r)]
                else:
                    word, d_, c = graph.edge_witness[(v, u, r)]
                pairs.append((alphabet.singleton(a0, c), alphabet.singleton(a0, d_)))
                words.append(word)
            cfg = BadConfiguration(
                n=len(chain),
                pairs=tuple(pairs),
                words=tuple(words),
                endpoint_p=p_letter,
                endpoint_q=q_letter,
                total_cost=dp,
                required=need)
            if not _verify_bad_configuration(action, cfg):
                raise ConsistencyError("shortest-path witness failed the "
                                       "definition checks")
            return cfg
    return None


def _shortest_chain(graph, src, dst):
    """Edges (u, v, label) along one shortest path from src to dst."""
    dist = {src: 0}
    prev = {}
    heap = [(0, src)]
    adjacency = {}
    for (u, v), labels in graph.edge_labels.items():
        adjacency.setdefault(u, []).append((v, labels[0]))
        adjacency.setdefault(v, []).append((u, labels[0]))
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for v, w in adjacency.get(u, ()):
            nd = du + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = (u, w)
                heapq.heappush(heap, (nd, v))
    if dst not in dist:
        raise ConsistencyError("orbit graph is not connected along the orbit")
    chain = []
    at = dst
    while at != src:
        u, w = prev[at]
        chain.append((u, at, w))
        at = u
    chain.reverse()
    return chain


def bad_configuration_by_enumeration(space, action, max_steps=None):
    """Cross-validation oracle: bounded literal chain enumeration.

    Dynamic programming over (current coset, accumulated cost): a chain step
    from coset beta picks X-points (c, d) and any group element g with
    g.phi(c) = beta, landing on g.phi(d) at cost d_X(c, d).  Reachable
    (g.phi(c), g.phi(d)) pairs are recomputed here by a per-seed fixed-point
    closure, independent of build_coset_graph's BFS.  Step counts are bounded
    by required_cost / min positive distance since labels are positive.
    Returns True iff a bad configuration exists for some endpoint pair.
    """
    phi = action.phi()
    perms = [action.gens[i] for i in sorted(action.gens)]
    perms += [perm_inv(p) for p in perms]

    def pair_closure(seed):
        seen = {seed}
        frontier = [seed]
        while frontier:
            new = []
            for (u, v) in frontier:
                for p in perms:
                    q = (p[u], p[v])
                    if q not in seen:
                        seen.add(q)
                        new.append(q)
            frontier = new
        return seen

    steps = []
    for c in space.points():
        for d_ in space.points():
            if c == d_:
                continue
            for (u, v) in pair_closure((phi[c], phi[d_])):
                steps.append((u, v, space.d(c, d_)))

    positive = sorted({space.d(i, j) for i in space.points() for j in range(i)})
    min_step = positive[0] if positive else 1
    for a in space.points():
        for b in space.points():
            if a == b:
                continue
            need = space.d(a, b)
            if phi[a] == phi[b]:
                return True
            limit = max_steps if max_steps is not None else need // min_step + 1
            # Bellman-Ford style relaxation, at most `limit` chain steps.
            best = {phi[a]: 0}
            for _ in range(limit):
                updated = False
                new_best = dict(best)
                for (u, v, r) in steps:
                    if u in best and best[u] + r < new_best.get(v, need):
                        new_best[v] = best[u] + r
                        updated = True
                best = new_best
                if not updated:
                    break
            if best.get(phi[b], need) < need:
                return True
    return False


# ---------------------------------------------------------------------------
# Left systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeftEquation:
    """x =_i y . g  (unknown rhs) or x =_i g (constant rhs); g a reduced word."""

    lhs: str
    index: int
    rhs_word: tuple
    rhs_unknown: str | None = None


@dataclass(frozen=True)
class LeftSystem:
    unknowns: tuple
    equations: tuple

    def __post_init__(self):
        names = set(self.unknowns)
        for eq in self.equations:
            if eq.lhs not in names:
                raise SpaceError(f"dangling unknown {eq.lhs!r}")
            if eq.rhs_unknown is not None and eq.rhs_unknown not in names:
                raise SpaceError(f"dangling unknown {eq.rhs_unknown!r}")
            if reduce_word(eq.rhs_word) != tuple(eq.rhs_word):
                raise SpaceError("equation words must be reduced")


class SearchBudgetExceeded(RuntimeError):
    pass


def _diagonal_image(quotients, cap):
    """The image of F under the diagonal map into the product of the quotients.

    Elements are tuples of permutations, tracked with a defining word.  Each
    supplied subgroup H_i is the full preimage of the base-coset stabilizer,
    so it contains the kernel of the map; solvability over F mod the H_i is
    therefore equivalent to solvability over this finite image.
    """
    n_letters = len(quotients[0].alphabet)
    for q in quotients[1:]:
        if len(q.alphabet) != n_letters:
            raise SpaceError("quotients must share one alphabet")
    identity = tuple(perm_identity(q.omega) for q in quotients)
    elements = {identity: ()}
    frontier = [identity]
    signed = [s for i in range(n_letters) for s in (i + 1, -(i + 1))]
    images = {s: tuple(q.gen(s) for q in quotients) for s in signed}
    while frontier:
        new = []
        for el in frontier:
            word = elements[el]
            for s in signed:
                nxt = tuple(perm_mul(images[s][k], el[k]) for k in range(len(el)))
                if nxt not in elements:
                    elements[nxt] = reduce_word((s,) + word)
                    new.append(nxt)
                    if len(elements) > cap:
                        raise SearchBudgetExceeded(
                            f"diagonal image exceeds cap {cap}")
        frontier = new
    return elements, images


def solve_left_system(system, quotients, cap=200_000):
    """Decide solvability modulo the quotients' base-coset stabilizers.

    Returns {unknown: reduced word} or None.  Exact: unknowns range over the
    finite diagonal image of F (see _diagonal_image); backtracking with the
    coset constraints.  Raises SearchBudgetExceeded when the image outgrows
    the cap.
    """
    if not quotients:
        raise SpaceError("at least one quotient required")
    for eq in system.equations:
        if not 1 <= eq.index <= len(quotients):
            raise SpaceError(f"equation index {eq.index} has no quotient")
    elements, images = _diagonal_image(quotients, cap)
    element_list = sorted(elements, key=lambda el: (len(elements[el]), elements[el]))

    def word_image(word):
        out = tuple(perm_identity(q.omega) for q in quotients)
        for s in word:
            out = tuple(perm_mul(out[k], images[s][k]) for k in range(len(out)))
        return out

    def coset_at(el, idx):
        return el[idx - 1][0]

    by_unknown = {u: [] for u in system.unknowns}
    for eq in system.equations:
        by_unknown[eq.lhs].append(eq)
        if eq.rhs_unknown is not None:
            by_unknown[eq.rhs_unknown].append(eq)

    order = sorted(system.unknowns)
    assignment = {}

    def consistent(eq):
        if eq.lhs not in assignment:
            return True
        lhs_val = coset_at(assignment[eq.lhs], eq.index)
        g_img = word_image(eq.rhs_word)
        if eq.rhs_unknown is None:
            return lhs_val == g_img[eq.index - 1][0]
        if eq.rhs_unknown not in assignment:
            return True
        rhs = assignment[eq.rhs_unknown]
        combined = perm_mul(rhs[eq.index - 1], g_img[eq.index - 1])
        return lhs_val == combined[0]

    def bt(k):
        if k == len(order):
            return True
        u = order[k]
        for el in element_list:
            assignment[u] = el
            if all(consistent(eq) for eq in by_unknown[u]):
                if bt(k + 1):
                    return True
            del assignment[u]
        return False

    if bt(0):
        return {u: elements[assignment[u]] for u in system.unknowns}
    return None


def product_of_stabilizers_contains(quotients, word, cap=200_000):
    """Oracle: whether word lies in H_1 H_2 ... H_n (stabilizer preimages).

    Computed by multiplying the stabilizer images inside the diagonal image
    group; exact for the same kernel reason as solve_left_system.
    """
    elements, images = _diagonal_image(quotients, cap)

    def word_image(w):
        out = tuple(perm_identity(q.omega) for q in quotients)
        for s in w:
            out = tuple(perm_mul(out[k], images[s][k]) for k in range(len(out)))
        return out

    target = word_image(word)
    current = {tuple(perm_identity(q.omega) for q in quotients)}
    for idx in range(len(quotients)):
        h_i = [el for el in elements if el[idx][0] == 0]
        current = {tuple(perm_mul(a[k], h[k]) for k in range(len(a)))
                   for a in current for h in h_i}
    return target in current


def chain_left_system(quotients, word):
    """The Ribes-Zalesskii chain system: solvable iff word in H_1 ... H_n."""
    n = len(quotients)
    unknowns = tuple(f"x{i}" for i in range(1, n + 1))
    eqs = [LeftEquation(lhs=f"x{n}", index=n, rhs_word=reduce_word(word))]
    for i in range(n - 1, 0, -1):
        eqs.append(LeftEquation(lhs=f"x{i}", index=i, rhs_word=(),
                                rhs_unknown=f"x{i + 1}"))
    # x1 =_1 e is the i = 0 boundary; the loop above stops at x1 =_1 x2, so
    # add the closing constant equation explicitly.
    eqs.append(LeftEquation(lhs="x1", index=1, rhs_word=()))
    return LeftSystem(unknowns, tuple(eqs))


def bad_configuration_left_system(action, cfg):
    """Encode a bad configuration as a left system over the single quotient."""
    eqs = [LeftEquation(
        lhs="x1", index=1,
        rhs_word=reduce_word((cfg.endpoint_p + 1, -(cfg.pairs[0][0] + 1))))]
    for i in range(cfg.n - 1):
        eqs.append(LeftEquation(
            lhs=f"x{i + 2}", index=1,
            rhs_word=reduce_word((cfg.pairs[i][1] + 1, -(cfg.pairs[i + 1][0] + 1))),
            rhs_unknown=f"x{i + 1}"))
    eqs.append(LeftEquation(
        lhs=f"x{cfg.n}", index=1,
        rhs_word=reduce_word((cfg.endpoint_q + 1, -(cfg.pairs[-1][1] + 1)))))
    unknowns = tuple(f"x{i}" for i in range(1, cfg.n + 1))
    return LeftSystem(unknowns, tuple(eqs))
