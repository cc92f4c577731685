"""Group-averaged embeddings and uniform-convexity obstruction certificates.

Exact rational arithmetic wherever an identity is claimed exactly (averaging,
equivariance, tree midpoints, hull membership); floating point with stated
tolerances for the optimization-backed quantities (moduli, hull separation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spaces import (
    ConsistencyError,
    SpaceError,
    ValidationReport,
    Violation,
    empirical_envelopes,
    is_distance_preserving,
    perm_inv,
    perm_mul,
)
from .util import pmap


def _frac_vec(vec):
    return tuple(Fraction(x) for x in vec)


def _sq_norm(vec):
    return sum(x * x for x in vec)


def _sq_dist(u, v):
    return sum((a - b) * (a - b) for a, b in zip(u, v))


# ---------------------------------------------------------------------------
# Averaged embeddings
# ---------------------------------------------------------------------------

class AveragedEmbedding:
    """psi(x)[g] = |F|^{-1/2} phi(g^{-1} x), blocks indexed by the group.

    Blocks are kept unscaled with the 1/|F| factor tracked symbolically, so
    the quadratic-mean identity
        |F| * ||psi(x) - psi(y)||_2^2 = sum_g ||phi(g^{-1}x) - phi(g^{-1}y)||_2^2
    holds exactly on rational inputs.  The ultrafilter-limit data of the
    paper has no finite counterpart; base_point is recorded as metadata only.
    """

    def __init__(self, space, group, phi, p=2, base_point=0):
        self.space = space
        self.group = group
        self.elements = group.elements()
        self.phi = tuple(_frac_vec(v) for v in phi)
        self.p = p
        self.dim = len(self.phi[0]) if self.phi else 0
        self.base_point = base_point
        if len(self.phi) != space.size:
            raise SpaceError("one phi vector per point required")
        if len({len(v) for v in self.phi}) > 1:
            raise SpaceError("phi vectors have mismatched dimensions")

    def block(self, x, g):
        ginv = perm_inv(g)
        return self.phi[ginv[x]]

    def blocks(self, x):
        """The unscaled block tuple of psi(x), ordered by self.elements."""
        return tuple(self.block(x, g) for g in self.elements)

    def sq_distance(self, x, y):
        """Exact ||psi(x) - psi(y)||_2^2 (p = 2 blocks)."""
        total = Fraction(0)
        for g in self.elements:
            total += _sq_dist(self.block(x, g), self.block(y, g))
        return total / len(self.elements)

    def distance(self, x, y):
        """Float distance in the l2-sum of l_p blocks."""
        if self.p == 2:
            return math.sqrt(self.sq_distance(x, y))
        acc = 0.0
        for g in self.elements:
            bx, by = self.block(x, g), self.block(y, g)
            diff = [float(a - b) for a, b in zip(bx, by)]
            if self.p == "inf":
                nrm = max(abs(t) for t in diff) if diff else 0.0
            else:
                q = float(self.p)
                nrm = sum(abs(t) ** q for t in diff) ** (1.0 / q)
            acc += nrm * nrm
        return math.sqrt(acc / len(self.elements))

    def translated_blocks(self, h, x):
        """Left translation: (h . psi(x))[g] = psi(x)[h^{-1} g]."""
        hinv = perm_inv(h)
        return tuple(self.block(x, perm_mul(hinv, g)) for g in self.elements)

    def float_vector(self, x):
        """Concatenated float realization including the 1/sqrt|F| factor."""
        s = 1.0 / math.sqrt(len(self.elements))
        out = []
        for b in self.blocks(x):
            out.extend(float(t) * s for t in b)
        return out


def average_map(space, group, phi, p=2, base_point=0) -> AveragedEmbedding:
    """Build the averaged embedding and verify its exact identities.

    Rejects group elements that are not isometries; asserts F-equivariance
    (block translation by h equals the blocks of psi(hx)) and, for p = 2,
    that the averaged envelopes stay inside phi's envelopes (a quadratic
    mean of values in [lo, hi] stays in [lo, hi]).
    """
    pts = tuple(space.points())
    for g in group.elements():
        if not is_distance_preserving(space, pts, g):
            raise SpaceError("group element is not an isometry of the space")
    emb = AveragedEmbedding(space, group, phi, p=p, base_point=base_point)
    for h in emb.elements:
        for x in space.points():
            if emb.translated_blocks(h, x) != emb.blocks(h[x]):
                raise ConsistencyError("equivariance identity failed")
    if p == 2 and space.size > 1:
        base_env = empirical_envelopes(space, [[float(t) for t in v]
                                               for v in emb.phi], 2)
        avg_images = [emb.float_vector(x) for x in space.points()]
        avg_env = empirical_envelopes(space, avg_images, 2)
        for (r, lo, hi), (r2, lo2, hi2) in zip(base_env.pairs(), avg_env.pairs()):
            if not (lo - 1e-9 <= lo2 and hi2 <= hi + 1e-9):
                raise ConsistencyError("averaging left the envelope band")
    return emb


@dataclass(frozen=True)
class MetricTransformResult:
    is_transform: bool
    table: tuple            # ((r_scaled, image distance), ...) when transform
    violation: tuple = ()   # ((x, y), (u, v)) pair of pairs otherwise


def check_metric_transform(space, distances, tol=0) -> MetricTransformResult:
    """Whether image distance depends on source distance alone.

    `distances` is a callable (x, y) -> number (exact Fractions give an exact
    verdict with tol = 0).  Returns the table r -> rho(r) or the violating
    pair of pairs.
    """
    by_r = {}
    witness = {}
    for x in space.points():
        for y in range(x):
            r = space.d(x, y)
            val = distances(x, y)
            if r in by_r:
                if abs(val - by_r[r]) > tol:
                    return MetricTransformResult(
                        False, (), (witness[r], (x, y)))
            else:
                by_r[r] = val
                witness[r] = (x, y)
    return MetricTransformResult(
        True, tuple(sorted((r, by_r[r]) for r in by_r)))


def metric_transform_from_vectors(space, vectors, tol=0):
    """check_metric_transform for an explicit embedding, exact on rationals.

    Compares squared l2 distances (rational inputs give an exact verdict at
    tol = 0); the returned table maps r to the squared image distance.
    """
    vecs = [_frac_vec(v) for v in vectors]

    def distances(x, y):
        return _sq_dist(vecs[x], vecs[y])

    return check_metric_transform(space, distances, tol=tol)


# ---------------------------------------------------------------------------
# Moduli of convexity and smoothness (l_p on R^dim)
# ---------------------------------------------------------------------------

def delta_l2_closed_form(eps):
    return 1.0 - math.sqrt(max(0.0, 1.0 - (eps / 2.0) ** 2))


def rho_l2_closed_form(tau):
    return math.sqrt(1.0 + tau * tau) - 1.0


def l1_flatness_witness(eps):
    """Unit vectors on a common face of the l1 ball with ||x - y||_1 = eps.

    Their midpoint stays on the unit sphere, so 1 - ||mid||_1 = 0 exactly.
    """
    eps = Fraction(eps)
    if not 0 < eps <= 2:
        raise SpaceError("eps must lie in (0, 2]")
    x = (Fraction(1), Fraction(0))
    y = (1 - eps / 2, eps / 2)
    mid = tuple((a + b) / 2 for a, b in zip(x, y))
    assert abs(x[0] - y[0]) + abs(x[1] - y[1]) == eps
    assert abs(mid[0]) + abs(mid[1]) == 1
    return x, y


def _norm(vec, p):
    if p == "inf":
        return float(np.max(np.abs(vec)))
    return float(np.sum(np.abs(vec) ** p) ** (1.0 / p))


def modulus_convexity(p, dim, eps_grid):
    """delta(eps) = inf {1 - ||(x+y)/2|| : ||x||,||y|| <= 1, ||x-y|| >= eps}.

    Constrained minimization (SLSQP, multistart including the symmetric
    two-coordinate profile); cross-checked against the closed form at p = 2
    and the flat witness at p = 1 in the suite.
    """
    from scipy.optimize import minimize

    if p != "inf" and p < 1:
        raise SpaceError("p must be >= 1")
    if dim < 2:
        raise SpaceError("dim must be >= 2")
    results = []
    for eps in eps_grid:
        if not 0 < eps <= 2:
            raise SpaceError("eps must lie in (0, 2]")

        def objective(z):
            x, y = z[:dim], z[dim:]
            return 1.0 - _norm((x + y) / 2.0, p)

        constraints = [
            {"type": "ineq", "fun": lambda z: 1.0 - _norm(z[:dim], p)},
            {"type": "ineq", "fun": lambda z: 1.0 - _norm(z[dim:], p)},
            {"type": "ineq", "fun": lambda z: _norm(z[:dim] - z[dim:], p) - eps},
        ]
        starts = []
        a = (1.0 - (eps / 2.0) ** 2) ** 0.5 if p == 2 else None
        if p != "inf" and p > 1:
            # Symmetric profile x = (a, b, 0..), y = (a, -b, 0..) with b = eps/2.
            b = eps / 2.0
            aa = max(0.0, 1.0 - b ** float(p)) ** (1.0 / float(p))
            s = np.zeros(2 * dim)
            s[0], s[1], s[dim], s[dim + 1] = aa, b, aa, -b
            starts.append(s)
        s = np.zeros(2 * dim)
        s[0], s[1], s[dim], s[dim + 1] = 0.8, 0.5, 0.8, -0.5
        starts.append(s)
        s2 = np.zeros(2 * dim)
        s2[0], s2[dim + 1] = 1.0, 1.0
        starts.append(s2)
        best = math.inf
        for s in starts:
            res = minimize(objective, s, constraints=constraints, method="SLSQP",
                           options={"maxiter": 500, "ftol": 1e-14})
            if res.success or res.fun < best:
                feasible = (_norm(res.x[:dim], p) <= 1 + 1e-9
                            and _norm(res.x[dim:], p) <= 1 + 1e-9
                            and _norm(res.x[:dim] - res.x[dim:], p) >= eps - 1e-9)
                if feasible:
                    best = min(best, float(res.fun))
        results.append((float(eps), max(0.0, best)))
    return results


def modulus_smoothness(p, dim, tau_grid):
    """rho(tau) = sup {(||x + tau h|| + ||x - tau h||)/2 - 1 : ||x|| = ||h|| = 1}.

    rho(tau)/tau -> 0 characterizes uniform smoothness, which needs p > 1;
    p = 1 is still estimated (the witness x = e1, h = e2 gives rho = tau).
    """
    from scipy.optimize import minimize

    if p != "inf" and p < 1:
        raise SpaceError("p must be >= 1")
    if dim < 2:
        raise SpaceError("dim must be >= 2")
    results = []
    for tau in tau_grid:
        if tau <= 0:
            raise SpaceError("tau must be positive")

        def objective(z):
            x, h = z[:dim], z[dim:]
            return -((_norm(x + tau * h, p) + _norm(x - tau * h, p)) / 2.0 - 1.0)

        constraints = [
            {"type": "eq", "fun": lambda z: _norm(z[:dim], p) - 1.0},
            {"type": "eq", "fun": lambda z: _norm(z[dim:], p) - 1.0},
        ]
        starts = []
        s = np.zeros(2 * dim)
        s[0], s[dim + 1] = 1.0, 1.0     # orthogonal pair
        starts.append(s)
        s2 = np.zeros(2 * dim)
        s2[0], s2[dim] = 1.0, 1.0       # aligned pair
        starts.append(s2)
        best = -math.inf
        for s in starts:
            res = minimize(objective, s, constraints=constraints, method="SLSQP",
                           options={"maxiter": 500, "ftol": 1e-14})
            x, h = res.x[:dim], res.x[dim:]
            if abs(_norm(x, p) - 1) < 1e-7 and abs(_norm(h, p) - 1) < 1e-7:
                best = max(best, -float(res.fun))
        results.append((float(tau), best))
    return results


def support_functional(p, x):
    """The unique norm-one functional with phi(x) = ||x||_p, for 1 < p < inf.

    Coordinates sign(x_i) |x_i|^{p-1} / ||x||_p^{p-1}; the dual q-norm and the
    norming identity are asserted to 1e-10.
    """
    if p == "inf" or p <= 1:
        raise SpaceError("support functional requires 1 < p < inf")
    x = np.asarray([float(t) for t in x], dtype=float)
    nx = _norm(x, p)
    if nx == 0:
        raise SpaceError("x must be nonzero")
    phi = np.sign(x) * np.abs(x) ** (p - 1) / nx ** (p - 1)
    q = p / (p - 1)
    if abs(_norm(phi, q) - 1.0) > 1e-10:
        raise ConsistencyError("support functional failed the dual-norm identity")
    if abs(float(np.dot(phi, x)) - nx) > 1e-10:
        raise ConsistencyError("support functional failed the norming identity")
    return tuple(float(t) for t in phi)


# ---------------------------------------------------------------------------
# Exact convex-hull membership (phase-1 simplex over the rationals)
# ---------------------------------------------------------------------------

def in_convex_hull(point, vertices) -> bool:
    """Exact test: point = sum lambda_i v_i, sum lambda = 1, lambda >= 0.

    Phase-1 simplex with Bland's rule over Fractions.  Small instances only.
    """
    point = _frac_vec(point)
    vertices = [_frac_vec(v) for v in vertices]
    if not vertices:
        return False
    dim = len(point)
    if any(len(v) != dim for v in vertices):
        raise SpaceError("dimension mismatch")
    # Equality system A lam = b with rows: coordinates then the sum-to-one row.
    rows = []
    b = []
    for k in range(dim):
        rows.append([v[k] for v in vertices])
        b.append(point[k])
    rows.append([Fraction(1)] * len(vertices))
    b.append(Fraction(1))
    # Flip rows to make b >= 0, add artificials, minimize their sum.
    m, n = len(rows), len(vertices)
    for i in range(m):
        if b[i] < 0:
            rows[i] = [-a for a in rows[i]]
            b[i] = -b[i]
    # Tableau: columns = lam vars + artificials, objective = sum artificials.
    tab = [rows[i] + [Fraction(1) if j == i else Fraction(0) for j in range(m)]
           + [b[i]] for i in range(m)]
    basis = list(range(n, n + m))
    # Reduced costs c_j - z_j for the phase-1 objective (sum of artificials):
    # all artificials are basic initially, so z_j = sum of column j.
    cost = [Fraction(0)] * (n + m + 1)
    for j in range(n + m):
        cost[j] = (Fraction(1) if j >= n else Fraction(0)) \
            - sum(tab[i][j] for i in range(m))
    cost[-1] = -sum(tab[i][-1] for i in range(m))

    def pivot(i, j):
        piv = tab[i][j]
        tab[i] = [a / piv for a in tab[i]]
        for r in range(m):
            if r != i and tab[r][j] != 0:
                f = tab[r][j]
                tab[r] = [a - f * c for a, c in zip(tab[r], tab[i])]
        if cost[j] != 0:
            f = cost[j]
            for k in range(n + m + 1):
                cost[k] -= f * tab[i][k]
        basis[i] = j

    while True:
        enter = next((j for j in range(n + m) if cost[j] < 0), None)
        if enter is None:
            break
        ratios = [(tab[i][-1] / tab[i][enter], i) for i in range(m)
                  if tab[i][enter] > 0]
        if not ratios:
            break
        _, leave = min(ratios, key=lambda t: (t[0], basis[t[1]]))
        pivot(leave, enter)
    return -cost[-1] == 0


# ---------------------------------------------------------------------------
# (n, eps)-trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NEpsTree:
    """Complete binary tree of vectors: midpoint law, sibling separation, radius.

    Nodes are keyed by binary address strings ('' is the root); coordinates
    are Fractions so validation is exact.
    """

    depth: int
    nodes: dict
    eps: Fraction
    radius: Fraction

    def addresses(self):
        out = [""]
        for level in range(1, self.depth + 1):
            out.extend(format(i, f"0{level}b") for i in range(2 ** level))
        return out

    def to_json(self):
        return {
            "depth": self.depth,
            "eps_claimed": float(self.eps),
            "radius": float(self.radius),
            "eps_exact": str(self.eps),
            "radius_exact": str(self.radius),
            "nodes": {addr: [str(c) for c in vec]
                      for addr, vec in sorted(self.nodes.items())},
        }

    @staticmethod
    def from_json(data):
        return NEpsTree(
            depth=int(data["depth"]),
            nodes={addr: tuple(Fraction(c) for c in vec)
                   for addr, vec in data["nodes"].items()},
            eps=Fraction(data["eps_exact"]),
            radius=Fraction(data["radius_exact"]),
        )


def validate_tree(tree) -> ValidationReport:
    """Exact midpoint / separation / radius checks (squared comparisons)."""
    bad = []
    eps_sq = tree.eps * tree.eps
    rad_sq = tree.radius * tree.radius
    for addr in tree.addresses():
        if addr not in tree.nodes:
            bad.append(Violation("missing-node", (addr,), "address absent"))
            continue
        vec = tree.nodes[addr]
        if _sq_norm(vec) > rad_sq:
            bad.append(Violation("radius", (addr,), "node outside the radius ball"))
        if len(addr) < tree.depth:
            left, right = tree.nodes.get(addr + "0"), tree.nodes.get(addr + "1")
            if left is None or right is None:
                bad.append(Violation("missing-node", (addr,), "child absent"))
                continue
            mid = tuple((a + b) / 2 for a, b in zip(left, right))
            if mid != tuple(vec):
                bad.append(Violation("midpoint", (addr,),
                                     "node is not the midpoint of its children"))
            if _sq_dist(left, right) < eps_sq:
                bad.append(Violation("separation", (addr,),
                                     "children closer than eps"))
    return ValidationReport(tuple(bad))


def tree_from_nested_sets(sets, eps, radius=None) -> NEpsTree:
    """Build the tree from a heap-indexed family K_1, K_2, ..., leaves deepest.

    Requires K_{2i} u K_{2i+1} subset conv K_i (certified by the exact LP)
    and sibling separation >= eps; leaves take the first listed point of each
    deepest set, parents the midpoint of their children.  The emitted tree is
    re-gated on its exact node separations, so it always validates.
    """
    eps = Fraction(eps)
    idx = {int(i): [_frac_vec(v) for v in vs] for i, vs in sets.items()}
    if 1 not in idx:
        raise SpaceError("root set K_1 required")
    depth = 0
    while all(2 ** (depth + 1) + k in idx for k in range(2 ** (depth + 1))):
        depth += 1
    for level in range(depth):
        for i in range(2 ** level, 2 ** (level + 1)):
            for child in (2 * i, 2 * i + 1):
                if child not in idx:
                    raise SpaceError(f"missing set K_{child}")
                for pt in idx[child]:
                    if not in_convex_hull(pt, idx[i]):
                        raise SpaceError(
                            f"containment certificate failed at K_{child}")
            sep = hull_separation(idx[2 * i], idx[2 * i + 1])
            if sep.distance < float(eps) - 1e-9:
                raise SpaceError(f"separation certificate failed at K_{2 * i}")
    nodes = {}
    for k in range(2 ** depth):
        addr = format(k, f"0{depth}b") if depth else ""
        nodes[addr] = tuple(idx[2 ** depth + k][0])
    for level in range(depth - 1, -1, -1):
        for k in range(2 ** level):
            addr = format(k, f"0{level}b") if level else ""
            left, right = nodes[addr + "0"], nodes[addr + "1"]
            nodes[addr] = tuple((a + b) / 2 for a, b in zip(left, right))
    # Exact gates: separation on the actual nodes, then the radius.
    for addr, vec in nodes.items():
        if len(addr) < depth:
            if _sq_dist(nodes[addr + "0"], nodes[addr + "1"]) < eps * eps:
                raise SpaceError(f"node separation below eps at {addr!r}")
    max_sq = max(_sq_norm(v) for v in nodes.values())
    if radius is None:
        radius = _sqrt_upper(max_sq)
    else:
        radius = Fraction(radius)
        if max_sq > radius * radius:
            raise SpaceError("nodes exceed the requested radius")
    tree = NEpsTree(depth, nodes, eps, radius)
    gate = validate_tree(tree)
    if not gate:
        raise ConsistencyError("constructed tree failed validation:\n"
                               + gate.render())
    return tree


def _sqrt_upper(value, tol=Fraction(1, 10 ** 12)):
    """A rational upper bound on sqrt(value), within tol of it."""
    value = Fraction(value)
    if value == 0:
        return Fraction(0)
    hi = Fraction(math.isqrt(value.numerator // value.denominator) + 1)
    lo = Fraction(0)
    while hi - lo > tol:
        mid = (hi + lo) / 2
        if mid * mid >= value:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Hull separation (l2; exact-tolerance QP plus a 2D geometric oracle)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullSeparation:
    distance: float
    point_a: tuple
    point_b: tuple
    functional: tuple   # unit separating direction (b - a)/|b - a|, or zeros


def hull_separation(points_a, points_b) -> HullSeparation:
    """min ||a - b||_2 over conv A x conv B by convex QP (cvxopt)."""
    from cvxopt import matrix, solvers

    if not points_a or not points_b:
        raise SpaceError("point lists must be nonempty")
    A = np.array([[float(c) for c in v] for v in points_a], dtype=float).T
    B = np.array([[float(c) for c in v] for v in points_b], dtype=float).T
    if A.shape[0] != B.shape[0]:
        raise SpaceError("dimension mismatch")
    na, nb = A.shape[1], B.shape[1]
    M = np.hstack([A, -B])
    P = 2.0 * (M.T @ M) + 1e-12 * np.eye(na + nb)
    q = np.zeros(na + nb)
    G = -np.eye(na + nb)
    h = np.zeros(na + nb)
    Aeq = np.zeros((2, na + nb))
    Aeq[0, :na] = 1.0
    Aeq[1, na:] = 1.0
    beq = np.array([1.0, 1.0])
    solvers.options["show_progress"] = False
    solvers.options["abstol"] = 1e-12
    solvers.options["reltol"] = 1e-12
    solvers.options["feastol"] = 1e-12
    sol = solvers.qp(matrix(P), matrix(q), matrix(G), matrix(h),
                     matrix(Aeq), matrix(beq))
    z = np.array(sol["x"]).flatten()
    lam, mu = z[:na], z[na:]
    pa = A @ lam
    pb = B @ mu
    diff = pa - pb
    dist = float(np.linalg.norm(diff))
    functional = tuple((-diff / dist).tolist()) if dist > 1e-12 else \
        tuple([0.0] * A.shape[0])
    return HullSeparation(dist, tuple(pa.tolist()), tuple(pb.tolist()), functional)


def _convex_hull_2d(points):
    """Andrew monotone chain; returns hull vertices in CCW order."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _seg_dist(p1, p2, q1, q2):
    """Exact-ish min distance between two 2D segments."""

    def clamp(t):
        return max(0.0, min(1.0, t))

    def point_seg(p, a, b):
        ab = (b[0] - a[0], b[1] - a[1])
        denom = ab[0] ** 2 + ab[1] ** 2
        t = 0.0 if denom == 0 else clamp(
            ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / denom)
        cx, cy = a[0] + t * ab[0], a[1] + t * ab[1]
        return math.hypot(p[0] - cx, p[1] - cy)

    def intersect(a, b, c, d):
        def orient(p, q, r):
            v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
            return (v > 0) - (v < 0)
        o1, o2 = orient(a, b, c), orient(a, b, d)
        o3, o4 = orient(c, d, a), orient(c, d, b)
        if o1 != o2 and o3 != o4:
            return True
        return False

    if intersect(p1, p2, q1, q2):
        return 0.0
    return min(point_seg(p1, q1, q2), point_seg(p2, q1, q2),
               point_seg(q1, p1, p2), point_seg(q2, p1, p2))


def hull_separation_oracle_2d(points_a, points_b) -> float:
    """Independent 2D oracle: polygon distance by edge-pair enumeration."""
    ha = _convex_hull_2d(points_a)
    hb = _convex_hull_2d(points_b)

    def inside(p, hull):
        if len(hull) < 3:
            return False
        for i in range(len(hull)):
            a, b = hull[i], hull[(i + 1) % len(hull)]
            if ((b[0] - a[0]) * (p[1] - a[1])
                    - (b[1] - a[1]) * (p[0] - a[0])) < 0:
                return False
        return True

    def edges(hull):
        if len(hull) == 1:
            return [(hull[0], hull[0])]
        return [(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))]

    if any(inside(p, hb) for p in ha) or any(inside(p, ha) for p in hb):
        return 0.0
    return min(_seg_dist(p1, p2, q1, q2)
               for p1, p2 in edges(ha) for q1, q2 in edges(hb))


# ---------------------------------------------------------------------------
# The convexity probe
# ---------------------------------------------------------------------------

@dataclass
class TreeCertificate:
    depth: int
    gamma_hat: float
    radius: float
    eps_claimed: float
    tree: NEpsTree | None
    degenerate: bool
    depth_bound: int | None
    source: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def summary_line(self):
        bound = "inf" if self.depth_bound is None else self.depth_bound
        return (f"depth={self.depth} gamma={self.gamma_hat:.9f} "
                f"radius={self.radius:.9f} bound={bound}")

    def to_json(self):
        return {
            "depth": self.depth,
            "gamma_hat": self.gamma_hat,
            "radius": self.radius,
            "eps_claimed": self.eps_claimed,
            "degenerate": self.degenerate,
            "depth_bound": self.depth_bound,
            "nodes": None if self.tree is None else self.tree.to_json(),
            "source": self.source,
            "stats": self.stats,
        }

    @staticmethod
    def from_json(data):
        tree = None if data.get("nodes") is None else NEpsTree.from_json(data["nodes"])
        return TreeCertificate(
            depth=int(data["depth"]), gamma_hat=float(data["gamma_hat"]),
            radius=float(data["radius"]), eps_claimed=float(data["eps_claimed"]),
            tree=tree, degenerate=bool(data["degenerate"]),
            depth_bound=data.get("depth_bound"),
            source=dict(data.get("source", {})), stats=dict(data.get("stats", {})))


def depth_bound_from_modulus(gamma, radius, delta=None):
    """Max depth of a (n, gamma)-tree in a radius-ball under a convexity modulus.

    Level-radius recursion r_{j+1} = r_j / (1 - delta(gamma / radius)), seeded
    at gamma / 2 and capped at radius.  An engineering diagnostic, not a
    paper quantity; delta defaults to the l2 closed form.
    """
    if gamma <= 0 or radius <= 0:
        return None
    delta = delta or delta_l2_closed_form
    d = delta(min(2.0, gamma / radius))
    if d <= 0:
        return None
    r = gamma / 2.0
    depth = 0
    while r <= radius and depth < 10_000:
        r /= (1.0 - d)
        depth += 1
    return depth


def convexity_probe(realized_space, witness_points, embedding, n_coords,
                    source=None, workers=None) -> TreeCertificate:
    """Prefix-tree certificate from a realized sphere witness and an embedding.

    witness_points: {bitstring: point index}; embedding: point index -> exact
    rational vector, defined at least on the witness points.  C_sigma is the
    hull of the images of all witnesses extending sigma; gamma_hat is the
    minimal sibling hull separation (QP), the radius the maximal image norm,
    and when gamma_hat clears the degeneracy floor the literal tree (leaves
    plus midpoints, always midpoint-exact) is built through
    tree_from_nested_sets with eps = a rational lower rounding of gamma_hat.
    """
    if n_coords < 1:
        raise SpaceError("the cube must have at least one coordinate")
    if len(witness_points) != 2 ** n_coords:
        raise SpaceError("one witness point per cube vertex required")
    images = {}
    for eps_key, point in witness_points.items():
        if point not in range(realized_space.size):
            raise SpaceError(f"witness point {point} outside the space")
        try:
            images[eps_key] = _frac_vec(embedding[point])
        except (KeyError, IndexError):
            raise SpaceError(f"embedding missing witness point {point}") from None

    def hull_points(prefix):
        return [images[k] for k in sorted(images) if k.startswith(prefix)]

    prefixes = [format(i, f"0{level}b") if level else ""
                for level in range(n_coords) for i in range(2 ** level)]
    seps = pmap(lambda pre: hull_separation(hull_points(pre + "0"),
                                            hull_points(pre + "1")).distance,
                prefixes, workers)
    gamma = min(seps)
    max_sq = max(_sq_norm(v) for v in images.values())
    radius = math.sqrt(float(max_sq))
    stats = {"hulls": 2 ** (n_coords + 1) - 2}
    degenerate = not gamma > 1e-9
    tree = None
    eps_claimed = 0.0
    if not degenerate:
        eps = Fraction(max(1, math.floor((gamma - 1e-9) * 10 ** 9)), 10 ** 9)
        eps_claimed = float(eps)
        sets = {}
        for level in range(n_coords + 1):
            for i in range(2 ** level):
                prefix = format(i, f"0{level}b") if level else ""
                sets[2 ** level + i] = hull_points(prefix)
        tree = tree_from_nested_sets(sets, eps, radius=_sqrt_upper(max_sq))
    bound = depth_bound_from_modulus(gamma if gamma is not math.inf else 0.0,
                                     radius)
    return TreeCertificate(
        depth=n_coords, gamma_hat=0.0 if gamma is math.inf else float(gamma),
        radius=radius, eps_claimed=eps_claimed, tree=tree,
        degenerate=degenerate, depth_bound=bound,
        source=dict(source or {}), stats=stats)


def distance_vector_embedding(space, anchor_points=None):
    """Each point as its exact distance vector to the anchors (default: all)."""
    anchors = tuple(anchor_points) if anchor_points is not None \
        else tuple(space.points())
    return [tuple(Fraction(space.d(x, a), space.scale) for a in anchors)
            for x in space.points()]
