"""Chains and cochains on finite graphs: differentials, cycle spaces, the
discrete Hodge split, grounded Neumann-series inversion, and spectral
margins of the averaging operator.

Edge functions are stored on a reference orientation (min vertex -> max
vertex); reading an edge against the reference negates the value, so
antisymmetry holds by construction.  Conventions: (delta g)(v,w) = g(w)-g(v)
and (boundary f)(v) = sum_w f(v,w), which pair as <boundary f, g> =
-<f, delta g> and give boundary(delta) = deg * (averaging - identity).

Finite graphs have no non-amenable regime, so two documented surrogates
stand in: the Hodge solve works on mean-zero potentials per component, and
the Neumann series works on a Dirichlet-grounded subgraph.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._validation import ModelError

HODGE_RTOL = 1e-12
POWER_TOL = 1e-8
POWER_MAX_ITER = 100_000


class GraphError(ModelError):
    pass


class PathError(GraphError):
    pass


class SpectralError(GraphError):
    """The Neumann series diverged; carries the measured operator-norm estimate."""

    def __init__(self, msg, norm_estimate):
        super().__init__(msg)
        self.norm_estimate = norm_estimate


@dataclass(frozen=True)
class Graph:
    """Finite unoriented graph; edges carry the min->max reference orientation."""

    n: int
    edges: tuple

    @staticmethod
    def make(n, edges):
        n = int(n)
        canon = set()
        for k, e in enumerate(edges):
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise GraphError(f"edges[{k}]: self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edges[{k}]: ({u},{v}) out of range 0..{n - 1}")
            canon.add((min(u, v), max(u, v)))
        return Graph(n, tuple(sorted(canon)))

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def edge_index(self):
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def adjacency(self):
        adj = [[] for _ in range(self.n)]
        for i, (u, v) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def degrees(self):
        d = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    @cached_property
    def components(self):
        comp = np.full(self.n, -1, dtype=int)
        c = 0
        for root in range(self.n):
            if comp[root] >= 0:
                continue
            stack = [root]
            comp[root] = c
            while stack:
                x = stack.pop()
                for y, _ in self.adjacency[x]:
                    if comp[y] < 0:
                        comp[y] = c
                        stack.append(y)
            c += 1
        return comp

    @property
    def n_components(self):
        return int(self.components.max()) + 1 if self.n else 0

    def edge_sign(self, u, v):
        """+1 if (u,v) is the reference orientation, -1 if reversed."""
        if (min(u, v), max(u, v)) not in self.edge_index:
            raise PathError(f"({u},{v}) is not an edge")
        return 1.0 if u < v else -1.0


def edge_value(G, f, u, v):
    """f(u, v) with the antisymmetric reading."""
    return G.edge_sign(u, v) * f[G.edge_index[(min(u, v), max(u, v))]]


def delta(G: Graph, g):
    """(delta g)(v, w) = g(w) - g(v) on every reference edge."""
    g = np.asarray(g, dtype=float)
    if g.shape != (G.n,):
        raise GraphError(f"vertex function has shape {g.shape}, expected ({G.n},)")
    out = np.empty(G.n_edges)
    for i, (u, v) in enumerate(G.edges):
        out[i] = g[v] - g[u]
    return out


def boundary(G: Graph, f):
    """(boundary f)(v) = sum over neighbours w of f(v, w)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (G.n_edges,):
        raise GraphError(f"edge function has shape {f.shape}, expected ({G.n_edges},)")
    out = np.zeros(G.n)
    for i, (u, v) in enumerate(G.edges):
        out[u] += f[i]
        out[v] -= f[i]
    return out


def edge_inner(G, f, g):
    """Orientation-independent pairing over unoriented edges."""
    return float(np.dot(np.asarray(f, float), np.asarray(g, float)))


def path_chain(G: Graph, path):
    """A vertex path as an antisymmetric edge function."""
    f = np.zeros(G.n_edges)
    path = list(path)
    for a, b in zip(path[:-1], path[1:]):
        f[G.edge_index[(min(a, b), max(a, b))]] += G.edge_sign(a, b)
    return f


def path_integral(G: Graph, f, path):
    """Sum of f along consecutive steps of the path."""
    path = list(path)
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        total += edge_value(G, f, a, b)
    return total


def spanning_forest(G: Graph):
    """BFS forest: (parent vertex, parent edge index) per vertex, roots = -1."""
    parent = np.full(G.n, -1, dtype=int)
    parent_edge = np.full(G.n, -1, dtype=int)
    order = []
    seen = np.zeros(G.n, dtype=bool)
    for root in range(G.n):
        if seen[root]:
            continue
        seen[root] = True
        queue = [root]
        order.append(root)
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            for y, ei in sorted(G.adjacency[x]):
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    parent_edge[y] = ei
                    queue.append(y)
                    order.append(y)
    return parent, parent_edge


def tree_path(G: Graph, parent, a, b):
    """Vertex path from a to b inside the spanning forest."""
    up_a, up_b = [a], [b]
    seen = {a: 0}
    x = a
    while parent[x] >= 0:
        x = int(parent[x])
        up_a.append(x)
        seen[x] = len(up_a) - 1
    x = b
    while x not in seen:
        if parent[x] < 0:
            raise PathError(f"vertices {a} and {b} lie in different components")
        x = int(parent[x])
        up_b.append(x)
    meet = seen[x]
    return up_a[: meet + 1] + list(reversed(up_b[:-1]))


def cycle_space_basis(G: Graph):
    """Fundamental cycles of a BFS forest; |E| - |V| + #components of them."""
    parent, parent_edge = spanning_forest(G)
    tree_edges = set(int(e) for e in parent_edge if e >= 0)
    basis = []
    for i, (u, v) in enumerate(G.edges):
        if i in tree_edges:
            continue
        path = tree_path(G, parent, v, u)
        loop = path_chain(G, path)
        loop[i] += 1.0  # close up with the chord (u, v)
        basis.append(loop)
    return basis


def potential(G: Graph, f, rtol=1e-9):
    """h with delta h = f for f integrating to zero over loops; else None.

    h is pinned to 0 at the BFS root of each component, matching the path
    integral from the root.
    """
    parent, parent_edge = spanning_forest(G)
    h = np.zeros(G.n)
    resolved = np.zeros(G.n, dtype=bool)
    for v in range(G.n):
        chain = []
        x = v
        while not resolved[x] and parent[x] >= 0:
            chain.append(x)
            x = int(parent[x])
        for y in reversed(chain):
            h[y] = h[int(parent[y])] + edge_value(G, f, int(parent[y]), y)
            resolved[y] = True
        resolved[v] = True
    if G.n_edges:
        scale = max(1.0, float(np.max(np.abs(f))))
        if np.max(np.abs(delta(G, h) - f)) > rtol * scale:
            return None
    return h


def _laplacian(G: Graph):
    L = np.zeros((G.n, G.n))
    for u, v in G.edges:
        L[u, u] += 1.0
        L[v, v] += 1.0
        L[u, v] -= 1.0
        L[v, u] -= 1.0
    return L


def _laplacian_solve(G: Graph, b):
    """Solve L h = b per component on mean-zero potentials (b mean-zero).

    The rank-one shift L + J/n_c per component is nonsingular and returns
    the mean-zero solution exactly, avoiding pseudo-inverse noise.
    """
    L = _laplacian(G)
    h = np.zeros(G.n)
    comps = G.components
    for c in range(G.n_components):
        idx = np.flatnonzero(comps == c)
        if len(idx) == 1:
            continue
        Lc = L[np.ix_(idx, idx)] + 1.0 / len(idx)
        bc = b[idx] - np.mean(b[idx])
        h[idx] = np.linalg.solve(Lc, bc)
    return h


def hodge_project(G: Graph, f):
    """Split an edge function into (cycle_part, cut_part).

    cut_part = delta h where boundary(delta h) = boundary f, solved in least
    squares on the mean-zero-per-component potential space; the remainder
    lies in the kernel of boundary.  On finite graphs the decomposition is
    exact and the same linear projector serves every exponent (only norms
    change with p).
    """
    f = np.asarray(f, dtype=float)
    # boundary(delta h) = -L h, so L h = -boundary f
    h = _laplacian_solve(G, -boundary(G, f))
    cut = delta(G, h)
    return f - cut, cut


def incidence_matrices(G: Graph):
    """(delta matrix |E| x |V|, boundary matrix |V| x |E|) as dense arrays."""
    D = np.zeros((G.n_edges, G.n))
    B = np.zeros((G.n, G.n_edges))
    for i, (u, v) in enumerate(G.edges):
        D[i, u] = -1.0
        D[i, v] = 1.0
        B[u, i] = 1.0
        B[v, i] = -1.0
    return D, B


def hodge_projector_matrix(G: Graph):
    """Dense |E| x |E| matrix of the cut-space projector.

    One factorization per graph: the mean-zero Laplacian solve is applied
    to the whole boundary matrix at once.
    """
    D, B = incidence_matrices(G)
    L = _laplacian(G)
    comps = G.components
    X = np.zeros((G.n, G.n_edges))
    for c in range(G.n_components):
        idx = np.flatnonzero(comps == c)
        if len(idx) == 1:
            continue
        Lc = L[np.ix_(idx, idx)] + 1.0 / len(idx)
        rhs = -B[idx]
        rhs = rhs - np.mean(rhs, axis=0, keepdims=True)
        X[idx] = np.linalg.solve(Lc, rhs)
    return D @ X


def _check_positive_degrees(G):
    if G.n and int(np.min(G.degrees)) == 0:
        v = int(np.argmin(G.degrees))
        raise GraphError(f"vertex {v} is isolated; degree-0 breaks the averaging operator")


def _grounded_symmetric_operator(G: Graph, grounded):
    """D^{-1/2} Adj_S D^{-1/2} on the non-grounded vertices, full degrees."""
    _check_positive_degrees(G)
    grounded = set(int(g) for g in grounded)
    S = [v for v in range(G.n) if v not in grounded]
    pos = {v: i for i, v in enumerate(S)}
    m = np.zeros((len(S), len(S)))
    dd = np.sqrt(G.degrees.astype(float))
    for u, v in G.edges:
        if u in pos and v in pos:
            w = 1.0 / (dd[u] * dd[v])
            m[pos[u], pos[v]] += w
            m[pos[v], pos[u]] += w
    return m, S


@dataclass
class NeumannResult:
    solution: np.ndarray  # full-length vertex function, zero on grounded
    iterations: int
    increment: float


def neumann_inverse(G: Graph, grounded, b, p=2.0, tol=1e-10, max_iter=5_000_000):
    """Solve (averaging - identity) h = b on the grounded subgraph by series.

    h = -sum_k A^k b, truncated when the increment drops below tol in the
    degree-weighted p-norm (b is normalized internally, so tol and the
    margin-based iteration bound are scale-free).  Ten consecutive growing
    increments raise SpectralError carrying the measured norm estimate.
    Grounded vertices are held at zero; every component must contain one.
    """
    _check_positive_degrees(G)
    grounded = set(int(g) for g in grounded)
    comps = G.components
    for c in range(G.n_components):
        if not any(comps[g] == c for g in grounded):
            raise GraphError(f"component {c} has no grounded vertex")
    S = [v for v in range(G.n) if v not in grounded]
    b = np.asarray(b, dtype=float)
    if b.shape == (G.n,):
        bS = b[S]
    elif b.shape == (len(S),):
        bS = b.copy()
    else:
        raise GraphError(f"b has shape {b.shape}, expected ({G.n},) or ({len(S)},)")

    pos = {v: i for i, v in enumerate(S)}
    deg = G.degrees.astype(float)
    rows, cols, vals = [], [], []
    for u, v in G.edges:
        if u in pos and v in pos:
            rows.append(pos[u])
            cols.append(pos[v])
            vals.append(1.0 / deg[u])
            rows.append(pos[v])
            cols.append(pos[u])
            vals.append(1.0 / deg[v])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(S), len(S)))

    wS = deg[S]

    def wnorm(x):
        return float(np.sum(wS * np.abs(x) ** p) ** (1.0 / p))

    # iterate on the normalized source so the increment threshold (and the
    # iteration-count bound tied to the spectral margin) is scale-free
    scale = wnorm(bS)
    if scale == 0.0:
        return NeumannResult(solution=np.zeros(G.n), iterations=0, increment=0.0)
    acc = np.zeros(len(S))
    term = bS / scale
    prev = wnorm(term)
    grow = 0
    it = 0
    while wnorm(term) >= tol and it < max_iter:
        acc += term
        term = A @ term
        it += 1
        cur = wnorm(term)
        if cur > prev:
            grow += 1
            if grow >= 10:
                raise SpectralError(
                    f"series diverging after {it} terms; growth ratio {cur / max(prev, 1e-300):.4f}",
                    norm_estimate=cur / max(prev, 1e-300),
                )
        else:
            grow = 0
        prev = cur
    h = np.zeros(G.n)
    h[S] = -scale * acc
    return NeumannResult(solution=h, iterations=it, increment=scale * wnorm(term))


def amenability_margin(G: Graph, grounded=()):
    """1 minus the top singular value of the grounded averaging operator.

    Computed by power iteration on the symmetrized square to 1e-8; an
    ungrounded finite graph returns 0 (constants are fixed), and margin 0 is
    the finite surrogate of amenability.
    """
    m, S = _grounded_symmetric_operator(G, grounded)
    if len(S) == 0:
        return 1.0
    v = np.ones(len(S)) + 1e-3 * np.arange(len(S))
    v /= np.linalg.norm(v)
    lam2 = 0.0
    for _ in range(POWER_MAX_ITER):
        w = m @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 1.0
        w /= nw
        new_lam2 = float(w @ (m @ (m @ w)))
        if abs(new_lam2 - lam2) < POWER_TOL * max(1.0, abs(new_lam2)):
            lam2 = new_lam2
            break
        lam2 = new_lam2
        v = w
    sigma = float(np.sqrt(max(lam2, 0.0)))
    return max(0.0, 1.0 - min(sigma, 1.0))
