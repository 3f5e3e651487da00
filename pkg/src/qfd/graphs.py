"""Tight-binding Hamiltonians of the example graphs, plus edge-list ingestion.

Index conventions
-----------------
ring, magnetic_ring
    Node labels ``1..L`` with ``|r + L> = |r>``; label ``r`` lives at index
    ``(r - 1) mod L``, so both ``L`` and ``0`` address index ``L - 1``.
square_center, star
    Center node is index 0; corners / periphery follow as ``1..``.
complete
    Nodes ``0..L-1``.
hypercube
    Index is the integer value of the bit string, ``"000" -> 0``.
binary_tree
    Heap order: root 0, children of ``i`` are ``2i + 1`` and ``2i + 2``.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .spectral import HermitianMatrix

KINDS = (
    "ring",
    "magnetic_ring",
    "square_center",
    "complete",
    "star",
    "hypercube",
    "binary_tree",
    "custom",
)


class GraphError(ValueError):
    pass


class EdgeListError(GraphError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


# (i, j, weight, phase); weight multiplies -gamma, phase applies on i -> j
Edge = Tuple[int, int, float, float]


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    L: Optional[int] = None
    alpha: float = 0.0
    d: Optional[int] = None
    generations: Optional[int] = None
    gamma: float = 1.0
    n_nodes: Optional[int] = None
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"unknown graph kind {self.kind!r}; expected one of {KINDS}")
        if not self.gamma > 0:
            raise GraphError(f"gamma must be positive, got {self.gamma}")
        k = self.kind
        if k in ("ring", "magnetic_ring", "complete"):
            _require_int(self.L, "L", 2, k)
        elif k == "star":
            _require_int(self.L, "L", 1, k)
        elif k == "hypercube":
            _require_int(self.d, "d", 1, k)
        elif k == "binary_tree":
            _require_int(2 if self.generations is None else self.generations, "generations", 1, k)
        elif k == "custom":
            _require_int(self.n_nodes, "n_nodes", 1, k)
        if k == "ring" and self.alpha != 0.0:
            raise GraphError("plain ring takes no flux; use kind='magnetic_ring'")

    @property
    def size(self) -> int:
        k = self.kind
        if k in ("ring", "magnetic_ring", "complete"):
            return self.L
        if k == "square_center":
            return 5
        if k == "star":
            return self.L + 1
        if k == "hypercube":
            return 2 ** self.d
        if k == "binary_tree":
            return 2 ** (self.tree_generations + 1) - 1
        return self.n_nodes

    @property
    def tree_generations(self) -> int:
        return 2 if self.generations is None else self.generations


def _require_int(value, name, minimum, kind):
    if value is None or int(value) != value or value < minimum:
        raise GraphError(f"{kind} needs integer {name} >= {minimum}, got {value!r}")


def ring(L: int, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("ring", L=L, gamma=gamma)


def magnetic_ring(L: int, alpha: float, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("magnetic_ring", L=L, alpha=alpha, gamma=gamma)


def square_center(gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("square_center", gamma=gamma)


def complete(L: int, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("complete", L=L, gamma=gamma)


def star(L: int, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("star", L=L, gamma=gamma)


def hypercube(d: int, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("hypercube", d=d, gamma=gamma)


def binary_tree(generations: int = 2, gamma: float = 1.0) -> GraphSpec:
    return GraphSpec("binary_tree", generations=generations, gamma=gamma)


def _ring_matrix(L, alpha):
    H = np.zeros((L, L), dtype=np.complex128)
    hop = np.exp(1j * alpha)
    for r in range(L):
        H[r, (r + 1) % L] += -hop
        H[(r + 1) % L, r] += -np.conj(hop)
    return H


def _adjacency_matrix(n, pairs):
    A = np.zeros((n, n), dtype=np.complex128)
    for i, j in pairs:
        A[i, j] = A[j, i] = 1.0
    return -A


def _tree_pairs(generations):
    n = 2 ** (generations + 1) - 1
    return [(i, c) for i in range(n) for c in (2 * i + 1, 2 * i + 2) if c < n]


def build(spec: GraphSpec) -> HermitianMatrix:
    """Hamiltonian matrix of ``spec`` with hopping ``-gamma`` on every link."""
    k, n = spec.kind, spec.size
    if k in ("ring", "magnetic_ring"):
        H = _ring_matrix(n, spec.alpha)
    elif k == "square_center":
        spokes = [(0, c) for c in range(1, 5)]
        rim = [(1, 2), (2, 3), (3, 4), (4, 1)]
        H = _adjacency_matrix(5, spokes + rim)
    elif k == "complete":
        H = _adjacency_matrix(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    elif k == "star":
        H = _adjacency_matrix(n, [(0, c) for c in range(1, n)])
    elif k == "hypercube":
        H = np.zeros((n, n), dtype=np.complex128)
        for bit in range(spec.d):
            flip = np.arange(n) ^ (1 << bit)
            H[np.arange(n), flip] -= 1.0
    elif k == "binary_tree":
        H = _adjacency_matrix(n, _tree_pairs(spec.tree_generations))
    else:
        H = _edge_matrix(n, spec.edges)
    return HermitianMatrix(spec.gamma * H)


def _edge_matrix(n, edges):
    H = np.zeros((n, n), dtype=np.complex128)
    for i, j, w, phi in edges:
        H[i, j] += -w * np.exp(1j * phi)
        if i != j:
            H[j, i] += -w * np.exp(-1j * phi)
    return H


def node_index(spec: GraphSpec, node: Union[int, str]) -> int:
    """Translate a node label into a basis index (see module docstring)."""
    n = spec.size
    if spec.kind == "hypercube" and isinstance(node, str):
        if len(node) != spec.d or set(node) - {"0", "1"}:
            raise GraphError(f"hypercube node must be a {spec.d}-bit string, got {node!r}")
        return int(node, 2)
    try:
        r = int(node)
    except (TypeError, ValueError):
        raise GraphError(f"invalid node label {node!r}") from None
    if r != node and not isinstance(node, str):
        raise GraphError(f"invalid node label {node!r}")
    if spec.kind in ("ring", "magnetic_ring"):
        if not 0 <= r <= n:
            raise GraphError(f"ring node must be in 0..{n} (0 and {n} coincide), got {r}")
        return (r - 1) % n
    if not 0 <= r < n:
        raise GraphError(f"node {r} out of range 0..{n - 1} for {spec.kind}")
    return r


def localized_state(spec: GraphSpec, node) -> np.ndarray:
    psi = np.zeros(spec.size, dtype=np.complex128)
    psi[node_index(spec, node)] = 1.0
    return psi


def energy_levels_magnetic_ring(L: int, alpha: float, gamma: float = 1.0) -> np.ndarray:
    """Closed-form levels ``-2 gamma cos(2 pi l / L + alpha)``, ``l = 0..L-1``."""
    if L < 2:
        raise GraphError(f"L must be >= 2, got {L}")
    l = np.arange(L)
    return -2.0 * gamma * np.cos(2.0 * np.pi * l / L + alpha)


def load_adjacency(path, gamma: float = 1.0) -> GraphSpec:
    """Read an edge-list file into a ``custom`` graph.

    Format: ``n N`` on the first non-comment line, then ``i j weight [phase]``
    per edge; ``#`` starts a comment.  Repeating an edge (in either
    direction) must describe the same matrix element.
    """
    path = Path(path)
    n_nodes = None
    elements = {}
    edges = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if n_nodes is None:
            if len(tok) != 2 or tok[0] != "n":
                raise EdgeListError(path, lineno, "first line must declare the node count as 'n N'")
            try:
                n_nodes = int(tok[1])
            except ValueError:
                raise EdgeListError(path, lineno, f"bad node count {tok[1]!r}") from None
            if n_nodes < 1:
                raise EdgeListError(path, lineno, "node count must be positive")
            continue
        if len(tok) not in (3, 4):
            raise EdgeListError(path, lineno, "expected 'i j weight [phase]'")
        try:
            i, j = int(tok[0]), int(tok[1])
            w = float(tok[2])
            phi = float(tok[3]) if len(tok) == 4 else 0.0
        except ValueError as exc:
            raise EdgeListError(path, lineno, str(exc)) from None
        for v in (i, j):
            if not 0 <= v < n_nodes:
                raise EdgeListError(path, lineno, f"node {v} out of range 0..{n_nodes - 1}")
        if not (np.isfinite(w) and np.isfinite(phi)):
            raise EdgeListError(path, lineno, "weight and phase must be finite")
        value = -w * np.exp(1j * phi)
        if i == j and abs(value.imag) > 1e-12:
            raise EdgeListError(path, lineno, "on-site term with a complex phase is not Hermitian")
        key, elem = ((i, j), value) if i <= j else ((j, i), np.conj(value))
        if key in elements:
            if abs(elements[key] - elem) > 1e-12:
                raise EdgeListError(path, lineno, f"edge {key} contradicts an earlier line")
            continue
        elements[key] = elem
        edges.append((i, j, w, phi))
    if n_nodes is None:
        raise EdgeListError(path, 0, "empty edge list")
    return GraphSpec("custom", n_nodes=n_nodes, gamma=gamma, edges=tuple(edges))
