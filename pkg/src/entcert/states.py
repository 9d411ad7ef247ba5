"""Constructors for the certified state families.

Weighted qubit graph states, generalized qudit graph states, 1D/2D cluster
states, Dicke states, the AKLT chain (dense and virtual forms) and seeded
random genuinely entangled states, plus parsing of JSON state specifications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Optional

import numpy as np

from .qstate import (
    PureState,
    QuditRegister,
    is_genuinely_entangled,
    random_haar_state,
)


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError(f"self-loop edge ({i},{j}) is not allowed")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class WeightedGraph:
    """Vertices with weighted edges.

    Weights are controlled-phase angles in (0, 2*pi) for qubit graphs, or
    nonzero field elements of F_p when qudit_dim = p is set.  A zero weight
    means the edge is absent, so zero weights are rejected.
    """

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    weights: Mapping[tuple[int, int], float] = field(default_factory=dict)
    qudit_dim: Optional[int] = None

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        norm_edges = []
        seen = set()
        for (i, j) in self.edges:
            e = _norm_edge(int(i), int(j))
            if not (0 <= e[0] < self.n_vertices and 0 <= e[1] < self.n_vertices):
                raise ValueError(f"edge {e} outside vertex range 0..{self.n_vertices - 1}")
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            norm_edges.append(e)
        object.__setattr__(self, "edges", tuple(norm_edges))

        weights = {}
        for e in self.edges:
            w = self.weights.get(e, None) if self.weights else None
            if w is None:
                w = math.pi if self.qudit_dim is None else 1
            if self.qudit_dim is None:
                w = float(w) % (2 * math.pi)
                if w == 0.0:
                    raise ValueError(f"edge {e} has zero phase weight")
            else:
                p = self.qudit_dim
                if not _is_prime(p):
                    raise ValueError(f"qudit graph dimension must be prime, got {p}")
                w = int(w) % p
                if w == 0:
                    raise ValueError(f"edge {e} has zero field weight")
            weights[e] = w
        object.__setattr__(self, "weights", weights)

    def weight(self, i: int, j: int):
        return self.weights[_norm_edge(i, j)]

    def has_edge(self, i: int, j: int) -> bool:
        return _norm_edge(i, j) in self.weights

    def neighbors(self, v: int) -> tuple[int, ...]:
        out = [j if i == v else i for (i, j) in self.edges if v in (i, j)]
        return tuple(sorted(out))

    def is_connected(self) -> bool:
        if self.n_vertices == 1:
            return True
        seen = {0}
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for u in self.neighbors(v):
                if u not in seen:
                    seen.add(u)
                    frontier.append(u)
        return len(seen) == self.n_vertices


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for q in range(2, int(math.isqrt(p)) + 1):
        if p % q == 0:
            return False
    return True


def path_graph(n: int, periodic: bool = False, phase: float = math.pi) -> WeightedGraph:
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        edges.append((0, n - 1))
    return WeightedGraph(n, tuple(edges), {e: phase for e in edges})


def grid_graph(rows: int, cols: int, periodic: bool = False, phase: float = math.pi) -> WeightedGraph:
    def idx(r, c):
        return r * cols + c

    edges = set()
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.add(_norm_edge(idx(r, c), idx(r, c + 1)))
            elif periodic and cols > 2:
                edges.add(_norm_edge(idx(r, c), idx(r, 0)))
            if r + 1 < rows:
                edges.add(_norm_edge(idx(r, c), idx(r + 1, c)))
            elif periodic and rows > 2:
                edges.add(_norm_edge(idx(r, c), idx(0, c)))
    edges = tuple(sorted(edges))
    return WeightedGraph(rows * cols, edges, {e: phase for e in edges})


def weighted_graph_state(graph: WeightedGraph) -> PureState:
    """Product of diagonal controlled-phase gates on |+>^n.

    Each edge {i,j} applies diag(1, 1, 1, e^{i*phi_ij}) to the pair, i.e. a
    phase on amplitudes where both qubit values are 1.
    """
    if graph.qudit_dim is not None:
        return generalized_graph_state(graph.qudit_dim, graph)
    n = graph.n_vertices
    register = QuditRegister((2,) * n)
    dim = register.dim
    amps = np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128)
    indices = np.arange(dim)
    for (i, j), phi in graph.weights.items():
        bit_i = (indices >> (n - 1 - i)) & 1
        bit_j = (indices >> (n - 1 - j)) & 1
        amps = np.where(bit_i & bit_j, amps * np.exp(1j * phi), amps)
    return PureState(register, amps)


def generalized_graph_state(p: int, graph: WeightedGraph) -> PureState:
    """Qudit graph state prod C_ij^{w_ij} |+>^n with C|k>|l> = w^{kl}|k>|l>."""
    if not _is_prime(p):
        raise ValueError(f"qudit dimension must be prime, got {p}")
    if graph.qudit_dim is not None and graph.qudit_dim != p:
        raise ValueError(f"graph carries qudit dimension {graph.qudit_dim}, got p={p}")
    n = graph.n_vertices
    register = QuditRegister((p,) * n)
    dim = register.dim
    amps = np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128)
    indices = np.arange(dim)
    omega = np.exp(2j * math.pi / p)
    strides = [p ** (n - 1 - site) for site in range(n)]
    for (i, j), w in graph.weights.items():
        k = (indices // strides[i]) % p
        l = (indices // strides[j]) % p
        amps = amps * omega ** (int(w) * k * l)
    return PureState(register, amps)


def cluster_state_1d(n: int, periodic: bool = False) -> PureState:
    return weighted_graph_state(path_graph(n, periodic))


def cluster_state_2d(rows: int, cols: int, periodic: bool = False) -> PureState:
    return weighted_graph_state(grid_graph(rows, cols, periodic))


def dicke(n: int, k: int) -> PureState:
    """Equal superposition of all n-qubit strings of Hamming weight k."""
    if not (1 <= k <= n - 1):
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    register = QuditRegister((2,) * n)
    amps = np.zeros(register.dim, dtype=np.complex128)
    coeff = 1.0 / math.sqrt(math.comb(n, k))
    for ones in combinations(range(n), k):
        idx = sum(1 << (n - 1 - site) for site in ones)
        amps[idx] = coeff
    return PureState(register, amps)


# AKLT: two virtual qubits per site, singlets on the bonds, each site
# projected to the triplet space with |~0>=|00>, |~1>=|11>, |~2>=|psi+>.
SINGLET = np.array([0.0, 1.0, -1.0, 0.0], dtype=np.complex128) / math.sqrt(2)

TRIPLET_ISOMETRY = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],                      # <00|
        [0.0, 0.0, 0.0, 1.0],                      # <11|
        [0.0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0.0],  # <psi+|
    ],
    dtype=np.complex128,
)


@dataclass(frozen=True)
class AkltChain:
    """AKLT chain specification.

    boundary "terminal": the two dangling virtual qubits at the chain ends
    are kept as explicit extra qubit parties, so the dense state has parties
    [qubit, spin-1 * n_sites, qubit].  boundary "projected": both terminal
    qubits are projected onto |0>, leaving n_sites spin-1 parties.
    """

    n_sites: int
    boundary: str = "terminal"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("AKLT chain needs at least 2 sites")
        if self.boundary not in ("terminal", "projected"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def n_parties(self) -> int:
        return self.n_sites + 2 if self.boundary == "terminal" else self.n_sites

    @property
    def party_dims(self) -> tuple[int, ...]:
        if self.boundary == "terminal":
            return (2,) + (3,) * self.n_sites + (2,)
        return (3,) * self.n_sites

    def physical_parties(self) -> tuple[int, ...]:
        if self.boundary == "terminal":
            return tuple(range(1, self.n_sites + 1))
        return tuple(range(self.n_sites))

    def site_of_party(self, party: int) -> int:
        """Physical site index (0-based) of a spin-1 party."""
        phys = self.physical_parties()
        if party not in phys:
            raise ValueError(f"party {party} is not a spin-1 site")
        return phys.index(party)


@dataclass(frozen=True)
class VirtualAkltChain:
    """Symbolic AKLT chain for the cutting calculus at any length."""

    n_sites: int
    boundary: str = "terminal"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("AKLT chain needs at least 2 sites")
        if self.boundary not in ("terminal", "projected"):
            raise ValueError(f"unknown boundary {self.boundary!r}")


def aklt_chain(n_sites: int, boundary: str = "terminal", mode: str = "dense"):
    """AKLT chain state, dense (PureState) or virtual (symbolic)."""
    if mode == "virtual":
        return VirtualAkltChain(n_sites, boundary)
    if mode != "dense":
        raise ValueError(f"unknown mode {mode!r}")
    chain = AkltChain(n_sites, boundary)
    return aklt_dense_state(chain)


def aklt_dense_state(chain: AkltChain) -> PureState:
    """Dense AKLT state: singlet bonds projected on per-site triplet spaces.

    Virtual qubits in order [tL, a1, b1, ..., an, bn, tR] carry singlets on
    consecutive pairs (tL,a1), (b1,a2), ..., (bn,tR); each (ai,bi) is then
    contracted with the triplet isometry into one spin-1 site.
    """
    n = chain.n_sites
    QuditRegister(chain.party_dims)  # enforce the memory budget up front
    amps = SINGLET
    for _ in range(n):
        amps = np.kron(amps, SINGLET)
    # qubit axes: 0 = tL, then (a_i, b_i) pairs, last = tR
    t = amps.reshape((2,) * (2 * n + 2))
    for site in range(n):
        # current axes: [tL] + [projected sites...] + remaining qubit pairs
        ax = 1 + site  # first qubit of the next unprojected pair
        shape = t.shape
        pre = shape[:ax]
        post = shape[ax + 2:]
        t = t.reshape(pre + (4,) + post)
        t = np.tensordot(TRIPLET_ISOMETRY, np.moveaxis(t, ax, 0), axes=([1], [0]))
        t = np.moveaxis(t, 0, ax)
    vec = t.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    state = PureState(QuditRegister((2,) + (3,) * n + (2,)), vec)
    if chain.boundary == "projected":
        projected = state.tensor_view()[0, ..., 0].reshape(-1)
        norm = np.linalg.norm(projected)
        if norm < 1e-12:
            raise ValueError("projected boundary annihilated the state")
        state = PureState(QuditRegister((3,) * n), projected / norm)
    return state


def random_genuinely_entangled(dims, seed: int, max_attempts: int = 100) -> PureState:
    """Haar-random pure state, resampled until genuinely entangled."""
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        state = random_haar_state(dims, rng)
        if is_genuinely_entangled(state):
            return state
    raise RuntimeError(f"no genuinely entangled sample within {max_attempts} attempts")


@dataclass(frozen=True)
class PreparedState:
    """A constructed state together with the structure protocols need."""

    kind: str
    state: PureState
    graph: Optional[WeightedGraph] = None
    aklt: Optional[AkltChain] = None
    dicke_k: Optional[int] = None


def _parse_edges(raw, qudit: bool):
    edges = []
    weights = {}
    for entry in raw:
        if len(entry) == 2:
            i, j = entry
            w = None
        elif len(entry) == 3:
            i, j, w = entry
        else:
            raise ValueError(f"edge entry must be [i, j] or [i, j, weight], got {entry!r}")
        e = _norm_edge(int(i), int(j))
        edges.append(e)
        if w is not None:
            weights[e] = int(w) if qudit else float(w)
    return tuple(edges), weights


def state_from_spec(spec: dict) -> PreparedState:
    """Build a state from a JSON-style specification document.

    Supported types and fields:
      {"type": "weighted_graph", "n_vertices": n, "edges": [[i, j, phase?], ...]}
      {"type": "cluster1d", "n": n, "periodic": false}
      {"type": "cluster2d", "rows": r, "cols": c, "periodic": false}
      {"type": "dicke", "n": n, "k": k}
      {"type": "aklt", "n_sites": n, "boundary": "terminal"|"projected"}
      {"type": "qudit_graph", "p": p, "n_vertices": n, "edges": [[i, j, w?], ...]}
    Omitted edge weights default to pi (qubits) or 1 (qudits).
    """
    if not isinstance(spec, dict):
        raise ValueError("state specification must be a JSON object")
    kind = spec.get("type")
    if kind == "weighted_graph":
        edges, weights = _parse_edges(spec["edges"], qudit=False)
        graph = WeightedGraph(int(spec["n_vertices"]), edges, weights)
        return PreparedState("weighted_graph", weighted_graph_state(graph), graph=graph)
    if kind == "cluster1d":
        graph = path_graph(int(spec["n"]), bool(spec.get("periodic", False)))
        return PreparedState("cluster1d", weighted_graph_state(graph), graph=graph)
    if kind == "cluster2d":
        graph = grid_graph(
            int(spec["rows"]), int(spec["cols"]), bool(spec.get("periodic", False))
        )
        return PreparedState("cluster2d", weighted_graph_state(graph), graph=graph)
    if kind == "dicke":
        n, k = int(spec["n"]), int(spec["k"])
        return PreparedState("dicke", dicke(n, k), dicke_k=k)
    if kind == "aklt":
        chain = AkltChain(int(spec["n_sites"]), spec.get("boundary", "terminal"))
        return PreparedState("aklt", aklt_dense_state(chain), aklt=chain)
    if kind == "qudit_graph":
        p = int(spec["p"])
        edges, weights = _parse_edges(spec["edges"], qudit=True)
        graph = WeightedGraph(int(spec["n_vertices"]), edges, weights, qudit_dim=p)
        return PreparedState("qudit_graph", generalized_graph_state(p, graph), graph=graph)
    raise ValueError(f"unknown state type {kind!r}")
