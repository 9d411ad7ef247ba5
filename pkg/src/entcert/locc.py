"""LOCC pair-extraction protocols and exhaustive branch enumeration.

A protocol is a fixed ordered list of single-site measurements (bases are
outcome-independent; only the recorded pair corrections depend on outcomes)
together with a target pair.  Enumeration walks every outcome sequence,
merges never-occurring outcomes into a surviving sibling, and reduces each
branch to a residual state on exactly the target pair.

Concrete protocols: graph-state neighborhood measurement, AKLT window
cutting (dense and virtual chains), Dicke Z-then-X, and Haar-generic
measurements on arbitrary genuinely entangled states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iter_product
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .qstate import (
    DensityMatrix,
    PureState,
    QuditRegister,
    ZERO_PROB,
    apply_local,
    entanglement_entropy,
    is_genuinely_entangled,
    measure_site,
    partial_trace,
    schmidt_coefficients,
)
from .states import (
    AkltChain,
    SINGLET,
    TRIPLET_ISOMETRY,
    VirtualAkltChain,
    WeightedGraph,
)

# A pure-input branch whose residual purity falls below this is carried as a
# mixed residual (pair still coupled to unmeasured sites).
_PURITY_PURE = 1.0 - 1e-9

# Second Schmidt coefficient below this marks a branch residual as product.
PRODUCT_TOL = 1e-9


class ExtractionError(RuntimeError):
    """Pair extraction failed (product residual or retry cap exceeded)."""


class MergeRecord(NamedTuple):
    """A zero-probability outcome folded into a surviving sibling branch."""

    prefix: tuple[int, ...]
    site: int
    outcome: int
    merged_into: int


@dataclass(frozen=True)
class MeasurementStep:
    """One site measurement: orthonormal basis kets as rows, plus optional
    outcome-conditioned correction operators acting on the target pair."""

    site: int
    basis: np.ndarray
    corrections: Optional[dict] = None  # outcome -> (op_on_i | None, op_on_j | None)

    @property
    def n_outcomes(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class LoccProtocol:
    steps: tuple[MeasurementStep, ...]
    target_pair: tuple[int, int]
    classifier: Optional[Callable[[tuple[int, ...]], str]] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        i, j = self.target_pair
        if i == j:
            raise ValueError("target pair must be two distinct parties")
        pair = (min(i, j), max(i, j))
        object.__setattr__(self, "target_pair", pair)
        for step in self.steps:
            if step.site in pair:
                raise ValueError(f"step measures target-pair site {step.site}")


@dataclass
class LoccBranch:
    """One surviving outcome history with its residual pair state."""

    label: tuple[int, ...]
    probability: float
    residual: object  # PureState | DensityMatrix on the pair
    correction: tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None)
    classification: str = "pure"

    def corrected_residual(self):
        state = self.residual
        ci, cj = self.correction
        if ci is not None:
            state = apply_local(ci, (0,), state)
        if cj is not None:
            state = apply_local(cj, (1,), state)
        return state

    def residual_entropy(self) -> Optional[float]:
        if isinstance(self.residual, PureState):
            return entanglement_entropy(self.residual, (0,))
        return None


@dataclass
class BranchSet:
    pair: tuple[int, int]
    branches: list[LoccBranch]
    merge_log: list[MergeRecord]
    outcome_counts: tuple[int, ...]

    @property
    def label_space_size(self) -> int:
        """Number of raw outcome sequences, merged ones included."""
        return math.prod(self.outcome_counts) if self.outcome_counts else 1

    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def by_label(self) -> dict:
        return {b.label: b for b in self.branches}


def enumerate_branches(protocol: LoccProtocol, state, *, site_channel=None) -> BranchSet:
    """Walk every outcome sequence of the protocol on the given state.

    site_channel, if given, is applied to the measured site right before
    each measurement (used for noisy-measurement models): it receives the
    current state and the position of the site in the current register.

    Zero-probability outcomes are merged into the lowest-indexed surviving
    sibling and logged; every surviving branch ends as a state on exactly
    the target pair (unmeasured spectator sites are traced out).
    """
    n = state.n_sites
    pair = protocol.target_pair
    if any(s >= n or s < 0 for s in pair):
        raise ValueError(f"target pair {pair} outside register of {n} sites")
    sites_seen = set(pair)
    for step in protocol.steps:
        if step.site < 0 or step.site >= n:
            raise ValueError(f"protocol measures site {step.site}, state has {n} sites")
        if step.site in sites_seen and step.site not in pair:
            raise ValueError(f"protocol measures site {step.site} twice")
        sites_seen.add(step.site)
        d_site = state.dims[step.site]
        if step.basis.shape[1] != d_site:
            raise ValueError(
                f"basis dimension {step.basis.shape[1]} does not match site {step.site} "
                f"dimension {d_site}"
            )

    frontier = [((), 1.0, state, list(range(n)))]
    merge_log: list[MergeRecord] = []
    for step in protocol.steps:
        new_frontier = []
        for labels, prob, current, remaining in frontier:
            pos = remaining.index(step.site)
            measured = site_channel(current, pos) if site_channel is not None else current
            outcomes = measure_site(measured, pos, step.basis)
            surviving = [o for o in outcomes if o.post_state is not None]
            if not surviving:
                raise ArithmeticError("all outcomes of a measurement have zero probability")
            absorb = surviving[0].outcome
            rest = [s for s in remaining if s != step.site]
            for o in outcomes:
                if o.post_state is None:
                    merge_log.append(MergeRecord(labels, step.site, o.outcome, absorb))
                else:
                    new_frontier.append((labels + (o.outcome,), prob * o.probability, o.post_state, rest))
        frontier = new_frontier

    input_pure = isinstance(state, PureState)
    branches = []
    for labels, prob, current, remaining in frontier:
        positions = [remaining.index(p) for p in pair]
        if len(remaining) == 2:
            residual = current
        else:
            rho = partial_trace(current, positions)
            if input_pure and rho.purity() >= _PURITY_PURE:
                residual = rho.as_pure()
            else:
                residual = rho
        if protocol.classifier is not None:
            classification = protocol.classifier(labels)
        else:
            classification = "pure" if isinstance(residual, PureState) else "mixed"
        correction = _accumulate_corrections(protocol, labels, residual.dims)
        branches.append(LoccBranch(labels, prob, residual, correction, classification))

    branches.sort(key=lambda b: b.label)
    counts = tuple(step.n_outcomes for step in protocol.steps)
    return BranchSet(pair, branches, merge_log, counts)


def _accumulate_corrections(protocol, labels, residual_dims):
    ci = cj = None
    for step, outcome in zip(protocol.steps, labels):
        if not step.corrections:
            continue
        ops = step.corrections.get(outcome)
        if ops is None:
            continue
        op_i, op_j = ops
        if op_i is not None:
            ci = op_i if ci is None else op_i @ ci
        if op_j is not None:
            cj = op_j if cj is None else op_j @ cj
    return (ci, cj)


def branch_set_to_json(branch_set: BranchSet) -> dict:
    """Branch tree as a JSON-ready dict, merged outcomes expanded.

    Merged (never-occurring) outcomes are expanded back to full-length
    labels with probability 0 so the record count equals the raw label
    space (e.g. 3^(2n) for an AKLT window of n sites per side).
    """
    records = []
    for b in branch_set.branches:
        records.append(
            {
                "mu": list(b.label),
                "probability": b.probability,
                "residual_entropy": b.residual_entropy(),
                "classification": b.classification,
            }
        )
    counts = branch_set.outcome_counts
    for rec in branch_set.merge_log:
        depth = len(rec.prefix)
        tail_ranges = [range(c) for c in counts[depth + 1:]]
        for tail in iter_product(*tail_ranges):
            records.append(
                {
                    "mu": list(rec.prefix) + [rec.outcome] + list(tail),
                    "probability": 0.0,
                    "residual_entropy": None,
                    "classification": "merged",
                    "merged_into": list(rec.prefix) + [rec.merged_into] + list(tail),
                }
            )
    records.sort(key=lambda r: tuple(r["mu"]))
    return {
        "pair": list(branch_set.pair),
        "n_branches": len(records),
        "n_surviving": len(branch_set.branches),
        "branches": records,
        "merges": [
            {
                "prefix": list(m.prefix),
                "site": m.site,
                "outcome": m.outcome,
                "merged_into": m.merged_into,
            }
            for m in branch_set.merge_log
        ],
    }


# ---------------------------------------------------------------------------
# Graph states: measure the pair's neighborhood in the computational basis.


def _phase_correction(d: int, weight, power: int) -> np.ndarray:
    """Inverse of the phase kick a computational outcome applies to a neighbor."""
    if d == 2:
        return np.diag([1.0, np.exp(-1j * weight * power)]).astype(np.complex128)
    omega = np.exp(-2j * math.pi / d)
    return np.diag([omega ** (int(weight) * power * x) for x in range(d)]).astype(np.complex128)


def graph_pair_protocol(graph: WeightedGraph, pair) -> LoccProtocol:
    """Computational-basis measurements on the neighborhood of an edge.

    The controlled-phase gates commute with these measurements, so each
    outcome only kicks a known diagonal phase onto the adjacent pair qubits;
    the inverse kicks are recorded as corrections, making every corrected
    branch residual exactly the two-body graph state of the pair edge.
    """
    i, j = min(pair), max(pair)
    if not graph.has_edge(i, j):
        raise ValueError(f"pair ({i},{j}) is not an edge of the graph")
    d = graph.qudit_dim or 2
    measured = sorted((set(graph.neighbors(i)) | set(graph.neighbors(j))) - {i, j})
    basis = np.eye(d, dtype=np.complex128)
    steps = []
    for k in measured:
        corrections = {}
        for m in range(1, d):
            op_i = _phase_correction(d, graph.weight(k, i), m) if graph.has_edge(k, i) else None
            op_j = _phase_correction(d, graph.weight(k, j), m) if graph.has_edge(k, j) else None
            corrections[m] = (op_i, op_j)
        steps.append(MeasurementStep(k, basis, corrections or None))
    return LoccProtocol(tuple(steps), (i, j), name="graph", meta={"graph_pair": (i, j)})


def graph_pair_target(graph: WeightedGraph, pair) -> PureState:
    """The canonical corrected residual U_ij |+>^2 for a graph edge."""
    i, j = min(pair), max(pair)
    w = graph.weight(i, j)
    d = graph.qudit_dim or 2
    if d == 2:
        amps = np.array([1, 1, 1, np.exp(1j * w)], dtype=np.complex128) / 2.0
        return PureState(QuditRegister((2, 2)), amps)
    omega = np.exp(2j * math.pi / d)
    amps = np.array([omega ** (int(w) * k * l) for k in range(d) for l in range(d)]) / d
    return PureState(QuditRegister((d, d)), amps)


# ---------------------------------------------------------------------------
# AKLT: window measurements in the triplet basis around a nearest-neighbor
# pair; outcome 2 swaps the virtual bond outward, 0/1 cut the chain.


@dataclass(frozen=True)
class AkltCutParams:
    """Sites measured on each side of the target pair."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("window must measure at least one site per side")


def aklt_cut_probability(n: int) -> float:
    """Per-side composed cutting probability 1 - 2*(1/3)^n."""
    return 1.0 - 2.0 * (1.0 / 3.0) ** n


def aklt_pair_protocol(
    chain: AkltChain, pair, params: AkltCutParams, truncate: bool = False
) -> LoccProtocol:
    """Measure params.n sites outward on each side of an adjacent pair.

    With truncate=False the window must fit inside the chain.  With
    truncate=True a window that reaches a chain end is shortened; for the
    terminal boundary the end qubit itself is then measured in the Z basis
    (which always decouples that side), and a pair member may itself be a
    terminal qubit (that side needs no measurements at all).
    """
    lo, hi = min(pair), max(pair)
    if hi != lo + 1:
        raise ValueError(f"pair {pair} must be adjacent parties")
    n_parties = chain.n_parties
    if lo < 0 or hi >= n_parties:
        raise ValueError(f"pair {pair} outside chain of {n_parties} parties")
    physical = set(chain.physical_parties())
    terminal = chain.boundary == "terminal"
    first_phys = min(physical)
    last_phys = max(physical)
    basis3 = np.eye(3, dtype=np.complex128)
    basis2 = np.eye(2, dtype=np.complex128)

    def build_side(pair_member: int, direction: int):
        """Measured parties walking outward; returns (steps, always_cut)."""
        if pair_member not in physical:
            return [], True  # the pair member is a terminal qubit: nothing beyond it
        parties = []
        cursor = pair_member + direction
        while len(parties) < params.n and cursor in physical:
            parties.append(cursor)
            cursor += direction
        if len(parties) < params.n:
            if not truncate:
                raise ValueError(
                    f"window out of range: {params.n} sites not available on one side of {pair}"
                )
            if terminal:
                parties.append(0 if direction < 0 else n_parties - 1)
            return parties, True
        # full window; anything beyond stays unmeasured
        return parties, False

    left_parties, left_always = build_side(lo, -1)
    right_parties, right_always = build_side(hi, +1)
    steps = []
    for p in left_parties + right_parties:
        steps.append(MeasurementStep(p, basis2 if p not in physical else basis3))
    n_left = len(left_parties)
    left_phys = [p for p in left_parties if p in physical]
    right_phys = [p for p in right_parties if p in physical]

    def classify(labels: tuple[int, ...]) -> str:
        left_labels = labels[:n_left][: len(left_phys)]
        right_labels = labels[n_left:][: len(right_phys)]
        left_cut = left_always or any(x != 2 for x in left_labels)
        right_cut = right_always or any(x != 2 for x in right_labels)
        return "cut" if (left_cut and right_cut) else "uncut"

    meta = {
        "n_left": n_left,
        "n_right": len(right_parties),
        "left_always_cut": left_always,
        "right_always_cut": right_always,
        "left_phys_count": len(left_phys),
        "right_phys_count": len(right_phys),
        "window": params.n,
    }
    return LoccProtocol(tuple(steps), (lo, hi), classifier=classify, name="aklt", meta=meta)


class AkltCutStats(NamedTuple):
    p_left_uncut: float
    p_right_uncut: float
    p_cut_composed: float  # 1 - p_left_uncut - p_right_uncut (the window formula)
    p_cut_strict: float    # probability mass of branches with both sides cut


def aklt_cut_stats(branch_set: BranchSet, protocol: LoccProtocol) -> AkltCutStats:
    meta = protocol.meta
    n_left = meta["n_left"]
    left_n = meta["left_phys_count"]
    right_n = meta["right_phys_count"]
    p_left = p_right = p_strict = 0.0
    for b in branch_set.branches:
        left_labels = b.label[:n_left][:left_n]
        right_labels = b.label[n_left:][:right_n]
        left_uncut = (not meta["left_always_cut"]) and all(x == 2 for x in left_labels)
        right_uncut = (not meta["right_always_cut"]) and all(x == 2 for x in right_labels)
        if left_uncut:
            p_left += b.probability
        if right_uncut:
            p_right += b.probability
        if not left_uncut and not right_uncut:
            p_strict += b.probability
    return AkltCutStats(p_left, p_right, 1.0 - p_left - p_right, p_strict)


def aklt_final_pair_states() -> dict:
    """The eight candidate pair states after a successful cut.

    Keyed by (i, j, parity): triplet-projected |i> (|01> - (-1)^parity |10>) |j>
    on the two spin-1 sites, normalized.
    """
    out = {}
    for i in (0, 1):
        for j in (0, 1):
            for parity in (0, 1):
                bond = np.zeros(4, dtype=np.complex128)
                bond[0b01] = 1.0
                bond[0b10] = -((-1.0) ** parity)
                vi = np.zeros(2, dtype=np.complex128)
                vi[i] = 1.0
                vj = np.zeros(2, dtype=np.complex128)
                vj[j] = 1.0
                full = np.kron(vi, np.kron(bond, vj)).reshape(4, 4)
                m = TRIPLET_ISOMETRY @ full @ TRIPLET_ISOMETRY.T
                vec = m.reshape(-1)
                out[(i, j, parity)] = PureState(QuditRegister((3, 3)), vec / np.linalg.norm(vec))
    return out


# Virtual chains: the AKLT transfer map has the identity as exact fixed
# point, so a terminal-boundary chain looks identical inside any window
# regardless of length.  The traced chain outside the window enters only
# through the marginal it induces on the virtual qubit at the window edge,
# which relaxes toward I/2 with factor -1/3 per unmeasured site.


def _env_weights(boundary: str, distance: int) -> tuple[float, float]:
    """(P(edge qubit = 0), P(edge qubit = 1)) induced by the traced side.

    distance counts unmeasured physical sites between the chain end and the
    window.  The terminal boundary gives exactly (1/2, 1/2) at any distance;
    the projected boundary pins the edge qubit to |1> at distance 0.
    """
    if boundary == "terminal":
        return (0.5, 0.5)
    p_one = 0.5 + 0.5 * (-1.0 / 3.0) ** distance
    return (1.0 - p_one, p_one)


def _bond_chunk(weights: tuple[float, float], env_first: bool) -> np.ndarray:
    """Two-qubit bond between an environment qubit and a chain virtual qubit.

    Tracing the environment qubit leaves diag(weights) on the chain qubit;
    at weights (1/2, 1/2) this is exactly the singlet.  env_first gives the
    qubit order (env, chain); otherwise (chain, env).
    """
    w0, w1 = weights
    vec = np.zeros(4, dtype=np.complex128)
    if env_first:
        vec[0b01] = math.sqrt(w1)   # |0>_env |1>_chain
        vec[0b10] = -math.sqrt(w0)  # |1>_env |0>_chain
    else:
        vec[0b01] = math.sqrt(w0)   # |0>_chain |1>_env
        vec[0b10] = -math.sqrt(w1)  # |1>_chain |0>_env
    return vec


def aklt_virtual_branch_set(
    chain: VirtualAkltChain, pair, params: AkltCutParams, truncate: bool = False
) -> tuple[BranchSet, LoccProtocol]:
    """Branch set for a window protocol on a chain of arbitrary length.

    Builds the exact reduced model of the window: the chain outside the
    window is replaced per side by one traced ancilla qubit carrying the
    environment weights on the entering bond.  Branch labels, probabilities
    and residuals match a dense enumeration of the full chain exactly, at a
    cost independent of n_sites.
    """
    dense_equiv = AkltChain(chain.n_sites, chain.boundary)
    lo, hi = min(pair), max(pair)
    protocol_big = aklt_pair_protocol(dense_equiv, (lo, hi), params, truncate=truncate)
    physical = set(dense_equiv.physical_parties())
    n_parties = dense_equiv.n_parties

    window_parties = sorted({lo, hi} | {s.site for s in protocol_big.steps})
    if window_parties != list(range(window_parties[0], window_parties[-1] + 1)):
        raise AssertionError("window parties are not contiguous")
    spin_parties = [p for p in window_parties if p in physical]

    def side_spec(edge_party: int, direction: int):
        """(real_terminal_party | None, env weights) for one side."""
        if edge_party not in physical:
            return edge_party, (0.5, 0.5)  # the terminal qubit itself is in the window
        distance = 0
        cursor = edge_party + direction
        while cursor in physical:
            distance += 1
            cursor += direction
        return None, _env_weights(dense_equiv.boundary, distance)

    left_party, left_w = side_spec(window_parties[0], -1)
    right_party, right_w = side_spec(window_parties[-1], +1)

    chunks = [_bond_chunk(left_w, env_first=True)]
    chunks += [SINGLET] * (len(spin_parties) - 1)
    chunks.append(_bond_chunk(right_w, env_first=False))
    amps = chunks[0]
    for chunk in chunks[1:]:
        amps = np.kron(amps, chunk)

    # qubit order: [env_L, a_1, b_1, ..., a_m, b_m, env_R]
    n_spin = len(spin_parties)
    t = amps.reshape((2,) * (2 * n_spin + 2))
    for s_idx in range(n_spin):
        ax = 1 + s_idx
        shape = t.shape
        t = t.reshape(shape[:ax] + (4,) + shape[ax + 2:])
        t = np.tensordot(TRIPLET_ISOMETRY, np.moveaxis(t, ax, 0), axes=([1], [0]))
        t = np.moveaxis(t, 0, ax)
    vec = t.reshape(-1)
    vec = vec / np.linalg.norm(vec)

    party_map = [left_party if left_party is not None else -1]
    dims = [2]
    for p in spin_parties:
        party_map.append(p)
        dims.append(3)
    party_map.append(right_party if right_party is not None else -1)
    dims.append(2)

    reduced_state = PureState(QuditRegister(tuple(dims)), vec)
    big_to_small = {big: small for small, big in enumerate(party_map) if big >= 0}

    steps_small = tuple(
        MeasurementStep(big_to_small[s.site], s.basis, s.corrections) for s in protocol_big.steps
    )
    protocol_small = LoccProtocol(
        steps_small,
        (big_to_small[lo], big_to_small[hi]),
        classifier=protocol_big.classifier,
        name="aklt-virtual",
        meta=protocol_big.meta,
    )
    bs = enumerate_branches(protocol_small, reduced_state)
    relabeled = BranchSet((lo, hi), bs.branches, bs.merge_log, bs.outcome_counts)
    return relabeled, protocol_big


# ---------------------------------------------------------------------------
# Dicke: computational-basis measurements shrink a Dicke state to a smaller
# one; once any branch could hit 0 or all excitations, switch to X.

X_BASIS = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2)


def dicke_z_steps(n: int, k: int) -> int:
    """Number of leading Z measurements that keep every branch entangled.

    After m Z outcomes the excitation count ranges over [k-m, k] on n-m
    qubits; staying strictly inside (0, sites) needs m <= k-1 and
    m <= n-1-k.
    """
    return max(0, min(k - 1, n - 1 - k))


def dicke_pair_protocol(n: int, k: int, pair) -> LoccProtocol:
    """Z measurements while the excitation count permits, then X."""
    if not (1 <= k <= n - 1):
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    i, j = min(pair), max(pair)
    if i == j or i < 0 or j >= n:
        raise ValueError(f"invalid pair {pair} for {n} qubits")
    nonpair = [s for s in range(n) if s not in (i, j)]
    mz = dicke_z_steps(n, k)
    basis_z = np.eye(2, dtype=np.complex128)
    steps = [MeasurementStep(s, basis_z) for s in nonpair[:mz]]
    steps += [MeasurementStep(s, X_BASIS) for s in nonpair[mz:]]
    meta = {"n": n, "k": k, "z_steps": mz}
    return LoccProtocol(tuple(steps), (i, j), name="dicke", meta=meta)


def dicke_branch_excitations(protocol: LoccProtocol, label: tuple[int, ...]) -> int:
    """Excitations left on the pair + X-measured block for a branch."""
    mz = protocol.meta["z_steps"]
    return protocol.meta["k"] - sum(label[:mz])


# ---------------------------------------------------------------------------
# Generic states: Haar-random product measurements on the non-pair parties.


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def generic_pair_protocol(
    state: PureState, pair, seed: int, max_retries: int = 50
) -> LoccProtocol:
    """Haar-random bases on the non-pair sites, validated branch by branch.

    Almost any basis choice leaves every branch residual entangled; a branch
    failing the Schmidt test (a measure-zero event or numerical degeneracy)
    triggers a resample of one site's basis, up to max_retries times.
    """
    n = state.n_sites
    if n < 3:
        raise ValueError("generic protocol needs at least 3 parties")
    i, j = min(pair), max(pair)
    if i == j or i < 0 or j >= n:
        raise ValueError(f"invalid pair {pair} for {n} parties")
    if not is_genuinely_entangled(state):
        raise ValueError("input state is not genuinely entangled")
    rng = np.random.default_rng(seed)
    nonpair = [s for s in range(n) if s not in (i, j)]
    bases = {s: haar_unitary(state.dims[s], rng).T.conj() for s in nonpair}

    for attempt in range(max_retries + 1):
        protocol = LoccProtocol(
            tuple(MeasurementStep(s, bases[s]) for s in nonpair),
            (i, j),
            name="generic",
            meta={"seed": seed, "attempts": attempt},
        )
        branch_set = enumerate_branches(protocol, state)
        failed = None
        for b in branch_set.branches:
            coeffs = schmidt_coefficients(b.residual, (0,))
            second = float(coeffs[1]) if len(coeffs) > 1 else 0.0
            if second < PRODUCT_TOL:
                failed = b
                break
        if failed is None:
            return protocol
        resample = nonpair[attempt % len(nonpair)]
        bases[resample] = haar_unitary(state.dims[resample], rng).T.conj()
    raise ExtractionError(
        f"no entangling basis found within {max_retries} retries; the input is likely "
        "not genuinely entangled or tolerances are too tight"
    )
