"""Dense multi-qudit linear algebra.

Pure states and density matrices over registers with per-site dimensions,
plus the operations everything else is built on: composition, local
operations, projective site measurement, partial trace, Schmidt
decomposition and entanglement tests.

All objects are immutable after construction and all operations are pure
functions, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

# Tolerance ladder: one decade of slack per level of computation depth.
TOL_CONSTRUCT = 1e-12  # state construction (norms, traces, hermiticity)
TOL_ALGEBRA = 1e-10    # algebraic identities (orthonormality, completeness)
TOL_DECISION = 1e-9    # entanglement decisions (Schmidt-rank cutoffs)

ZERO_PROB = 1e-12      # outcomes below this are retained as null branches

DEFAULT_AMPLITUDE_BUDGET = 1 << 26
_BUDGET_ENV = "ECERT_MEM_CAP"

# Eigenvalue validation of density matrices is O(dim^3); skip above this size
# (hermiticity and trace are still always checked).
_EIG_CHECK_MAX_DIM = 512

# Full 2x2-minor enumeration in is_product is O((dim_a*dim_b)^2) memory;
# above this size only the Schmidt criterion runs.
_MINOR_CHECK_MAX_DIM = 1024


class MemoryBudgetExceeded(ValueError):
    """A register would exceed the configured amplitude budget."""


def amplitude_budget() -> int:
    """Current amplitude budget (ECERT_MEM_CAP overrides the default)."""
    raw = os.environ.get(_BUDGET_ENV)
    if raw is None:
        return DEFAULT_AMPLITUDE_BUDGET
    value = int(raw)
    if value <= 0:
        raise ValueError(f"{_BUDGET_ENV} must be positive, got {raw}")
    return value


@dataclass(frozen=True)
class QuditRegister:
    """Ordered collection of local dimensions d_i, each at least 2."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ValueError("register needs at least one site")
        if any(d < 2 for d in dims):
            raise ValueError(f"all site dimensions must be >= 2, got {dims}")
        if self.dim > amplitude_budget():
            raise MemoryBudgetExceeded(
                f"register dimension {self.dim} exceeds amplitude budget "
                f"{amplitude_budget()} (set {_BUDGET_ENV} to raise it)"
            )

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def drop(self, site: int) -> "QuditRegister":
        """Register with one site removed (used after measurement)."""
        return QuditRegister(self.dims[:site] + self.dims[site + 1:])

    def subset(self, sites: Sequence[int]) -> "QuditRegister":
        return QuditRegister(tuple(self.dims[s] for s in sites))


class PureState:
    """Normalized amplitude vector over a qudit register.

    Amplitudes are stored as a read-only complex vector indexed in
    row-major site order (site 0 is the leftmost tensor factor).
    """

    __slots__ = ("register", "amplitudes")

    def __init__(self, register: QuditRegister, amplitudes):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != register.dim:
            raise ValueError(
                f"amplitude vector has length {amps.size}, register dimension is {register.dim}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state is not normalized: |psi| = {norm}")
        if abs(norm - 1.0) > TOL_CONSTRUCT:
            amps = amps / norm
        amps.setflags(write=False)
        self.register = register
        self.amplitudes = amps

    @property
    def dims(self) -> tuple[int, ...]:
        return self.register.dims

    @property
    def n_sites(self) -> int:
        return self.register.n_sites

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per site."""
        return self.amplitudes.reshape(self.dims)

    def overlap(self, other: "PureState") -> complex:
        """<self|other>."""
        if self.dims != other.dims:
            raise ValueError("overlap between states on different registers")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"PureState(dims={self.dims})"


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix over a register."""

    __slots__ = ("register", "matrix")

    def __init__(self, register: QuditRegister, matrix):
        mat = np.ascontiguousarray(matrix, dtype=np.complex128)
        dim = register.dim
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match register dimension {dim}")
        herm_gap = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_gap > TOL_CONSTRUCT:
            raise ValueError(f"matrix is not Hermitian (max deviation {herm_gap:.3e})")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > 1e-6:
            raise ValueError(f"matrix trace is {tr}, expected 1")
        if abs(tr - 1.0) > TOL_CONSTRUCT:
            mat = mat / tr.real
        if dim <= _EIG_CHECK_MAX_DIM:
            lo = float(np.linalg.eigvalsh(mat)[0])
            if lo < -1e-10:
                raise ValueError(f"matrix has negative eigenvalue {lo:.3e}")
        mat.setflags(write=False)
        self.register = register
        self.matrix = mat

    @property
    def dims(self) -> tuple[int, ...]:
        return self.register.dims

    @property
    def n_sites(self) -> int:
        return self.register.n_sites

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def as_pure(self, tol: float = 1e-8) -> PureState:
        """Dominant eigenvector, if the matrix is pure up to tol."""
        vals, vecs = np.linalg.eigh(self.matrix)
        if vals[-2] > tol if len(vals) > 1 else False:
            raise ValueError(f"density matrix is not pure (second eigenvalue {vals[-2]:.3e})")
        vec = vecs[:, -1]
        # fix the global phase: largest component real positive
        k = int(np.argmax(np.abs(vec)))
        vec = vec * np.exp(-1j * np.angle(vec[k]))
        return PureState(self.register, vec)

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


class SchmidtDecomposition(NamedTuple):
    """Result of a bipartite Schmidt decomposition.

    coefficients are sorted non-increasing; left/right vectors are the
    orthonormal Schmidt kets as rows, matching the coefficient order.
    """

    coefficients: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    bipartition: tuple[int, ...]

    def reconstruct(self) -> np.ndarray:
        """Amplitude matrix sum_k a_k |k><R_k| for round-trip checks."""
        return (self.left_vectors.T * self.coefficients) @ self.right_vectors


class MeasurementOutcome(NamedTuple):
    outcome: int
    probability: float
    post_state: object  # PureState | DensityMatrix | None (null marker)


def pure_to_density(state: PureState) -> DensityMatrix:
    return DensityMatrix(state.register, np.outer(state.amplitudes, state.amplitudes.conj()))


def fidelity(a, b) -> float:
    """|<a|b>|^2 for pure states, <a|rho|a> for a pure/density pair."""
    if isinstance(a, DensityMatrix) and isinstance(b, PureState):
        a, b = b, a
    if isinstance(a, PureState) and isinstance(b, DensityMatrix):
        return float(np.real(a.amplitudes.conj() @ b.matrix @ a.amplitudes))
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(abs(a.overlap(b)) ** 2)
    raise TypeError("fidelity between two density matrices is not supported")


def tensor(states: Sequence[PureState]) -> PureState:
    """Kronecker composition of pure states in input order."""
    if not states:
        raise ValueError("tensor() needs at least one state")
    dims: tuple[int, ...] = ()
    for s in states:
        dims = dims + s.dims
    register = QuditRegister(dims)  # enforces the memory budget
    amps = states[0].amplitudes
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
    return PureState(register, amps)


def _as_sites(sites) -> tuple[int, ...]:
    if isinstance(sites, (int, np.integer)):
        return (int(sites),)
    return tuple(int(s) for s in sites)


def apply_local(op, sites, state):
    """Apply an operator to the given sites, identity elsewhere.

    The operator dimension must match the product of the targeted site
    dimensions.  No renormalization is performed: unitaries need none and
    non-unitary maps must go through measurement or channel operations
    (the output state constructor will reject them).
    """
    sites = _as_sites(sites)
    op = np.asarray(op, dtype=np.complex128)
    dims = state.dims
    n = len(dims)
    if len(set(sites)) != len(sites):
        raise ValueError(f"duplicate target sites {sites}")
    if any(s < 0 or s >= n for s in sites):
        raise ValueError(f"target sites {sites} outside register of {n} sites")
    d_op = math.prod(dims[s] for s in sites)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if op.shape[0] != d_op:
        raise ValueError(f"operator dimension {op.shape[0]} does not match target dimension {d_op}")

    if isinstance(state, PureState):
        out = _apply_axes(state.tensor_view(), op, sites, axis_offset=0, n_axes=n)
        return PureState(state.register, out.reshape(-1))
    if isinstance(state, DensityMatrix):
        t = state.matrix.reshape(dims + dims)
        t = _apply_axes(t, op, sites, axis_offset=0, n_axes=2 * n)
        t = _apply_axes(t, op.conj(), tuple(s + n for s in sites), axis_offset=0, n_axes=2 * n)
        return DensityMatrix(state.register, t.reshape(state.register.dim, state.register.dim))
    raise TypeError(f"unsupported state type {type(state)!r}")


def _apply_axes(tensor_data, op, axes, axis_offset, n_axes):
    """Contract op against the given tensor axes, preserving axis order."""
    axes = [a + axis_offset for a in axes]
    rest = [a for a in range(n_axes) if a not in axes]
    perm = axes + rest
    moved = np.transpose(tensor_data, perm)
    front_shape = moved.shape[: len(axes)]
    moved = moved.reshape(math.prod(front_shape), -1)
    moved = op @ moved
    moved = moved.reshape(front_shape + tuple(tensor_data.shape[a] for a in rest))
    inv = np.argsort(perm)
    return np.transpose(moved, inv)


def _check_basis(basis: np.ndarray, d: int):
    if basis.ndim != 2 or basis.shape != (d, d):
        raise ValueError(f"basis must be a {d}x{d} array of kets (rows), got shape {basis.shape}")
    gram = basis.conj() @ basis.T
    if float(np.max(np.abs(gram - np.eye(d)))) > TOL_ALGEBRA:
        raise ValueError("measurement basis is not orthonormal")


def measure_site(state, site: int, basis) -> list[MeasurementOutcome]:
    """Projective measurement of one site in the given orthonormal basis.

    Returns one entry per basis vector with the outcome probability and the
    normalized post-state on the remaining sites.  Zero-probability outcomes
    (prob < 1e-12) are retained with a null post-state so that branch
    bookkeeping stays exhaustive.
    """
    site = int(site)
    dims = state.dims
    d = dims[site]
    basis = np.asarray(basis, dtype=np.complex128)
    _check_basis(basis, d)

    outcomes: list[MeasurementOutcome] = []
    if isinstance(state, PureState):
        moved = np.moveaxis(state.tensor_view(), site, 0).reshape(d, -1)
        amps = basis.conj() @ moved  # row k = <v_k|psi> on the remaining sites
        probs = np.einsum("kr,kr->k", amps, amps.conj()).real
        new_register = state.register.drop(site)
        for k in range(d):
            p = float(probs[k])
            if p < ZERO_PROB:
                outcomes.append(MeasurementOutcome(k, p, None))
            else:
                outcomes.append(
                    MeasurementOutcome(k, p, PureState(new_register, amps[k] / math.sqrt(p)))
                )
    elif isinstance(state, DensityMatrix):
        n = len(dims)
        t = state.matrix.reshape(dims + dims)
        new_register = state.register.drop(site)
        rest_dim = new_register.dim
        for k in range(d):
            v = basis[k]
            a = np.tensordot(v.conj(), t, axes=([0], [site]))
            # removing the row axis shifted the matching column axis left by one
            a = np.tensordot(a, v, axes=([n + site - 1], [0]))
            mat = a.reshape(rest_dim, rest_dim)
            p = float(np.real(np.trace(mat)))
            if p < ZERO_PROB:
                outcomes.append(MeasurementOutcome(k, max(p, 0.0), None))
            else:
                outcomes.append(MeasurementOutcome(k, p, DensityMatrix(new_register, mat / p)))
    else:
        raise TypeError(f"unsupported state type {type(state)!r}")
    return outcomes


def partial_trace(state, keep) -> DensityMatrix:
    """Reduced density matrix on the kept sites (in ascending site order)."""
    keep = sorted(_as_sites(keep))
    dims = state.dims
    n = len(dims)
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(s < 0 or s >= n for s in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid keep set {keep} for {n} sites")
    rest = [s for s in range(n) if s not in keep]
    new_register = state.register.subset(keep)

    if isinstance(state, PureState):
        perm = keep + rest
        m = np.transpose(state.tensor_view(), perm).reshape(new_register.dim, -1)
        return DensityMatrix(new_register, m @ m.conj().T)
    if isinstance(state, DensityMatrix):
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        if 2 * n > len(letters):
            raise ValueError("too many sites for einsum-based partial trace")
        row = list(letters[:n])
        col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
        out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
        spec = "".join(row) + "".join(col) + "->" + out
        t = np.einsum(spec, state.matrix.reshape(dims + dims))
        return DensityMatrix(new_register, t.reshape(new_register.dim, new_register.dim))
    raise TypeError(f"unsupported state type {type(state)!r}")


def _normalize_bipartition(state: PureState, bipartition) -> tuple[int, ...]:
    side = tuple(sorted(_as_sites(bipartition)))
    n = state.n_sites
    if any(s < 0 or s >= n for s in side) or len(set(side)) != len(side):
        raise ValueError(f"invalid bipartition {bipartition} for {n} sites")
    if not side or len(side) == n:
        raise ValueError("bipartition must be nontrivial (both sides nonempty)")
    return side


def _bipartition_matrix(state: PureState, side: tuple[int, ...]) -> np.ndarray:
    rest = [s for s in range(state.n_sites) if s not in side]
    da = math.prod(state.dims[s] for s in side)
    perm = list(side) + rest
    return np.transpose(state.tensor_view(), perm).reshape(da, -1)


def schmidt(state: PureState, bipartition) -> SchmidtDecomposition:
    """Schmidt decomposition across the given bipartition."""
    side = _normalize_bipartition(state, bipartition)
    m = _bipartition_matrix(state, side)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return SchmidtDecomposition(s, u.T, vh, side)


def schmidt_coefficients(state: PureState, bipartition) -> np.ndarray:
    side = _normalize_bipartition(state, bipartition)
    return np.linalg.svd(_bipartition_matrix(state, side), compute_uv=False)


def _max_minor(m: np.ndarray) -> float:
    """Largest |2x2 minor| of the amplitude matrix (exhaustive)."""
    g = np.einsum("ik,jl->ijkl", m, m)
    minors = g - np.transpose(g, (0, 1, 3, 2))
    return float(np.max(np.abs(minors)))


def is_product(state: PureState, bipartition, tol: float = TOL_DECISION) -> bool:
    """True iff the state is a product across the bipartition.

    Decided by the second Schmidt coefficient; where the reshaped amplitude
    matrix is small enough the equivalent all-2x2-minors criterion is also
    evaluated and the two are required to agree.
    """
    side = _normalize_bipartition(state, bipartition)
    m = _bipartition_matrix(state, side)
    s = np.linalg.svd(m, compute_uv=False)
    second = float(s[1]) if len(s) > 1 else 0.0
    by_schmidt = second < tol
    if m.size <= _MINOR_CHECK_MAX_DIM:
        by_minors = _max_minor(m) < tol
        if by_minors != by_schmidt:
            raise ArithmeticError(
                f"product criteria disagree: schmidt={by_schmidt} (a_2={second:.3e}), "
                f"minors={by_minors}; state too close to the tolerance boundary"
            )
    return by_schmidt


def bipartitions(n_sites: int) -> Iterator[tuple[int, ...]]:
    """All 2^(n-1) - 1 bipartitions, as the side containing site 0."""
    others = list(range(1, n_sites))
    for r in range(0, n_sites - 1):
        for combo in combinations(others, r):
            yield (0,) + combo


def is_genuinely_entangled(
    state: PureState, tol: float = TOL_DECISION, max_sites: int = 20
) -> bool:
    """True iff the state is non-product across every bipartition."""
    n = state.n_sites
    if n < 2:
        raise ValueError("genuine entanglement needs at least two sites")
    if n > max_sites:
        raise ValueError(f"bipartition enumeration capped at {max_sites} sites, got {n}")
    for side in bipartitions(n):
        if is_product(state, side, tol):
            return False
    return True


def entanglement_entropy(state: PureState, bipartition) -> float:
    """Entropy of entanglement across the bipartition, in bits."""
    probs = schmidt_coefficients(state, bipartition) ** 2
    probs = probs[probs > 1e-15]
    return float(-np.sum(probs * np.log2(probs)))


def product_overlap(state: PureState, bipartition, bra_a, bra_b) -> complex:
    """<a, b|psi> for product bras across the bipartition."""
    side = _normalize_bipartition(state, bipartition)
    m = _bipartition_matrix(state, side)
    a = np.asarray(bra_a, dtype=np.complex128)
    b = np.asarray(bra_b, dtype=np.complex128)
    return complex(a.conj() @ m @ b.conj())


def random_haar_state(dims, rng: np.random.Generator) -> PureState:
    """Haar-random pure state via normalized complex Gaussian amplitudes."""
    register = QuditRegister(tuple(dims))
    z = rng.standard_normal(register.dim) + 1j * rng.standard_normal(register.dim)
    return PureState(register, z / np.linalg.norm(z))
