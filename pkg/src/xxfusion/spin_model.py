"""Sector bases, the open XX-chain Hamiltonian, and product-state embedding.

Conventions used throughout the package:

* a configuration is an integer whose bit i is the spin at site i
  (1 = up), so site 0 sits at the least significant bit and a ket string
  such as |0110> is just the binary numeral of the configuration with
  site L-1 leftmost,
* chains are open; bond b couples sites b and b+1,
* hbar = 1, so times carry units of 1/J.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError

#: Refuse to enumerate sectors beyond this size; statevectors would not fit.
MAX_SECTOR_DIM = 1 << 24


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """All configurations of an L-site chain with exactly n_up spins up.

    ``configs`` is sorted ascending, so ordinals are recovered by binary
    search, and ``dim == binomial(L, n_up)``.
    """

    L: int
    n_up: int
    configs: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.configs.size)

    def index_of(self, config: int) -> int:
        """Ordinal of ``config`` within the sector."""
        i = int(np.searchsorted(self.configs, config))
        if i == self.dim or int(self.configs[i]) != int(config):
            raise ValueError(
                f"configuration {config:#b} not in sector (L={self.L}, n_up={self.n_up})"
            )
        return i

    def same_sector(self, other: "SectorBasis") -> bool:
        return self is other or (self.L == other.L and self.n_up == other.n_up)


def enumerate_sector(L: int, n_up: int, *, max_dim: int = MAX_SECTOR_DIM) -> SectorBasis:
    """Enumerate the fixed-magnetization basis of an open L-site chain.

    Returns a :class:`SectorBasis` whose configurations are sorted
    ascending as integers.
    """
    if L < 1:
        raise ValueError(f"need at least one site, got L={L}")
    if not 0 <= n_up <= L:
        raise ValueError(f"n_up={n_up} outside [0, {L}]")
    dim = math.comb(L, n_up)
    if dim > max_dim:
        raise CapacityError(
            f"sector (L={L}, n_up={n_up}) has dimension {dim}, above the cap {max_dim}"
        )
    configs = np.fromiter(
        (sum(1 << i for i in sites) for sites in itertools.combinations(range(L), n_up)),
        dtype=np.int64,
        count=dim,
    )
    configs.sort()
    return SectorBasis(L, n_up, configs)


@dataclass(frozen=True, eq=False)
class BondCouplings:
    """Per-bond couplings of an open chain; ``J[b]`` couples sites b, b+1."""

    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=np.float64)
        if J.ndim != 1 or J.size < 1:
            raise ValueError("couplings must be a nonempty 1d array")
        if not np.all(np.isfinite(J)):
            raise ValueError("couplings must be finite")
        object.__setattr__(self, "J", J)

    @property
    def n_sites(self) -> int:
        return self.J.size + 1

    @property
    def scale(self) -> float:
        """Largest |J_b|, or 1.0 for the all-zero chain (tolerance anchor)."""
        s = float(np.max(np.abs(self.J)))
        return s if s > 0.0 else 1.0

    @staticmethod
    def uniform(L: int, J: float = 1.0) -> "BondCouplings":
        if L < 2:
            raise ValueError("a chain needs at least two sites to have bonds")
        return BondCouplings(np.full(L - 1, J))

    def with_bond(self, bond: int, value: float) -> "BondCouplings":
        """Copy with bond ``bond`` replaced by ``value``."""
        if not 0 <= bond < self.J.size:
            raise ValueError(f"bond {bond} outside [0, {self.J.size})")
        J = self.J.copy()
        J[bond] = value
        return BondCouplings(J)


def middle_bond(L: int) -> int:
    """Bond joining the two halves of an even-length chain."""
    if L % 2 != 0:
        raise ValueError(f"L={L} has no middle bond")
    return L // 2 - 1


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """XX Hamiltonian restricted to one sector, stored as real CSR.

    H = sum_b J[b] (S+_b S-_{b+1} + S-_b S+_{b+1}); diagonal is zero and
    every matrix element is real, so the eigenbasis can be chosen real.
    """

    basis: SectorBasis
    couplings: BondCouplings
    matrix: sp.csr_matrix
    _eig_cache: tuple | None = field(default=None, init=False, repr=False)
    _norm_cache: float | None = field(default=None, init=False, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def dense_eig(self):
        """Cached full eigendecomposition (w, U); intended for small dims."""
        if self._eig_cache is None:
            w, U = np.linalg.eigh(self.matrix.toarray())
            object.__setattr__(self, "_eig_cache", (w, U))
        return self._eig_cache

    def norm_inf(self) -> float:
        """Cached max absolute row sum; bounds the spectral radius."""
        if self._norm_cache is None:
            if self.matrix.nnz == 0:
                nrm = 0.0
            else:
                nrm = float(np.abs(self.matrix).sum(axis=1).max())
            object.__setattr__(self, "_norm_cache", nrm)
        return self._norm_cache


def _hop_coordinates(basis: SectorBasis, bonds) -> tuple:
    """COO arrays (rows, cols, J values) for the hops of the given bonds.

    Distinct bonds flip distinct bit pairs, so no coordinate repeats and
    callers may build several couplings on one shared coordinate list.
    """
    configs = basis.configs
    rows, cols, vals = [], [], []
    for b, Jb in bonds:
        antiparallel = (((configs >> b) ^ (configs >> (b + 1))) & 1) == 1
        src = np.nonzero(antiparallel)[0]
        if src.size == 0:
            continue
        partners = configs[src] ^ (3 << b)
        dst = np.searchsorted(configs, partners)
        rows.append(dst)
        cols.append(src)
        vals.append(np.full(src.size, Jb))
    if not rows:
        empty = np.empty(0)
        return empty.astype(np.int64), empty.astype(np.int64), empty
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def build_hamiltonian(basis: SectorBasis, couplings: BondCouplings) -> SparseHamiltonian:
    """Assemble the sector-restricted hop matrix.

    A bond b contributes J[b] between configurations that differ by one
    exchange of antiparallel neighbors across that bond; magnetization is
    conserved, so the sector closes under all hops.
    """
    if couplings.n_sites != basis.L:
        raise ValueError(
            f"couplings are for {couplings.n_sites} sites, basis has {basis.L}"
        )
    bonds = [(b, Jb) for b, Jb in enumerate(couplings.J) if Jb != 0.0]
    rows, cols, vals = _hop_coordinates(basis, bonds)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    return SparseHamiltonian(basis, couplings, matrix)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over one sector basis, in config order."""

    basis: SectorBasis
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.basis.dim,):
            raise ValueError(
                f"amplitude shape {amps.shape} does not match sector dim {self.basis.dim}"
            )
        object.__setattr__(self, "amps", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amps / n)


def basis_state(basis: SectorBasis, config: int) -> StateVector:
    """The computational basis state |config> as a sector vector."""
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[basis.index_of(config)] = 1.0
    return StateVector(basis, amps)


def apply_hamiltonian(H: SparseHamiltonian, v: StateVector) -> StateVector:
    """H @ v without exponentiation (mostly for residual checks)."""
    if not H.basis.same_sector(v.basis) or H.dim != v.basis.dim:
        raise ValueError("state and Hamiltonian live in different sectors")
    return StateVector(v.basis, H.matrix @ v.amps)


def embed_product(a: StateVector, b: StateVector, *, basis: SectorBasis | None = None) -> StateVector:
    """Tensor product of two half-chain states inside the doubled sector.

    The first factor occupies sites half..L-1 (the left half of the ket
    string), the second sites 0..half-1, so |01> (x) |10> lands on the
    four-site configuration 0b0110.  The map is an isometry: norms
    multiply.
    """
    if a.basis.L != b.basis.L:
        raise ValueError(
            f"halves must have equal length, got {a.basis.L} and {b.basis.L}"
        )
    half = a.basis.L
    L = 2 * half
    n_up = a.basis.n_up + b.basis.n_up
    if basis is None:
        basis = enumerate_sector(L, n_up)
    elif basis.L != L or basis.n_up != n_up:
        raise ValueError(
            f"target basis (L={basis.L}, n_up={basis.n_up}) does not match "
            f"the product sector (L={L}, n_up={n_up})"
        )
    combined = ((a.basis.configs[:, None] << half) | b.basis.configs[None, :]).ravel()
    idx = np.searchsorted(basis.configs, combined)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[idx] = np.outer(a.amps, b.amps).ravel()
    return StateVector(basis, amps)
