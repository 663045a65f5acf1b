"""Rodeo purification: measurement-conditioned projection toward E_t.

One cycle applies (1 + e^{-i(H - E_t) t_j}) / 2 and conditions on the
ancilla staying in |1>; eigencomponents at energy E are damped by
cos((E - E_t) t_j / 2).  A superiteration runs a geometric ladder of
cycle times t_1 r^d, d = 0..D-1, whose first time is pi over the
spectral gap so the first excited component is annihilated exactly when
E_t sits on the ground energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RodeoAnnihilationError
from .propagate import expmv
from .spin_model import SparseHamiltonian, StateVector

#: Once the cumulative success probability falls below this, the input is
#: treated as orthogonal to everything the schedule can keep.
ANNIHILATION_FLOOR = 1e-30

_ANCILLA_DIM_CAP = 100


@dataclass(frozen=True)
class RodeoSchedule:
    """Cycle times: ``superiterations`` repeats of a geometric ladder."""

    t1: float
    depth: int
    superiterations: int
    ratio: float
    times: np.ndarray

    @property
    def total_time(self) -> float:
        return float(self.times.sum())


def make_schedule(
    gap: float,
    *,
    depth: int = 8,
    superiterations: int = 1,
    ratio: float = 0.5,
) -> RodeoSchedule:
    """Geometric cycle-time ladder seeded by t1 = pi / gap."""
    if gap <= 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    if superiterations < 0:
        raise ValueError(f"superiterations must be nonnegative, got {superiterations}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    t1 = np.pi / gap
    ladder = t1 * ratio ** np.arange(depth)
    times = np.tile(ladder, superiterations)
    return RodeoSchedule(float(t1), depth, superiterations, ratio, times)


def rodeo_cycle(
    v: StateVector,
    H: SparseHamiltonian,
    E_t: float,
    t_j: float,
    *,
    tol: float = 1e-10,
) -> tuple[StateVector, float]:
    """One conditioned cycle; returns (normalized survivor, probability).

    The unnormalized survivor is w = (v + e^{i E_t t_j} e^{-i H t_j} v)/2
    and the success probability is |w|^2.  When the probability
    underflows to zero the unnormalized (zero) vector is returned as is.
    """
    evolved = expmv(H, t_j, v, tol=tol)
    w = 0.5 * (v.amps + np.exp(1j * E_t * t_j) * evolved.amps)
    nrm = float(np.linalg.norm(w))
    prob = nrm * nrm
    if nrm > 0.0:
        w = w / nrm
    return StateVector(v.basis, w), prob


@dataclass(frozen=True)
class RodeoOutcome:
    state: StateVector
    p_total: float
    cycle_probs: np.ndarray
    t_R: float


def run_rodeo(
    v0: StateVector,
    H: SparseHamiltonian,
    E_t: float,
    schedule: RodeoSchedule,
    *,
    tol: float = 1e-10,
) -> RodeoOutcome:
    """Run every cycle of ``schedule`` on v0, renormalizing after each.

    ``p_total`` is the product of the per-cycle probabilities, equal to
    the squared norm the unnormalized cycle product would have.  Raises
    :class:`RodeoAnnihilationError` once the running product falls below
    the annihilation floor.
    """
    state = v0
    probs = np.empty(schedule.times.size)
    p_total = 1.0
    for j, t_j in enumerate(schedule.times):
        state, p = rodeo_cycle(state, H, E_t, float(t_j), tol=tol)
        probs[j] = p
        p_total *= p
        if p_total < ANNIHILATION_FLOOR:
            raise RodeoAnnihilationError(
                f"cumulative success probability {p_total:.3e} fell below "
                f"{ANNIHILATION_FLOOR:.0e} after cycle {j + 1} of "
                f"{schedule.times.size} (E_t={E_t:.12g})"
            )
    return RodeoOutcome(state, p_total, probs, schedule.total_time)


def ancilla_circuit_cycle(
    v: StateVector,
    H: SparseHamiltonian,
    E_t: float,
    t_j: float,
) -> tuple[StateVector, float]:
    """One cycle through the explicit two-register circuit (test oracle).

    Ancilla starts in |1>; Hadamard, controlled exp(-i H t_j), phase
    e^{i E_t t_j} on the ancilla, Hadamard, then projection onto |1>.
    Builds the full propagator densely, so it is capped at small sectors.
    """
    dim = H.dim
    if dim > _ANCILLA_DIM_CAP:
        raise ValueError(
            f"ancilla circuit oracle is limited to dim <= {_ANCILLA_DIM_CAP}, got {dim}"
        )
    if not H.basis.same_sector(v.basis) or dim != v.basis.dim:
        raise ValueError("state and Hamiltonian live in different sectors")
    U = scipy.linalg.expm(-1j * t_j * H.matrix.toarray())
    joint = np.zeros((2, dim), dtype=np.complex128)
    joint[1] = v.amps
    joint = np.array([joint[0] + joint[1], joint[0] - joint[1]]) / np.sqrt(2.0)
    joint[1] = U @ joint[1]
    joint[1] *= np.exp(1j * E_t * t_j)
    joint = np.array([joint[0] + joint[1], joint[0] - joint[1]]) / np.sqrt(2.0)
    survivor = joint[1]
    nrm = float(np.linalg.norm(survivor))
    prob = nrm * nrm
    if nrm > 0.0:
        survivor = survivor / nrm
    return StateVector(v.basis, survivor), prob


def energy_scan(
    v0: StateVector,
    H: SparseHamiltonian,
    grid: np.ndarray,
    schedule: RodeoSchedule,
    *,
    tol: float = 1e-10,
) -> list[tuple[float, float]]:
    """Total success probability of ``schedule`` at each target energy.

    Each grid point runs the full schedule on a fresh copy of v0; points
    where the weight is annihilated report probability 0 instead of
    raising.
    """
    results = []
    for E_t in np.asarray(grid, dtype=np.float64):
        try:
            outcome = run_rodeo(v0, H, float(E_t), schedule, tol=tol)
            p = outcome.p_total
        except RodeoAnnihilationError:
            p = 0.0
        results.append((float(E_t), p))
    return results
