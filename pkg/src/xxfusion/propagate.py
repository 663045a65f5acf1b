"""Exact-propagator application and the linear middle-bond ramp.

``expmv`` applies exp(-i H t) either through a cached dense
eigendecomposition (small sectors) or a Lanczos/Krylov approximation with
internal substepping (large ones).  The adiabatic ramp integrates a
piecewise-constant midpoint Hamiltonian, doubles its step count until the
measured infidelity stabilizes, and a doubling-plus-bisection search
finds the shortest ramp duration reaching a requested infidelity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import PropagationError, RampSearchError, StepRefinementError
from .spectral import DENSE_CUTOFF, infidelity
from .spin_model import (
    BondCouplings,
    SectorBasis,
    SparseHamiltonian,
    StateVector,
    _hop_coordinates,
    middle_bond,
)

#: Krylov basis-size cap per substep.
MAX_KRYLOV = 64

#: Target |t| * ||H||_inf per substep; keeps the basis well below the cap.
_THETA_SUB = 20.0

_MAX_ESCALATIONS = 5

#: Ramp durations are searched on a doubling grid up to this many 1/J.
T_CAP = 2.0**16

#: Hard cap on integrator steps inside one ramp evaluation.
MAX_RAMP_STEPS = 1 << 22


@dataclass(frozen=True)
class RampSchedule:
    """Linear ramp of one bond from 0 to J_target over duration T_A."""

    T_A: float
    steps: int
    bond: int
    J_target: float

    def __post_init__(self):
        if self.T_A < 0.0:
            raise ValueError(f"ramp duration must be nonnegative, got {self.T_A}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")

    def coupling_at(self, s: float) -> float:
        return (s / self.T_A) * self.J_target if self.T_A > 0.0 else self.J_target


class _SubstepStall(Exception):
    def __init__(self, residual: float):
        self.residual = residual


def _expm_tridiag(alphas, betas, t):
    # exp(-i T t) e1 for the real symmetric tridiagonal T
    theta, S = scipy.linalg.eigh_tridiagonal(alphas, betas)
    return S @ (np.exp(-1j * theta * t) * S[0, :])


def _lanczos_substep(mat, amps, t, tol_abs, m_max):
    """One Krylov substep; returns the propagated vector or stalls."""
    beta0 = np.linalg.norm(amps)
    if beta0 == 0.0:
        return amps.copy()
    n = amps.size
    V = np.empty((m_max + 1, n), dtype=np.complex128)
    V[0] = amps / beta0
    alphas: list[float] = []
    betas: list[float] = []
    err = np.inf
    for k in range(m_max):
        w = mat @ V[k]
        h = V[: k + 1].conj() @ w
        w -= V[: k + 1].T @ h
        alphas.append(float(h[k].real))
        w -= V[: k + 1].T @ (V[: k + 1].conj() @ w)
        b = float(np.linalg.norm(w))
        u = _expm_tridiag(alphas, betas, t)
        err = beta0 * b * abs(t) * abs(u[-1])
        if err <= tol_abs or b <= 1e-14 * beta0:
            return beta0 * (V[: k + 1].T @ u)
        betas.append(b)
        V[k + 1] = w / b
    raise _SubstepStall(err)


def _krylov_propagate(mat, norm_bound, amps, t, tol, m_max=MAX_KRYLOV):
    nrm = float(np.linalg.norm(amps))
    if nrm == 0.0 or t == 0.0:
        return amps.astype(np.complex128, copy=True)
    n_sub = max(1, math.ceil(abs(t) * norm_bound / _THETA_SUB))
    last = np.inf
    for _ in range(_MAX_ESCALATIONS):
        tol_each = tol * nrm / n_sub
        dt = t / n_sub
        y = amps
        try:
            for _ in range(n_sub):
                y = _lanczos_substep(mat, y, dt, tol_each, m_max)
            return y
        except _SubstepStall as stall:
            last = stall.residual
            n_sub *= 2
    raise PropagationError(
        f"Krylov propagation stalled at residual {last:.3e} "
        f"(tol {tol:.1e}, |t| {abs(t):.3g})",
        residual=last,
    )


def _dense_propagate(H: SparseHamiltonian, t: float, amps: np.ndarray) -> np.ndarray:
    w, U = H.dense_eig()
    return U @ (np.exp(-1j * w * t) * (U.T @ amps))


def expmv(
    H: SparseHamiltonian,
    t: float,
    v: StateVector,
    tol: float = 1e-10,
    *,
    method: str = "auto",
    max_krylov: int = MAX_KRYLOV,
) -> StateVector:
    """Apply exp(-i H t) to v.

    ``method`` is "auto" (dense below the sector-size cutoff, Krylov
    above), "dense", or "krylov"; forcing a path is mostly useful for
    cross-checking the two against each other.
    """
    if not H.basis.same_sector(v.basis) or H.dim != v.basis.dim:
        raise ValueError("state and Hamiltonian live in different sectors")
    if method not in ("auto", "dense", "krylov"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "dense" if H.dim < DENSE_CUTOFF else "krylov"
    if method == "dense":
        amps = _dense_propagate(H, t, v.amps)
    else:
        amps = _krylov_propagate(H.matrix, H.norm_inf(), v.amps, t, tol, max_krylov)
    return StateVector(v.basis, amps)


def _aligned_bond_split(basis: SectorBasis, base: BondCouplings, bond: int):
    """CSR pair (base part, unit bond part) sharing one sparsity pattern.

    Both matrices come from the same coordinate list, so per-step
    couplings combine as a pure data-array update with no symbolic work.
    """
    fixed = [(b, Jb) for b, Jb in enumerate(base.J) if Jb != 0.0]
    rb, cb, vb = _hop_coordinates(basis, fixed)
    ru, cu, vu = _hop_coordinates(basis, [(bond, 1.0)])
    rows = np.concatenate([rb, ru])
    cols = np.concatenate([cb, cu])
    data_base = np.concatenate([vb, np.zeros_like(vu)])
    data_unit = np.concatenate([np.zeros_like(vb), vu])
    shape = (basis.dim, basis.dim)
    Pb = sp.csr_matrix((data_base, (rows, cols)), shape=shape)
    Pu = sp.csr_matrix((data_unit, (rows, cols)), shape=shape)
    if not (
        np.array_equal(Pb.indptr, Pu.indptr) and np.array_equal(Pb.indices, Pu.indices)
    ):
        raise AssertionError("bond split lost pattern alignment")
    return Pb, Pu


def adiabatic_ramp(
    v0: StateVector,
    basis: SectorBasis,
    base: BondCouplings,
    schedule: RampSchedule,
    *,
    tol: float = 1e-10,
) -> StateVector:
    """Integrate the linear bond ramp with midpoint piecewise-constant steps.

    ``base`` must hold the ramped bond at zero; step k evolves for
    T_A/steps under H(base) + lambda(s_mid) H(bond) with lambda evaluated
    at the step midpoint.  Norm is preserved to integrator precision.
    """
    if base.n_sites != basis.L:
        raise ValueError("couplings do not match the sector length")
    if schedule.bond != middle_bond(basis.L):
        raise ValueError(
            f"ramp bond {schedule.bond} is not the middle bond of L={basis.L}"
        )
    if base.J[schedule.bond] != 0.0:
        raise ValueError("base couplings must hold the ramped bond at zero")
    if abs(v0.norm() - 1.0) > 1e-9:
        raise ValueError(f"v0 is not normalized (norm {v0.norm():.12g})")
    if v0.basis.dim != basis.dim or not v0.basis.same_sector(basis):
        raise ValueError("v0 does not live in the requested sector")
    if schedule.T_A == 0.0:
        return StateVector(basis, v0.amps.copy())

    Pb, Pu = _aligned_bond_split(basis, base, schedule.bond)
    ds = schedule.T_A / schedule.steps
    amps = v0.amps
    if basis.dim < DENSE_CUTOFF:
        Hb = Pb.toarray()
        Hu = Pu.toarray()
        for k in range(schedule.steps):
            lam = schedule.coupling_at((k + 0.5) * ds)
            w, U = np.linalg.eigh(Hb + lam * Hu)
            amps = U @ (np.exp(-1j * w * ds) * (U.T @ amps))
    else:
        nb = float(np.abs(Pb).sum(axis=1).max()) if Pb.nnz else 0.0
        nu = float(np.abs(Pu).sum(axis=1).max()) if Pu.nnz else 0.0
        step_tol = tol / schedule.steps
        for k in range(schedule.steps):
            lam = schedule.coupling_at((k + 0.5) * ds)
            mat = sp.csr_matrix(
                (Pb.data + lam * Pu.data, Pb.indices, Pb.indptr), shape=Pb.shape
            )
            amps = _krylov_propagate(mat, nb + abs(lam) * nu, amps, ds, step_tol)
    return StateVector(basis, amps)


@dataclass(frozen=True)
class RampContext:
    """Fixed data of one ramp problem: sector, couplings, input, target."""

    basis: SectorBasis
    base: BondCouplings
    bond: int
    J_target: float
    v0: StateVector
    target: StateVector


@dataclass(frozen=True)
class RampResult:
    T_A: float
    infidelity: float
    state: StateVector
    steps: int


def _initial_steps(ctx: RampContext, T_A: float) -> int:
    scale = max(abs(ctx.J_target), ctx.base.scale)
    return max(8, math.ceil(2.0 * T_A * scale))


def converged_ramp(
    ctx: RampContext,
    T_A: float,
    *,
    step_tol: float = 1e-4,
    tol: float = 1e-10,
    initial_steps: int | None = None,
) -> RampResult:
    """Ramp at fixed duration, doubling steps until infidelity stabilizes.

    Stops once successive doublings move the measured infidelity by less
    than ``step_tol``; raises :class:`StepRefinementError` at the step
    cap.
    """
    steps = initial_steps if initial_steps is not None else _initial_steps(ctx, T_A)
    sched = RampSchedule(T_A, steps, ctx.bond, ctx.J_target)
    state = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, sched, tol=tol)
    fid = infidelity(state.normalized(), ctx.target)
    while True:
        steps *= 2
        if steps > MAX_RAMP_STEPS:
            raise StepRefinementError(
                f"infidelity did not stabilize below {step_tol:.1e} within "
                f"{MAX_RAMP_STEPS} steps at T_A={T_A:.6g}"
            )
        sched = RampSchedule(T_A, steps, ctx.bond, ctx.J_target)
        state = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, sched, tol=tol)
        new_fid = infidelity(state.normalized(), ctx.target)
        if abs(new_fid - fid) < step_tol:
            return RampResult(T_A, new_fid, state, steps)
        fid = new_fid


def ramp_time_for_infidelity(
    target_infidelity: float,
    ctx: RampContext,
    *,
    T_start: float = 1.0,
    T_cap: float = T_CAP,
    refine_bisections: int = 0,
    step_tol: float | None = None,
    tol: float = 1e-10,
    probe_cache: dict | None = None,
) -> RampResult:
    """Shortest ramp duration on a doubling grid reaching the target.

    Durations T_start * 2^k are probed until one achieves the target
    infidelity; ``refine_bisections`` optional bisection rounds then
    shrink the bracket.  Each probe is evaluated with step doubling until
    its infidelity is converged to ``step_tol`` (default: the smaller of
    1e-4 and a tenth of the target).
    """
    if not 0.0 < target_infidelity < 1.0:
        raise ValueError(f"target infidelity {target_infidelity} outside (0, 1)")
    if step_tol is None:
        step_tol = min(1e-4, target_infidelity / 10.0)
    cache = probe_cache if probe_cache is not None else {}

    def probe(T_A: float) -> RampResult:
        key = (T_A, step_tol)
        if key not in cache:
            cache[key] = converged_ramp(ctx, T_A, step_tol=step_tol, tol=tol)
        return cache[key]

    best = None
    lo = None
    hi = None
    T = T_start
    while T <= T_cap:
        res = probe(T)
        if best is None or res.infidelity < best.infidelity:
            best = res
        if res.infidelity <= target_infidelity:
            hi = res
            break
        lo = T
        T *= 2.0
    if hi is None:
        raise RampSearchError(
            f"no ramp duration up to {T_cap:.6g} reached infidelity "
            f"{target_infidelity:.3e} (best {best.infidelity:.3e} at "
            f"T_A={best.T_A:.6g})",
            best_infidelity=best.infidelity if best is not None else float("nan"),
        )
    if lo is not None:
        for _ in range(refine_bisections):
            mid = 0.5 * (lo + hi.T_A)
            res = probe(mid)
            if res.infidelity <= target_infidelity:
                hi = res
            else:
                lo = mid
    return hi
