"""Binary fusion of chain grounds and the cost comparison across methods.

A fusion step doubles the chain: embed two prepared half grounds as a
product, then close the middle bond adiabatically ("adiabatic"), purify
with rodeo cycles directly ("rodeo"), or ramp to a loose preconditioning
infidelity and purify the remainder ("hybrid").  Costs are tracked as
expected total evolution time per prepared copy,

    kappa_A = t_A,    kappa_R = t_R / p,    kappa_H = (t_A + t_R) / p,

with p the cumulative rodeo success probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    PurificationError,
    RampSearchError,
    RodeoAnnihilationError,
    SimulationError,
)
from .propagate import T_CAP, RampContext, ramp_time_for_infidelity
from .rodeo import ANNIHILATION_FLOOR, make_schedule, rodeo_cycle
from .spectral import infidelity, lowest_two
from .spin_model import (
    BondCouplings,
    SparseHamiltonian,
    StateVector,
    build_hamiltonian,
    embed_product,
    enumerate_sector,
    middle_bond,
)

METHODS = ("adiabatic", "rodeo", "hybrid")


def expected_cost(method: str, t_A: float, t_R: float, p: float) -> float:
    """Expected evolution time per prepared copy for one fusion step."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not 0.0 < p <= 1.0 + 1e-12:
        raise ValueError(f"success probability {p} outside (0, 1]")
    if t_A < 0.0 or t_R < 0.0:
        raise ValueError("evolution times must be nonnegative")
    if method == "adiabatic":
        return t_A
    if method == "rodeo":
        return t_R / p
    return (t_A + t_R) / p


@dataclass(frozen=True)
class FusionConfig:
    """Knobs shared by every fusion step; defaults match the experiments."""

    J: float = 1.0
    depth: int = 8
    ratio: float = 0.5
    precondition_infidelity: float = 1e-2
    max_superiterations: int = 64
    T_start: float = 1.0
    T_cap: float = T_CAP
    bisections: int = 3
    expmv_tol: float = 1e-10
    step_tol: float | None = None
    level_policy: str = "uniform"

    def __post_init__(self):
        if self.level_policy not in ("uniform", "budget"):
            raise ValueError(f"unknown level policy {self.level_policy!r}")
        if self.J == 0.0:
            raise ValueError("coupling J must be nonzero")


@dataclass(frozen=True)
class StepRecord:
    """Cost ledger entry for one fusion step ending at chain length L."""

    L: int
    method: str
    target_infidelity: float
    achieved_infidelity: float
    t_A: float
    t_R: float
    p: float
    kappa: float
    superiterations: int
    ramp_steps: int


@dataclass
class CostLedger:
    records: list[StepRecord] = field(default_factory=list)

    @property
    def cumulative_kappa(self) -> float:
        return float(sum(r.kappa for r in self.records))


@dataclass(frozen=True)
class FusionPlan:
    """Prepare the (L_final, filling * L_final) ground from L_base chains."""

    L_final: int
    L_base: int
    filling: Fraction
    method: str
    target_infidelity: float


@dataclass(frozen=True)
class _StepProblem:
    """Everything fixed about fusing two copies of one half-chain state."""

    H: SparseHamiltonian
    E0: float
    gap: float
    ground: StateVector
    product: StateVector
    ctx: RampContext


def _prepare_step(ground_half: StateVector, config: FusionConfig) -> _StepProblem:
    if abs(ground_half.norm() - 1.0) > 1e-9:
        raise ValueError("half-chain state is not normalized")
    L = 2 * ground_half.basis.L
    basis = enumerate_sector(L, 2 * ground_half.basis.n_up)
    couplings = BondCouplings.uniform(L, config.J)
    H = build_hamiltonian(basis, couplings)
    pair = lowest_two(H)
    product = embed_product(ground_half, ground_half, basis=basis).normalized()
    bond = middle_bond(L)
    base = couplings.with_bond(bond, 0.0)
    ctx = RampContext(basis, base, bond, config.J, product, pair.ground)
    return _StepProblem(H, pair.E0, pair.gap, pair.ground, product, ctx)


def _sweep(v0: StateVector, prob: _StepProblem, E_t: float, config: FusionConfig):
    block = make_schedule(prob.gap, depth=config.depth, ratio=config.ratio).times
    block_time = float(block.sum())
    state = v0
    p_total = 1.0
    t_R = 0.0
    for m in range(1, config.max_superiterations + 1):
        for t_j in block:
            state, p = rodeo_cycle(state, prob.H, E_t, float(t_j), tol=config.expmv_tol)
            p_total *= p
            if p_total < ANNIHILATION_FLOOR:
                raise RodeoAnnihilationError(
                    f"cumulative success probability {p_total:.3e} vanished in "
                    f"superiteration {m}"
                )
        t_R += block_time
        yield m, state, infidelity(state, prob.ground), p_total, t_R


def _step_tol(config: FusionConfig, target: float) -> float:
    if config.step_tol is not None:
        return config.step_tol
    return min(1e-4, target / 10.0)


def fuse_step(
    ground_half: StateVector,
    method: str,
    target_infidelity: float,
    config: FusionConfig | None = None,
) -> tuple[StateVector, StepRecord]:
    """One fusion step: two copies of ``ground_half`` to the doubled ground.

    Returns the prepared (normalized) state and its ledger record.  The
    adiabatic route is unitary, so it cannot remove weight that the input
    product already holds outside the reachable band; with impure halves
    its search may exhaust the duration cap and raise.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not 0.0 < target_infidelity < 1.0:
        raise ValueError(f"target infidelity {target_infidelity} outside (0, 1)")
    config = config or FusionConfig()
    prob = _prepare_step(ground_half, config)
    L = 2 * ground_half.basis.L
    E_t = prob.E0
    step_tol = _step_tol(config, target_infidelity)

    t_A = 0.0
    ramp_steps = 0
    if method == "adiabatic":
        res = ramp_time_for_infidelity(
            target_infidelity,
            prob.ctx,
            T_start=config.T_start,
            T_cap=config.T_cap,
            refine_bisections=config.bisections,
            step_tol=step_tol,
            tol=config.expmv_tol,
        )
        state = res.state.normalized()
        record = StepRecord(
            L, method, target_infidelity, res.infidelity, res.T_A, 0.0, 1.0,
            expected_cost(method, res.T_A, 0.0, 1.0), 0, res.steps,
        )
        return state, record

    if method == "hybrid":
        pre = ramp_time_for_infidelity(
            config.precondition_infidelity,
            prob.ctx,
            T_start=config.T_start,
            T_cap=config.T_cap,
            refine_bisections=config.bisections,
            step_tol=_step_tol(config, config.precondition_infidelity),
            tol=config.expmv_tol,
        )
        t_A = pre.T_A
        ramp_steps = pre.steps
        start = pre.state.normalized()
        start_infidelity = pre.infidelity
    else:
        start = prob.product
        start_infidelity = infidelity(start, prob.ground)

    if start_infidelity <= target_infidelity:
        state = start
        record = StepRecord(
            L, method, target_infidelity, start_infidelity, t_A, 0.0, 1.0,
            expected_cost(method, t_A, 0.0, 1.0), 0, ramp_steps,
        )
        return state, record

    best = start_infidelity
    for m, state, fid, p_total, t_R in _sweep(start, prob, E_t, config):
        best = min(best, fid)
        if fid <= target_infidelity:
            record = StepRecord(
                L, method, target_infidelity, fid, t_A, t_R, p_total,
                expected_cost(method, t_A, t_R, p_total), m, ramp_steps,
            )
            return state, record
    raise PurificationError(
        f"target infidelity {target_infidelity:.3e} not reached within "
        f"{config.max_superiterations} superiterations (best {best:.3e})",
        best_infidelity=best,
    )


def run_fusion(
    plan: FusionPlan, *, config: FusionConfig | None = None
) -> tuple[StateVector, CostLedger]:
    """Compose fusion steps from exact L_base grounds up to L_final.

    Each level reuses the prepared state for both halves, so errors
    compound exactly as two independently prepared copies would.  The
    per-level target is the plan target ("uniform" policy) or the plan
    target split evenly across levels ("budget").
    """
    config = config or FusionConfig()
    filling = Fraction(plan.filling)
    if plan.L_base < 2:
        raise ValueError(f"base chains need at least 2 sites, got {plan.L_base}")
    if not 0 <= filling <= 1:
        raise ValueError(f"filling {filling} outside [0, 1]")
    steps = 0
    L = plan.L_base
    while L < plan.L_final:
        L *= 2
        steps += 1
    if L != plan.L_final:
        raise ValueError(
            f"L_final={plan.L_final} is not L_base={plan.L_base} times a power of two"
        )
    n_base = filling * plan.L_base
    if n_base.denominator != 1:
        raise ValueError(
            f"filling {filling} gives fractional occupation on {plan.L_base} sites"
        )
    n_base = int(n_base)
    if not 0 < n_base < plan.L_base:
        raise ValueError(
            f"base sector (L={plan.L_base}, n_up={n_base}) has no gap to anchor"
        )

    base_basis = enumerate_sector(plan.L_base, n_base)
    base_H = build_hamiltonian(base_basis, BondCouplings.uniform(plan.L_base, config.J))
    state = lowest_two(base_H).ground
    if steps == 0:
        return state, CostLedger([])

    level_target = plan.target_infidelity
    if config.level_policy == "budget":
        level_target = plan.target_infidelity / steps
    ledger = CostLedger([])
    for _ in range(steps):
        try:
            state, record = fuse_step(state, plan.method, level_target, config)
        except SimulationError as err:
            # let the driver report the completed levels alongside the failure
            err.partial_ledger = ledger
            err.failed_level = 2 * state.basis.L
            raise
        ledger.records.append(record)
    return state, ledger


@dataclass(frozen=True)
class CompareRow:
    """One cell of the method comparison table."""

    method: str
    L: int
    filling: Fraction
    target_infidelity: float
    achieved_infidelity: float
    t_A: float
    t_R: float
    p: float
    J_kappa: float
    status: str
    message: str = ""


def _failed_row(method, L, filling, target, achieved, message) -> CompareRow:
    nan = float("nan")
    return CompareRow(
        method, L, filling, target, achieved, nan, nan, nan, nan, "FAILED", message
    )


def compare_methods(
    L: int,
    filling: Fraction,
    infidelity_targets,
    *,
    config: FusionConfig | None = None,
) -> list[CompareRow]:
    """Cost of one fusion step (exact halves) per method and target.

    Halves are exact sector grounds of the L/2 chain, so every method
    starts from the same product state.  Targets are emitted loosest
    first; rows follow METHODS order.  Per-cell failures produce FAILED
    rows instead of aborting the table.
    """
    config = config or FusionConfig()
    filling = Fraction(filling)
    if L % 2 != 0:
        raise ValueError(f"L={L} cannot be split into equal halves")
    n_half = filling * (L // 2)
    if n_half.denominator != 1:
        raise ValueError(f"filling {filling} gives fractional occupation on {L // 2} sites")
    n_half = int(n_half)
    if not 0 < n_half < L // 2:
        raise ValueError(f"half sector (L={L // 2}, n_up={n_half}) has no gap to anchor")
    targets = sorted(set(float(t) for t in infidelity_targets), reverse=True)
    if not targets:
        return []
    for t in targets:
        if not 0.0 < t < 1.0:
            raise ValueError(f"target infidelity {t} outside (0, 1)")

    half_basis = enumerate_sector(L // 2, n_half)
    half_H = build_hamiltonian(half_basis, BondCouplings.uniform(L // 2, config.J))
    half_ground = lowest_two(half_H).ground
    prob = _prepare_step(half_ground, config)
    E_t = prob.E0
    tightest = min(targets)
    group_step_tol = (
        config.step_tol if config.step_tol is not None else min(1e-4, tightest / 10.0)
    )
    rows: list[CompareRow] = []

    def emit(method, target, achieved, t_A, t_R, p):
        kappa = expected_cost(method, t_A, t_R, p)
        rows.append(
            CompareRow(
                method, L, filling, target, achieved, t_A, t_R, p,
                config.J * kappa, "OK",
            )
        )

    # adiabatic: one duration search per target, probes shared via cache
    cache: dict = {}
    for target in targets:
        try:
            res = ramp_time_for_infidelity(
                target,
                prob.ctx,
                T_start=config.T_start,
                T_cap=config.T_cap,
                refine_bisections=config.bisections,
                step_tol=group_step_tol,
                tol=config.expmv_tol,
                probe_cache=cache,
            )
            emit("adiabatic", target, res.infidelity, res.T_A, 0.0, 1.0)
        except SimulationError as err:
            achieved = getattr(err, "best_infidelity", float("nan"))
            rows.append(_failed_row("adiabatic", L, filling, target, achieved, str(err)))

    def milestone_rows(method, start, t_A):
        start_fid = infidelity(start, prob.ground)
        milestones = [(0, start_fid, 1.0, 0.0)]
        sweep_error = None
        if start_fid > tightest:
            try:
                for m, _, fid, p_total, t_R in _sweep(start, prob, E_t, config):
                    milestones.append((m, fid, p_total, t_R))
                    if fid <= tightest:
                        break
            except SimulationError as err:
                sweep_error = err
        for target in targets:
            hit = next((ms for ms in milestones if ms[1] <= target), None)
            if hit is None:
                best = min(ms[1] for ms in milestones)
                message = str(sweep_error) if sweep_error is not None else (
                    f"target {target:.3e} not reached within "
                    f"{config.max_superiterations} superiterations"
                )
                rows.append(_failed_row(method, L, filling, target, best, message))
            else:
                _, fid, p_total, t_R = hit
                emit(method, target, fid, t_A, t_R, p_total)

    milestone_rows("rodeo", prob.product, 0.0)

    try:
        pre = ramp_time_for_infidelity(
            config.precondition_infidelity,
            prob.ctx,
            T_start=config.T_start,
            T_cap=config.T_cap,
            refine_bisections=config.bisections,
            step_tol=_step_tol(config, config.precondition_infidelity),
            tol=config.expmv_tol,
            probe_cache=cache,
        )
        milestone_rows("hybrid", pre.state.normalized(), pre.T_A)
    except SimulationError as err:
        achieved = getattr(err, "best_infidelity", float("nan"))
        for target in targets:
            rows.append(_failed_row("hybrid", L, filling, target, achieved, str(err)))

    order = {m: i for i, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (order[r.method], r.L, -r.target_infidelity))
    return rows
