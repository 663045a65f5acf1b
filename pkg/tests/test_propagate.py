"""Time evolution and the adiabatic middle-bond ramp."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

import xxfusion.propagate as propagate
from xxfusion import (
    BondCouplings,
    RampContext,
    RampSchedule,
    RampSearchError,
    StateVector,
    StepRefinementError,
    adiabatic_ramp,
    build_hamiltonian,
    converged_ramp,
    embed_product,
    enumerate_sector,
    expmv,
    infidelity,
    lowest_two,
    middle_bond,
    ramp_time_for_infidelity,
)

RNG = np.random.default_rng(20240812)


def random_state(basis, rng=RNG):
    amps = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    return StateVector(basis, amps / np.linalg.norm(amps))


def chain(L, n, J=1.0):
    basis = enumerate_sector(L, n)
    return basis, build_hamiltonian(basis, BondCouplings.uniform(L, J))


def ramp_context(L, n):
    """Product of exact half grounds ramping toward the fused ground."""
    basis, H = chain(L, n)
    bond = middle_bond(L)
    base = BondCouplings.uniform(L).with_bond(bond, 0.0)
    _, Hh = chain(L // 2, n // 2)
    g = lowest_two(Hh).ground
    v0 = embed_product(g, g, basis=basis).normalized()
    return RampContext(basis, base, bond, 1.0, v0, lowest_two(H).ground)


# ----------------------------------------------------------------- expmv


@given(st.integers(0, 2**32 - 1), st.floats(-6.0, 6.0))
@settings(deadline=None, max_examples=40)
def test_expmv_matches_dense_exponential(seed, t):
    rng = np.random.default_rng(seed)
    basis, _ = chain(5, 2)
    H = build_hamiltonian(basis, BondCouplings(rng.uniform(-2.0, 2.0, 4)))
    v = random_state(basis, rng)
    ref = scipy.linalg.expm(-1j * t * H.matrix.toarray()) @ v.amps
    for method in ("dense", "krylov"):
        out = expmv(H, t, v, method=method)
        assert np.linalg.norm(out.amps - ref) < 1e-10


def test_expmv_paths_agree_with_substepping():
    # t * ||H|| far beyond one Krylov step, so the substep loop engages
    basis, H = chain(8, 4)
    v = random_state(basis)
    a = expmv(H, 25.0, v, method="dense")
    b = expmv(H, 25.0, v, method="krylov")
    assert np.linalg.norm(a.amps - b.amps) < 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(-4.0, 4.0), st.floats(-4.0, 4.0))
@settings(deadline=None, max_examples=30)
def test_expmv_unitary_and_composes(seed, t1, t2):
    basis, H = chain(6, 3)
    v = random_state(basis, np.random.default_rng(seed))
    once = expmv(H, t1 + t2, v)
    twice = expmv(H, t2, expmv(H, t1, v))
    assert abs(once.norm() - 1.0) < 1e-9
    assert np.linalg.norm(once.amps - twice.amps) < 1e-9


def test_expmv_conserves_energy():
    basis, H = chain(6, 2)
    v = random_state(basis)
    before = np.vdot(v.amps, H.matrix @ v.amps).real
    out = expmv(H, 3.7, v)
    after = np.vdot(out.amps, H.matrix @ out.amps).real
    assert after == pytest.approx(before, abs=1e-9)


def test_expmv_zero_time_is_identity():
    basis, H = chain(4, 2)
    v = random_state(basis)
    out = expmv(H, 0.0, v)
    assert np.allclose(out.amps, v.amps, atol=1e-14)


def test_expmv_argument_errors():
    basis, H = chain(4, 2)
    v = random_state(basis)
    with pytest.raises(ValueError):
        expmv(H, 1.0, v, method="pade")
    with pytest.raises(ValueError):
        expmv(H, 1.0, random_state(enumerate_sector(4, 1)))


# -------------------------------------------------------------- schedule


def test_ramp_schedule_is_linear():
    sched = RampSchedule(8.0, 16, 3, 0.75)
    for s in (0.0, 2.0, 4.0, 8.0):
        assert sched.coupling_at(s) == pytest.approx(0.75 * s / 8.0, abs=1e-15)
    with pytest.raises(ValueError):
        RampSchedule(-1.0, 4, 0, 1.0)
    with pytest.raises(ValueError):
        RampSchedule(1.0, 0, 0, 1.0)


def test_adiabatic_ramp_argument_errors():
    ctx = ramp_context(4, 2)
    sched = RampSchedule(1.0, 4, ctx.bond, 1.0)
    with pytest.raises(ValueError):
        adiabatic_ramp(ctx.v0, ctx.basis, BondCouplings.uniform(6).with_bond(1, 0.0), sched)
    with pytest.raises(ValueError):
        adiabatic_ramp(ctx.v0, ctx.basis, BondCouplings.uniform(4), sched)  # bond not cut
    with pytest.raises(ValueError):
        adiabatic_ramp(
            ctx.v0, ctx.basis, ctx.base, RampSchedule(1.0, 4, 0, 1.0)
        )  # not the middle bond
    doubled = StateVector(ctx.basis, 2.0 * ctx.v0.amps)
    with pytest.raises(ValueError):
        adiabatic_ramp(doubled, ctx.basis, ctx.base, sched)


def test_adiabatic_ramp_zero_duration_is_identity():
    ctx = ramp_context(4, 2)
    out = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, RampSchedule(0.0, 1, ctx.bond, 1.0))
    assert np.allclose(out.amps, ctx.v0.amps, atol=1e-15)


def test_adiabatic_ramp_dense_matches_stepwise_expm():
    # independent reference: the same midpoint product assembled from
    # scipy dense exponentials of the full stepped Hamiltonian
    ctx = ramp_context(4, 2)
    steps, T = 12, 2.5
    sched = RampSchedule(T, steps, ctx.bond, 1.0)
    out = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, sched)
    amps = ctx.v0.amps.copy()
    ds = T / steps
    for k in range(steps):
        lam = sched.coupling_at((k + 0.5) * ds)
        bonds = ctx.base.with_bond(ctx.bond, lam)
        Hk = build_hamiltonian(ctx.basis, bonds).matrix.toarray()
        amps = scipy.linalg.expm(-1j * ds * Hk) @ amps
    assert np.linalg.norm(out.amps - amps) < 1e-10


def test_adiabatic_ramp_krylov_route_agrees():
    basis = enumerate_sector(8, 4)  # dim 70
    ctx = ramp_context(8, 4)
    sched = RampSchedule(3.0, 24, ctx.bond, 1.0)
    dense = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, sched)
    forced = propagate.DENSE_CUTOFF
    try:
        propagate.DENSE_CUTOFF = 1  # force the sparse path
        krylov = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, sched)
    finally:
        propagate.DENSE_CUTOFF = forced
    assert np.linalg.norm(dense.amps - krylov.amps) < 1e-9
    assert basis.dim == 70


def test_longer_ramps_prepare_better_states():
    ctx = ramp_context(4, 2)
    fids = []
    for T in (1.0, 4.0, 16.0):
        out = adiabatic_ramp(ctx.v0, ctx.basis, ctx.base, RampSchedule(T, 256, ctx.bond, 1.0))
        fids.append(infidelity(out.normalized(), ctx.target))
    assert fids[0] > fids[1] > fids[2]


# ------------------------------------------------------- converged ramps


def test_converged_ramp_golden_L4():
    res = converged_ramp(ramp_context(4, 2), 8.0, step_tol=1e-4)
    assert res.infidelity == pytest.approx(0.0011578332753401366, rel=1e-9)
    assert res.steps == 64


def test_converged_ramp_tightening_tolerance_refines():
    ctx = ramp_context(4, 2)
    loose = converged_ramp(ctx, 4.0, step_tol=1e-3)
    tight = converged_ramp(ctx, 4.0, step_tol=1e-6)
    assert tight.steps > loose.steps
    # both are converged estimates of the same continuum value
    assert loose.infidelity == pytest.approx(tight.infidelity, abs=5e-3)


def test_converged_ramp_step_cap(monkeypatch):
    monkeypatch.setattr(propagate, "MAX_RAMP_STEPS", 32)
    with pytest.raises(StepRefinementError):
        converged_ramp(ramp_context(4, 2), 1.0, step_tol=0.0)


def test_ramp_search_golden_L4():
    # doubling grid with three bisection refinements, as the experiments use
    res = ramp_time_for_infidelity(1e-3, ramp_context(4, 2), refine_bisections=3)
    assert res.T_A == 9.0
    assert res.infidelity == pytest.approx(3.714410696875614e-05, rel=1e-6)
    assert res.infidelity <= 1e-3


def test_ramp_search_without_refinement_lands_on_grid():
    res = ramp_time_for_infidelity(1e-2, ramp_context(4, 2))
    assert res.T_A == 4.0  # probes 1, 2 miss; 4 is the first pass
    assert res.infidelity <= 1e-2


def test_ramp_search_shares_probe_cache():
    ctx = ramp_context(4, 2)
    cache = {}
    ramp_time_for_infidelity(1e-2, ctx, probe_cache=cache, step_tol=1e-4)
    n_first = len(cache)
    assert n_first >= 3
    ramp_time_for_infidelity(1e-2, ctx, probe_cache=cache, step_tol=1e-4)
    assert len(cache) == n_first  # second search reuses every probe


def test_ramp_search_cap_failure_reports_best():
    with pytest.raises(RampSearchError) as err:
        ramp_time_for_infidelity(1e-9, ramp_context(4, 2), T_cap=2.0)
    assert 0.0 < err.value.best_infidelity < 1.0


def test_ramp_search_argument_errors():
    ctx = ramp_context(4, 2)
    with pytest.raises(ValueError):
        ramp_time_for_infidelity(0.0, ctx)
    with pytest.raises(ValueError):
        ramp_time_for_infidelity(1.5, ctx)
