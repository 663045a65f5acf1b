"""Eigenstate preparation on open XX chains: adiabatic bond ramps fused
with rodeo purification, plus the cost accounting to compare them."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    DegenerateGapError,
    PropagationError,
    PurificationError,
    RampSearchError,
    RodeoAnnihilationError,
    SimulationError,
    StepRefinementError,
)
from .fusion import (
    METHODS,
    CompareRow,
    CostLedger,
    FusionConfig,
    FusionPlan,
    StepRecord,
    compare_methods,
    expected_cost,
    fuse_step,
    run_fusion,
)
from .propagate import (
    RampContext,
    RampResult,
    RampSchedule,
    adiabatic_ramp,
    converged_ramp,
    expmv,
    ramp_time_for_infidelity,
)
from .rodeo import (
    RodeoOutcome,
    RodeoSchedule,
    ancilla_circuit_cycle,
    energy_scan,
    make_schedule,
    rodeo_cycle,
    run_rodeo,
)
from .spectral import (
    SpectralPair,
    free_fermion_energies,
    infidelity,
    lowest_two,
    sector_ground_energy_oracle,
    spectral_weight,
)
from .spin_model import (
    BondCouplings,
    SectorBasis,
    SparseHamiltonian,
    StateVector,
    apply_hamiltonian,
    basis_state,
    build_hamiltonian,
    embed_product,
    enumerate_sector,
    middle_bond,
)

__all__ = [
    "__version__",
    "BondCouplings", "SectorBasis", "SparseHamiltonian", "StateVector",
    "apply_hamiltonian", "basis_state", "build_hamiltonian", "embed_product",
    "enumerate_sector", "middle_bond",
    "SpectralPair", "free_fermion_energies", "infidelity", "lowest_two",
    "sector_ground_energy_oracle", "spectral_weight",
    "RampContext", "RampResult", "RampSchedule", "adiabatic_ramp",
    "converged_ramp", "expmv", "ramp_time_for_infidelity",
    "RodeoOutcome", "RodeoSchedule", "ancilla_circuit_cycle", "energy_scan",
    "make_schedule", "rodeo_cycle", "run_rodeo",
    "METHODS", "CompareRow", "CostLedger", "FusionConfig", "FusionPlan",
    "StepRecord", "compare_methods", "expected_cost", "fuse_step", "run_fusion",
    "SimulationError", "CapacityError", "DegenerateGapError", "PropagationError",
    "PurificationError", "RampSearchError", "RodeoAnnihilationError",
    "StepRefinementError",
]
