"""Holonomic quantum gates with rf-SQUID qubits coupled to a microwave cavity.

Dark-state frames, Wilczek-Zee connections and holonomies, adiabatic and
photon-lossy dynamics, gate synthesis, and a scenario runner.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegeneracyResolutionError,
    DomainError,
    GaugeDiscontinuityError,
    InfeasibleTargetError,
    SquidHQCError,
    StepSizeError,
    TruncationError,
)
from .hilbert import Basis, BasisState, build_basis, expectation, level_transition, number_operator, photon_annihilator  # noqa: E402
from .model import (  # noqa: E402
    ControlPoint,
    DeviceParams,
    GaussianChannel,
    PulseSchedule,
    RabiSet,
    TanhPhase,
    effective_hamiltonian,
    hamiltonian_at,
    reference_cphase_schedule,
    reference_device,
    rabi_from_control_point,
    schedule_sample,
    single_qubit_hamiltonian,
    two_qubit_hamiltonian,
)
from .dark import (  # noqa: E402
    DarkFrame,
    analytic_dark_single,
    analytic_dark_two_cphase,
    detect_accidental_degeneracy,
    energy_gap,
    gauge_align,
    numeric_frame_field,
    numeric_zero_eigenspace,
)
from .holonomy import (  # noqa: E402
    ControlPath,
    cphase_loop_angles,
    loop_angle_ry,
    loop_angle_rz,
    path_ordered_holonomy,
    wz_connection_analytic,
    wz_connection_fd,
)
from .dynamics import (  # noqa: E402
    FidelityReport,
    PathSchedule,
    Trajectory,
    adiabaticity_check,
    fidelity_direct,
    fidelity_perturbative,
    integrate,
    run_gate_protocol,
)
from .gates import (  # noqa: E402
    GateTarget,
    GateVerdict,
    cnot_search,
    gate_distance,
    synthesize_cphase,
    synthesize_ry,
    synthesize_rz,
    verify_cnot,
)
