"""Simulation and homodyne tomography of multi-photon-subtracted squeezed vacuum."""

from .channels import (
    ExperimentParams,
    HeraldResult,
    TwoModeState,
    beamsplitter_join,
    count_rate_table,
    herald_probabilities,
    herald_subtract,
    input_state,
    loss_channel,
    lossy_number_povm,
)
from .fock import (
    DensityMatrix,
    HilbertConfig,
    SqueezeSpec,
    StateVector,
    apply_annihilation,
    cat_state,
    coherent_state,
    fidelity,
    load_density_matrix,
    mean_photon,
    mixed_coherent,
    phase_rotated,
    quadrature_basis,
    quadrature_wavefunction,
    save_density_matrix,
    squeezed_vacuum,
    trace_distance,
)
from .phasespace import (
    CoherencePeak,
    QuadDensityMatrix,
    QuadGrid,
    WignerGrid,
    coherence_peak,
    marginal,
    marginal_sweep,
    origin_parity,
    rho_quad,
    wigner,
    wigner_integral_oracle,
    wigner_values,
)
from .sampler import (
    HomodyneDataset,
    PhasePlan,
    load_dataset,
    sample_phase,
    save_dataset,
    synth_dataset,
)
from .tes import (
    ConfusionMatrix,
    TesParams,
    adjacent_confusion_estimate,
    classify_pulse,
    confusion,
    pulse_trace,
)
from .tomography import (
    BootstrapReport,
    MleConfig,
    bootstrap,
    log_likelihood,
    mle_reconstruct,
    povm_projector,
)

__version__ = "0.1.0"

from .config import (  # noqa: E402  (RunConfig builds on the types above)
    CatSpec,
    GridSpec,
    RunConfig,
    load_config,
    preset,
    save_config,
)
