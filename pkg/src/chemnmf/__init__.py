"""Multi-layer alpha-divergence NMF with energy-barrier diagnostics.

Library layers build bottom-up: validated matrices, the single-layer
solver, the bounded multi-layer cascade, barrier/escape diagnostics,
k-means evaluation, data ingestion, and the experiment sweep. A FastAPI
service wraps the compute surface; the CLI is a thin client over it.
"""

from .errors import (
    AssemblyError,
    ChemNmfError,
    ConfigurationError,
    DataError,
    InvalidValueError,
    NumericError,
    PgmError,
    RaggedRowsError,
    ShapeMismatchError,
    WavError,
)
from .matrix import (
    EpsilonPolicy,
    NonNegMatrix,
    column_sums,
    elementwise_pow,
    matmul,
    mean_all,
    row_sums,
    safe_ratio,
)
from .nmf import (
    FactorPair,
    SolveTrace,
    SolverConfig,
    activation_gradient,
    alpha_divergence,
    auxiliary_value,
    normalize_pair,
    random_init,
    solve_single_layer,
    update_activation,
    update_basis,
)
from .multilayer import (
    LayerResult,
    LayerSpec,
    MultiLayerResult,
    bounded_init,
    reconstruct,
    solve_chem_nmf,
)
from .diagnostics import (
    BarrierParams,
    EscapeMonotonicity,
    LayerBarrier,
    LayerBarrierReport,
    SurvivalComparison,
    escape_probability,
    layer_barriers,
    monotone_escape_check,
    multilayer_vs_single_survival,
    path_maximum,
    survival_probability,
)
from .clustering import (
    ClusterReport,
    LabelVector,
    accuracy,
    evaluate_clustering,
    kmeans,
    nmi,
)
from .data import (
    Dataset,
    StftConfig,
    add_gaussian_noise_snr,
    assemble_dataset,
    load_manifest,
    load_matrix_csv,
    load_pgm,
    load_wav_mono,
    lowpass_moving_average,
    resample_linear,
    stft_magnitude,
    write_matrix_csv,
)
from .baseline import solve_euclidean
from .experiment import (
    Cell,
    ExperimentConfig,
    KmeansParams,
    ResultRow,
    SeedGrid,
    SolverParams,
    config_from_dict,
    emit_barrier_report,
    emit_loss_curves,
    expand_cells,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"
