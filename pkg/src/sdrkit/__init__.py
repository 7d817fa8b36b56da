"""Sufficient dimension reduction: inverse-regression, forward-regression and
kernel estimators of the central subspace, with a Stiefel-manifold optimizer,
synthetic benchmarks and a command line."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BandwidthError,
    DataError,
    DegenerateCandidateError,
    InvalidInputError,
    NumericalError,
    SDRError,
    SingularityError,
    SlicingError,
    StallError,
)
from .linalg import (  # noqa: E402
    DataSet,
    StandardizedData,
    SubspaceEstimate,
    generalized_eig,
    map_back,
    orthonormal_complement,
    orthonormalize,
    principal_angles,
    sample_covariance,
    sample_mean,
    standardize,
    sym_eig,
    sym_inv_sqrt,
)
from .slicing import SliceStats, Slices, make_slices, slice_stats  # noqa: E402
from .manifold import OptConfig, OptResult, minimize_stiefel, qr_retract, tangent_project  # noqa: E402
from .inverse import (  # noqa: E402
    LabelBasis,
    cr_fit,
    cr_matrix,
    dr_fit,
    lad_fit,
    pfc_fit,
    pir_fit,
    save_fit,
    sir_fit,
)
from .forward import cve_fit, mave_fit, phd_fit  # noqa: E402
from .kdr import (  # noqa: E402
    KernelMatrix,
    KernelSpec,
    double_center,
    gram,
    hsic,
    kdr_fit,
    kdr_grad,
    kdr_hsic_fit,
    kdr_objective,
    mkdr_fit,
    ukdr_fit,
)
from .synthetic import GeneratorModel, generate, run_benchmark, subspace_error  # noqa: E402
