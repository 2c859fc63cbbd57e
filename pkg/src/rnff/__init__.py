"""Regular nonstationary Fourier features for harmonizable Gaussian processes."""

from .errors import (
    AliasingViolation,
    DivergedLoss,
    IndefiniteInput,
    NonHermitianInput,
    NonRealKernel,
    RNFFError,
    SingularInnerSystem,
    ZeroReference,
)
from .features import (
    FeatureFactor,
    LowRankKernel,
    build_feature_factor,
    build_feature_matrix,
    cross_kernel,
    kernel_matrix,
)
from .kernels import RBF, k_hmk, k_ls, k_rbf
from .learn import SpectralNet, build_learned_features, negative_log_marginal, train
from .linalg import hermitian_psd_factor, lowrank_logdet, woodbury_solve
from .simulate import simulate_path, simulate_paths
from .spectral import (
    FrequencyGrid,
    HarmonizableMixture,
    LocallyStationary,
    build_pseudo_matrix,
    build_spectral_matrix,
    default_hmk,
)

__version__ = "0.1.0"
