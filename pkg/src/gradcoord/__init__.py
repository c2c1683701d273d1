"""Gradient coordination for generalized category discovery.

Library surface: conceptor/PCA subspaces over reference features, the
feature-gradient coordinator (alignment + energy-aware elastic projection),
entanglement diagnostics and Hungarian-matched clustering accuracy, a
desk-scale simulator with analytic gradients, and a stationary-covariance
harness for the proximal deviation dynamics.
"""

from .coordinator import (
    BatchMask,
    CoordinatorConfig,
    GradientAdjustment,
    adaptive_weights,
    alignment_term,
    coordinate,
    elastic_projection,
    proximal_loss,
)
from .errors import (
    ArgumentError,
    DataError,
    DegenerateInputError,
    FactorizationError,
    GradcoordError,
    NumericalError,
    SingularityError,
    StabilityError,
    SymmetryError,
)
from .metrics import AccTriple, GeReport, gdc, hungarian_acc, rho_grad, rho_in, soc
from .numerics import SeededRng, gaussian, solve_spd, sym_eig
from .simulator import (
    DatasetSplit,
    Model,
    TrainConfig,
    TrainTrace,
    evaluate,
    gcd_step,
    gen_synthetic,
    train_gcd,
    train_reference,
)
from .subspace import (
    Conceptor,
    EnergyStats,
    PcaProjector,
    apply_soft,
    build_conceptor,
    build_pca,
    build_pca_for_energy,
    energy_ratio,
    labeled_energy_stats,
)
from .theory import CovarianceReport, LinearSystemSpec, lemma1_report, lyapunov_solve, psd_order, simulate_deviation

__version__ = "0.1.0"
