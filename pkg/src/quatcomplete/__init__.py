"""Low-rank quaternion matrix completion for color image inpainting."""

from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InfeasibleRankError,
    QuaternionError,
    SingularMatrixError,
    StructureError,
)
from .imaging import (
    MaskSpec,
    image_to_qmatrix,
    psnr,
    qmatrix_to_image,
    random_mask,
    read_png,
    ssim,
    write_png,
)
from .norms import (
    NormVariant,
    factor_objective,
    nuclear_norm,
    optimal_factors,
    q_schatten_p,
    sv_product_bound,
)
from .qsvd import QsvdResult, low_rank_factorize, qsvd, qsvt, quaternion_rank, singular_values
from .quaternion import (
    ObservationMask,
    QMatrix,
    Quaternion,
    complex_adjoint,
    conj_transpose,
    from_complex_adjoint,
    frobenius_norm,
    hermitian_solve,
    matmul,
    project_omega,
    qmul,
)
from .solvers import (
    CompletionResult,
    SolverConfig,
    estimate_rank,
    relative_error,
    solve,
    truncate_factors,
)

__version__ = "0.1.0"
