"""Dense and sparse factorization kernels."""

from .jacobi import inertia_oracle, jacobi_eigenvalues
from .ldlt import (
    ALPHA,
    BaselineResult,
    Inertia,
    LBLTFactors,
    bunch_kaufman,
    sparse_ldlt_baseline,
)
from .lu import LUFactors, lu_factor, lu_solve

__all__ = [
    "ALPHA",
    "BaselineResult",
    "Inertia",
    "LBLTFactors",
    "LUFactors",
    "bunch_kaufman",
    "inertia_oracle",
    "jacobi_eigenvalues",
    "lu_factor",
    "lu_solve",
    "sparse_ldlt_baseline",
]
