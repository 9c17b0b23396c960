"""Schur-complement factorization for KKT systems with neural-network constraints."""

__version__ = "0.1.0"

from ._jit import backend_name
from .blocktri import BTFactors, bt_factorize, bt_solve, bt_solve_original
from .errors import (BaselineBreakdown, DimensionError, InvalidPivotError, KKTSchurError,
                     ParameterError, SingularBlockError, StructuralError)
from .generator import (KKTSystem, NeuralNetSpec, forward_pass, generate_kkt, generate_preset,
                        instance_presets, nn_jacobian, random_network, read_instance,
                        write_instance)
from .kernels import Inertia, LBLTFactors, bunch_kaufman, inertia_oracle, sparse_ldlt_baseline
from .mmio import read_matrix_market, write_matrix_market
from .schur import (SchurFactors, SolveReport, check_inertia_target, factorize_system,
                    schur_factorize, schur_inertia, schur_solve, solve_refined)
from .sparse import Permutation, SparseMatrix, SymmetricSparse
from .structure import BlockStructure, find_btf, is_irreducible, structured_pivot_permutation

__all__ = [
    "BTFactors", "BaselineBreakdown", "BlockStructure", "DimensionError", "Inertia",
    "InvalidPivotError", "KKTSchurError", "KKTSystem", "LBLTFactors", "NeuralNetSpec",
    "ParameterError", "Permutation", "SchurFactors", "SingularBlockError", "SolveReport",
    "SparseMatrix", "StructuralError", "SymmetricSparse", "backend_name", "bt_factorize",
    "bt_solve", "bt_solve_original", "bunch_kaufman", "check_inertia_target",
    "factorize_system", "find_btf", "forward_pass", "generate_kkt", "generate_preset",
    "inertia_oracle", "instance_presets", "is_irreducible", "nn_jacobian", "random_network",
    "read_instance", "read_matrix_market", "schur_factorize", "schur_inertia", "schur_solve",
    "solve_refined", "sparse_ldlt_baseline", "structured_pivot_permutation", "write_instance",
    "write_matrix_market",
]
