"""Generating-polynomial CP approximation and tensor canonical correlation analysis."""
from .errors import (ContractError, DegenerateComponentError, GPTCCAError, InputError,
                     NumericalFailure, RankError, ShapeError)
from .gp import (GeneratingMatrixSet, GPOptions, build_coefficient_matrices,
                 extract_factor_candidates, gp_decompose, gp_decompose_detailed,
                 is_generating_polynomial, random_combination, solve_generating_matrices,
                 solve_mode1_factors)
from .numerics import SchurResult, least_squares_solve, pca_basis, schur_decompose, sym_inv_sqrt
from .solvers import SolveOptions, SolveReport, als_decompose, normalize_cp, refine_from_init
from .tcca import (MultiViewDataset, TCCAModel, TCCAOptions, correlation_tensor, data_tensor,
                   higher_order_correlation, synth_multiview, tcca_fit, tcca_project,
                   view_covariance)
from .tensor import (CPDecomposition, DenseTensor, cp_to_tensor, fold, hs_norm, khatri_rao,
                     khatri_rao_chain, mode_product, read_tensor, relative_residual, unfold,
                     write_tensor)

__version__ = "0.1.0"
