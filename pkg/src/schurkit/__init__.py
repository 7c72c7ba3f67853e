"""schurkit: desk-scale harmonic analysis on finitely generated groups.

Builds exact group models (Z^d, free groups, cyclic groups), sparse l^p
functions and their autocorrelation kernels, finite-window Schur product norm
bounds, constructive concentration-compactness profile decompositions, a
variational identity-approximation defect diagnosing amenability, and
group-invariant percolation with mass-transport verification.
"""

__version__ = "0.1.0"

from .amenability import (DefectResult, FolnerSet, amenability_report,
                          folner_autocorrelation, folner_boxes, folner_quality,
                          minimize_defect, sup_distance_to_one)
from .functions import (SparseFunction, dirac, lp_distance,
                        normalized_indicator, scaled_indicator)
from .groups import (BallCapExceeded, CyclicZ, Element, FreeGroup, Group, ZD,
                     parse_group)
from .percolation import (BernoulliSite, ClusterSample, EstimateResult,
                          MassTransportResult, ShiftedTiling, StatisticalGuard,
                          TruncatedSample, cluster_autocorrelation,
                          doubling_schedule, estimate_autocorrelation,
                          mass_transport_check, run_schedule, sample_cluster,
                          tiling_exact_autocorrelation,
                          tiling_exact_mass_transport, tiling_invariance_check)
from .posdef import (Kernel, PsdReport, autocorrelation, autocorrelation_kernel,
                     gram_psd_check, invariance_residual, sum_kernels)
from .profiles import (DecompositionReport, Profile, ProfileSet, TestFamily,
                       canonicalize, collection_kernel, decompose_sequence,
                       extract_profiles, norm_convergence_diagnostic,
                       profile_distance)
from .schur import (SchurNormViolation, Window, WindowOperator,
                    ball_window_ladder, cp_norm_check, cutoff,
                    finite_propagation_bound, identity_operator, l1_multiplier_bound,
                    op_norm, schur_product, schur_test_bound, tube_mask)
