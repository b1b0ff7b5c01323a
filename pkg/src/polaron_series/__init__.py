"""Confined-polaron strong-coupling expansion on a finite truncated model.

Electron sector: Dirichlet-Laplacian eigenbasis on an interval or the
radial ball sector.  Field sector: truncated bosonic Fock space.  The
package computes the Pekar minimizer, the Gaussian fluctuation spectrum,
the full recursive expansion coefficients of each low-energy eigenvalue in
inverse powers of the coupling, and validates every identity and decay
order against exact diagonalization of the same truncated model.
"""

__version__ = "0.1.0"

from .domain import (DomainSpec, Basis, build_basis, laplacian_power,
                     triple_overlap, coupling_matrices, uv_projection)
from .pekar import (PekarSolution, pekar_energy, solve_pekar,
                    reduced_resolvent_matrix, reduced_resolvent_apply,
                    verify_assumptions)
from .model import ModelData, build_model, model_from_solution, synthetic_model
from .quadratic import (HessianModel, LadderLevel, hessian_matrix,
                        ground_energy, ladder_spectrum, bogoliubov_kernel)
from .fock import (FockSpace, build_fock, ladder, field_operator,
                   bogoliubov_hamiltonian, eigenpair_group,
                   fock_reduced_resolvent, bogoliubov_unitary)
from .series import (SeriesContext, make_series_context, folded_term,
                     expansion_coefficients, expansion_coefficients_degenerate,
                     level_matrix, eigenvalue_branch_series,
                     explicit_second_order, explicit_fourth_order)
from .gross import (GrossContext, build_gross, verify_bogoliubov_identity,
                    approximate_eigenstate, residual_norm,
                    expansion_coefficients_gross)
from .oracle import (SpectralSweep, fluctuation_hamiltonian, exact_levels,
                     coefficient_order_fit, residual_order_fit, growth_check,
                     default_alpha_grid)
