from .kernels import (BesselKernel, FiniteExpansion, InfiniteGinibreKernel, KernelEvaluator,
                      kernel_bessel, kernel_infinite_ginibre, lebesgue_factor)
from .potentials import (Potential, RadialExpansion, bulk_edge_deviation, equilibrium_measure,
                         ginibre_log_norms, kernel_rnm_radial, radial_log_norms)
from .samplers import (DiscretizationError, EnvelopeError, nystrom, sample_dpp_nystrom,
                       sample_poisson, sample_projection_dpp)
from .gaf import GafSpec, RootFindingError, sample_gaf_zeros, truncation_degree, zeros_from_coefficients
from .mcmc import TuningError, run_rnm_chains, sample_rnm_mcmc

PotentialSpec = Potential
