"""Optimal transport for mixtures of radially contoured distributions.

Core objects: `Generator` (radial profile families), `RadialDistribution`
(one component), `RadialMixture` (the model), the mixture transport distance
`rw2_distance` with geodesics / barycenters / transport maps, a Gaussian
mixture baseline, mini-batch EM fitting, and an image color-transfer
pipeline (CLI: ``radialot``).
"""

from ._kernels import BACKEND as kernel_backend
from .errors import (
    CapacityError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    InfeasibleError,
    RadialOTError,
    UndefinedConditionalError,
    UnsupportedError,
)
from .generators import (
    Generator,
    compact_poly,
    eval_generator,
    gaussian_kernel,
    imq,
    moment,
    normalizer,
    tabulated,
    unit_sphere_area,
    variance_factor,
)
from .radial import (
    MongeMap1D,
    ProfileCDF,
    RadialDistribution,
    barycenter_shared_generator,
    interpolate,
    monge_map,
    pairwise_w2,
    profile_cdf,
    radial_monge_1d,
    sample,
)
from .mixture import (
    RadialMixture,
    load_mixture,
    merge_duplicates,
    mixture_density,
    sample_mixture,
    save_mixture,
    validate,
)
from .discrete_ot import (
    MultimarginalPlan,
    TransportPlan,
    empirical_w2,
    sinkhorn,
    sinkhorn_grid,
    solve_multimarginal,
    solve_transport,
)
from .rw2 import (
    RW2Result,
    assignment_probabilities,
    rw2_barycenter,
    rw2_distance,
    rw2_geodesic,
    rw2_upper_bound_gap,
    t_mean,
    t_rand,
)
from .gmm import (
    GaussianComponent,
    GaussianMixture,
    gaussian_monge,
    gaussian_w2,
    gmm_em,
    gmm_t_mean,
    gw2_distance,
    parameter_count,
)
from .estimation import EMConfig, e_step, fullbatch_em, kmeans_init, m_step, minibatch_em
from .color import ColorCloud, TransferReport, eval_error, fit_palette, load_image, save_image, transfer

__version__ = "0.1.0"
