"""Morse index, focal points and two-endpoint index forms along geodesics.

Works for Riemannian manifolds and for timelike or lightlike geodesics of
Lorentzian manifolds given in a single coordinate chart.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, MorseIndexError, NumericalError, ParseError,  # noqa: E402
                     PreconditionError)
from .geometry import Manifold, Submanifold, euclidean, minkowski, sphere  # noqa: E402
from .geodesics import (CausalCharacter, Geodesic, adapted_seed, causal_character,  # noqa: E402
                        integrate_geodesic, parallel_frame)
from .jacobi import (FocalPoint, conjugate_points, focal_points, jacobi_bvp,  # noqa: E402
                     jacobi_propagate, p_jacobi_basis)
from .indexform import (discrete_index_form, form_A, index_form_two_endpoint_value,  # noqa: E402
                        index_form_value, index_function, inertia, kernel_nullity,
                        morse_index, normal_partition, two_endpoint_index)
from .oracle import (assemble_dense_form, dense_index_oracle, boundary_identity_trial,  # noqa: E402
                     minimality_check)
from .expr import parse_expression  # noqa: E402
from .config import Config, load_config  # noqa: E402
from .estimators import DenseIndexOracle, MorseIndex, TwoEndpointIndex  # noqa: E402
