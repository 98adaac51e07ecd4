"""Log-tropical weights on the complex plane.

Log-transforms of radial weights, their monomial minorants as tropical
series, sparse thinned chains, and the lacunary series and maps built from
them, with numerical certificates for the resulting equivalences.
"""

from ._kernels import BACKEND
from .holomap import (HoloMap, LogPowerSeries, NearZeroModulus, TruncationError,
                      assemble_embedding, assemble_immersion, eval_log_modulus,
                      harmonic_components, harmonic_square_series, max_modulus_estimate,
                      verify_equivalence)
from .thinning import ThinnedChain, split, thin, verify_chain_bounds, verify_separation
from .tropical import (TropicalSeries, TropicalTerm, classify, essential_filter,
                       monomial_minorant, tangent_gaps)
from .weights import LogTransform, WeightSpec, check_convexity, is_rapid, make_weight

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "HoloMap", "LogPowerSeries", "LogTransform", "NearZeroModulus", "ThinnedChain",
    "TropicalSeries", "TropicalTerm", "TruncationError", "WeightSpec", "assemble_embedding",
    "assemble_immersion", "check_convexity", "classify", "essential_filter", "eval_log_modulus",
    "harmonic_components", "harmonic_square_series", "is_rapid", "make_weight",
    "max_modulus_estimate", "monomial_minorant", "split", "tangent_gaps", "thin",
    "verify_chain_bounds", "verify_equivalence", "verify_separation",
]
