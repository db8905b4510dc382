"""Stable noise: samplers, noise paths, the image-measure oracle and constants."""

from .calibration import (calibrate_lepage_scale, increment_characteristic_check,
                          series_characteristic)
from .constants import Provenance, StableConstants, probe_tail_ratios
from .oracle import (annulus_mass, chi2_mixture_cdf, chi2_mixture_sf, isotropic_tail_mass,
                     levy_tail_oracle, small_jump_second_moment, subordinator_density_constant,
                     tail_ratio_supremum, truncated_moment_integrals,
                     truncated_moments_closed_form, unit_tail_from_operators,
                     unit_tail_from_weights)
from .paths import (INCREMENT_EXACT, JUMP_RESOLVED, NoisePath, dropped_variance,
                    sample_noise_path, series_floor)
from .sampling import (sample_isotropic_increment, sample_positive_stable, sample_sas_1d,
                       uniform_directions)

__all__ = [
    "INCREMENT_EXACT", "JUMP_RESOLVED", "NoisePath", "Provenance", "StableConstants",
    "annulus_mass", "calibrate_lepage_scale", "increment_characteristic_check",
    "chi2_mixture_cdf", "chi2_mixture_sf", "dropped_variance", "isotropic_tail_mass",
    "levy_tail_oracle", "probe_tail_ratios", "sample_isotropic_increment", "sample_noise_path",
    "sample_positive_stable", "sample_sas_1d", "series_characteristic", "series_floor",
    "small_jump_second_moment", "subordinator_density_constant", "tail_ratio_supremum",
    "truncated_moment_integrals", "truncated_moments_closed_form", "uniform_directions",
    "unit_tail_from_operators", "unit_tail_from_weights",
]
