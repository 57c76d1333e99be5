"""
Special Functions

Log-space modified Bessel functions and the von Mises-Fisher normalizer that
every other module builds on.
"""

from probcon.special.bessel import (
    log_bessel_i,
    log_sphere_area,
    log_vmf_norm_const,
    mean_resultant_length,
)

__all__ = [
    "log_bessel_i",
    "log_sphere_area",
    "log_vmf_norm_const",
    "mean_resultant_length",
]
