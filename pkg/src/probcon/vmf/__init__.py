"""
von Mises-Fisher Distribution

Density, exact and reparametrized sampling, and the radial marginal of the
vMF distribution on the unit hypersphere.
"""

from probcon.vmf.distribution import (
    VmfParams,
    as_unit_vector,
    householder_to,
    sample_radial,
    vmf_logpdf,
    vmf_sample,
    vmf_sample_batch,
)
from probcon.vmf.radial import (
    RadialLaw,
    radial_cdf,
    radial_cdf_batch,
    radial_kappa_derivative,
    radial_log_masses,
    radial_log_pdf,
    radial_pdf,
    radial_quantile,
    radial_quantile_batch,
    radial_transport,
)
from probcon.vmf.reparam import ReparamNoise, draw_reparam_noise, vmf_sample_reparam

__all__ = [
    "RadialLaw",
    "ReparamNoise",
    "VmfParams",
    "as_unit_vector",
    "draw_reparam_noise",
    "householder_to",
    "radial_cdf",
    "radial_cdf_batch",
    "radial_kappa_derivative",
    "radial_log_masses",
    "radial_log_pdf",
    "radial_pdf",
    "radial_quantile",
    "radial_quantile_batch",
    "radial_transport",
    "sample_radial",
    "vmf_logpdf",
    "vmf_sample",
    "vmf_sample_batch",
    "vmf_sample_reparam",
]
