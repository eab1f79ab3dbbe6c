"""Dual Hölder norms, fractional Sobolev norms and lower-bound certificates."""
from .holder import (LP_CAP, Certificate, DualNormResult, certificate_bound, distance_lower_bound_certificate,
                     function_norms, holder_dual, holder_seminorm)
from .sobolev import (ConditioningWarning, LocalizationReport, domain_gram, h_neg_s, h_neg_s_domain, hs_dq,
                      hs_fourier, verify_localization)

__all__ = [
    "LP_CAP", "Certificate", "DualNormResult", "certificate_bound", "distance_lower_bound_certificate",
    "function_norms", "holder_dual", "holder_seminorm", "ConditioningWarning", "LocalizationReport",
    "domain_gram", "h_neg_s", "h_neg_s_domain", "hs_dq", "hs_fourier", "verify_localization",
]
