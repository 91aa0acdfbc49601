"""M|G|oo busy-period analytics for the Riccati service-time family."""

from mginf.service_law import ServiceLawParams, cdf, pdf, quantile, survival, validate

__all__ = ["ServiceLawParams", "cdf", "pdf", "quantile", "survival", "validate"]
__version__ = "0.1.0"
