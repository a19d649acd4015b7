"""Numerical tolerances shared by the whole pipeline.

Every threshold used for a decision lives here so that tests and the
command line can override them in one place.
"""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    det_tol: float = 1e-8        # |det W| below this (unit-norm W) means small cell
    cond_tol: float = 1e-10      # kernel conditioning below this means small cell
    null_rel: float = 1e-9       # SVD nullspace threshold relative to largest value
    boundary_tol: float = 1e-9   # ||X11|-|X21|| and |ratio - 1| tie-break width
    recon_tol: float = 1e-8      # relative reconstruction residual
    tail_tol: float = 1e-13      # relative mass allowed outside the working band
    det_drift_tol: float = 1e-6  # |det(phi) - 1| during integration
    slope_tol: float = 0.25      # rho-trend threshold on log-log slope
    min_trend_samples: int = 5
    trim_tol: float = 1e-16      # relative size below which loop coefficients are dropped
    flag_width: float = 1.5      # flag vertices within this many grid steps of the singular set
    real_form_tol: float = 1e-8  # tau(F) -+ F residual accepted by the Sym formula


DEFAULT = Tolerances()


def with_overrides(**kw) -> Tolerances:
    return replace(DEFAULT, **kw)
