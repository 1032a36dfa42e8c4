"""The path/polarization interference indicator ("Cheshire cat" parameter).

The indicator is the post-selection-weighted cross-average

    C(E_f) = <xy> P{E_f} = (w_X w_Y / 2) Re Tr[E_f sigma_R rho_i Pi_L],

computed both ways (operational moment form and theoretical trace form),
which must agree.  Because Pi_L sigma_R = 0, the complementary
post-selection flips the sign, C(1 - E_f) = -C(E_f), so collecting
signed products over all trials estimates C = 2 C(E_f).  A nonzero C
certifies interference between the photon's presence in one arm and its
polarization in the other; it vanishes without post-selection and for
path-block-diagonal preparations or post-selections.  The largest
attainable value is C = w_X w_Y / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .hilbert import PureState, complement
from .statistics import Experiment, complement_experiment, moments

# Operational reading of "much smaller than" in the noise criterion.
NOISE_MARGIN = 10.0


@dataclass(frozen=True)
class CheshireReport:
    """Both evaluations of C(E_f) for one experiment.

    c_of_Ef is the cross-checked value (trace form); c_moment_form keeps
    the independently computed <xy> P{E_f} product.  c_total = 2 c_of_Ef
    is what the signed-trial prescription estimates.  noise_ok stays
    None until a noise check fills it in.
    """

    c_of_Ef: float
    c_total: float
    cross_xy: float
    p_postselect: float
    c_moment_form: float
    noise_ok: bool | None = None

    def with_noise(self, diag: "NoiseDiagnostics") -> "CheshireReport":
        return replace(self, noise_ok=diag.passed)


@dataclass(frozen=True)
class NoiseDiagnostics:
    """Verdict of the readout-noise criterion, with the raw ratios.

    passed requires nu_x nu_y < |C| / margin together with the necessary
    conditions nu_x < (w_X/2) / margin and nu_y < (w_Y/2) / margin.
    """

    passed: bool
    product_ratio: float
    ratio_x: float
    ratio_y: float
    margin: float


def cheshire_parameter(exp: Experiment) -> CheshireReport:
    """Compute C(E_f) by the trace formula and by <xy> P{E_f}; cross-check."""
    fam = exp.family
    c_trace = 0.5 * exp.w_x * exp.w_y * fam.M.real
    rep = moments(exp)
    c_moment = rep.cross_xy * rep.p_postselect
    if abs(c_trace - c_moment) > 1e-10 * max(1.0, abs(c_trace)):
        raise ValidationError(
            f"cheshire parameter forms disagree: trace {c_trace!r} vs "
            f"moment {c_moment!r}"
        )
    return CheshireReport(
        c_of_Ef=c_trace,
        c_total=2.0 * c_trace,
        cross_xy=rep.cross_xy,
        p_postselect=rep.p_postselect,
        c_moment_form=c_moment,
    )


def complement_identity(exp: Experiment) -> tuple[float, float]:
    """(C(E_f), C(E'_f)) for the complementary post-selection E'_f = 1 - E_f.

    The two are exact negatives of each other.  E_f (numerically) equal
    to the identity leaves no usable complement and is rejected.
    """
    e_prime = complement(exp.e_f)
    if e_prime.trace() <= 1e-10:
        raise ValidationError(
            "complement_identity: E_f is the identity; its complement has "
            "zero trace and cannot post-select anything"
        )
    c = cheshire_parameter(exp).c_of_Ef
    c_prime = cheshire_parameter(complement_experiment(exp)).c_of_Ef
    return c, c_prime


def max_family(a: complex, b: complex, phi: float) -> tuple[PureState, PureState]:
    """Preparation/post-selection pair attaining the maximal indicator.

    |Psi> = a/sqrt(2) |L,+> + b/sqrt(2) |L,-> + e^{i phi}/2 |R,+> + 1/2 |R,->
    |Phi> = same with the |R,-> amplitude negated,

    with |a|^2 + |b|^2 = 1.  Every member has L_w = Sigma_w = 1 and gives
    c_total = w_X w_Y / 4.
    """
    a, b = complex(a), complex(b)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-10:
        raise ValidationError("max_family: need |a|^2 + |b|^2 = 1 within 1e-10")
    half = 1.0 / math.sqrt(2.0)
    e_phi = complex(np.exp(1j * phi))
    psi = PureState(np.array([a * half, b * half, 0.5 * e_phi, 0.5]))
    phi_state = PureState(np.array([a * half, b * half, 0.5 * e_phi, -0.5]))
    return psi, phi_state


def noise_check(
    report: CheshireReport,
    nu_x: float,
    nu_y: float,
    w_x: float,
    w_y: float,
    margin: float = NOISE_MARGIN,
) -> NoiseDiagnostics:
    """Can additive readout noise of std (nu_x, nu_y) hide the signal?

    Requires nu_x nu_y to sit a factor ``margin`` below |c_total|, and
    each nu a factor ``margin`` below w/2.  Raw ratios are reported so
    callers can apply their own margin.
    """
    if nu_x < 0.0 or nu_y < 0.0:
        raise ValidationError("noise_check: noise levels must be nonnegative")
    c = abs(report.c_total)
    product_ratio = (nu_x * nu_y / c) if c > 0.0 else math.inf
    if nu_x * nu_y == 0.0 and c > 0.0:
        product_ratio = 0.0
    ratio_x = nu_x / (w_x / 2.0)
    ratio_y = nu_y / (w_y / 2.0)
    passed = (
        product_ratio < 1.0 / margin
        and ratio_x < 1.0 / margin
        and ratio_y < 1.0 / margin
    )
    return NoiseDiagnostics(
        passed=bool(passed),
        product_ratio=product_ratio,
        ratio_x=ratio_x,
        ratio_y=ratio_y,
        margin=margin,
    )
