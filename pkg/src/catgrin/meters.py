"""Gaussian pointer meters and measurement-regime classification.

A meter is described in normalized readout units (position divided by
the coupling constant) by two inverse lengths: epsilon = 1/Delta_x, the
inverse of the initial readout spread, and epsilon_tilde = 2*Delta_p,
the inverse of the pointer coherence length kappa.  The uncertainty
principle forces epsilon <= epsilon_tilde, with equality for a pure
meter state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Fig-2-style regime cutoffs, made explicit so classification is
# deterministic.  Boundaries are inclusive.
STRONG_MAX_SPREAD = 0.1        # strong: Delta_x = 1/epsilon <= 0.1
WEAK_COHERENT_MIN_KAPPA = 10.0  # weak coherent: kappa = 1/epsilon_tilde >= 10
WEAK_INCOHERENT_MIN_SPREAD = 10.0  # weak incoherent: Delta_x >= 10 ...
WEAK_INCOHERENT_MAX_KAPPA = 0.1    # ... and kappa <= 0.1


@dataclass(frozen=True)
class GaussianMeter:
    """Zero-mean Gaussian pointer state parameters (epsilon, epsilon_tilde)."""

    epsilon: float
    epsilon_tilde: float

    def __post_init__(self):
        eps, epst = float(self.epsilon), float(self.epsilon_tilde)
        if not (math.isfinite(eps) and math.isfinite(epst)):
            raise ValidationError("meter: parameters must be finite")
        if eps <= 0.0 or epst <= 0.0:
            raise ValidationError("meter: epsilon and epsilon_tilde must be positive")
        if eps > epst * (1.0 + 1e-12):
            raise ValidationError(
                f"meter: uncertainty principle requires epsilon <= epsilon_tilde "
                f"(got {eps} > {epst})"
            )
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "epsilon_tilde", epst)

    @property
    def spread(self) -> float:
        """Initial readout uncertainty Delta_x = 1/epsilon."""
        return 1.0 / self.epsilon

    @property
    def coherence_length(self) -> float:
        """Pointer coherence scale kappa = 1/epsilon_tilde."""
        return 1.0 / self.epsilon_tilde

    @property
    def w(self) -> float:
        return w_factor(self)

    def is_pure(self, tol: float = 1e-12) -> bool:
        return abs(self.epsilon - self.epsilon_tilde) <= tol * self.epsilon_tilde


@dataclass(frozen=True)
class Regime:
    """Measurement-regime label, with a crossover flag for borderline meters.

    label is one of 'strong', 'weak-coherent', 'weak-incoherent',
    'intermediate'.  For a two-valued observable (the only case handled
    here) the eigenvalue spacing equals the spectral range, so the
    'intermediate' region of the general classification is empty; the
    label exists for API completeness but is never returned.  When no
    region's condition holds exactly, crossover is True and label names
    the nearest region (log-scale distance).
    """

    label: str
    crossover: bool = False


def meter_density(m: GaussianMeter, x, xp):
    """Position-representation kernel rho(x, x') of the meter state.

    (epsilon/sqrt(2 pi)) * exp(-epsilon^2 (x+x')^2/8 - epsilon_tilde^2 (x-x')^2/8).
    Real, symmetric in (x, x'); accepts scalars or broadcasting arrays.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    eps, epst = m.epsilon, m.epsilon_tilde
    expo = -(eps ** 2) * (x + xp) ** 2 / 8.0 - (epst ** 2) * (x - xp) ** 2 / 8.0
    out = (eps / math.sqrt(2.0 * math.pi)) * np.exp(expo)
    return out if out.ndim else float(out)


def w_factor(m: GaussianMeter) -> float:
    """Coherence weight w = exp(-epsilon_tilde^2 / 8), in (0, 1].

    The exponent is formed directly (never exp of a positive quantity),
    so large epsilon_tilde underflows gracefully to 0.0, the correct
    strong/incoherent limit.
    """
    return math.exp(-(m.epsilon_tilde ** 2) / 8.0)


def _region_distances(m: GaussianMeter) -> dict[str, float]:
    # Log-scale deficit from each region's defining inequalities; 0 means
    # the meter is inside the region.
    spread = math.log10(m.spread)
    kappa = math.log10(m.coherence_length)
    return {
        "strong": max(0.0, spread - math.log10(STRONG_MAX_SPREAD)),
        "weak-coherent": max(0.0, math.log10(WEAK_COHERENT_MIN_KAPPA) - kappa),
        "weak-incoherent": max(
            math.log10(WEAK_INCOHERENT_MIN_SPREAD) - spread,
            kappa - math.log10(WEAK_INCOHERENT_MAX_KAPPA),
            0.0,
        ),
    }


def classify_regime(m: GaussianMeter) -> Regime:
    """Regime of a two-valued-observable measurement (strong / weak-coherent /
    weak-incoherent), or the nearest one flagged as a crossover."""
    dist = _region_distances(m)
    exact = [name for name, d in dist.items() if d == 0.0]
    if exact:
        return Regime(label=exact[0], crossover=False)
    nearest = min(dist, key=dist.get)
    return Regime(label=nearest, crossover=True)
