"""Exception types shared across the package."""


class CatgrinError(Exception):
    """Base class for all package errors."""


class ValidationError(CatgrinError, ValueError):
    """An input state, operator, meter, or parameter violates its contract."""


class OrthogonalStatesError(CatgrinError, ValueError):
    """Preparation and post-selection are (numerically) orthogonal.

    Normalized weak values diverge here; use the raw matrix-element path
    (``weakvalues.matrix_elements`` / the ``almost-orthogonal`` limit
    formulas), which stays finite.
    """


class ZeroPostSelectionError(CatgrinError, ValueError):
    """The post-selection never succeeds: P{E_f} is zero (or negative)."""


class WeakLimitDivergenceError(CatgrinError, ArithmeticError):
    """The requested limit has no finite value.

    For an (almost) orthogonal pair with Re(l_w* sigma_w) != 0 the
    cross-average grows without bound as w_X w_Y -> 1 (it scales as
    1/r^2 in the residual overlap r), so no number is returned.
    """


class ConfigError(CatgrinError, ValueError):
    """A run configuration failed to parse or validate.

    The message starts with the dotted path of the offending field.
    """
