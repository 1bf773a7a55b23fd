"""Modulus bounds and cavitation tests for maps of the punctured unit ball."""

__version__ = "0.1.0"

from .dilatation import (  # noqa: E402
    DilatationSample,
    angular_dilatation,
    chain_slack,
    classical_dilatations,
    dilatation_fields,
    dual_dilatation,
    normal_dilatation,
    sample,
)
from .errors import (  # noqa: E402
    CavimodError,
    DomainError,
    EvaluationError,
    ExpressionError,
    IntegrationError,
    IrregularPointError,
    ParameterError,
)
from .expression import parse_map_expression  # noqa: E402
from .mapping import (  # noqa: E402
    MappingSpec,
    RadialProfile,
    catalog_get,
    conjugate_rotation,
    evaluate,
    jacobian,
    radial_map,
)
from .modulus import (  # noqa: E402
    CavitationReport,
    CavitationVerdict,
    ModulusBounds,
    cavitation_integrals,
    check_bgmv,
    check_fundamental,
    classify_cavitation,
    lower_bound_sigma,
    modulus_bounds,
    radius_bracket,
    upper_bound_extremal,
)
from .quadrature import LimitKind, LimitVerdict, integrate_annulus, limit_classify, make_grid  # noqa: E402
