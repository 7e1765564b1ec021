from __future__ import annotations

from typing import Any, Dict


class MeanActionError(Exception):
    """Base class for every failure raised by the package."""

    code = "error"

    def to_dict(self) -> Dict[str, Any]:
        return {"status": "error", "error": self.code, "message": str(self)}


class UsageError(MeanActionError):
    code = "usage_error"


class MapSpecError(MeanActionError):
    code = "map_spec_error"


class DomainError(MeanActionError, ValueError):
    code = "domain_error"


class IntegratorDivergence(MeanActionError):
    code = "integrator_divergence"


class QuadratureNotConverged(MeanActionError):
    code = "quadrature_not_converged"


class NonAdmissibleMap(MeanActionError):
    code = "non_admissible_map"


class InfeasibleEta(MeanActionError):
    code = "infeasible_eta"


class RationalityGuardTripped(MeanActionError):
    code = "rationality_guard_tripped"


class NonIntegerP(MeanActionError):
    code = "non_integer_p"


class FloorGuardTripped(MeanActionError):
    code = "floor_guard_tripped"


class OrderingMismatch(MeanActionError):
    code = "ordering_mismatch"


class RankNotFound(MeanActionError):
    code = "rank_not_found"


class BoundViolated(MeanActionError):
    code = "bound_violated"


class NonPositiveInput(MeanActionError, ValueError):
    code = "non_positive_input"


class VerificationFailed(MeanActionError):
    code = "verification_failed"
