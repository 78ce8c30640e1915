"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can emit
structured JSON on stderr.
"""

from __future__ import annotations


class NilcorrError(Exception):
    code = "error"

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "location": self.location}


class PresentationMismatch(NilcorrError):
    code = "presentation_mismatch"


class FloorAmbiguous(NilcorrError):
    code = "floor_ambiguous"


class StepUnsupported(NilcorrError):
    code = "step_unsupported"


class QuadratureNotConverged(NilcorrError):
    code = "quadrature_not_converged"


class NotNormal(NilcorrError):
    code = "not_normal"


class NotFactorable(NilcorrError):
    code = "not_factorable"


class ProvenanceMissing(NilcorrError):
    code = "provenance_missing"


class DegreeOverflow(NilcorrError):
    code = "degree_overflow"


class NotReducible(NilcorrError):
    code = "not_reducible"


class ResidualNotNull(NilcorrError):
    code = "residual_not_null"


class UnsupportedObservable(NilcorrError):
    code = "unsupported_observable"


class DimensionMismatch(NilcorrError):
    code = "dimension_mismatch"


class ConfigError(NilcorrError):
    code = "config_error"
