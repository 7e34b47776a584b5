"""
Error taxonomy shared by the library, services and CLI.

Every error carries a stable `code` and a `family` (IO | VALIDATION | NUMERIC);
the CLI maps families to exit codes.
"""
from typing import Optional

import numpy as np


class MscError(Exception):
    """Base class for all domain errors."""
    code = "MSC"
    family = "VALIDATION"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self) -> dict:
        return {"code": self.code, "family": self.family, "message": str(self), **self.context}


class ManifestError(MscError):
    code = "MANIFEST"
    family = "IO"


class MalformedCsvError(MscError):
    code = "MALFORMED_CSV"
    family = "IO"


class ModelFileError(MscError):
    code = "MODEL_FILE"
    family = "IO"


class DuplicateIdError(MscError):
    code = "DUPLICATE_ID"


class VocabularyError(MscError):
    code = "VOCABULARY"

    def __init__(self, source: str, row: int, value: str):
        super().__init__(
            f"Value {value!r} at row {row} is not in the vocabulary of source '{source}'",
            source=source, row=row, value=value,
        )
        self.source = source
        self.row = row


class NonFiniteFeatureError(MscError):
    code = "NON_FINITE"


class DatasetValidationError(MscError):
    code = "DATASET"


class WeightsError(MscError):
    code = "WEIGHTS"


class ConfigError(MscError):
    code = "CONFIG"


class AlignmentError(MscError):
    code = "ID_MISMATCH"


class IsolatedSampleError(MscError):
    code = "ISOLATED_SAMPLE"
    family = "NUMERIC"

    def __init__(self, index: int):
        super().__init__(f"Sample {index} has zero degree in the affinity graph", index=index)
        self.index = index


class SpectralError(MscError):
    code = "EIGEN"
    family = "NUMERIC"


EXIT_CODES = {
    "VALIDATION": 2,
    "IO": 3,
    "NUMERIC": 4,
}


def classify_error(exc: Optional[BaseException]) -> str:
    """
    Classify an exception into an error family:
    - VALIDATION: bad inputs, schema or config violations
    - IO: missing/unreadable files, malformed CSV or model files
    - NUMERIC: eigen-solver failures, isolated samples
    - UNKNOWN: anything else
    """
    if exc is None:
        return "UNKNOWN"
    if isinstance(exc, MscError):
        return exc.family

    from pydantic import ValidationError
    if isinstance(exc, ValidationError):
        return "VALIDATION"
    if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError, OSError)):
        return "IO"
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return "NUMERIC"
    if isinstance(exc, (ValueError, TypeError)):
        return "VALIDATION"
    return "UNKNOWN"


def exit_code_for(exc: Optional[BaseException]) -> int:
    return EXIT_CODES.get(classify_error(exc), 1)
