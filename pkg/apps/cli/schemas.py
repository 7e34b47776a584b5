"""
Output contracts of the CLI: tag records, summary manifests, evaluation
reports and run logs.
"""
from enum import Enum
from typing import Any, Dict, List, Optional, Union

from pydantic import Field

from apps.cli.schemas_base import StrictModel


class Typicality(str, Enum):
    INTERESTING = "INTERESTING"
    USUAL = "USUAL"


class SourceTagRecord(StrictModel):
    argmax: Union[str, int, float]
    distribution: List[float]
    bin_centre: Optional[float] = None
    mean: Optional[float] = None


class TagRecord(StrictModel):
    """One JSON line emitted by `tag`."""
    sample_id: str
    cluster: int
    votes: Dict[str, int]
    tags: Dict[str, SourceTagRecord] = Field(default_factory=dict)


class SummaryClip(StrictModel):
    id: str
    t: float
    cluster: int
    typicality: Typicality
    tags: Dict[str, Union[str, int]] = Field(default_factory=dict)


class SummaryManifest(StrictModel):
    clips: List[SummaryClip]
    length: int
    config: Dict[str, Any] = Field(default_factory=dict)


class CoverageInput(StrictModel):
    """Lengths of all compared summaries and the events each one covers."""
    lengths: Dict[str, int]
    covered: Dict[str, int]
    total_events: int = Field(ge=1)


class SourceEval(StrictModel):
    accuracy: Optional[float] = None
    n_evaluated: int = 0
    labels: List[str] = Field(default_factory=list)
    confusion: List[List[int]] = Field(default_factory=list)
    mean_entropy: Optional[float] = None


class EvalReport(StrictModel):
    sources: Dict[str, SourceEval]
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    entropy_base: str = "e"
    size_weighted: bool = True


class RunLog(StrictModel):
    command: str
    argv: List[str]
    status: str
    seed: Optional[int] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    config_hash: str
    flags: Dict[str, bool] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict)
    phi_star: Optional[float] = None
    fan_in: Optional[Dict[str, Any]] = None
    outputs: List[str] = Field(default_factory=list)
    error: Optional[Dict[str, Any]] = None
