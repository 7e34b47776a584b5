"""
Training hyper-parameters of the clustering forest.

Defaults: 1000 trees,
m_try = sqrt(d), minimum node size 2, visual weight 0.5.
"""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from libs.analytics.sources import (
    MultiSourceDataset,
    SourceWeights,
    default_weights,
    visual_temporal_weights,
)
from libs.errors import ConfigError

Variant = Literal["full", "visual", "visual-temporal"]


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T_clust: int = Field(default=1000, ge=1)
    m_try: Optional[int] = Field(default=None, ge=1)
    phi: int = Field(default=2, ge=2)
    alpha_v: float = Field(default=0.5, gt=0.0, le=1.0)
    weights: Optional[List[float]] = None  # explicit [alpha_v, *alpha_aux, alpha_t]
    variant: Variant = "full"
    oblique: bool = False
    shared_pseudo: bool = False
    record_correlation: bool = True
    seed: int = Field(default=0, ge=0)

    def resolve_m_try(self, d: int) -> int:
        m_try = self.m_try if self.m_try is not None else math.ceil(math.sqrt(d))
        if not 1 <= m_try <= d:
            raise ConfigError(f"m_try must lie in [1, {d}], got {m_try}")
        return m_try

    def resolve_weights(self, dataset: MultiSourceDataset) -> SourceWeights:
        m = dataset.n_sources
        if self.weights is not None:
            weights = SourceWeights.from_list(self.weights)
            if weights.m != m:
                raise ConfigError(f"weights declare {weights.m} auxiliary sources, dataset has {m}")
            return weights
        if self.variant == "visual":
            return SourceWeights(1.0, (0.0,) * m, 0.0)
        if self.variant == "visual-temporal":
            return visual_temporal_weights(self.alpha_v, m)
        hints = [d.weight_hint for d in dataset.descriptors]
        return default_weights(self.alpha_v, m, hints)

    def model_identity(self) -> dict:
        """Fields that determine the trained model (serialized and hashed)."""
        return self.model_dump(mode="json")
