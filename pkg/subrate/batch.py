from collections.abc import Sequence
from functools import cached_property
import logging
from typing import Optional, Union

import numpy as np

from .block import CoeffBlock, DatasetRecord
from .config import EstimationConfiguration, resolve
from .features import extract_batch
from .models import (
    FeatureMask, FitReport, LogisticParams, MagnitudeHistogram, ModelKind, RateModel,
    fit_linear, fit_logistic_histogram, predict_features, predict_histogram,
)


__all__ = [
    "RecordBatch",
    "fit_model",
    "estimate",
]


logger = logging.getLogger(__name__)


class RecordBatch:
    """
    Dataset records prepared for fitting and evaluation.

    Features and magnitude histograms are computed once on first use and shared by every subset taken from the batch.
    """
    def __init__(self, records: Sequence[DatasetRecord]) -> None:
        #: Records in the batch.
        self.records = list(records)

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def blocks(self) -> list[CoeffBlock]:
        return [r.block for r in self.records]

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([r.rate_bits for r in self.records], dtype=np.float64)

    @cached_property
    def features(self) -> np.ndarray:
        """
        `(N, 4)` array of `(S, L, Z, E)` rows.
        """
        return extract_batch(self.blocks)

    @cached_property
    def histogram(self) -> MagnitudeHistogram:
        return MagnitudeHistogram.from_blocks(self.blocks)

    @cached_property
    def pixels(self) -> np.ndarray:
        return np.array([b.pixels for b in self.blocks], dtype=np.int64)

    @cached_property
    def qps(self) -> tuple[int, ...]:
        """
        Distinct QPs in ascending order.
        """
        return tuple(sorted({b.qp for b in self.blocks}))

    def take(self, indexes: Sequence[int]) -> 'RecordBatch':
        """
        Returns a batch of the selected records, reusing computed features and histograms.
        """
        indexes = np.asarray(indexes, dtype=np.intp)
        taken = RecordBatch([self.records[i] for i in indexes])
        if "features" in self.__dict__:
            taken.__dict__["features"] = self.features[indexes]
        if "histogram" in self.__dict__:
            taken.__dict__["histogram"] = self.histogram.take(indexes)
        return taken


def fit_model(
    kind: Union[ModelKind, str],
    batch: RecordBatch,
    feature_mask: Union[FeatureMask, str] = FeatureMask.ALL,
    bias: bool = True,
    config: Optional[EstimationConfiguration] = None,
) -> tuple[RateModel, FitReport]:
    """
    Fits a model of any kind on a batch.

    Args:
        kind: Model kind.
        batch: Training records.
        feature_mask: Features of the sub-block model. Ignored by the other kinds.
        bias: Whether linear models have an offset.
        config: Configuration. The global configuration is used when omitted.
    Returns:
        Fitted model and the report.
    """
    kind = ModelKind.parse(kind)
    logger.debug("Fitting %s on %d records.", kind.value, len(batch))
    if kind is ModelKind.LOGISTIC:
        return fit_logistic_histogram(batch.histogram, batch.rates, resolve(config).gradient)
    elif kind is ModelKind.RHO:
        return fit_linear(batch.features, batch.rates, FeatureMask.S, bias, kind=ModelKind.RHO)
    else:
        return fit_linear(batch.features, batch.rates, feature_mask, bias)


def estimate(
    model: RateModel,
    blocks: Union[RecordBatch, Sequence[CoeffBlock]],
    clamp: Optional[bool] = None,
    config: Optional[EstimationConfiguration] = None,
) -> np.ndarray:
    """
    Estimates the rates of blocks.

    Args:
        model: Fitted model.
        blocks: Blocks, or a batch whose cached features are reused.
        clamp: Whether negative estimates are clamped to 0. Defaults to `clamp_predictions` of the configuration.
        config: Configuration. The global configuration is used when omitted.
    Returns:
        Estimated rates in bits.
    """
    batch = blocks if isinstance(blocks, RecordBatch) else None
    if isinstance(model, LogisticParams):
        hist = batch.histogram if batch is not None else MagnitudeHistogram.from_blocks(blocks)  # type: ignore
        estimates = predict_histogram(model, hist)
    else:
        features = batch.features if batch is not None else extract_batch(blocks)  # type: ignore
        estimates = predict_features(model, features)
    if clamp is None:
        clamp = resolve(config).clamp_predictions
    return np.maximum(estimates, 0.0) if clamp else estimates
