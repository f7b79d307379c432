"""
Metrics and experiments comparing rate models.

Metrics are the Pearson correlation, the mean absolute error in bits and the mean relative error.
Experiments are k-fold cross validation, training and evaluating on different QPs, and the ablation over every
non-empty subset of the features.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
import logging
import time
from typing import NamedTuple, Optional, Union

import numpy as np

from .batch import RecordBatch, estimate, fit_model
from .block import DatasetRecord
from .config import EstimationConfiguration, resolve
from .failures import DatasetFailure, UndefinedMetricFailure, UsageFailure
from .models import FeatureMask, ModelKind, RateModel


__all__ = [
    "MetricsReport",
    "CrossValReport",
    "AblationRow",
    "AblationTable",
    "ScatterPoint",
    "ComparisonRow",
    "pearson",
    "mae",
    "mre",
    "metrics",
    "evaluate",
    "in_sample_mse",
    "fold_indexes",
    "kfold_cv",
    "cross_qp_eval",
    "select_qp",
    "cross_qp_matrix",
    "ablate",
    "scatter_dump",
    "compare",
]


logger = logging.getLogger(__name__)


Data = Union[RecordBatch, Sequence[DatasetRecord]]


def _batch(data: Data) -> RecordBatch:
    return data if isinstance(data, RecordBatch) else RecordBatch(data)


def _pair(actual: Iterable[float], predicted: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(actual, dtype=np.float64).reshape(-1)
    y = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise UndefinedMetricFailure(f"{x.size} actual values do not pair with {y.size} predictions.")
    if x.size == 0:
        raise UndefinedMetricFailure("Metrics are undefined for empty input.")
    return x, y


#------------------------------------------------------------
# Metrics
#------------------------------------------------------------
def pearson(actual: Iterable[float], predicted: Iterable[float]) -> float:
    """
    Pearson correlation coefficient, using population covariance and standard deviations.

    Raises:
        UndefinedMetricFailure: Fewer than 2 samples or zero variance in either sequence.
    """
    x, y = _pair(actual, predicted)
    if x.size < 2:
        raise UndefinedMetricFailure("Pearson correlation needs at least 2 samples.")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.mean(dx * dx))
    sy = np.sqrt(np.mean(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricFailure("Pearson correlation is undefined for a constant sequence.")
    r = float(np.mean(dx * dy) / (sx * sy))
    return min(1.0, max(-1.0, r))


def mae(actual: Iterable[float], predicted: Iterable[float]) -> float:
    """
    Mean absolute error.
    """
    x, y = _pair(actual, predicted)
    return float(np.mean(np.abs(x - y)))


def mre(actual: Iterable[float], predicted: Iterable[float]) -> tuple[float, int]:
    """
    Mean relative error over samples with a positive actual rate.

    Returns:
        The error and the number of excluded zero-rate samples.
    Raises:
        UndefinedMetricFailure: Every sample has zero rate, or a rate is negative.
    """
    x, y = _pair(actual, predicted)
    if np.any(x < 0):
        raise UndefinedMetricFailure("Relative error is undefined for negative rates.")
    kept = x > 0
    excluded = int(x.size - np.count_nonzero(kept))
    if excluded == x.size:
        raise UndefinedMetricFailure("Relative error is undefined when every rate is zero.", excluded=excluded)
    return float(np.mean(np.abs(x[kept] - y[kept]) / x[kept])), excluded


@dataclass(frozen=True)
class MetricsReport:
    """
    Metrics of a model evaluated on a set of blocks.
    """
    pearson: float
    mae: float
    mre: float
    n_total: int
    n_mre_excluded: int = 0
    #: Seconds spent per block by feature extraction and prediction.
    wall_time_per_block: float = 0.0
    model: str = ""
    qp_train: tuple[int, ...] = ()
    qp_eval: tuple[int, ...] = ()

    def __post_init__(self):
        if not -1.0 <= self.pearson <= 1.0:
            raise UndefinedMetricFailure(f"Pearson correlation {self.pearson} is out of range.")
        if self.n_mre_excluded > self.n_total:
            raise UndefinedMetricFailure("More samples excluded than evaluated.")


def metrics(actual: Iterable[float], predicted: Iterable[float], **meta) -> MetricsReport:
    """
    Computes every metric at once.

    Args:
        actual: Measured rates.
        predicted: Estimated rates.
        meta: Other fields of `MetricsReport` .
    """
    x, y = _pair(actual, predicted)
    value, excluded = mre(x, y)
    return MetricsReport(
        pearson=pearson(x, y),
        mae=mae(x, y),
        mre=value,
        n_total=int(x.size),
        n_mre_excluded=excluded,
        **meta,
    )


def evaluate(model: RateModel, data: Data, config: Optional[EstimationConfiguration] = None, **meta) -> MetricsReport:
    """
    Evaluates a model on records.

    Features are extracted again from the blocks inside the timed region so that the reported time covers
    extraction and prediction.
    """
    batch = _batch(data)
    if len(batch) == 0:
        raise DatasetFailure("Evaluation data is empty.", name="empty")
    begin = time.perf_counter()
    estimates = estimate(model, batch.blocks, config=config)
    elapsed = time.perf_counter() - begin
    meta.setdefault("model", model.kind.value)
    meta.setdefault("qp_eval", batch.qps)
    return metrics(batch.rates, estimates, wall_time_per_block=elapsed / len(batch), **meta)


def in_sample_mse(model: RateModel, data: Data) -> float:
    """
    MSE of a model on records, without clamping.
    """
    batch = _batch(data)
    return float(np.mean((estimate(model, batch, clamp=False) - batch.rates) ** 2))


#------------------------------------------------------------
# Cross validation
#------------------------------------------------------------
def fold_indexes(
    n: int,
    k: int,
    seed: int,
    groups: Optional[Sequence[str]] = None,
) -> list[np.ndarray]:
    """
    Partitions `range(n)` into `k` folds after a seeded shuffle.

    Without groups the fold sizes differ by at most 1. With groups every group lands in one fold;
    groups are visited in shuffled order and put into the currently smallest fold.

    Returns:
        Sorted record indexes of each fold.
    """
    if k < 2:
        raise UsageFailure(f"Cross validation needs at least 2 folds, got {k}.", folds=k)
    if seed < 0:
        raise UsageFailure(f"Seed must not be negative, got {seed}.", seed=seed)
    if n < k:
        raise DatasetFailure(f"{n} records can not be split into {k} folds.", name="too-few", records=n, folds=k)
    rng = np.random.default_rng(seed)

    if groups is None:
        return [np.sort(f) for f in np.array_split(rng.permutation(n), k)]

    names = sorted(set(groups))
    if len(names) < k:
        raise DatasetFailure(f"{len(names)} sources can not be split into {k} folds.", name="too-few", sources=len(names), folds=k)
    members: dict[str, list[int]] = {name: [] for name in names}
    for i, g in enumerate(groups):
        members[g].append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    for j in rng.permutation(len(names)):
        smallest = min(range(k), key=lambda f: len(folds[f]))
        folds[smallest].extend(members[names[j]])
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


@dataclass(frozen=True)
class CrossValReport:
    """
    Result of k-fold cross validation.
    """
    per_fold: tuple[MetricsReport, ...]
    #: Unweighted mean of the per-fold metrics. Counts are summed.
    averaged: MetricsReport
    fold_seed: int
    trained_params: tuple[RateModel, ...]
    fold_sizes: tuple[int, ...] = ()


def _average(reports: Sequence[MetricsReport], **meta) -> MetricsReport:
    return MetricsReport(
        pearson=float(np.mean([r.pearson for r in reports])),
        mae=float(np.mean([r.mae for r in reports])),
        mre=float(np.mean([r.mre for r in reports])),
        n_total=sum(r.n_total for r in reports),
        n_mre_excluded=sum(r.n_mre_excluded for r in reports),
        wall_time_per_block=float(np.mean([r.wall_time_per_block for r in reports])),
        **meta,
    )


def _groups(batch: RecordBatch, cfg: EstimationConfiguration) -> Optional[list[str]]:
    if not cfg.group_by_source:
        return None
    return [b.source_id.split(cfg.source_separator, 1)[0] for b in batch.blocks]


def kfold_cv(
    data: Data,
    model_kind: Union[ModelKind, str] = ModelKind.SUBBLOCK,
    k: Optional[int] = None,
    seed: Optional[int] = None,
    feature_mask: Union[FeatureMask, str] = FeatureMask.ALL,
    bias: bool = True,
    config: Optional[EstimationConfiguration] = None,
) -> CrossValReport:
    """
    Trains on k-1 folds, evaluates on the held-out fold, and averages the metrics.

    Args:
        data: Records.
        model_kind: Model kind.
        k: Number of folds. Defaults to `folds` of the configuration.
        seed: Seed of the shuffle. Defaults to `seed` of the configuration.
        feature_mask: Features of the sub-block model.
        bias: Whether linear models have an offset.
        config: Configuration. The global configuration is used when omitted.
    Returns:
        Per-fold and averaged metrics with the fitted parameters of each fold.
    """
    cfg = resolve(config)
    k = cfg.folds if k is None else k
    seed = cfg.seed if seed is None else seed
    kind = ModelKind.parse(model_kind)
    batch = _batch(data)
    folds = fold_indexes(len(batch), k, seed, _groups(batch, cfg))

    # Compute once, then every fold reuses it.
    if kind is ModelKind.LOGISTIC:
        batch.histogram
    else:
        batch.features

    reports = []
    params = []
    for i, test_index in enumerate(folds):
        train_index = np.concatenate([f for j, f in enumerate(folds) if j != i])
        train = batch.take(np.sort(train_index))
        test = batch.take(test_index)
        model, _ = fit_model(kind, train, feature_mask, bias, cfg)
        report = evaluate(model, test, cfg, qp_train=train.qps)
        logger.debug("Fold %d/%d: %d train, %d test, P %.6f, MAE %.6g, MRE %.6g.",
                     i + 1, k, len(train), len(test), report.pearson, report.mae, report.mre)
        reports.append(report)
        params.append(model)

    averaged = _average(reports, model=kind.value, qp_train=batch.qps, qp_eval=batch.qps)
    logger.info("%d-fold cross validation of %s on %d records: P %.6f, MAE %.6g, MRE %.6g.",
                k, kind.value, len(batch), averaged.pearson, averaged.mae, averaged.mre)
    return CrossValReport(tuple(reports), averaged, seed, tuple(params), tuple(len(f) for f in folds))


def cross_qp_eval(
    train: Data,
    test: Data,
    model_kind: Union[ModelKind, str] = ModelKind.SUBBLOCK,
    feature_mask: Union[FeatureMask, str] = FeatureMask.ALL,
    bias: bool = True,
    config: Optional[EstimationConfiguration] = None,
) -> MetricsReport:
    """
    Fits on one set of records and evaluates on another, typically coded with a different QP.

    The QPs of both sets are recorded in the report.
    """
    train_batch, test_batch = _batch(train), _batch(test)
    if len(train_batch) == 0 or len(test_batch) == 0:
        raise DatasetFailure("Training and evaluation sets must not be empty.", name="empty")
    kind = ModelKind.parse(model_kind)
    model, _ = fit_model(kind, train_batch, feature_mask, bias, config)
    return evaluate(model, test_batch, config, qp_train=train_batch.qps, qp_eval=test_batch.qps)


def select_qp(data: Data, qps: Iterable[int]) -> RecordBatch:
    """
    Returns the records coded with one of the given QPs.
    """
    batch = _batch(data)
    wanted = set(qps)
    return batch.take([i for i, b in enumerate(batch.blocks) if b.qp in wanted])


def cross_qp_matrix(
    train: Data,
    test: Data,
    train_qps: Sequence[int],
    eval_qps: Sequence[int],
    model_kinds: Sequence[Union[ModelKind, str]] = tuple(ModelKind),
    feature_mask: Union[FeatureMask, str] = FeatureMask.ALL,
    bias: bool = True,
    config: Optional[EstimationConfiguration] = None,
) -> list[MetricsReport]:
    """
    Runs `cross_qp_eval()` for every model kind and every pair of training and evaluation QP.

    Returns:
        Reports ordered by model kind, then training QP, then evaluation QP.
    """
    train_batch, test_batch = _batch(train), _batch(test)
    reports = []
    for kind in model_kinds:
        for t in train_qps:
            for e in eval_qps:
                report = cross_qp_eval(select_qp(train_batch, [t]), select_qp(test_batch, [e]), kind, feature_mask, bias, config)
                logger.info("%s trained on QP %d, evaluated on QP %d: P %.6f, MAE %.6g, MRE %.6g.",
                            ModelKind.parse(kind).value, t, e, report.pearson, report.mae, report.mre)
                reports.append(report)
    return reports


#------------------------------------------------------------
# Ablation
#------------------------------------------------------------
@dataclass(frozen=True)
class AblationRow:
    mask: FeatureMask
    pearson: float
    mae: float
    mre: float
    #: MSE of the model fitted on every record and evaluated on them.
    in_sample_mse: float


@dataclass(frozen=True)
class AblationTable:
    """
    Cross-validated metrics of bias-free linear models on every non-empty feature subset.
    """
    rows: tuple[AblationRow, ...]
    fold_seed: int = 0

    def __post_init__(self):
        if len(self.rows) != 15:
            raise UsageFailure(f"An ablation table has 15 rows, got {len(self.rows)}.")

    def __getitem__(self, mask: Union[FeatureMask, str]) -> AblationRow:
        mask = FeatureMask.parse(mask)
        return next(r for r in self.rows if r.mask == mask)


def ablate(data: Data, seed: Optional[int] = None, config: Optional[EstimationConfiguration] = None) -> AblationTable:
    """
    Cross-validates the linear model without bias on each of the 15 feature subsets.

    Rows are ordered singles, pairs, triples, full set. Every row uses the same folds.
    """
    cfg = resolve(config)
    seed = cfg.seed if seed is None else seed
    batch = _batch(data)
    rows = []
    for mask in FeatureMask.subsets():
        cv = kfold_cv(batch, ModelKind.SUBBLOCK, cfg.folds, seed, mask, bias=False, config=cfg)
        full, _ = fit_model(ModelKind.SUBBLOCK, batch, mask, bias=False, config=cfg)
        rows.append(AblationRow(mask, cv.averaged.pearson, cv.averaged.mae, cv.averaged.mre, in_sample_mse(full, batch)))
    return AblationTable(tuple(rows), seed)


#------------------------------------------------------------
# Scatter
#------------------------------------------------------------
class ScatterPoint(NamedTuple):
    actual_bits: float
    estimated_bits: float
    block_pixel_count: int


def scatter_dump(data: Data, params: RateModel, config: Optional[EstimationConfiguration] = None) -> list[ScatterPoint]:
    """
    Pairs measured and estimated rates of each record with the pixel count of its block.
    """
    batch = _batch(data)
    estimates = estimate(params, batch, config=config)
    return [ScatterPoint(float(a), float(e), int(p)) for a, e, p in zip(batch.rates, estimates, batch.pixels)]


#------------------------------------------------------------
# Comparison
#------------------------------------------------------------
class ComparisonRow(NamedTuple):
    qp: int
    report: MetricsReport


def compare(
    data: Data,
    seed: Optional[int] = None,
    model_kinds: Sequence[Union[ModelKind, str]] = tuple(ModelKind),
    config: Optional[EstimationConfiguration] = None,
) -> list[ComparisonRow]:
    """
    Cross-validates every model kind separately on the records of each QP.

    Returns:
        One row per (model, QP), models in the order given, QPs ascending.
    """
    batch = _batch(data)
    rows = []
    for kind in model_kinds:
        for qp in batch.qps:
            cv = kfold_cv(select_qp(batch, [qp]), kind, seed=seed, config=config)
            rows.append(ComparisonRow(qp, cv.averaged))
    return rows
