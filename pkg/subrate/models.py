"""
Rate models and their training.

Three models estimate the rate of a block in bits:

- The sub-block model, linear in the features `(S, L, Z, E)` plus a bias.
- The rho-domain model, linear in the number of nonzero coefficients.
- The logistic model, summing `alpha*|c| + beta*g(gamma*|c| + delta)` over every coefficient position plus `epsilon` .

Linear models are fitted by least squares, the logistic model by full-batch gradient descent on the mean squared error.
"""
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum, Flag
from itertools import combinations
import json
import logging
from pathlib import Path
from typing import Any, ClassVar, Optional, Union

import numpy as np
from scipy import linalg
from scipy.special import expit

from .block import CoeffBlock
from .config import EstimationConfiguration, GradientDescentSettings, resolve
from .failures import DatasetFailure, NumericalFailure, RateFailure, UsageFailure
from .features import FeatureVector


__all__ = [
    "ModelKind",
    "FeatureMask",
    "SubBlockLinearParams",
    "RhoDomainParams",
    "LogisticParams",
    "RateModel",
    "FitReport",
    "MagnitudeHistogram",
    "predict_subblock",
    "predict_rho",
    "predict_logistic",
    "predict_features",
    "predict_histogram",
    "fit_linear",
    "fit_logistic",
    "fit_logistic_histogram",
    "analytic_gradient",
    "ModelFile",
    "save_model",
    "load_model",
]


logger = logging.getLogger(__name__)


MODEL_FORMAT_VERSION = 1


class ModelKind(str, Enum):
    """
    Kinds of rate models.
    """
    SUBBLOCK = "subblock"
    RHO = "rho"
    LOGISTIC = "logistic"

    @classmethod
    def parse(cls, text: Union[str, 'ModelKind']) -> 'ModelKind':
        try:
            return cls(text)
        except ValueError:
            raise UsageFailure(f"Unknown model kind '{text}', choose one of {', '.join(k.value for k in cls)}.", kind=text)


class FeatureMask(Flag):
    """
    Subset of the features `S, L, Z, E` used by a linear model.

    >>> FeatureMask.parse("S+L").text
    'SL'
    >>> len(FeatureMask.subsets())
    15
    """
    S = 1
    L = 2
    Z = 4
    E = 8
    ALL = 15

    @classmethod
    def singles(cls) -> tuple['FeatureMask', ...]:
        return (cls.S, cls.L, cls.Z, cls.E)

    @property
    def columns(self) -> list[int]:
        """
        Column indexes of the masked features in a `(S, L, Z, E)` row.
        """
        return [i for i, m in enumerate(FeatureMask.singles()) if m in self]

    @property
    def text(self) -> str:
        return "".join(m.name for m in FeatureMask.singles() if m in self)  # type: ignore

    @property
    def label(self) -> str:
        return "+".join(m.name for m in FeatureMask.singles() if m in self)  # type: ignore

    def __len__(self) -> int:
        return len(self.columns)

    @classmethod
    def parse(cls, text: Union[str, 'FeatureMask']) -> 'FeatureMask':
        """
        Parses a mask written as letters, optionally joined by `+` or `,` , e.g. `SLZE` or `s+l` .
        """
        if isinstance(text, FeatureMask):
            return text
        mask = cls(0)
        for ch in text.upper().replace("+", "").replace(",", "").replace(" ", ""):
            if ch not in "SLZE":
                raise UsageFailure(f"Unknown feature '{ch}' in mask '{text}'.", mask=text)
            mask |= cls[ch]
        if not mask:
            raise UsageFailure("Feature mask must select at least one feature.", mask=text)
        return mask

    @classmethod
    def subsets(cls) -> list['FeatureMask']:
        """
        Returns the 15 non-empty subsets ordered by size: singles, pairs, triples, full.
        """
        result = []
        for size in range(1, 5):
            for combo in combinations(cls.singles(), size):
                mask = cls(0)
                for m in combo:
                    mask |= m
                result.append(mask)
        return result


def _check_finite(**values: float) -> None:
    bad = [k for k, v in values.items() if not np.isfinite(v)]
    if bad:
        raise NumericalFailure(f"Parameters must be finite: {', '.join(bad)}.", parameters=bad)


@dataclass(frozen=True)
class SubBlockLinearParams:
    """
    Weights of the sub-block model `a*S + b*L + c*Z + d*E + e` .
    """
    kind: ClassVar[ModelKind] = ModelKind.SUBBLOCK

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 0.0
    bias_enabled: bool = True
    feature_mask: FeatureMask = FeatureMask.ALL

    def __post_init__(self):
        _check_finite(a=self.a, b=self.b, c=self.c, d=self.d, e=self.e)
        if not self.bias_enabled and self.e != 0.0:
            raise UsageFailure("Bias must be exactly 0 when it is disabled.", e=self.e)
        for m, w in zip(FeatureMask.singles(), self.weights):
            if m not in self.feature_mask and w != 0.0:
                raise UsageFailure(f"Masked-out feature {m.name} must have weight 0.", feature=m.name)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=np.float64)

    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e], dtype=np.float64)

    def params(self) -> dict[str, float]:
        return dict(a=self.a, b=self.b, c=self.c, d=self.d, e=self.e)


@dataclass(frozen=True)
class RhoDomainParams:
    """
    Parameters of the rho-domain model `alpha*S + beta` .
    """
    kind: ClassVar[ModelKind] = ModelKind.RHO

    alpha: float = 0.0
    beta: float = 0.0
    bias_enabled: bool = True

    def __post_init__(self):
        _check_finite(alpha=self.alpha, beta=self.beta)
        if not self.bias_enabled and self.beta != 0.0:
            raise UsageFailure("Intercept must be exactly 0 when it is disabled.", beta=self.beta)

    @property
    def feature_mask(self) -> FeatureMask:
        return FeatureMask.S

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=np.float64)

    def params(self) -> dict[str, float]:
        return dict(alpha=self.alpha, beta=self.beta)


@dataclass(frozen=True)
class LogisticParams:
    """
    Parameters of the logistic model.
    """
    kind: ClassVar[ModelKind] = ModelKind.LOGISTIC

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        _check_finite(alpha=self.alpha, beta=self.beta, gamma=self.gamma, delta=self.delta, epsilon=self.epsilon)

    @property
    def bias_enabled(self) -> bool:
        return True

    @property
    def feature_mask(self) -> Optional[FeatureMask]:
        return None

    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta, self.epsilon], dtype=np.float64)

    def params(self) -> dict[str, float]:
        return dict(alpha=self.alpha, beta=self.beta, gamma=self.gamma, delta=self.delta, epsilon=self.epsilon)

    @classmethod
    def of(cls, values: Sequence[float]) -> 'LogisticParams':
        return cls(*(float(v) for v in values))


RateModel = Union[SubBlockLinearParams, RhoDomainParams, LogisticParams]


@dataclass(frozen=True)
class FitReport:
    """
    Summary of a training run.
    """
    #: MSE of the returned parameters on the training data.
    final_mse: float
    #: Iterations of the solver, 0 for closed-form fits.
    iterations: int = 0
    converged: bool = True
    #: MSE at the initial parameters. Equals `final_mse` for closed-form fits.
    initial_mse: Optional[float] = None
    #: MSE of every accepted iterate, starting at the initial parameters.
    history: tuple[float, ...] = field(default=(), repr=False)


#------------------------------------------------------------
# Prediction
#------------------------------------------------------------
def predict_subblock(params: SubBlockLinearParams, fv: FeatureVector) -> float:
    """
    Estimates the rate as `a*S + b*L + c*Z + d*E + e` . The result is not clamped.
    """
    return params.a * fv.s + params.b * fv.l + params.c * fv.z + params.d * fv.e + params.e


def predict_rho(params: RhoDomainParams, fv: FeatureVector) -> float:
    """
    Estimates the rate as `alpha*S + beta` .
    """
    return params.alpha * fv.s + params.beta


def predict_features(params: Union[SubBlockLinearParams, RhoDomainParams], features: np.ndarray) -> np.ndarray:
    """
    Estimates rates of many blocks from their `(N, 4)` feature rows.
    """
    features = np.asarray(features, dtype=np.float64)
    if isinstance(params, RhoDomainParams):
        return params.alpha * features[:, 0] + params.beta
    return features @ params.weights + params.e


@dataclass(frozen=True)
class MagnitudeHistogram:
    """
    Coefficient magnitudes of many blocks, compressed into `(block, magnitude, count)` entries.

    The logistic model only depends on how often each magnitude occurs in a block,
    so the histogram replaces per-position sums with per-entry sums.
    """
    #: Number of blocks.
    n: int
    #: Block of each entry, non-decreasing.
    block_index: np.ndarray
    #: Magnitude of each entry.
    magnitude: np.ndarray
    #: Number of positions holding the magnitude.
    count: np.ndarray

    @classmethod
    def from_blocks(cls, blocks: Sequence[CoeffBlock]) -> 'MagnitudeHistogram':
        if len(blocks) == 0:
            empty = np.zeros(0)
            return cls(0, empty.astype(np.intp), empty, empty)
        sizes = np.array([b.pixels for b in blocks])
        owner = np.repeat(np.arange(len(blocks), dtype=np.int64), sizes)
        mags = np.abs(np.concatenate([b.coeffs for b in blocks]).astype(np.int64))
        base = int(mags.max()) + 1
        keys, counts = np.unique(owner * base + mags, return_counts=True)
        return cls(
            len(blocks),
            (keys // base).astype(np.intp),
            (keys % base).astype(np.float64),
            counts.astype(np.float64),
        )

    def take(self, indexes: Sequence[int]) -> 'MagnitudeHistogram':
        """
        Returns the histogram of the selected blocks, renumbered in the order of `indexes` .
        """
        indexes = np.asarray(indexes, dtype=np.intp)
        mapping = np.full(self.n, -1, dtype=np.intp)
        mapping[indexes] = np.arange(len(indexes))
        new_index = mapping[self.block_index]
        selected = new_index >= 0
        order = np.argsort(new_index[selected], kind="stable")
        return MagnitudeHistogram(
            len(indexes),
            new_index[selected][order],
            self.magnitude[selected][order],
            self.count[selected][order],
        )

    @property
    def magnitude_sums(self) -> np.ndarray:
        """
        `sum |c|` of each block.
        """
        return np.bincount(self.block_index, weights=self.count * self.magnitude, minlength=self.n)

    @property
    def positions(self) -> np.ndarray:
        """
        Number of coefficient positions of each block.
        """
        return np.bincount(self.block_index, weights=self.count, minlength=self.n)


def predict_histogram(params: LogisticParams, hist: MagnitudeHistogram) -> np.ndarray:
    """
    Estimates rates of the logistic model for every block of a histogram.
    """
    g = expit(params.gamma * hist.magnitude + params.delta)
    logistic = np.bincount(hist.block_index, weights=hist.count * g, minlength=hist.n)
    return params.alpha * hist.magnitude_sums + params.beta * logistic + params.epsilon


def predict_logistic(params: LogisticParams, block: CoeffBlock) -> float:
    """
    Estimates the rate of a block with the logistic model.

    The sum runs over every position of the block, zeros included.
    """
    return float(predict_histogram(params, MagnitudeHistogram.from_blocks([block]))[0])


#------------------------------------------------------------
# Linear least squares
#------------------------------------------------------------
def _as_feature_matrix(features: Any) -> np.ndarray:
    if isinstance(features, np.ndarray):
        X = features.astype(np.float64, copy=False)
    else:
        X = np.array([fv.as_array() if isinstance(fv, FeatureVector) else fv for fv in features], dtype=np.float64)
    return X.reshape(-1, 4)


def _check_training_data(n_inputs: int, rates: np.ndarray) -> None:
    if n_inputs == 0 or rates.size == 0:
        raise DatasetFailure("Training data is empty.", name="empty")
    if n_inputs != rates.size:
        raise DatasetFailure(f"{n_inputs} inputs do not pair with {rates.size} rates.", name="mismatch")
    if not np.all(np.isfinite(rates)):
        raise NumericalFailure("Rates must be finite.")


def fit_linear(
    features: Any,
    rates: Sequence[float],
    feature_mask: Union[FeatureMask, str] = FeatureMask.ALL,
    bias: bool = True,
    *,
    kind: ModelKind = ModelKind.SUBBLOCK,
) -> tuple[Union[SubBlockLinearParams, RhoDomainParams], FitReport]:
    """
    Fits a linear model minimizing the squared error.

    Columns are scaled to unit norm before the solve so features of very different magnitude stay well conditioned.
    On rank deficiency the minimum-norm solution (in scaled coordinates) is returned.

    Args:
        features: `FeatureVector` s or an `(N, 4)` array of `(S, L, Z, E)` rows.
        rates: Measured rates.
        feature_mask: Features used by the model. Other weights are exactly 0.
        bias: Whether the model has an offset.
        kind: `ModelKind.RHO` returns `RhoDomainParams` and requires the mask `S` .
    Returns:
        Fitted parameters and the report.
    """
    mask = FeatureMask.parse(feature_mask)
    kind = ModelKind.parse(kind)
    if kind is ModelKind.LOGISTIC:
        raise UsageFailure("The logistic model is not linear in its parameters.")
    if kind is ModelKind.RHO and mask != FeatureMask.S:
        raise UsageFailure("The rho-domain model uses the feature S only.", mask=mask.text)

    X = _as_feature_matrix(features)
    y = np.asarray(rates, dtype=np.float64).reshape(-1)
    _check_training_data(X.shape[0], y)
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("Features must be finite.")

    columns = [X[:, i] for i in mask.columns]
    if bias:
        columns.append(np.ones(X.shape[0]))
    A = np.stack(columns, axis=1)

    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0.0] = 1.0
    try:
        solution, _, rank, _ = linalg.lstsq(A / scale, y, lapack_driver="gelsd")
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Least squares solve failed: {e}")
    solution = solution / scale

    weights = np.zeros(4)
    weights[mask.columns] = solution[:len(mask.columns)]
    offset = float(solution[-1]) if bias else 0.0

    mse = float(np.mean((A @ solution - y) ** 2))
    logger.debug("Fitted %s on %d samples with mask %s (rank %d), MSE %.6g.", kind.value, y.size, mask.text, rank, mse)

    report = FitReport(final_mse=mse, iterations=0, converged=True, initial_mse=mse, history=(mse,))
    if kind is ModelKind.RHO:
        return RhoDomainParams(float(weights[0]), offset, bias), report
    return SubBlockLinearParams(*(float(w) for w in weights), e=offset, bias_enabled=bias, feature_mask=mask), report


#------------------------------------------------------------
# Logistic model
#------------------------------------------------------------
@dataclass(frozen=True)
class _Problem:
    block_index: np.ndarray
    magnitude: np.ndarray
    weight: np.ndarray
    sums: np.ndarray
    target: np.ndarray

    @property
    def n(self) -> int:
        return self.target.size


@dataclass(frozen=True)
class _Scales:
    rate: float = 1.0
    magnitude: float = 1.0
    sums: float = 1.0
    positions: float = 1.0

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        alpha, beta, gamma, delta, epsilon = raw
        return np.array([
            alpha * self.sums / self.rate,
            beta * self.positions / self.rate,
            gamma * self.magnitude,
            delta,
            epsilon / self.rate,
        ])

    def denormalize(self, theta: np.ndarray) -> np.ndarray:
        alpha, beta, gamma, delta, epsilon = theta
        return np.array([
            alpha * self.rate / self.sums,
            beta * self.rate / self.positions,
            gamma / self.magnitude,
            delta,
            epsilon * self.rate,
        ])


def _rms(values: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    if values.size == 0:
        return 1.0
    r = float(np.sqrt(np.average(values ** 2, weights=weights)))
    return r if r > 0.0 and np.isfinite(r) else 1.0


def _problem(hist: MagnitudeHistogram, rates: np.ndarray, normalized: bool) -> tuple[_Problem, _Scales]:
    sums = hist.magnitude_sums
    if not normalized:
        return _Problem(hist.block_index, hist.magnitude, hist.count, sums, rates), _Scales()
    nonzero = hist.magnitude > 0
    scales = _Scales(
        rate=_rms(rates),
        magnitude=_rms(hist.magnitude[nonzero], hist.count[nonzero]) if np.any(nonzero) else 1.0,
        sums=_rms(sums),
        positions=_rms(hist.positions),
    )
    problem = _Problem(
        hist.block_index,
        hist.magnitude / scales.magnitude,
        hist.count / scales.positions,
        sums / scales.sums,
        rates / scales.rate,
    )
    return problem, scales


def _evaluate(theta: np.ndarray, p: _Problem) -> tuple[float, np.ndarray]:
    alpha, beta, gamma, delta, epsilon = theta
    g = expit(gamma * p.magnitude + delta)
    wg = p.weight * g
    logistic = np.bincount(p.block_index, weights=wg, minlength=p.n)
    residual = alpha * p.sums + beta * logistic + epsilon - p.target

    slope = wg * (1.0 - g)
    d_gamma = np.bincount(p.block_index, weights=slope * p.magnitude, minlength=p.n)
    d_delta = np.bincount(p.block_index, weights=slope, minlength=p.n)

    c = 2.0 / p.n
    grad = c * np.array([
        residual @ p.sums,
        residual @ logistic,
        beta * (residual @ d_gamma),
        beta * (residual @ d_delta),
        residual.sum(),
    ])
    return float(np.mean(residual ** 2)), grad


def _histogram_and_rates(blocks: Sequence[CoeffBlock], rates: Sequence[float]) -> tuple[MagnitudeHistogram, np.ndarray]:
    y = np.asarray(rates, dtype=np.float64).reshape(-1)
    _check_training_data(len(blocks), y)
    return MagnitudeHistogram.from_blocks(blocks), y


def analytic_gradient(params: LogisticParams, blocks: Sequence[CoeffBlock], rates: Sequence[float]) -> np.ndarray:
    """
    Gradient of the logistic model's MSE with respect to `(alpha, beta, gamma, delta, epsilon)` .

    With residuals `r_i = R_est,i - R_i` and `G_i = sum g(gamma*|c| + delta)` ,

    - `d/d alpha = 2/N sum r_i sum|c|`
    - `d/d beta = 2/N sum r_i G_i`
    - `d/d gamma = 2/N sum r_i beta sum g'(.)|c|`
    - `d/d delta = 2/N sum r_i beta sum g'(.)`
    - `d/d epsilon = 2/N sum r_i`
    """
    hist, y = _histogram_and_rates(blocks, rates)
    problem, _ = _problem(hist, y, normalized=False)
    return _evaluate(params.vector(), problem)[1]


def logistic_mse(params: LogisticParams, blocks: Sequence[CoeffBlock], rates: Sequence[float]) -> float:
    """
    MSE of the logistic model on blocks.
    """
    hist, y = _histogram_and_rates(blocks, rates)
    problem, _ = _problem(hist, y, normalized=False)
    return _evaluate(params.vector(), problem)[0]


def fit_logistic_histogram(
    hist: MagnitudeHistogram,
    rates: np.ndarray,
    settings: Optional[GradientDescentSettings] = None,
) -> tuple[LogisticParams, FitReport]:
    """
    Trains the logistic model on a prepared histogram. See `fit_logistic()` .
    """
    settings = settings or GradientDescentSettings()
    rates = np.asarray(rates, dtype=np.float64).reshape(-1)
    _check_training_data(hist.n, rates)

    problem, scales = _problem(hist, rates, normalized=True)
    theta = scales.normalize(np.asarray(settings.init, dtype=np.float64))

    mse, grad = _evaluate(theta, problem)
    if not np.isfinite(mse) or not np.all(np.isfinite(grad)):
        raise NumericalFailure("Gradient is not finite at the initial parameters.", iteration=0)

    history = [mse]
    step = settings.step
    velocity = np.zeros_like(theta)
    iterations = 0
    converged = False

    while iterations < settings.max_iterations:
        iterations += 1
        if mse == 0.0:
            converged = True
            break
        update = settings.momentum * velocity - step * grad
        candidate = theta + update
        cmse, cgrad = _evaluate(candidate, problem)
        if not np.isfinite(cmse) or cmse > mse:
            if np.any(velocity):
                velocity = np.zeros_like(theta)
            else:
                step *= 0.5
                if step < settings.min_step:
                    converged = True
                    break
            continue
        if not np.all(np.isfinite(cgrad)):
            raise NumericalFailure(f"Gradient is not finite at iteration {iterations}.", iteration=iterations)

        theta, velocity, mse, grad = candidate, update, cmse, cgrad
        history.append(mse)
        step *= settings.step_growth

        if len(history) > settings.window:
            old = history[-1 - settings.window]
            if old == 0.0 or (old - mse) / old < settings.tolerance * settings.window:
                converged = True
                break

    params = LogisticParams.of(scales.denormalize(theta))
    factor = scales.rate ** 2
    report = FitReport(
        final_mse=mse * factor,
        iterations=iterations,
        converged=converged,
        initial_mse=history[0] * factor,
        history=tuple(h * factor for h in history),
    )
    logger.info(
        "Gradient descent stopped after %d iterations (%s), MSE %.6g -> %.6g.",
        iterations, "converged" if converged else "iteration limit", report.initial_mse, report.final_mse,
    )
    return params, report


def fit_logistic(
    blocks: Sequence[CoeffBlock],
    rates: Sequence[float],
    config: Optional[Union[EstimationConfiguration, GradientDescentSettings]] = None,
) -> tuple[LogisticParams, FitReport]:
    """
    Trains the logistic model by full-batch gradient descent on the MSE.

    Descent runs on normalized data: magnitudes, magnitude sums, position counts and rates are divided by their RMS,
    and the parameters are mapped back afterwards. An iterate is accepted only when it does not increase the MSE;
    a rejected iterate first drops the momentum, then halves the step.

    Args:
        blocks: Training blocks.
        rates: Measured rates.
        config: Configuration or gradient descent settings. The global configuration is used when omitted.
    Returns:
        Fitted parameters and the report.
    Raises:
        NumericalFailure: The gradient became non-finite; `iteration` tells where.
    """
    settings = config if isinstance(config, GradientDescentSettings) else resolve(config).gradient
    hist, y = _histogram_and_rates(blocks, rates)
    return fit_logistic_histogram(hist, y, settings)


#------------------------------------------------------------
# Model file
#------------------------------------------------------------
@dataclass(frozen=True)
class ModelFile:
    """
    A fitted model with its training metadata.
    """
    model: RateModel
    qp_train: tuple[int, ...] = ()
    n_samples: int = 0
    final_mse: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        mask = self.model.feature_mask
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_kind": self.model.kind.value,
            "params": self.model.params(),
            "bias_enabled": self.model.bias_enabled,
            "feature_mask": mask.text if mask is not None else None,
            "training": {
                "qp_train": list(self.qp_train),
                "n_samples": self.n_samples,
                "final_mse": self.final_mse,
            },
        }

    @classmethod
    def from_dict(cls, doc: Any) -> 'ModelFile':
        try:
            version = doc.get("format_version", MODEL_FORMAT_VERSION)
            if version != MODEL_FORMAT_VERSION:
                raise DatasetFailure(f"Unsupported model format version {version}.", name="version")
            kind = ModelKind.parse(doc["model_kind"])
            params = {k: float(v) for k, v in doc["params"].items()}
            bias = bool(doc.get("bias_enabled", True))
            model: RateModel
            if kind is ModelKind.SUBBLOCK:
                model = SubBlockLinearParams(**params, bias_enabled=bias, feature_mask=FeatureMask.parse(doc.get("feature_mask") or "SLZE"))
            elif kind is ModelKind.RHO:
                model = RhoDomainParams(**params, bias_enabled=bias)
            else:
                model = LogisticParams(**params)
            training = doc.get("training", {})
            return cls(
                model,
                tuple(int(q) for q in training.get("qp_train", [])),
                int(training.get("n_samples", 0)),
                float(training.get("final_mse", 0.0)),
            )
        except DatasetFailure:
            raise
        except RateFailure as e:
            raise DatasetFailure(f"Model document is malformed: {e.message}", name="malformed-model")
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            raise DatasetFailure(f"Model document is malformed: {e!r}", name="malformed-model")


def dumps_model(model_file: ModelFile) -> str:
    """
    Serializes a model to JSON. Floats use their shortest round-trip representation, so loading restores them exactly.
    """
    return json.dumps(model_file.to_dict(), indent=2, allow_nan=False) + "\n"


def loads_model(text: str) -> ModelFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetFailure(f"Model file is not JSON: {e.msg}", name="malformed-model", line=e.lineno)
    return ModelFile.from_dict(doc)


def save_model(model_file: ModelFile, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_model(model_file), encoding="utf-8")


def load_model(path: Union[str, Path]) -> ModelFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetFailure(f"Can not read model file {path}: {e.strerror}", name="io")
    return loads_model(text)
