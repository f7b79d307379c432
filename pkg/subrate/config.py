from collections.abc import Callable
from contextvars import ContextVar
from copy import deepcopy
from dataclasses import dataclass, fields, field
from typing import Any, Optional, TypedDict, TYPE_CHECKING
from typing_extensions import TypeAlias, Unpack, NotRequired

from .failures import UsageFailure


@dataclass(frozen=True)
class GradientDescentSettings:
    """
    Settings of the full-batch gradient descent training the logistic model.

    Parameters are optimized on normalized data; `init` is given in raw units and converted before descent.
    """
    init: tuple[float, float, float, float, float] = (0.5, 1.0, 1.0, 0.0, 0.0)
    """Initial (alpha, beta, gamma, delta, epsilon)."""
    step: float = 1e-3
    """Initial step size."""
    step_growth: float = 1.2
    """Factor applied to the step after an accepted iteration. 1.0 keeps the step fixed."""
    momentum: float = 0.9
    """Weight of the previous update in the next one. Reset to zero whenever an iterate is rejected."""
    max_iterations: int = 10_000
    """Upper bound of iterations, counting rejected candidates."""
    tolerance: float = 1e-9
    """Relative MSE improvement per accepted iteration, averaged over `window` , below which descent stops."""
    window: int = 10
    """Number of accepted iterations the improvement is measured over."""
    min_step: float = 1e-30
    """Descent stops when halving drives the step below this value."""

    def __post_init__(self):
        if not self.step > 0.0:
            raise UsageFailure(f"Step must be positive, got {self.step}.", step=self.step)
        if self.window < 1:
            raise UsageFailure(f"Window must be at least 1, got {self.window}.", window=self.window)
        if self.max_iterations < 0:
            raise UsageFailure("Iteration limit must not be negative.", max_iterations=self.max_iterations)


if TYPE_CHECKING:
    class Configurable(TypedDict):
        name: NotRequired[str]
        folds: NotRequired[int]
        seed: NotRequired[int]
        group_by_source: NotRequired[bool]
        source_separator: NotRequired[str]
        clamp_predictions: NotRequired[bool]
        gradient: NotRequired[GradientDescentSettings]
else:
    Configurable: TypeAlias = dict


@dataclass
class EstimationConfiguration:
    """
    Configurations for fitting and evaluating rate models.
    """
    name: str = "default"
    """Name of this configuration. This value has no effect on any behavior of modules."""
    folds: int = 5
    """Number of folds in cross validation."""
    seed: int = 0
    """Seed of every random choice made by evaluation, e.g. fold shuffling."""
    group_by_source: bool = False
    """If true, records from the same image are kept in the same fold."""
    source_separator: str = ":"
    """Separator splitting the image part from the block part of a source id."""
    clamp_predictions: bool = False
    """If true, estimated rates are clamped at zero before being returned to consumers."""
    gradient: GradientDescentSettings = field(default_factory=GradientDescentSettings)
    """Settings of the gradient descent for the logistic model."""

    def _copy_to(self, other: 'EstimationConfiguration', **kwargs: Any):
        for f in fields(self):
            val = kwargs[f.name] if f.name in kwargs else deepcopy(getattr(self, f.name))
            setattr(other, f.name, val)

    def _check_fields(self, **kwargs: Any):
        names = {f.name for f in fields(self)}
        invalid = [k for k in kwargs.keys() if k not in names]
        if len(invalid) > 0:
            raise KeyError(f"Invalid configuration keys are found: {', '.join(invalid)}")

    def derive(self, **settings: Unpack[Configurable]) -> 'EstimationConfiguration':
        """
        Creates new configuration instance deriving this configuration.

        Args:
            settings: Configuration parameters which overwrites values in this instance.
        Returns:
            Derived configuration object.
        """
        self._check_fields(**settings)
        derived = EstimationConfiguration()
        self._copy_to(derived, **settings)
        return derived

    def set(self, **settings: Unpack[Configurable]) -> None:
        self._check_fields(**settings)
        for k, v in settings.items():
            setattr(self, k, v)

    def __enter__(self) -> 'EstimationConfiguration':
        return self.derive()

    def __exit__(self, exc_type, exc_value, traceback):
        pass


def contextualConfiguration(
    config_var: Callable[[], ContextVar[EstimationConfiguration]],
    base: Optional[EstimationConfiguration] = None
) -> EstimationConfiguration:
    @dataclass
    class contextual(EstimationConfiguration):
        def __enter__(self) -> 'EstimationConfiguration':
            derived = contextual()
            self._copy_to(derived)
            config_var().set(derived)
            return derived

        def __exit__(self, exc_type, exc_value, traceback):
            config_var().set(self)

    cfg = contextual()
    if base:
        base._copy_to(cfg)
    return cfg


config: ContextVar[EstimationConfiguration] = ContextVar('config', default=contextualConfiguration(lambda: config))


def default_config() -> EstimationConfiguration:
    """
    Returns a global configuration.

    Global configuration is managed in *context* provided by `contextvars` module.
    Update on the returned object will change the behaviors of library modules globally.

    The object works as a context manager by `with` block where another object can be used as global configuration.

    ```python
    with default_config() as cfg:
        # Updates to cfg are reflected to global configurations.
        cfg.folds = 10
        assert default_config().folds == 10
    # Updates inside with block is no longer valid.
    assert default_config().folds == 5
    ```
    """
    return config.get()


def resolve(cfg: Optional[EstimationConfiguration]) -> EstimationConfiguration:
    """
    Returns the passed configuration or the global one when it is `None` .
    """
    return cfg if cfg is not None else default_config()
