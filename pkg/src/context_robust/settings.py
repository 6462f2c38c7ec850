"""
Resolved run configurations for every command.

Values are layered: model defaults, then a --config JSON file, then
explicit command-line flags, then --set dotted.key=value overrides.
"""
import json
import logging
from typing import Annotated, Any, Dict, Iterable, List, Literal, Optional, Type, TypeVar

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, model_validator

from . import config
from .confidence import check_beta
from .exceptions import DataError
from .losses.registry import build_loss
from .model import LossModel
from .optimize import GroupDROOptions, OptimizerOptions
from .utils.io import read_json

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

EXPERIMENT_LOSSES = {"stock": "newsvendor", "classify": "logistic"}
# per-experiment blocks merged under whatever the caller gives
EXPERIMENT_DEFAULTS = {
    "stock": {
        "loss": {"params": {"r": config.STOCK_PRICE, "theta_max": config.STOCK_THETA_MAX}},
        "optimizer": {"step_size": config.STOCK_STEP_SIZE},
    },
    "classify": {},
}
EXPERIMENT_METRICS = {"stock": "loss", "classify": "error"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LossConfig(_Strict):
    name: Literal["newsvendor", "logistic"] = "newsvendor"
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self) -> LossModel:
        return build_loss(self.name, self.params)

    @model_validator(mode="after")
    def _resolve_params(self):
        # fill in every default so emitted configs are explicit
        self.params = self.build().params()
        return self


# confidence level in (0, 1]
Beta = Annotated[float, AfterValidator(check_beta)]


class FitConfig(_Strict):
    data: str
    loss: LossConfig = Field(default_factory=LossConfig)
    method: Literal["erm", "minimax", "robust"] = "robust"
    beta: Beta = config.DEFAULT_BETA
    optimizer: OptimizerOptions = Field(default_factory=OptimizerOptions)
    group_dro: GroupDROOptions = Field(default_factory=GroupDROOptions)
    out: Optional[str] = None


class SolveInnerConfig(_Strict):
    profile: str
    eps_bits: Optional[float] = Field(default=None, gt=0)
    beta: Optional[Beta] = None
    n: Optional[int] = Field(default=None, ge=1)
    contexts: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _radius_source(self):
        if self.eps_bits is None and (self.beta is None or self.n is None):
            raise ValueError("give either eps_bits, or beta with n (and optionally contexts)")
        return self


class CoverageConfig(_Strict):
    p: List[float]
    n: int = Field(ge=1)
    beta: Beta = config.DEFAULT_BETA
    trials: int = Field(default=2000, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)


class ExperimentConfig(_Strict):
    name: Literal["stock", "classify"] = "stock"
    methods: List[Literal["erm", "minimax", "robust"]] = Field(default_factory=lambda: ["erm", "minimax", "robust"])
    runs: int = Field(default=config.EXPERIMENT_RUNS, ge=1)
    beta: Beta = config.DEFAULT_BETA
    seed: int = Field(default=0, ge=0)
    m: Optional[int] = Field(default=None, ge=1)
    workers: int = Field(default=1, ge=1)
    loss: Optional[LossConfig] = None
    generator: Dict[str, Any] = Field(default_factory=dict)
    optimizer: OptimizerOptions = Field(default_factory=OptimizerOptions)
    group_dro: GroupDROOptions = Field(default_factory=GroupDROOptions)
    out: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _experiment_defaults(cls, data: Any) -> Any:
        name = data.get("name", "stock") if isinstance(data, dict) else None
        if not isinstance(name, str) or name not in EXPERIMENT_DEFAULTS:
            return data
        defaults = dict(EXPERIMENT_DEFAULTS[name])
        loss = data.get("loss")
        if isinstance(loss, dict) and loss.get("name", EXPERIMENT_LOSSES[name]) != EXPERIMENT_LOSSES[name]:
            defaults.pop("loss", None)
        elif "loss" in defaults:
            defaults["loss"] = {"name": EXPERIMENT_LOSSES[name], **defaults["loss"]}
        return _merge(defaults, data)

    @model_validator(mode="after")
    def _fill_defaults(self):
        if self.loss is None:
            self.loss = LossConfig(name=EXPERIMENT_LOSSES[self.name])
        if self.m is None:
            self.m = config.EVAL_M_RISK if self.metric == "loss" else config.EVAL_M_ERROR
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must be distinct")
        return self

    @property
    def metric(self) -> str:
        return EXPERIMENT_METRICS[self.name]


class GenConfig(_Strict):
    name: Literal["stock", "classify", "two-context"] = "stock"
    params: Dict[str, Any] = Field(default_factory=dict)
    out: Optional[str] = None


class CurvesConfig(_Strict):
    data: str
    loss: LossConfig = Field(default_factory=LossConfig)
    betas: List[Beta] = Field(default_factory=lambda: [0.9, config.DEFAULT_BETA, 1.0], min_length=1)
    theta_min: float = 0.0
    theta_max: Optional[float] = None
    theta_steps: int = Field(default=201, ge=2)
    out: Optional[str] = None


class IntervalConfig(_Strict):
    phat1: float = Field(ge=0, le=1)
    n: int = Field(ge=1)
    beta: Beta = config.DEFAULT_BETA


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Read a JSON config file; the 'config' block of an emitted result is accepted too"""
    if path is None:
        return {}
    data = read_json(path)
    if isinstance(data.get("config"), dict):
        data = data["config"]
    return data


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: Dict[str, Any], assignments: Iterable[str]) -> Dict[str, Any]:
    """Apply dotted.key=value assignments; values are parsed as JSON when possible"""
    result = dict(data)
    for assignment in assignments or []:
        key, sep, raw = assignment.partition("=")
        if not sep or not key:
            raise DataError(f"override '{assignment}' is not of the form dotted.key=value")
        update: Dict[str, Any] = {}
        node = update
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_value(raw)
        result = _merge(result, update)
    return result


def resolve(
    model: Type[ModelT],
    config_path: Optional[str] = None,
    flags: Optional[Dict[str, Any]] = None,
    overrides: Optional[Iterable[str]] = None,
) -> ModelT:
    """Layer file values, explicit flags and overrides onto model defaults"""
    data = load_config_file(config_path)
    explicit = {k: v for k, v in (flags or {}).items() if v is not None}
    data = _merge(data, explicit)
    data = apply_overrides(data, overrides or [])
    resolved = model(**data)
    logger.debug(f"Resolved {model.__name__}: {resolved.model_dump()}")
    return resolved
