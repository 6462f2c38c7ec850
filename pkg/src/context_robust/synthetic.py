"""
Seeded synthetic generators: the multi-context stock-control study, the
three-context classification study and a two-context stock example
"""
import logging
import math
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from .exceptions import DataError
from .model import Dataset
from .utils import rng as rngs

logger = logging.getLogger(__name__)


class StockGenConfig(BaseModel):
    """
    Stock-control generator.

    Context c has unit cost x ~ LogNormal and demand
    y ~ Normal(a_c x + b_c, demand_var) clamped at 0, with coefficients
    interpolated linearly between the first and last context.
    """

    model_config = ConfigDict(extra="forbid")

    num_contexts: int = Field(default=10, ge=1)
    n: int = Field(default=400, ge=1)
    p1: float = Field(default=0.70, gt=0, le=1)
    lognormal_scale_sq: float = Field(default=0.25, gt=0)
    scale_is_variance: bool = True
    # "log": E[ln x | c] = mu_c; "mean": E[x | c] = mu_c
    lognormal_location: Literal["log", "mean"] = "log"
    demand_var: float = Field(default=4.0, gt=0)
    demand_is_variance: bool = True
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_probs(self):
        if self.num_contexts == 1 and self.p1 != 1.0:
            raise ValueError("a single context must have p1 = 1")
        return self

    def probs(self) -> np.ndarray:
        if self.num_contexts == 1:
            return np.array([1.0])
        rest = (1.0 - self.p1) / (self.num_contexts - 1)
        return np.array([self.p1] + [rest] * (self.num_contexts - 1))

    def coefficients(self, c: int) -> Tuple[float, float, float]:
        """(mu_c, a_c, b_c) for 1-based context c"""
        frac = 0.0 if self.num_contexts == 1 else (c - 1) / (self.num_contexts - 1)
        return 6.0 * frac + 1.0, 6.9 * frac + 0.1, 15.0 * frac + 15.0

    @property
    def log_sd(self) -> float:
        return math.sqrt(self.lognormal_scale_sq) if self.scale_is_variance else self.lognormal_scale_sq

    @property
    def demand_sd(self) -> float:
        return math.sqrt(self.demand_var) if self.demand_is_variance else self.demand_var


class ClassifyGenConfig(BaseModel):
    """Classification generator with features (x1, x2) and labels y in {0, 1}"""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=1000, ge=1)
    probs: List[float] = Field(default_factory=lambda: [0.8, 0.1, 0.1])
    mus: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0])
    offsets: List[float] = Field(default_factory=lambda: [-8.0, 0.0, 8.0])
    x2_var: float = Field(default=4.0, gt=0)
    x2_is_variance: bool = True
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_lengths(self):
        if not (len(self.probs) == len(self.mus) == len(self.offsets)) or not self.probs:
            raise ValueError("probs, mus and offsets must have the same non-zero length")
        if any(p <= 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probs must be a strictly positive distribution")
        return self

    @property
    def num_contexts(self) -> int:
        return len(self.probs)

    @property
    def x2_sd(self) -> float:
        return math.sqrt(self.x2_var) if self.x2_is_variance else self.x2_var


class TwoContextConfig(BaseModel):
    """
    Two stock contexts with fixed sample counts: context 1 with cheap units
    and low, flat demand; context 2 with expensive units and high demand
    rising steeply with cost.
    """

    model_config = ConfigDict(extra="forbid")

    n1: int = Field(default=90, ge=1)
    n2: int = Field(default=10, ge=1)
    cost_means: List[float] = Field(default_factory=lambda: [3.0, 6.0])
    cost_log_sd: float = Field(default=0.5, gt=0)
    slopes: List[float] = Field(default_factory=lambda: [0.1, 0.9])
    intercepts: List[float] = Field(default_factory=lambda: [15.0, 25.0])
    noise_sds: List[float] = Field(default_factory=lambda: [2.0, 3.0])
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_lengths(self):
        for name in ("cost_means", "slopes", "intercepts", "noise_sds"):
            if len(getattr(self, name)) != 2:
                raise ValueError(f"{name} needs one entry per context")
        return self

    def probs(self) -> np.ndarray:
        return np.array([self.n1, self.n2]) / (self.n1 + self.n2)


class ContextGenerator(ABC):
    """Known per-context laws p(z | c) and context distribution p(c)"""

    name: str = "generator"

    def __init__(self, cfg: BaseModel):
        self.cfg = cfg

    @property
    @abstractmethod
    def probs(self) -> np.ndarray:
        """True context distribution"""

    @abstractmethod
    def sample_context(self, c: int, m: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """m samples (X of shape (m, d), y of shape (m,)) from context c"""

    @property
    def num_contexts(self) -> int:
        return int(self.probs.size)

    def draw_contexts(self, rng: np.random.Generator) -> np.ndarray:
        return rngs.categorical(rng, self.probs, self.cfg.n) + 1

    def coefficients(self) -> Dict[str, Any]:
        return {}

    def metadata(self) -> Dict[str, Any]:
        return {
            "generator": self.name,
            "config": self.cfg.model_dump(),
            "seed": self.cfg.seed,
            "p_true": self.probs.tolist(),
            "coefficients": self.coefficients(),
            "samplers": dict(rngs.SAMPLERS),
        }

    def generate(self, rng: Optional[np.random.Generator] = None) -> Dataset:
        """
        Training set; contexts are drawn first, then each context's samples
        are placed at its positions in input order
        """
        rng = rng or rngs.stream(self.cfg.seed, "data")
        contexts = self.draw_contexts(rng)
        X, y = None, np.empty(contexts.size)
        for c in range(1, self.num_contexts + 1):
            mask = contexts == c
            if not mask.any():
                continue
            Xc, yc = self.sample_context(c, int(mask.sum()), rng)
            if X is None:
                X = np.empty((contexts.size, Xc.shape[1]))
            X[mask], y[mask] = Xc, yc
        return Dataset.from_arrays(X, y, contexts, num_contexts=self.num_contexts, metadata=self.metadata())


class StockGenerator(ContextGenerator):
    name = "stock"

    @property
    def probs(self) -> np.ndarray:
        return self.cfg.probs()

    def log_location(self, c: int) -> float:
        mu, _, _ = self.cfg.coefficients(c)
        if self.cfg.lognormal_location == "log":
            return mu
        return math.log(mu) - 0.5 * self.cfg.log_sd**2

    def sample_context(self, c, m, rng):
        _, a, b = self.cfg.coefficients(c)
        x = rngs.lognormal(rng, m, self.log_location(c), self.cfg.log_sd)
        y = np.maximum(a * x + b + rngs.normal(rng, m, 0.0, self.cfg.demand_sd), 0.0)
        return x.reshape(-1, 1), y

    def coefficients(self):
        rows = [self.cfg.coefficients(c) for c in range(1, self.num_contexts + 1)]
        return {
            "mu": [r[0] for r in rows],
            "a": [r[1] for r in rows],
            "b": [r[2] for r in rows],
            "log_location": [self.log_location(c) for c in range(1, self.num_contexts + 1)],
            "log_sd": self.cfg.log_sd,
            "demand_sd": self.cfg.demand_sd,
        }


class ClassifyGenerator(ContextGenerator):
    name = "classify"

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.cfg.probs)

    def sample_context(self, c, m, rng):
        mu, offset = self.cfg.mus[c - 1], self.cfg.offsets[c - 1]
        x1 = rngs.uniform(rng, m, -5.0 + mu, 5.0 + mu)
        y = rngs.bernoulli(rng, expit(x1))
        shift = 2.0 * ((y == 0).astype(float) - (y == 1).astype(float))
        x2 = rngs.normal(rng, m, x1 + offset + shift, self.cfg.x2_sd)
        return np.column_stack([x1, x2]), y

    def coefficients(self):
        return {"mu": list(self.cfg.mus), "offsets": list(self.cfg.offsets), "x2_sd": self.cfg.x2_sd}


class TwoContextGenerator(ContextGenerator):
    """Training sets always hold exactly n1 then n2 samples"""

    name = "two-context"

    @property
    def probs(self) -> np.ndarray:
        return self.cfg.probs()

    def draw_contexts(self, rng):
        return np.repeat([1, 2], [self.cfg.n1, self.cfg.n2])

    def sample_context(self, c, m, rng):
        i = c - 1
        log_sd = self.cfg.cost_log_sd
        x = rngs.lognormal(rng, m, math.log(self.cfg.cost_means[i]) - 0.5 * log_sd**2, log_sd)
        noise = rngs.normal(rng, m, 0.0, self.cfg.noise_sds[i])
        y = np.maximum(self.cfg.slopes[i] * x + self.cfg.intercepts[i] + noise, 0.0)
        return x.reshape(-1, 1), y

    def coefficients(self):
        return {
            "cost_means": list(self.cfg.cost_means),
            "slopes": list(self.cfg.slopes),
            "intercepts": list(self.cfg.intercepts),
            "noise_sds": list(self.cfg.noise_sds),
        }


GENERATORS = {
    "stock": (StockGenConfig, StockGenerator),
    "classify": (ClassifyGenConfig, ClassifyGenerator),
    "two-context": (TwoContextConfig, TwoContextGenerator),
}


def make_generator(name: str, params: Optional[Dict[str, Any]] = None) -> ContextGenerator:
    """Build a generator by name from a config parameter block"""
    if name not in GENERATORS:
        raise DataError(f"Unknown generator '{name}'; available: {', '.join(GENERATORS)}")
    config_cls, generator_cls = GENERATORS[name]
    return generator_cls(config_cls(**(params or {})))


def gen_stock(cfg: Optional[StockGenConfig] = None) -> Dataset:
    return StockGenerator(cfg or StockGenConfig()).generate()


def gen_classify(cfg: Optional[ClassifyGenConfig] = None) -> Dataset:
    return ClassifyGenerator(cfg or ClassifyGenConfig()).generate()


def gen_stock_two_context(n1: int = 90, n2: int = 10, seed: int = 0, cfg: Optional[TwoContextConfig] = None) -> Dataset:
    cfg = (cfg or TwoContextConfig()).model_copy(update={"n1": n1, "n2": n2, "seed": seed})
    return TwoContextGenerator(TwoContextConfig(**cfg.model_dump())).generate()
