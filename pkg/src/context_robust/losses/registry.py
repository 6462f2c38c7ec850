"""
Loss registry for selecting loss models by name
"""
import logging
from typing import Any, Callable, Dict, List, Optional

from ..exceptions import DataError
from ..model import LossModel
from .implementations import LogisticLoss, NewsvendorLoss

logger = logging.getLogger(__name__)


class LossRegistry:
    """Registry for managing available loss models"""

    def __init__(self):
        self.losses = {}
        self._register_default_losses()

    def _register_default_losses(self):
        """Register default losses"""
        self.register_loss(
            name="newsvendor",
            factory=NewsvendorLoss,
            description="Stock-control loss theta*x - r*min(theta, y) with theta in [0, theta_max]",
            parameters={
                "type": "object",
                "properties": {
                    "r": {
                        "type": "number",
                        "description": "Selling price per unit (default: 10)",
                        "default": 10.0,
                    },
                    "theta_max": {
                        "type": "number",
                        "description": "Upper bound of the stock level (default: 100)",
                        "default": 100.0,
                    },
                },
                "required": [],
            },
        )

        self.register_loss(
            name="logistic",
            factory=LogisticLoss,
            description="Logistic regression with cross-entropy loss; evaluated by 0-1 error",
            parameters={
                "type": "object",
                "properties": {
                    "add_bias": {
                        "type": "boolean",
                        "description": "Append a constant feature 1 (default: true)",
                        "default": True,
                    }
                },
                "required": [],
            },
        )

    def register_loss(self, name: str, factory: Callable[..., LossModel], description: str, parameters: Dict):
        """Register a new loss"""
        self.losses[name] = {
            "factory": factory,
            "description": description,
            "parameters": parameters,
        }

    def get_loss_schemas(self) -> List[Dict]:
        """Get the name, description and parameter schema of every loss"""
        return [
            {"name": name, "description": entry["description"], "parameters": entry["parameters"]}
            for name, entry in self.losses.items()
        ]

    def build_loss(self, name: str, params: Optional[Dict[str, Any]] = None) -> LossModel:
        """Instantiate a loss by name with its parameter block"""
        if name not in self.losses:
            raise DataError(f"Loss '{name}' not found; available: {', '.join(sorted(self.losses))}")

        entry = self.losses[name]
        params = dict(params or {})
        unknown = set(params) - set(entry["parameters"]["properties"])
        if unknown:
            raise DataError(f"Unknown parameters for loss '{name}': {', '.join(sorted(unknown))}")
        try:
            loss = entry["factory"](**params)
        except TypeError as e:
            raise DataError(f"Invalid parameters for loss '{name}': {e}") from e
        logger.debug(f"Built loss {name} with {loss.params()}")
        return loss


_default_registry = None


def default_registry() -> LossRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = LossRegistry()
    return _default_registry


def build_loss(name: str, params: Optional[Dict[str, Any]] = None) -> LossModel:
    return default_registry().build_loss(name, params)
