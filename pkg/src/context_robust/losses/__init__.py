from .implementations import LogisticLoss, NewsvendorLoss
from .registry import LossRegistry, build_loss

__all__ = ["LogisticLoss", "NewsvendorLoss", "LossRegistry", "build_loss"]
