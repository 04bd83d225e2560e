from .vit import PanelEncoder
from .core import (
    N_CELLS,
    OPTION_SLOT,
    ValenModel,
    enumerate_incomplete,
    option_loss,
    score_instance,
)
from .bongard import BongardValenModel, N_BONGARD_CELLS, evaluate_test_pair

__all__ = [
    "PanelEncoder",
    "N_CELLS",
    "OPTION_SLOT",
    "N_BONGARD_CELLS",
    "ValenModel",
    "enumerate_incomplete",
    "option_loss",
    "score_instance",
    "BongardValenModel",
    "evaluate_test_pair",
]
