from .tine import TineGenerator, adversarial_step, gaussian_nll, reparameterize
from .funny import (
    CenterBiasEncoder,
    HalfSplitDecoder,
    NormalDecoder,
    FunnyModules,
    bias_regression_loss,
    bongard_augment,
    funny_loss,
    funny_training_step,
)
from .sbr import (
    SbrHead,
    MetadataEncoder,
    build_prototypes,
    interpret_patterns,
    pretrain_reinit,
    sbr_loss,
    viewpoint_average,
)

__all__ = [
    "TineGenerator",
    "adversarial_step",
    "gaussian_nll",
    "reparameterize",
    "CenterBiasEncoder",
    "HalfSplitDecoder",
    "NormalDecoder",
    "FunnyModules",
    "bias_regression_loss",
    "bongard_augment",
    "funny_loss",
    "funny_training_step",
    "SbrHead",
    "MetadataEncoder",
    "build_prototypes",
    "interpret_patterns",
    "pretrain_reinit",
    "sbr_loss",
    "viewpoint_average",
]
