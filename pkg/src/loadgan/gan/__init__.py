from .losses import discriminator_loss, generator_loss
from .models import (DiscriminatorModel, GeneratorModel, aggregate, build_unconstrained_baseline,
                     generate)
from .training import (TrainingConfig, TrainingDataset, TrainingHistory, recalibrate_batchnorm,
                       sample_profiles, train)

__all__ = ["discriminator_loss", "generator_loss", "DiscriminatorModel", "GeneratorModel",
           "aggregate", "build_unconstrained_baseline", "generate", "TrainingConfig",
           "TrainingDataset", "TrainingHistory", "recalibrate_batchnorm", "sample_profiles", "train"]
