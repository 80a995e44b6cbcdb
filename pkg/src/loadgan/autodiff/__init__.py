from .tensor import Value
from .layers import (BatchNormLayer, DenseLayer, DropoutLayer, HiddenBlock, Module,
                     batchnorm_forward, dense_forward, dropout_forward)
from .optim import Adam, OptimizerState, optimizer_step

__all__ = ["Value", "Module", "DenseLayer", "BatchNormLayer", "DropoutLayer", "HiddenBlock",
           "dense_forward", "batchnorm_forward", "dropout_forward", "Adam", "OptimizerState",
           "optimizer_step"]
