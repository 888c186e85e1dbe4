from ovid.neural.ops import (
    attention,
    bce_loss,
    concat,
    dropout,
    fc,
    l2_penalty,
    layer_norm,
    multi_head,
    relu,
    sigmoid,
    softmax,
)
from ovid.neural.optim import AdamState, adam_step
from ovid.neural.tensor import Parameter, Tensor, backward, zero_grad
