from .checkpoint import load_checkpoint, save_checkpoint
from .network import (LayerSpec, Network, NetworkConfig, Trace, bptt_backward, forward_sequence,
                      softmax_cross_entropy)
from .neuron import NeuronConfig, neuron_step, simulate, soft_spike, surrogate_derivative
from .optim import SGD, sgd_momentum_step
from .gradcheck import GradcheckResult, gradcheck, gradcheck_config
