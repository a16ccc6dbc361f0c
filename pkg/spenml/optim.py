"""
Mini-batch stochastic gradient descent with momentum and L2 regularisation, shared by every trainer in the package.

The update of a tensor theta with gradient g and L2 weight l2 is::

    v     <- momentum * v + (g + l2 * theta)
    theta <- theta - lr * v

Tensors are updated in place, so the optimiser is handed the arrays of the parameter object being trained.
"""

import numpy as np


class MomentumSGD:
    '''
    Momentum SGD over a dictionary of named tensors.

    Args:
        - **tensors** (*dict*): name -> ndarray, updated in place.
        - **lr** (*float*): Learning rate (may be changed between steps).
        - **momentum** (*float*): Momentum coefficient in [0, 1).
        - **l2** (*dict*): name -> L2 weight (a float or an array broadcastable to the tensor). Missing names get 0.

    Methods:
        - **step** (*grads*): Applies one update; names missing from *grads* receive only the L2 term.
    '''

    def __init__(self, tensors, lr, momentum=0.0, l2=None):
        if lr <= 0:
            raise ValueError("lr must be positive, got %r" % lr)
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1), got %r" % momentum)
        self.tensors = tensors
        self.lr = lr
        self.momentum = momentum
        self.l2 = l2 or {}
        self.velocity = {name: np.zeros_like(value) for name, value in tensors.items()}

    def step(self, grads):
        for name, theta in self.tensors.items():
            g = grads.get(name)
            update = np.zeros_like(theta) if g is None else np.array(g, dtype=theta.dtype)
            decay = self.l2.get(name, 0.0)
            if np.any(decay):
                update += decay * theta
            v = self.velocity[name]
            v *= self.momentum
            v += update
            theta -= self.lr * v


def iterate_minibatches(n, batch_size, rng):
    '''
    Yields shuffled index arrays covering range(n) once.

    Args:
        - **n** (*int*): Number of examples.
        - **batch_size** (*int*)
        - **rng** (*numpy.random.Generator*): Source of the shuffle.
    '''
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def epoch_learning_rate(lr, lr_decay, epoch):
    """Learning rate of a (0-based) epoch under multiplicative per-epoch decay."""
    return lr * lr_decay ** epoch
