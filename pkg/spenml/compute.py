# -*- coding: utf-8 -*-
"""
This module has the dense linear algebra and the coordinate-wise non-linearities used by every network in the package.

Dense matrices and vectors are plain ``numpy`` arrays of 64-bit floats. Most functions also accept a batch of row vectors
(a 2-D array with one example per row), which is how the energy networks evaluate many examples at once.

Non-linearities:
    - ``Sigmoid``: 1 / (1 + exp(-t))
    - ``ReLU``: max(0, t)
    - ``HardTanh``: t clamped to [-1, 1]
    - ``Softplus``: log(1 + exp(t))
    - ``Identity``: t

At the kinks of ReLU (t = 0) and HardTanh (t = -1, t = 1) the derivative is 0.
"""

from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import DimensionError

DTYPE = np.float64


class Nonlinearity(str, Enum):
    """The coordinate-wise non-linearities. Values are the names used in config and model files."""

    SIGMOID = "sigmoid"
    RELU = "relu"
    HARDTANH = "hardtanh"
    SOFTPLUS = "softplus"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name):
        '''
        Returns the non-linearity called *name* (case insensitive).

        Args:
            - **name** (*str* or *Nonlinearity*): e.g. ``"ReLU"``, ``"hardtanh"``.

        Returns:
            - **g** (*Nonlinearity*)
        '''
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError("unknown nonlinearity %r, expected one of %s"
                             % (name, [g.value for g in cls])) from None


def matvec(M, v):
    '''
    The matrix-vector product M v. A 2-D *v* is treated as a batch of row vectors and the result has one row per input row.

    Args:
        - **M** (*ndarray*): shape (rows, cols)
        - **v** (*ndarray*): shape (cols,) or (n, cols)

    Returns:
        - **product** (*ndarray*): shape (rows,) or (n, rows)
    '''
    M = np.asarray(M, dtype=DTYPE)
    v = np.asarray(v, dtype=DTYPE)
    if M.ndim != 2 or v.shape[-1] != M.shape[1]:
        raise DimensionError("matvec: matrix columns must match vector length", M.shape, v.shape)
    return v @ M.T


def affine(M, bias, v):
    """M v + bias, batched like ``matvec``."""
    out = matvec(M, v)
    if bias is not None:
        if bias.shape != (M.shape[0],):
            raise DimensionError("affine: bias length must match matrix rows", M.shape, bias.shape)
        out = out + bias
    return out


def softplus(t):
    return np.logaddexp(0.0, t)


def apply_nonlinearity(g, v):
    '''
    Applies the non-linearity *g* to every entry of *v*.

    Args:
        - **g** (*Nonlinearity* or *str*): The non-linearity.
        - **v** (*ndarray*): Input values (any shape).

    Returns:
        - **values** (*ndarray*): Same shape as *v*.
    '''
    g = Nonlinearity.parse(g)
    v = np.asarray(v, dtype=DTYPE)
    if g is Nonlinearity.SIGMOID:
        return expit(v)
    if g is Nonlinearity.RELU:
        return np.maximum(v, 0.0)
    if g is Nonlinearity.HARDTANH:
        return np.clip(v, -1.0, 1.0)
    if g is Nonlinearity.SOFTPLUS:
        return softplus(v)
    return v.copy()


def nonlinearity_grad(g, v):
    '''
    The derivative of *g* evaluated at every entry of *v*. The subgradient 0 is used exactly at the kinks of ReLU and HardTanh.

    Args:
        - **g** (*Nonlinearity* or *str*): The non-linearity.
        - **v** (*ndarray*): Points at which the derivative is evaluated (any shape).

    Returns:
        - **derivative** (*ndarray*): Same shape as *v*.
    '''
    g = Nonlinearity.parse(g)
    v = np.asarray(v, dtype=DTYPE)
    if g is Nonlinearity.SIGMOID:
        s = expit(v)
        return s * (1.0 - s)
    if g is Nonlinearity.RELU:
        return np.where(v > 0.0, 1.0, 0.0)
    if g is Nonlinearity.HARDTANH:
        return np.where((v > -1.0) & (v < 1.0), 1.0, 0.0)
    if g is Nonlinearity.SOFTPLUS:
        return expit(v)
    return np.ones_like(v)
