"""Complex tensor arithmetic composed from real/imaginary Tensor pairs.

Complex values never enter the autodiff engine directly: every complex
quantity is carried as two same-shape real tensors, so one real-valued
graph covers the whole network and finite-difference checking stays uniform.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ShapeError, Tensor, concat, layer_norm

__all__ = ["ComplexTensor", "complex_linear", "complex_tanh", "joint_layer_norm"]


class ComplexTensor:
    """A pair of same-shape real tensors interpreted as re + j*im."""

    __slots__ = ("re", "im")

    def __init__(self, re: Tensor, im: Tensor):
        re = re if isinstance(re, Tensor) else Tensor(re)
        im = im if isinstance(im, Tensor) else Tensor(im)
        if re.shape != im.shape:
            raise ShapeError(
                f"ComplexTensor: re/im shapes differ, {re.shape} vs {im.shape}"
            )
        self.re = re
        self.im = im

    @classmethod
    def from_numpy(cls, array: np.ndarray, requires_grad: bool = False) -> "ComplexTensor":
        array = np.asarray(array)
        return cls(
            Tensor(array.real.astype(np.float64), requires_grad),
            Tensor(array.imag.astype(np.float64), requires_grad),
        )

    def to_numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    def __repr__(self) -> str:
        return f"ComplexTensor(shape={self.shape})"

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexTensor") -> "ComplexTensor":
        # (a+jb)(c+jd) = (ac - bd) + j(ad + bc)
        return ComplexTensor(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def reshape(self, shape) -> "ComplexTensor":
        return ComplexTensor(self.re.reshape(shape), self.im.reshape(shape))

    def swapaxes(self, i: int, j: int) -> "ComplexTensor":
        return ComplexTensor(self.re.swapaxes(i, j), self.im.swapaxes(i, j))


def complex_linear(x: ComplexTensor, w: ComplexTensor, b: ComplexTensor | None = None) -> ComplexTensor:
    """Complex affine map along the last axis.

    With x = xr + j*xi and W = Wr + j*Wi this is
    (xr Wr - xi Wi + br) + j(xr Wi + xi Wr + bi).
    """
    if x.shape[-1] != w.shape[-2]:
        raise ShapeError(
            f"complex_linear: input width {x.shape[-1]} does not match "
            f"weight rows {w.shape[-2]}"
        )
    re = x.re @ w.re - x.im @ w.im
    im = x.re @ w.im + x.im @ w.re
    if b is not None:
        re = re + b.re
        im = im + b.im
    return ComplexTensor(re, im)


def complex_tanh(x: ComplexTensor) -> ComplexTensor:
    """Split nonlinearity: tanh applied to re and im independently."""
    return ComplexTensor(x.re.tanh(), x.im.tanh())


def joint_layer_norm(x: ComplexTensor, gamma: Tensor, beta: Tensor) -> ComplexTensor:
    """Layer-norm over the last axis with re/im as one joint 2N feature.

    The statistics are computed over the concatenated [re; im] vector, so the
    normalization sees the complex value as a two-channel real feature.  The
    affine parameters have length 2N.
    """
    n = x.shape[-1]
    packed = concat([x.re, x.im], axis=-1)
    normed = layer_norm(packed, gamma, beta)
    return ComplexTensor(normed[..., :n], normed[..., n:])
