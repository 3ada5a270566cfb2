"""Second-order jets of real scalar fields in a complex coordinate.

A :class:`Jet` stores a real field f together with its Wirtinger derivative
f_z and the real quantity f_{z zbar}; the flat Laplacian is 4 f_{z zbar}.
Arrays of any (broadcastable) shape are supported, so a jet may describe many
fields at many points at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Jet:
    val: np.ndarray
    d: np.ndarray
    dd: np.ndarray

    @staticmethod
    def constant(c, shape=()):
        c = np.broadcast_to(np.asarray(c, dtype=float), shape)
        return Jet(c, np.zeros(shape, dtype=complex), np.zeros(shape))

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.d + other.d, self.dd + other.dd)
        return Jet(self.val + other, self.d, self.dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.d, -self.dd)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            # (fh)_{z zbar} = f h_{z zbar} + h f_{z zbar} + 2 Re(f_z conj(h_z))
            return Jet(self.val * other.val,
                       self.val * other.d + other.val * self.d,
                       self.val * other.dd + other.val * self.dd
                       + 2.0 * (self.d * np.conj(other.d)).real)
        other = np.asarray(other, dtype=float)
        return Jet(self.val * other, self.d * other, self.dd * other)

    __rmul__ = __mul__

    def __getitem__(self, idx):
        return Jet(self.val[idx], self.d[idx], self.dd[idx])

    def compose(self, f0, f1, f2):
        """Jet of phi(f) from phi(f), phi'(f), phi''(f) evaluated at f."""
        return Jet(f0, f1 * self.d, f1 * self.dd + f2 * np.abs(self.d) ** 2)

    def reciprocal(self):
        v = self.val
        return self.compose(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def laplacian(self):
        return 4.0 * self.dd


def dot(a: Jet, b: Jet) -> Jet:
    """Sum over the leading axis of the product of two vector jets."""
    pr = a * b
    return Jet(pr.val.sum(axis=0), pr.d.sum(axis=0), pr.dd.sum(axis=0))
