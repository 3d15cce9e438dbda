"""Monomial test-function bases with exact gradient evaluation.

The constraints of the approximating LPs are indexed by monomials
x_1^{a_1}...x_d^{a_d} of total degree >= 1 (the constant is excluded:
its gradient vanishes identically and contributes nothing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered set of multi-indices over ``dim`` variables.

    Ordering is graded lexicographic: by total degree, then by exponent
    vector with earlier variables carrying higher priority, so the
    degree-d basis is a prefix of the degree-(d+1) basis.
    """

    dim: int
    multi_indices: tuple[tuple[int, ...], ...]
    # exponent matrix, shape (count, dim); derived, kept for vectorized eval
    exponents: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        seen = set(self.multi_indices)
        if len(seen) != len(self.multi_indices):
            raise ValueError("duplicate multi-indices")
        for mi in self.multi_indices:
            if len(mi) != self.dim or sum(mi) < 1:
                raise ValueError(f"bad multi-index {mi}")
        exps = np.array(self.multi_indices, dtype=np.int64).reshape(len(self.multi_indices), self.dim)
        object.__setattr__(self, "exponents", exps)

    @property
    def count(self) -> int:
        return len(self.multi_indices)

    def value(self, i: int, x) -> float:
        """Value of the i-th monomial at point x."""
        self._check_index(i)
        x = np.asarray(x, dtype=float)
        return float(np.prod(x ** self.exponents[i]))

    def gradient(self, i: int, x) -> np.ndarray:
        """Gradient of the i-th monomial at x, exact at box boundaries."""
        self._check_index(i)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has length {x.shape}, expected {self.dim}")
        return self.gradients_at(x[None, :])[i, 0]

    def values_at(self, points) -> np.ndarray:
        """Monomial values at many points; shape (count, npoints)."""
        pw = self._power_table(np.asarray(points, dtype=float))
        # product over dimensions of x_d^{e_{i,d}}
        out = np.ones((self.count, pw.shape[1]))
        for d in range(self.dim):
            out *= pw[:, :, d][self.exponents[:, d]]
        return out

    def gradients_at(self, points) -> np.ndarray:
        """Monomial gradients at many points; shape (count, npoints, dim).

        Uses d/dx_d x^a = a_d * x^(a - e_d), with powers built by repeated
        multiplication so values at 0 are exact.
        """
        points = np.asarray(points, dtype=float)
        pw = self._power_table(points)
        npts = pw.shape[1]
        grad = np.empty((self.count, npts, self.dim))
        for d in range(self.dim):
            ed = np.maximum(self.exponents[:, d] - 1, 0)
            part = pw[:, :, d][ed] * self.exponents[:, d][:, None]
            for dd in range(self.dim):
                if dd == d:
                    continue
                part = part * pw[:, :, dd][self.exponents[:, dd]]
            grad[:, :, d] = part
        return grad

    def _power_table(self, points) -> np.ndarray:
        """pw[k, p, d] = points[p, d] ** k for k = 0..max_exponent."""
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"points must have shape (n, {self.dim})")
        kmax = int(self.exponents.max())
        pw = np.ones((kmax + 1, points.shape[0], self.dim))
        for k in range(1, kmax + 1):
            pw[k] = pw[k - 1] * points
        return pw

    def _check_index(self, i: int):
        if not 0 <= i < self.count:
            raise IndexError(f"basis index {i} out of range [0, {self.count})")


def make_basis(dim: int, max_degree: int) -> MonomialBasis:
    """All monomials with 1 <= total degree <= max_degree, graded-lex.

    count = C(dim + max_degree, dim) - 1.
    """
    if dim < 1 or max_degree < 1:
        raise ValueError("dim and max_degree must be >= 1")
    indices = []
    for deg in range(1, max_degree + 1):
        indices.extend(_compositions(deg, dim))
    basis = MonomialBasis(dim=dim, multi_indices=tuple(indices))
    assert basis.count == math.comb(dim + max_degree, dim) - 1
    return basis


def _compositions(total: int, parts: int):
    """Compositions of `total` into `parts` nonnegative ints, lex descending
    on the first variable (so (1,0) precedes (0,1))."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail
