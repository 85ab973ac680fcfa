"""Reproducing kernels of the discrete Hardy space.

The kernel of a 4-adic interval I lives on the odd ancestors of I: one real
Haar coefficient per ancestor and one matching imaginary coefficient on the
ancestor's sibling, so the kernel is itself a conjugate pair.  Pairing a
conjugate pair against the kernel recovers its averaged value on I.  The
testing half of the module turns kernel evaluations into a measure quality
gauge: packing intensity never exceeds three times the worst kernel test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

from .dyadic import (
    UNIT,
    DyadicInterval,
    four_adic_nodes,
    haar_coefficient,
    haar_inner_indicator,
    window_root,
)
from .martingale import DyadicAnalytic
from .carleson import DiscreteMeasure, embedding_sum

E = math.e


class KernelNorm(NamedTuple):
    value: Fraction
    limit: Fraction


@dataclass
class KernelRep:
    """Kernel of an interval, stored by Haar coefficients.

    real_coeffs sit on the odd ancestors of the interval, imag_coeffs on
    their siblings; the constant carries the mean term and is 1 on the unit
    base, 0 on a truncated window.
    """

    interval: DyadicInterval
    height: int
    real_coeffs: dict
    imag_coeffs: dict
    constant: float

    def evaluate(self, K: DyadicInterval, normalized: bool = False) -> complex:
        """Averaged kernel value over K, as a complex number."""
        re = self.constant
        im = 0.0
        for J, c in self.real_coeffs.items():
            re += c * haar_inner_indicator(K, J)
        for J, c in self.imag_coeffs.items():
            im += c * haar_inner_indicator(K, J)
        z = complex(re, im)
        if normalized:
            n2 = kernel_norm2(self.interval, self.height).value
            if n2 == 0:
                raise ValueError("a height-zero kernel cannot be normalized")
            z /= math.sqrt(float(n2))
        return z


def reproducing_kernel(I: DyadicInterval, height: int) -> KernelRep:
    """Kernel of I using its nearest `height` odd ancestors."""
    if not I.is_four_adic:
        raise ValueError(f"{I.id} is not 4-adic; kernels attach to even levels")
    avail = (I.level - I.root_level) // 2
    if height < 0:
        raise ValueError("height must be nonnegative")
    if height > avail:
        raise ValueError(
            f"kernel height {height} needs more odd ancestors than the"
            f" {avail} available above {I.id}"
        )
    real, imag = {}, {}
    for k in range(height):
        J = I.ancestor_at(I.level - 1 - 2 * k)
        c = 0.5 * haar_inner_indicator(I, J)
        real[J] = c
        imag[J.sibling()] = J.sigma() * c
    constant = 1.0 if I.base == UNIT else 0.0
    return KernelRep(I, height, real, imag, constant)


def kernel_norm2(I: DyadicInterval, height: int) -> KernelNorm:
    """Squared norm of the mean-free kernel part, with its full-height limit.

    Exact geometric value (1 - 4**-height) / (3 |I|); the limit 1 / (3 |I|)
    is what an untruncated ancestor tower would give.  Pure arithmetic, no
    availability requirement.
    """
    limit = Fraction(1, 3) / I.length
    value = limit * (1 - Fraction(1, 4) ** height)
    return KernelNorm(value, limit)


def truncation_tail_bound(I: DyadicInterval, height: int) -> Fraction:
    """Exact squared norm lost to truncating the ancestor tower."""
    norms = kernel_norm2(I, height)
    return norms.limit - norms.value


def kernel_to_analytic(k: KernelRep) -> DyadicAnalytic:
    """Realize a kernel as the conjugate pair it is."""
    I = k.interval
    if I.base == UNIT:
        root = DyadicInterval(0, 0)
    else:
        root = window_root(I.ancestor_levels)
    depth = I.level - root.level
    u_leaves, v_leaves = [], []
    for j in range(1 << depth):
        z = k.evaluate(root.descendant(depth, j))
        u_leaves.append(z.real)
        v_leaves.append(z.imag)
    return DyadicAnalytic.from_leaves(u_leaves, v_leaves, root)


def reproducing_residual(f: DyadicAnalytic, I: DyadicInterval, height: int) -> float:
    """Distance between the kernel pairing and the averaged value at I.

    Zero (to rounding) whenever f is a conjugate pair on the base tree whose
    jump coefficients above I all sit within `height` odd ancestors.
    """
    if not f.root.is_root:
        raise ValueError("the pairing needs a function on the full base tree")
    k = reproducing_kernel(I, height)
    re = k.constant * float(f.u.root_average)
    im = k.constant * float(f.v.root_average)
    for J, c in k.real_coeffs.items():
        re += c * haar_coefficient(f.u.pc, J)
        im += c * haar_coefficient(f.v.pc, J)
    for J, c in k.imag_coeffs.items():
        re += c * haar_coefficient(f.v.pc, J)
        im -= c * haar_coefficient(f.u.pc, J)
    return abs(complex(re, im) - f.average(I))


@lru_cache(maxsize=None)
def _full_height_kernel(I: DyadicInterval) -> KernelRep:
    return reproducing_kernel(I, (I.level - I.root_level) // 2)


@lru_cache(maxsize=None)
def normalized_testing_value(I: DyadicInterval, K: DyadicInterval) -> float:
    """Squared modulus at K of the unit-norm mean-free kernel of I.

    Inside I the kernel is constant and self-reproducing, so the value is
    pinned to the exact limit 1 / (3 |I|); outside, the deepest available
    truncation is evaluated and normalized against the same limit.
    """
    if not I.is_four_adic or not K.is_four_adic:
        raise ValueError("testing values attach to 4-adic intervals")
    limit = Fraction(1, 3) / I.length
    if I.contains(K):
        return float(limit)
    k = _full_height_kernel(I)
    re = im = 0.0
    for J, c in k.real_coeffs.items():
        re += c * haar_inner_indicator(K, J)
    for J, c in k.imag_coeffs.items():
        im += c * haar_inner_indicator(K, J)
    return (re * re + im * im) / float(limit)


def testing_sum(mu: DiscreteMeasure, I: DyadicInterval) -> float:
    """Measure mass seen through the normalized kernel of I."""
    return sum(
        float(m) * normalized_testing_value(I, J) for J, m in mu.masses.items()
    )


def testing_constant(mu: DiscreteMeasure) -> float:
    """Worst kernel test over all 4-adic nodes of the measure tree."""
    worst = 0.0
    for I in four_adic_nodes(mu.root, mu.depth):
        t = testing_sum(mu, I)
        if t > worst:
            worst = t
    return worst


class TestingReport(NamedTuple):
    testing_sum: float
    subtree_packing: float
    packing_bound: float
    slack: float


def testing_to_packing(mu: DiscreteMeasure, I: DyadicInterval) -> TestingReport:
    """Packing control at one node: S(I)/|I| is at most three kernel tests.

    The kernel of I is flat at height 1/(3|I|) on its own subtree, so the
    subtree mass alone already contributes a third of the packing ratio.
    """
    t = testing_sum(mu, I)
    packing = float(mu.subtree_mass(I) / I.length)
    return TestingReport(t, packing, 3.0 * t, 3.0 * t - packing)


def testing_embedding_slack(f: DyadicAnalytic, mu: DiscreteMeasure) -> float:
    """Slack of the embedding bound run with 3e times the testing constant."""
    bound = 3.0 * E * testing_constant(mu) * float(f.norm2())
    return bound - float(embedding_sum(f, mu))
