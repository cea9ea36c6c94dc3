"""
Radial Fourier-multiplier calculus.

Littlewood-Paley projections, fractional derivatives |grad|^s, the smoothing
operator with symbol m(rho) = min(1, (N/rho)^(1-s)), and homogeneous Sobolev
norms.  Every operator is a pointwise function of the grid frequencies rho_k
applied to sine coefficients, so compositions and partitions of unity hold
exactly.

The dyadic cutoff is built from one fixed smooth profile psi with psi = 1 on
[0, 1] and psi = 0 on [2, inf); the band at N has symbol
psi(rho/N) - psi(2 rho/N), supported on [N/2, 2N].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .grid import FOUR_PI, RadialField, SpectralField, to_physical, to_spectral

LOW_FREQUENCY_NORM_SHARE_WARN = 0.01


def psi_cutoff(x):
    """Smooth radial cutoff profile: 1 on [0,1], 0 on [2,inf), C^inf between.

    The transition is the canonical quotient of bump tails,
    t(y) = e(1-y) / (e(1-y) + e(y)) with e(y) = exp(-1/y), which is monotone
    nonincreasing and exactly attains 1 and 0 at the interval ends.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    out[x >= 2.0] = 0.0
    trans = (x > 1.0) & (x < 2.0)
    if np.any(trans):
        y = x[trans] - 1.0
        e_there = np.exp(-1.0 / (1.0 - y))
        e_here = np.exp(-1.0 / y)
        out[trans] = e_there / (e_there + e_here)
    return out if out.ndim else float(out)


def i_symbol(rho, N: float, s: float):
    """Smoothing-multiplier symbol: 1 below N, (N/rho)^(1-s) above."""
    rho = np.asarray(rho, dtype=np.float64)
    return np.minimum(1.0, (N / rho) ** (1.0 - s))


@dataclass(frozen=True)
class MultiplierSpec:
    """A radial Fourier symbol, evaluated pointwise on grid frequencies.

    Kinds: lp_at(N), lp_leq(N), lp_gt(N), frac_deriv(s), i_op(N, s), and
    product(...) of other specs.  Construct through the factory classmethods.
    """

    kind: str
    N: Optional[float] = None
    s: Optional[float] = None
    factors: Tuple["MultiplierSpec", ...] = ()

    @classmethod
    def lp_at(cls, N: float) -> "MultiplierSpec":
        """Dyadic band projection P_N, symbol psi(rho/N) - psi(2 rho/N)."""
        cls._need_positive(N)
        return cls("lp_at", N=float(N))

    @classmethod
    def lp_leq(cls, N: float) -> "MultiplierSpec":
        """Low-pass P_{<=N}, symbol psi(rho/N)."""
        cls._need_positive(N)
        return cls("lp_leq", N=float(N))

    @classmethod
    def lp_gt(cls, N: float) -> "MultiplierSpec":
        """High-pass P_{>N} = 1 - P_{<=N}."""
        cls._need_positive(N)
        return cls("lp_gt", N=float(N))

    @classmethod
    def frac_deriv(cls, s: float) -> "MultiplierSpec":
        """|grad|^s, symbol rho^s; any real s is safe since rho >= rho_1 > 0."""
        return cls("frac_deriv", s=float(s))

    @classmethod
    def i_op(cls, N: float, s: float) -> "MultiplierSpec":
        """The smoothing operator mapping H^s data into the energy space."""
        cls._need_positive(N)
        if not 0.5 < s < 1.0:
            raise ValueError(f"i_op requires 1/2 < s < 1, got s={s}")
        return cls("i_op", N=float(N), s=float(s))

    @classmethod
    def product(cls, factors) -> "MultiplierSpec":
        return cls("product", factors=tuple(factors))

    @staticmethod
    def _need_positive(N):
        if not np.isfinite(N) or N <= 0:
            raise ValueError(f"frequency N must be positive and finite, got {N}")

    def symbol(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.float64)
        if self.kind == "lp_at":
            return psi_cutoff(rho / self.N) - psi_cutoff(2.0 * rho / self.N)
        if self.kind == "lp_leq":
            return psi_cutoff(rho / self.N)
        if self.kind == "lp_gt":
            return 1.0 - psi_cutoff(rho / self.N)
        if self.kind == "frac_deriv":
            return rho**self.s
        if self.kind == "i_op":
            return i_symbol(rho, self.N, self.s)
        if self.kind == "product":
            out = np.ones_like(rho)
            for f in self.factors:
                out = out * f.symbol(rho)
            return out
        raise ValueError(f"unknown multiplier kind {self.kind!r}")


Field = Union[RadialField, SpectralField]


def apply_multiplier(f: Field, m: MultiplierSpec) -> Field:
    """Multiply sine coefficients pointwise by symbol(rho_k).

    Physical-space input is transformed, multiplied, and transformed back;
    the returned field matches the input representation.
    """
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, f.coeffs * m.symbol(f.grid.rho))
    c = to_spectral(f)
    return to_physical(SpectralField(f.grid, c.coeffs * m.symbol(f.grid.rho)))


def fractional_derivative(f: Field, s: float) -> Field:
    """|grad|^s f; frac_deriv(s) then frac_deriv(-s) is the identity."""
    return apply_multiplier(f, MultiplierSpec.frac_deriv(s))


def i_operator(f: Field, N: float, s: float) -> Field:
    """Apply the smoothing multiplier; identity on fields band-limited to [0, N]."""
    grid = f.grid
    if N < grid.rho_min:
        raise ValueError(f"N={N} lies below the lowest grid frequency {grid.rho_min}")
    return apply_multiplier(f, MultiplierSpec.i_op(N, s))


def sobolev_norm(f: Field, s: float) -> float:
    """Homogeneous Sobolev norm (4 pi (r_max/2) sum rho^(2s) ghat^2)^(1/2).

    For s < 0 the value is truncation-dependent when the lowest octave
    carries significant weight; a warning is emitted if frequencies below
    2*rho_1 hold more than 1% of the squared norm.
    """
    c = f if isinstance(f, SpectralField) else to_spectral(f)
    rho = c.grid.rho
    weighted = (rho**(2.0 * s)) * c.coeffs**2
    total = float(np.sum(weighted))
    if s < 0 and total > 0:
        low = float(np.sum(weighted[rho < 2.0 * c.grid.rho_min]))
        if low > LOW_FREQUENCY_NORM_SHARE_WARN * total:
            warnings.warn(
                f"negative-order norm (s={s}): {100 * low / total:.1f}% of the "
                "squared norm sits in the lowest octave; value is sensitive to "
                "the domain truncation",
                stacklevel=2,
            )
    return float(np.sqrt(FOUR_PI * (c.grid.r_max / 2.0) * total))


def dyadic_frequencies(lo: float, hi: float) -> np.ndarray:
    """Powers of two times lo, covering (lo, hi] inclusively at both ends."""
    if lo <= 0 or hi < lo:
        raise ValueError("need 0 < lo <= hi")
    out = [lo]
    while out[-1] < hi:
        out.append(out[-1] * 2.0)
    return np.array(out)
