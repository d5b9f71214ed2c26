"""Exact series coefficients and effective generators for pulsed evolution.

The toggling sign f(t) of a pulse sequence is piecewise +-1, so every
coefficient integrand below is a polynomial of low degree on each
inter-pulse segment and integrates in closed form; the only error left is
floating-point rounding.  With F(t) the running integral of f, the
coefficients of the first series terms over one unit of duration T are

    alpha1 = F(T) / T
    alpha2 = (1 / 2 T^2) * int_0^T (F - t f) dt
    alpha3a = (1 / 12 T^3) * int_0^T (3 P - t F + t^2 f) dt
    alpha3b = (1 / 12 T^3) * int_0^T (3 f P - F^2 + t F f) dt

where P(t) is the running integral of (F - t f).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .liouville import Superoperator, poisson_bracket
from .pulses import PulseSequence


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Polynomial pieces in local coordinates between increasing breakpoints."""

    breakpoints: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        cf = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) < 0):
            raise ValueError("breakpoints must be non-decreasing with >= 2 entries")
        if cf.shape[0] != bp.size - 1:
            raise ValueError("need one coefficient row per segment")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cf)

    @classmethod
    def from_signs(cls, bounds, signs) -> "PiecewisePolynomial":
        signs = np.asarray(signs, dtype=float)
        return cls(np.asarray(bounds, dtype=float), signs[:, None])

    @classmethod
    def monomial(cls, bounds) -> "PiecewisePolynomial":
        bounds = np.asarray(bounds, dtype=float)
        coeffs = np.stack([bounds[:-1], np.ones(bounds.size - 1)], axis=1)
        return cls(bounds, coeffs)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(
            np.searchsorted(self.breakpoints, t, side="right") - 1,
            0,
            self.coeffs.shape[0] - 1,
        )
        x = t - self.breakpoints[idx]
        value = np.zeros_like(x)
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            value = value * x + self.coeffs[idx, k]
        return value if value.ndim else float(value)

    def _binary(self, other, sign) -> "PiecewisePolynomial":
        if not np.array_equal(self.breakpoints, other.breakpoints):
            raise ValueError("operands must share breakpoints")
        ka, kb = self.coeffs.shape[1], other.coeffs.shape[1]
        width = max(ka, kb)
        out = np.zeros((self.coeffs.shape[0], width))
        out[:, :ka] = self.coeffs
        out[:, :kb] += sign * other.coeffs
        return PiecewisePolynomial(self.breakpoints, out)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, other):
        if isinstance(other, PiecewisePolynomial):
            if not np.array_equal(self.breakpoints, other.breakpoints):
                raise ValueError("operands must share breakpoints")
            ka, kb = self.coeffs.shape[1], other.coeffs.shape[1]
            out = np.zeros((self.coeffs.shape[0], ka + kb - 1))
            for i in range(ka):
                for j in range(kb):
                    out[:, i + j] += self.coeffs[:, i] * other.coeffs[:, j]
            return PiecewisePolynomial(self.breakpoints, out)
        return PiecewisePolynomial(self.breakpoints, self.coeffs * float(other))

    __rmul__ = __mul__

    def antiderivative(self) -> "PiecewisePolynomial":
        """Continuous running integral starting at 0 at the first breakpoint."""
        widths = np.diff(self.breakpoints)
        k = np.arange(1, self.coeffs.shape[1] + 1)
        integ = self.coeffs / k
        segment_totals = np.einsum("mk,mk->m", integ, widths[:, None] ** k)
        offsets = np.concatenate(([0.0], np.cumsum(segment_totals)[:-1]))
        out = np.zeros((self.coeffs.shape[0], self.coeffs.shape[1] + 1))
        out[:, 0] = offsets
        out[:, 1:] = integ
        return PiecewisePolynomial(self.breakpoints, out)

    def definite_integral(self) -> float:
        widths = np.diff(self.breakpoints)
        k = np.arange(1, self.coeffs.shape[1] + 1)
        return float(np.sum(self.coeffs / k * widths[:, None] ** k))


@dataclass(frozen=True)
class MagnusCoefficients:
    """Dimensionless unit coefficients (alpha1, alpha2, alpha3a, alpha3b)."""

    alpha1: float
    alpha2: float
    alpha3a: float
    alpha3b: float

    def get(self, order) -> float:
        key = str(order).lower()
        try:
            return {
                "1": self.alpha1,
                "2": self.alpha2,
                "3a": self.alpha3a,
                "3b": self.alpha3b,
            }[key]
        except KeyError:
            raise ValueError(f"order must be one of 1, 2, 3a, 3b; got {order!r}") from None


def sign_function(seq: PulseSequence) -> PiecewisePolynomial:
    """The toggling sign of one unit as a degree-0 piecewise polynomial."""
    return PiecewisePolynomial.from_signs(seq.segment_bounds(), seq.segment_signs())


def repeated_sign_function(seq: PulseSequence, repetitions: int) -> PiecewisePolynomial:
    """Periodic extension of the unit sign over ``repetitions`` units.

    Each unit restarts at +1, which is what makes the coefficients of the
    repeated control obey the 1/l^(n-1) scaling law for any pulse count.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    edges = [0.0]
    signs = []
    for k in range(repetitions):
        offset = k * seq.t_p
        edges.extend(offset + t for t in seq.times)
        edges.append(offset + seq.t_p)
        signs.extend(seq.segment_signs())
    return PiecewisePolynomial.from_signs(np.asarray(edges), np.asarray(signs))


def coefficients_of_sign(f: PiecewisePolynomial) -> MagnusCoefficients:
    """Exact coefficients for an arbitrary piecewise-constant sign function."""
    total = f.breakpoints[-1] - f.breakpoints[0]
    widths = np.diff(f.breakpoints)
    signs = f.coeffs[:, 0]
    alpha1 = float(np.sum(signs * widths)) / total

    t_mono = PiecewisePolynomial.monomial(f.breakpoints)
    big_f = f.antiderivative()
    t_f = t_mono * f
    c2_integrand = big_f - t_f
    big_p = c2_integrand.antiderivative()
    alpha2 = c2_integrand.definite_integral() / (2 * total**2)

    integrand_3a = 3.0 * big_p - t_mono * big_f + t_mono * t_f
    alpha3a = integrand_3a.definite_integral() / (12 * total**3)

    integrand_3b = 3.0 * (f * big_p) - big_f * big_f + t_f * big_f
    alpha3b = integrand_3b.definite_integral() / (12 * total**3)

    return MagnusCoefficients(alpha1, alpha2, alpha3a, alpha3b)


def coefficients(seq: PulseSequence) -> MagnusCoefficients:
    """Unit coefficients of a pulse sequence by exact segment integration."""
    return coefficients_of_sign(sign_function(seq))


def coefficients_from_times(times, total_duration: float) -> MagnusCoefficients:
    """Coefficients for an explicit global pulse-time list (cumulative sign)."""
    times = np.asarray(sorted(times), dtype=float)
    bounds = np.concatenate(([0.0], times, [total_duration]))
    signs = (-1.0) ** np.arange(times.size + 1)
    return coefficients_of_sign(PiecewisePolynomial.from_signs(bounds, signs))


def repeated_coefficients(seq: PulseSequence, repetitions: int) -> MagnusCoefficients:
    """Direct integration over the l-fold repeated unit (scaling cross-check)."""
    return coefficients_of_sign(repeated_sign_function(seq, repetitions))


def coefficients_scaled(seq: PulseSequence, repetitions: int, order) -> float:
    """Coefficient of the l-fold repeated control via the l^(1-n) scaling law."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    alpha = coefficients(seq).get(order)
    key = str(order).lower()
    n = {"1": 1, "2": 2, "3a": 3, "3b": 3}[key]
    return float(repetitions) ** (1 - n) * alpha


def magnus_terms(
    l_p0: Superoperator,
    l_n: Superoperator,
    coeffs: MagnusCoefficients,
    t_p: float,
    repetitions: int = 1,
):
    """First three series terms of the evolution exponent over t = l * t_p."""
    t = repetitions * t_p
    omega1 = t * (l_p0 + coeffs.alpha1 * l_n)
    pn = poisson_bracket(l_p0, l_n)
    omega2 = (t * coeffs.alpha2 * t_p) * pn
    omega3 = (t * coeffs.alpha3a * t_p**2) * poisson_bracket(l_p0, pn) + (
        t * coeffs.alpha3b * t_p**2
    ) * poisson_bracket(l_n, pn)
    return omega1, omega2, omega3


def leading_generator(
    l_p0: Superoperator,
    l_n: Superoperator,
    seq: PulseSequence,
    balance_tol: float = 1e-12,
) -> Superoperator:
    """Effective time-independent generator when alpha1 and alpha2 vanish.

    Returns L_P0 + alpha3b * N^2 * tau_bar^2 * [L_N, [L_P0, L_N]], the leading
    correction to the pure preparation channel for a balanced unit.
    """
    coeffs = coefficients(seq)
    if abs(coeffs.alpha1) > balance_tol or abs(coeffs.alpha2) > balance_tol:
        raise ValueError(
            "leading-order generator requires alpha1 = alpha2 = 0 "
            f"(got alpha1={coeffs.alpha1:.3e}, alpha2={coeffs.alpha2:.3e})"
        )
    n = seq.n_pulses
    tau_bar = seq.tau_bar
    correction = coeffs.alpha3b * n**2 * tau_bar**2
    return l_p0 + correction * poisson_bracket(l_n, poisson_bracket(l_p0, l_n))
