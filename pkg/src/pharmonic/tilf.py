"""Translation machinery and the linear functionals induced by p-harmonic fields.

A field h with vanishing p-Laplacian on the interior acts on finitely
supported test functions f through the energy pairing

    T_h(f) = sum over arcs phi_p(dh) df = -2 sum_g f(g) (p-Laplacian of h)(g),

the second form holding whenever the support of f plus one neighbor layer
stays interior. T_h kills differences f - f_x of right translates, which is
what makes it translation invariant; the residual left by a numerical h is
the honest noise floor of that invariance.

Right translation f_x(g) = f(g x^{-1}) shortens the ball it lives on by the
word length of x, so every helper here reports the shrunken radius it ended
up on. difference_approximation splits f into a mean of translates along
powers of x (the remainder, small in l^p when n is large) plus a sum of
difference functions that any T_h annihilates; with pairwise disjoint
supports the remainder norm is exactly n^(1/p - 1) times the norm of f.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .energy import ScalarField, check_exponent, p_laplacian_interior, pairing
from .groups import Element


@dataclass
class TranslateReport:
    shift_length: int
    original_radius: int
    radius: int

    def to_dict(self) -> dict:
        return {
            "shift_length": self.shift_length,
            "original_radius": self.original_radius,
            "radius": self.radius,
        }


def translate(f: ScalarField, x: Element) -> Tuple[ScalarField, TranslateReport]:
    """Right translate f_x(g) = f(g x^{-1}) on the ball shrunk by |x|."""
    model = f.ball.model
    shift = model.word_length(x)
    radius = f.ball.radius - shift
    if radius < 1:
        raise ValueError(
            f"translating by a word of length {shift} leaves no ball inside radius {f.ball.radius}"
        )
    sub = model.ball(radius) if shift > 0 else f.ball
    x_inv = model.inv(x)
    values = np.fromiter(
        (f.value_at(model.mul(g, x_inv)) for g in sub.vertices), dtype=np.float64, count=len(sub)
    )
    return ScalarField(sub, values), TranslateReport(shift, f.ball.radius, radius)


@dataclass
class DifferenceReport:
    n_translates: int
    shift_length: int
    radius: int
    remainder_norm: float
    expected_remainder_norm: float
    mass_preserved: bool

    def to_dict(self) -> dict:
        return {
            "n_translates": self.n_translates,
            "shift_length": self.shift_length,
            "radius": self.radius,
            "remainder_norm": self.remainder_norm,
            "expected_remainder_norm": self.expected_remainder_norm,
            "mass_preserved": self.mass_preserved,
        }


def difference_approximation(
    f: ScalarField, x: Element, n: int, p: float
) -> Tuple[ScalarField, ScalarField, DifferenceReport]:
    """Split f = d + r with r the mean of the translates along x^0 .. x^(n-1).

    The difference part d = (1/n) sum_k (f - f_{x^k}) is a combination of
    translate differences, so any translation-invariant functional sends it
    to zero; the remainder r carries norm about n^(1/p-1) of f's. Translate
    supports must be pairwise disjoint on the shrunken ball (ValueError
    names the first colliding pair of powers otherwise), which also makes
    the remainder norm identity exact when no support mass is clipped.
    """
    check_exponent(p)
    if n < 1:
        raise ValueError("need at least one translate")
    model = f.ball.model
    shift = model.word_length(x)
    radius = f.ball.radius - (n - 1) * shift
    if radius < 1:
        raise ValueError(
            f"{n} translates along a word of length {shift} do not fit inside radius {f.ball.radius}"
        )
    sub = model.ball(radius)
    base = np.fromiter((f.value_at(g) for g in sub.vertices), dtype=np.float64, count=len(sub))
    translates = [base]
    for k in range(1, n):
        x_inv_k = model.inv(model.power(x, k))
        vals = np.fromiter(
            (f.value_at(model.mul(g, x_inv_k)) for g in sub.vertices), dtype=np.float64, count=len(sub)
        )
        translates.append(vals)

    supports = [np.flatnonzero(v != 0.0) for v in translates]
    occupied: dict = {}
    for k, idx in enumerate(supports):
        for i in idx:
            if int(i) in occupied:
                raise ValueError(
                    f"translates along x^{occupied[int(i)]} and x^{k} overlap at "
                    f"vertex {sub.vertices[int(i)]}"
                )
            occupied[int(i)] = k

    remainder_vals = np.mean(translates, axis=0)
    remainder = ScalarField(sub, remainder_vals)
    difference = ScalarField(sub, base - remainder_vals)

    f_mass = int(np.count_nonzero(f.values))
    preserved = all(idx.size == f_mass for idx in supports)
    report = DifferenceReport(
        n_translates=n,
        shift_length=shift,
        radius=radius,
        remainder_norm=remainder.lp_norm(p),
        expected_remainder_norm=float(n ** (1.0 / p - 1.0)) * f.lp_norm(p),
        mass_preserved=preserved,
    )
    return difference, remainder, report


def tilf_evaluate(h: ScalarField, f: ScalarField, p: float, harmonic_tol: Optional[float] = None) -> float:
    """Apply the functional induced by h to the test function f.

    With ``harmonic_tol`` set, first insists that the interior p-Laplacian
    residual of h stays below it, since the functional is only translation
    invariant up to that residual.
    """
    if harmonic_tol is not None:
        residual = float(np.max(np.abs(p_laplacian_interior(h, p)))) if h.ball.n_interior else 0.0
        if residual > harmonic_tol:
            raise ValueError(
                f"field is not p-harmonic to tolerance {harmonic_tol:g} (residual {residual:.3g})"
            )
    return pairing(h, f, p)


def invariance_defect(h: ScalarField, f: ScalarField, x: Element, p: float) -> float:
    """|T_h(f) - T_h(f_x)| computed on the common shrunken ball.

    Both pairings are evaluated against h restricted to the ball on which
    the translate is defined; for an exactly p-harmonic h and finitely
    supported f this is zero, so the returned value measures how far the
    numerical h is from inducing a genuinely invariant functional.
    """
    check_exponent(p)
    f_x, rep = translate(f, x)
    if rep.shift_length == 0:
        return 0.0
    h_small = h.restrict(f_x.ball)
    f_small = f.restrict(f_x.ball)
    return abs(pairing(h_small, f_small, p) - pairing(h_small, f_x, p))
