"""The quartile form and its tree-level structure."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import exact
from .dyadic import ONE, ZERO, DyadicRational
from .forest import Tree, tree_split
from .stepfunction import StepFunction
from .tiles import Bitile, GeometryError, TileUniverse, bitile, dilate_rect, minimal_tiles, tile
from .walsh import PacketTable, _depth_for, packet, projection


@dataclass
class FormSpec:
    universe: TileUniverse
    # None means every bitile of the universe
    bitiles: frozenset | None = None
    coefficients: Mapping[Bitile, DyadicRational] | None = None

    def __post_init__(self):
        U = self.universe
        if self.bitiles is not None:
            self.bitiles = frozenset(self.bitiles)
            for P in self.bitiles:
                if not isinstance(P, Bitile) or not U.contains(P):
                    raise GeometryError(f"{P} is not a bitile of the universe")
        if self.coefficients is not None:
            coeffs = {P: DyadicRational.coerce(c) for P, c in self.coefficients.items()}
            for P, c in coeffs.items():
                if c * c > ONE:
                    raise ValueError(f"coefficient of {P} exceeds 1 in magnitude")
            self.coefficients = coeffs

    @property
    def L(self) -> int:
        return self.universe.L

    def members(self) -> Iterable[Bitile]:
        return self.universe.bitiles() if self.bitiles is None else self.bitiles

    def restricted(self, bitiles: Iterable[Bitile]) -> "FormSpec":
        return FormSpec(self.universe, frozenset(bitiles), self.coefficients)


class FormEvaluator:
    """Per-bitile terms of the form for fixed inputs, at any dilation ``L``.

    The term of ``P = I x omega`` at scale ``k`` is
    ``2^(L-2k) <f1, w_{P_u}> sum_i (+-) <f2, w_{J_i}> <f3, w_{J_i}>`` with
    ``J_i`` the minimal tiles of ``2^L P_d`` and the sign ``+`` on the left
    half of ``I``: ``w_{P_d} w_{P_u}`` is the Haar function of ``I`` while
    the two dilated projections are constant on every ``I_{J_i}``.
    """

    def __init__(self, f1: StepFunction, f2: StepFunction, f3: StepFunction, N: int, M: int):
        for f in (f1, f2, f3):
            if f.support > M:
                raise GeometryError("function support exceeds the universe")
        self.N, self.M = N, M
        self.tables = [PacketTable(f if f.support == M else f.extend(M)) for f in (f1, f2, f3)]

    def scale_terms(self, k: int, L: int) -> tuple[np.ndarray, int]:
        """Terms of all bitiles at scale ``k``: integer array ``[n, l]`` and exponent."""
        t1, t2, t3 = self.tables
        ncols = 1 << (self.N + k)
        A, e1 = t1.level(k, ncols)
        A = A[:, 1::2]
        B, e2 = t2.level(k - L, ncols)
        C, e3 = t3.level(k - L, ncols)
        shape = (1 << (self.M - k), 1 << L, ncols >> 1)
        B = B[:, 0::2].reshape(shape)
        C = C[:, 0::2].reshape(shape)
        prod = exact.mul(B, C)
        half = 1 << (L - 1)
        S = exact.add(exact.total(prod[:, :half], axis=1), exact.total(prod[:, half:], axis=1), -1)
        return exact.mul(A, S), e1 + e2 + e3 + L - 2 * k

    def all_terms(self, L: int) -> dict[int, tuple[np.ndarray, int]]:
        return {k: self.scale_terms(k, L) for k in range(1 - self.N, self.M + 1)}

    def value(self, L: int, bitiles: Iterable[Bitile] | None = None,
              coefficients: Mapping[Bitile, DyadicRational] | None = None) -> DyadicRational:
        terms = self.all_terms(L)
        if bitiles is None and coefficients is None:
            total = ZERO
            for arr, e in terms.values():
                total = total + DyadicRational(exact.total(arr), e)
            return total
        if bitiles is None:
            bitiles = [bitile(k, n, l) for k, (arr, _) in terms.items()
                       for n in range(arr.shape[0]) for l in range(arr.shape[1])]
        total = ZERO
        for P in bitiles:
            total = total + _term(terms, P, coefficients)
        return total

    def terms(self, L: int, bitiles: Iterable[Bitile],
              coefficients: Mapping[Bitile, DyadicRational] | None = None) -> dict:
        terms = self.all_terms(L)
        return {P: _term(terms, P, coefficients) for P in bitiles}


def _term(terms, P: Bitile, coefficients) -> DyadicRational:
    arr, e = terms[P.k]
    t = DyadicRational(int(arr[P.n, P.l]), e)
    if coefficients is not None and P in coefficients:
        t = t * coefficients[P]
    return t


def bitile_term_cellwise(P: Bitile, L: int, f1: StepFunction, f2: StepFunction,
                         f3: StepFunction) -> DyadicRational:
    """One term by materializing the four factors and integrating cell by cell."""
    support = max(f.support for f in (f1, f2, f3))
    wd = packet(P.lower, support, max(_depth_for(P.lower), 0))
    p1 = projection(f1, [P.upper])
    minimal = minimal_tiles(dilate_rect(P.lower, L))
    p2 = projection(f2, minimal, check_disjoint=False)
    p3 = projection(f3, minimal, check_disjoint=False)
    return (wd * p1 * p2 * p3).integral()


def lambda_form(spec: FormSpec, f1: StepFunction, f2: StepFunction, f3: StepFunction,
                method: str = "fast", with_terms: bool = False):
    """Exact value of the form over ``spec.bitiles``; with ``with_terms`` also the per-bitile terms."""
    U = spec.universe
    _check_inputs(U, (f1, f2, f3))
    if method == "fast":
        ev = FormEvaluator(f1, f2, f3, U.N, U.M)
        if not with_terms:
            bitiles = None if spec.bitiles is None else spec.bitiles
            return ev.value(U.L, bitiles, spec.coefficients)
        terms = ev.terms(U.L, spec.members(), spec.coefficients)
    elif method == "cellwise":
        terms = {}
        for P in spec.members():
            t = bitile_term_cellwise(P, U.L, f1, f2, f3)
            if spec.coefficients is not None and P in spec.coefficients:
                t = t * spec.coefficients[P]
            terms[P] = t
    else:
        raise ValueError(f"unknown method {method!r}")
    total = sum(terms.values(), ZERO)
    return (total, terms) if with_terms else total


def _check_inputs(U: TileUniverse, fs):
    for f in fs:
        if f.support > U.M:
            raise GeometryError("function support exceeds [0, 2^M)")
        if f.resolution > U.r:
            raise GeometryError("function resolution finer than the universe")


@dataclass
class TreeForm:
    total: DyadicRational
    top: DyadicRational
    up: DyadicRational
    down: DyadicRational
    terms: dict = field(default_factory=dict, repr=False)


def tree_lambda(T: Tree, spec: FormSpec, f1, f2, f3) -> TreeForm:
    """The form over a tree with its split into top, ``T_u`` and ``T_d`` parts."""
    if spec.bitiles is not None and not T.members <= spec.bitiles:
        raise GeometryError("tree is not contained in the summation set")
    top, up, down = tree_split(T)
    _, terms = lambda_form(spec.restricted(T.members), f1, f2, f3, with_terms=True)
    parts = [terms[top], sum((terms[P] for P in up), ZERO), sum((terms[P] for P in down), ZERO)]
    return TreeForm(parts[0] + parts[1] + parts[2], *parts, terms=terms)


# ---- telescoping structure of the T_d part --------------------------------------------

def _target(T: Tree, L: int) -> tuple[int, int]:
    """``2^L xi`` for ``xi`` the left endpoint of ``omega_T``, as ``(index, exponent)``."""
    return T.top.l, T.top.kf + L


def band_projection(h: StepFunction, P: Bitile, m: int, T: Tree, L: int) -> StepFunction:
    """``Pi_{I_P x omega}`` with ``omega`` the interval of length ``2^m/|I_P|`` holding ``2^L xi``."""
    idx, ex = _target(T, L)
    s = P.k - m
    # frequency interval of length 2^-s containing idx * 2^ex
    shift = -s - ex
    l = idx >> shift if shift >= 0 else idx << -shift
    tiles = [tile(s, (P.n << m) + i, l) for i in range(1 << m)]
    return projection(h, tiles, check_disjoint=False)


def band_delta(h: StepFunction, P: Bitile, m: int, T: Tree, L: int) -> StepFunction:
    """``Pi^Delta_{l+m} h`` on ``I_P``; ``m = 0`` gives ``Pi_l h`` itself."""
    if m == 0:
        return band_projection(h, P, 0, T, L)
    return band_projection(h, P, m, T, L) - band_projection(h, P, m - 1, T, L)


def _haar_factor(P: Bitile, h1: StepFunction) -> StepFunction:
    support = h1.support
    return packet(P.lower, support, max(_depth_for(P.lower), 0)) * projection(h1, [P.upper])


def vanishing_integral(P: Bitile, T: Tree, L: int, h1, h2, h3, m: int, m2: int) -> DyadicRational:
    """``int w_{P_d} Pi_{P_u} h1 Pi^Delta_{l+m} h2 Pi^Delta_{l+m2} h3``."""
    return (_haar_factor(P, h1) * band_delta(h2, P, m, T, L) * band_delta(h3, P, m2, T, L)).integral()


def telescoping_split(T: Tree, L: int, h1, h2, h3) -> tuple[DyadicRational, DyadicRational, DyadicRational]:
    """The three surviving sums of the telescoped ``T_d`` form.

    ``(Pi_l h2 . Pi^D_{l+1} h3, Pi^D_{l+1} h2 . Pi_l h3, sum_{m=2..L} Pi^D_{l+m} h2 . Pi^D_{l+m} h3)``
    against ``w_{P_d} Pi_{P_u} h1`` and summed over ``T_d``.
    """
    _, _, down = tree_split(T)
    a = b = c = ZERO
    for P in down:
        haar = _haar_factor(P, h1)
        d2 = [band_delta(h2, P, m, T, L) for m in range(L + 1)]
        d3 = [band_delta(h3, P, m, T, L) for m in range(L + 1)]
        a = a + (haar * d2[0] * d3[1]).integral()
        b = b + (haar * d2[1] * d3[0]).integral()
        for m in range(2, L + 1):
            c = c + (haar * d2[m] * d3[m]).integral()
    return a, b, c
