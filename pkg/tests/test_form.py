from fractions import Fraction

import numpy as np
import pytest

from oracles import quartile_form, quartile_term
from walsh_quartile.dyadic import DyadicRational
from walsh_quartile.forest import Tree, enlarged_projection, tree_split
from walsh_quartile.form import (FormEvaluator, FormSpec, band_delta, band_projection, lambda_form,
                                 telescoping_split, tree_lambda, vanishing_integral)
from walsh_quartile.stepfunction import StepFunction
from walsh_quartile.tiles import GeometryError, TileUniverse, bitile, convex_hull, rect_le
from walsh_quartile.walsh import projection


def _rand(rng, M, r, den=4):
    vals = [Fraction(int(v), den) for v in rng.integers(-den, den + 1, 2 ** (M + r))]
    return vals, StepFunction.from_values(vals, M, r)


def _key(P):
    return (P.k, P.n, P.l)


def test_worked_single_bitile():
    U = TileUniverse(1, 0, 2, 4)
    f1 = StepFunction.indicator_interval(0, "1/2", 0, 4)
    f2 = StepFunction.indicator_interval(0, "1/4", 0, 4)
    spec = FormSpec(U, {bitile(0, 0, 0)})
    assert lambda_form(spec, f1, f2, f2) == DyadicRational.coerce("1/8")
    assert lambda_form(spec, f1, f2, f2, method="cellwise") == DyadicRational.coerce("1/8")
    vals = lambda f: [c.to_fraction() for c in f.cells()]
    assert quartile_term((0, 0, 0), 2, vals(f1), vals(f2), vals(f2), 0, 4) == Fraction(1, 8)


def test_fast_cellwise_and_oracle_agree():
    rng = np.random.default_rng(0)
    U = TileUniverse(2, 1, 2)
    for _ in range(3):
        (a, f1), (b, f2), (c, f3) = (_rand(rng, U.M, U.r) for _ in range(3))
        spec = FormSpec(U)
        fast, terms = lambda_form(spec, f1, f2, f3, with_terms=True)
        slow = lambda_form(spec, f1, f2, f3, method="cellwise")
        want = quartile_form([_key(P) for P in U.bitiles()], U.L, a, b, c, U.M, U.r)
        assert fast == slow and fast.to_fraction() == want
        for P in list(terms)[:6]:
            assert terms[P].to_fraction() == quartile_term(_key(P), U.L, a, b, c, U.M, U.r)


def test_larger_L_matches_oracle():
    rng = np.random.default_rng(1)
    U = TileUniverse(2, 0, 3)
    (a, f1), (b, f2), (c, f3) = (_rand(rng, U.M, U.r) for _ in range(3))
    want = quartile_form([_key(P) for P in U.bitiles()], U.L, a, b, c, U.M, U.r)
    assert lambda_form(FormSpec(U), f1, f2, f3).to_fraction() == want


def test_constant_first_function_gives_zero():
    rng = np.random.default_rng(2)
    U = TileUniverse(2, 1, 2)
    one = StepFunction.indicator_interval(0, 2, 1, U.r)
    _, f2 = _rand(rng, U.M, U.r)
    _, f3 = _rand(rng, U.M, U.r)
    assert lambda_form(FormSpec(U), one, f2, f3) == 0


def test_coefficients_scale_terms():
    rng = np.random.default_rng(3)
    U = TileUniverse(2, 1, 2)
    fs = [_rand(rng, U.M, U.r)[1] for _ in range(3)]
    bts = U.bitiles()
    coeffs = {P: DyadicRational.coerce(-1 if i % 2 else "1/2") for i, P in enumerate(bts)}
    _, terms = lambda_form(FormSpec(U), *fs, with_terms=True)
    want = sum((terms[P] * coeffs[P] for P in bts), DyadicRational(0))
    assert lambda_form(FormSpec(U, coefficients=coeffs), *fs) == want
    with pytest.raises(ValueError):
        FormSpec(U, coefficients={bts[0]: 2})


def test_inputs_checked():
    U = TileUniverse(2, 0, 2)
    f = StepFunction.zeros(1, U.r)
    with pytest.raises(GeometryError):
        lambda_form(FormSpec(U), f, f, f)


def test_evaluator_reuses_tables_across_L():
    rng = np.random.default_rng(4)
    fs = [_rand(rng, 1, 2)[1] for _ in range(3)]
    ev = FormEvaluator(*fs, 2, 1)
    for L in (2, 3, 5):
        U = TileUniverse(2, 1, L)
        assert ev.value(L) == lambda_form(FormSpec(U), *fs)


def _random_tree(rng, U, need_down=True):
    bts = U.bitiles()
    while True:
        top = bts[rng.integers(len(bts))]
        below = [P for P in bts if rect_le(P, top)]
        pick = rng.choice(len(below), size=min(4, len(below)), replace=False)
        T = Tree(top, frozenset(convex_hull({top} | {below[i] for i in pick})))
        if not need_down or tree_split(T)[2]:
            return T


def test_tree_form_parts_and_substitution():
    rng = np.random.default_rng(5)
    U = TileUniverse(3, 1, 2)
    for _ in range(8):
        T = _random_tree(rng, U)
        fs = [_rand(rng, U.M, U.r)[1] for _ in range(3)]
        spec = FormSpec(U)
        tf = tree_lambda(T, spec, *fs)
        assert tf.total == lambda_form(FormSpec(U, T.members), *fs)
        assert tf.total == tf.top + tf.up + tf.down
        # the T_d form only sees the tree projections of its inputs
        down = FormSpec(U, tree_split(T)[2])
        h1 = projection(fs[0], T.tiling())
        h2, h3 = (enlarged_projection(f, T, U.L) for f in fs[1:])
        assert lambda_form(down, *fs) == lambda_form(down, h1, h2, h3)


def test_telescoping_and_vanishing():
    rng = np.random.default_rng(6)
    U = TileUniverse(3, 1, 3)
    for _ in range(6):
        T = _random_tree(rng, U)
        fs = [_rand(rng, U.M, U.r)[1] for _ in range(3)]
        h = (projection(fs[0], T.tiling()),) + tuple(enlarged_projection(f, T, U.L) for f in fs[1:])
        down = tree_split(T)[2]
        a, b, c = telescoping_split(T, U.L, *h)
        assert a + b + c == lambda_form(FormSpec(U, down), *h)
        for P in down:
            for m, m2 in ((1, 2), (2, 1), (3, 1), (2, 3)):
                assert vanishing_integral(P, T, U.L, *h, m, m2) == 0


def test_band_deltas_telescope():
    rng = np.random.default_rng(7)
    U = TileUniverse(3, 1, 3)
    T = _random_tree(rng, U)
    _, f = _rand(rng, U.M, U.r)
    h = enlarged_projection(f, T, U.L)
    P = next(iter(tree_split(T)[2]))
    total = sum((band_delta(h, P, m, T, U.L) for m in range(1, U.L + 1)), band_delta(h, P, 0, T, U.L))
    assert total == band_projection(h, P, U.L, T, U.L)
