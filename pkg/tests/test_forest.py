from fractions import Fraction

import numpy as np
import pytest

from oracles import dyadic_bmo
from walsh_quartile.dyadic import DyadicRational
from walsh_quartile.forest import (EnergyTable, Forest, Tree, counting_function,
                                   dyadic_bmo_norm, enlarged_projection, enlarged_region,
                                   enlarged_tree, size_sq, tree_size_sq, tree_split)
from walsh_quartile.stepfunction import StepFunction
from walsh_quartile.tiles import (InvalidTreeError, NotConvexError, TileUniverse, bitile,
                                  convex_hull, rect_le)
from walsh_quartile.walsh import projection


def _random_tree(rng, U):
    bts = U.bitiles()
    top = bts[rng.integers(len(bts))]
    below = [P for P in bts if rect_le(P, top)]
    pick = rng.choice(len(below), size=min(4, len(below)), replace=False)
    return Tree(top, frozenset(convex_hull({top} | {below[i] for i in pick})))


def test_tree_validation():
    with pytest.raises(InvalidTreeError):
        Tree(bitile(0, 0, 0), frozenset({bitile(0, 0, 0), bitile(0, 1, 0)}))
    T = Tree.downset(bitile(1, 0, 0), TileUniverse(2, 1).bitiles())
    assert T.is_convex() and len(T) == 1 + 2 + 4
    assert Tree.from_json(T.to_json()) == T


def test_forest_rejects_overlap():
    T = Tree(bitile(0, 0, 0), frozenset({bitile(0, 0, 0)}))
    with pytest.raises(InvalidTreeError):
        Forest([T, T])


def test_size_of_constant_function():
    U = TileUniverse(2, 0, 2)
    f = StepFunction.indicator_interval(0, 1, 0, U.r)
    assert size_sq(U.bitiles(), f, 0, U) == 1
    assert size_sq(U.bitiles(), f, 2, U) == 1


def test_size_of_quarter_indicator():
    U = TileUniverse(2, 0, 2)
    f = StepFunction.indicator_interval(0, "1/4", 0, U.r)
    T = Tree.downset(bitile(0, 0, 0), U.bitiles())
    assert tree_size_sq(T, f, 2) == DyadicRational.coerce("1/4")
    # the left child carries all the energy on an interval of half the length
    left = Tree.downset(bitile(-1, 0, 0), T.members)
    assert tree_size_sq(left, f, 2) == DyadicRational.coerce("1/2")
    assert size_sq(T.members, f, 2, U) == DyadicRational.coerce("1/2")


def test_energy_table_matches_explicit_projection():
    rng = np.random.default_rng(0)
    U = TileUniverse(3, 1, 2)
    f = StepFunction.from_values([Fraction(int(v), 4) for v in rng.integers(-4, 5, 2 ** (U.M + U.r))],
                                 U.M, U.r)
    table = EnergyTable(f, U.L, U)
    for _ in range(25):
        T = _random_tree(rng, U)
        # the down-set sum at the top is the energy of the tree's enlarged region
        sums = table.downset_sums(table.masks(T.members))
        got = DyadicRational(int(sums[T.top.k][T.top.n, T.top.l]), table.unit_exp)
        assert got == enlarged_projection(f, T, U.L).norm_sq()
        # size is the max over members of the same quantity for their down-sets
        best = max(tree_size_sq(Tree.downset(P, T.members), f, U.L) for P in T.members)
        assert size_sq(T.members, f, U.L, U) == best


def test_enlarged_tree_matches_region():
    U = TileUniverse(3, 1, 2)
    T = Tree.downset(bitile(0, 0, 1), U.bitiles())
    E = enlarged_tree(T, 2)
    assert E.is_convex()
    rng = np.random.default_rng(5)
    f = StepFunction.from_values([int(v) for v in rng.integers(-2, 3, 2 ** (U.M + U.r))], U.M, U.r)
    # the enlarged tree covers the same phase-plane region as the dilated tiling
    assert projection(f, E.tiling()) == enlarged_projection(f, T, 2)
    assert len(enlarged_region(T, 2)) == len(T.tiling())


def test_size_needs_convexity():
    f = StepFunction.zeros(1, 3)
    with pytest.raises(NotConvexError):
        size_sq([bitile(-1, 0, 0), bitile(1, 0, 0)], f, 0, TileUniverse(2, 1))


def test_split_of_downset():
    U = TileUniverse(3, 1, 2)
    T = Tree.downset(bitile(1, 0, 1), U.bitiles())
    top, up, down = tree_split(T)
    assert len(up) + len(down) + 1 == len(T)
    assert all(rect_le(P.upper, top) for P in up)
    assert all(rect_le(P.lower, top) for P in down)


def test_counting_function_and_bmo():
    trees = [Tree(bitile(0, 0, 0), frozenset({bitile(0, 0, 0)})),
             Tree(bitile(-1, 1, 0), frozenset({bitile(-1, 1, 0)}))]
    N = counting_function(trees, 1)
    assert [int(v) for v in N.refine(1).num] == [1, 2, 0, 0]
    vals = [Fraction(int(v)) for v in N.refine(1).num]
    assert dyadic_bmo_norm(N).to_fraction() == dyadic_bmo(vals)


def test_bmo_matches_oracle_on_random_functions():
    rng = np.random.default_rng(2)
    for _ in range(20):
        vals = [Fraction(int(v), 8) for v in rng.integers(-8, 9, 16)]
        f = StepFunction.from_values(vals, 1, 3)
        assert dyadic_bmo_norm(f).to_fraction() == dyadic_bmo(vals)
