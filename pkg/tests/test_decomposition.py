from fractions import Fraction

import numpy as np
import pytest

from oracles import maximal_average_pow
from walsh_quartile.decomposition import (ExceptionalSet, MajorityError, SelectionError,
                                          SizePreconditionError, SupportError, bitiles_outside,
                                          counting_bounds, dyadic_maximal_pow, exceptional_set,
                                          full_decomposition, major_subset,
                                          multi_frequency_decomposition, parseval_piece,
                                          select_trees, start_level)
from walsh_quartile.dyadic import ZERO, DyadicRational
from walsh_quartile.forest import EnergyTable, Forest, Tree, size_sq, tree_split
from walsh_quartile.form import FormEvaluator
from walsh_quartile.stepfunction import DyadicSet, StepFunction
from walsh_quartile.tiles import TileUniverse, bitile, convex_hull, tile
from walsh_quartile.walsh import packet

D = DyadicRational.coerce


def _random_convex(rng, U, picks):
    bts = U.bitiles()
    return convex_hull(bts[i] for i in rng.choice(len(bts), size=picks, replace=False))


def _sparse(rng, U):
    n = 2 ** (U.M + U.r)
    num = rng.integers(-4, 5, n) * (rng.random(n) < 2.0 ** -int(rng.integers(0, 4)))
    return StepFunction(num, -2 - int(rng.integers(0, 4)), U.r, U.M)


def test_single_bitile_is_one_phase_one_tree():
    U = TileUniverse(1, 0, 2, 4)
    f = StepFunction.indicator_interval(0, "1/2", 0, 4)
    sel = select_trees({bitile(0, 0, 0)}, f, 0, 2, universe=U)
    assert sel.forest.phases == [1] and not sel.remainder


def test_selection_contract_on_random_instances():
    rng = np.random.default_rng(0)
    for L in (2, 4):
        U = TileUniverse(3, 2, L)
        for _ in range(8):
            P = _random_convex(rng, U, 6)
            f = _sparse(rng, U)
            s = size_sq(P, f, L, U)
            k = start_level(s) if s else 0
            sel = select_trees(P, f, k, L, universe=U)
            assert sel.remainder_size_sq <= DyadicRational.pow2(-2 * k - 2)
            assert size_sq(sel.remainder, f, L, U) == sel.remainder_size_sq
            selected = set().union(*(T.members for T in sel.forest)) if len(sel.forest) else set()
            assert selected | sel.remainder == P and not selected & sel.remainder
            b = counting_bounds(sel.forest, f, k, U.M)
            assert b["global_ok"] and b["local_ok"]


def test_precondition_and_threshold_checks():
    U = TileUniverse(1, 0, 2, 4)
    f = StepFunction.indicator_interval(0, 1, 0, 4)
    with pytest.raises(SizePreconditionError):
        select_trees({bitile(0, 0, 0)}, f, 3, 2, universe=U)
    with pytest.raises(ValueError):
        select_trees({bitile(0, 0, 0)}, f, 0, 2, universe=U, thresholds=(-2, -3))


def _phase_instance(top, half):
    """Energy placed on one half of every non-top member below ``top``."""
    U = TileUniverse(3, 2, 2)
    T = Tree.downset(top, U.bitiles())
    _, up, down = tree_split(T)
    group = up if half == "lower" else down
    f = StepFunction.zeros(U.M, U.r)
    for Q in group:
        f = f + packet(getattr(Q, half), U.M, U.r)
    return U, f * D("5/32")


@pytest.mark.parametrize("tie_break", ["default", "alternate"])
def test_phase_two_fires(tie_break):
    U, f = _phase_instance(bitile(2, 0, 15), "lower")
    sel = select_trees(U.bitiles(), f, 0, 0, universe=U, tie_break=tie_break,
                       thresholds=(-4, -4))
    assert 2 in sel.forest.phases
    assert sel.remainder_size_sq <= D("1/4")


@pytest.mark.parametrize("tie_break", ["default", "alternate"])
def test_phase_three_fires(tie_break):
    U, f = _phase_instance(bitile(2, 0, 0), "upper")
    sel = select_trees(U.bitiles(), f, 0, 0, universe=U, tie_break=tie_break,
                       thresholds=(-4, -4))
    assert 3 in sel.forest.phases
    assert sel.remainder_size_sq <= D("1/4")


def test_tree_phases_are_inert_with_proof_constants():
    # with (-8, -4) the single-bitile phase already removes what phase two would see
    U, f = _phase_instance(bitile(2, 0, 15), "lower")
    sel = select_trees(U.bitiles(), f, 0, 0, universe=U)
    assert set(sel.forest.phases) == {1}


def test_tie_break_orders_both_satisfy_contract():
    rng = np.random.default_rng(1)
    U = TileUniverse(3, 2, 2)
    for _ in range(6):
        P = _random_convex(rng, U, 8)
        f = _sparse(rng, U)
        s = size_sq(P, f, 2, U)
        k = start_level(s) if s else 0
        for tb in ("default", "alternate"):
            sel = select_trees(P, f, k, 2, universe=U, tie_break=tb)
            assert sel.remainder_size_sq <= DyadicRational.pow2(-2 * k - 2)
            b = counting_bounds(sel.forest, f, k, U.M)
            assert b["global_ok"] and b["local_ok"]


def test_bessel_over_phase_one_bitiles():
    rng = np.random.default_rng(2)
    U = TileUniverse(3, 2, 2)
    for _ in range(6):
        f = _sparse(rng, U)
        table = EnergyTable(f, 2, U)
        P = set(U.bitiles())
        s = size_sq(P, f, 2, U)
        if not s:
            continue
        sel = select_trees(P, f, start_level(s), 2, table=table)
        tops = [T.top for T, ph in zip(sel.forest, sel.forest.phases) if ph == 1]
        total = sum((table.value(Q.upper) + table.value(Q.lower) for Q in tops), ZERO)
        assert total <= f.norm_sq()


def test_start_level():
    assert start_level(D(1)) == 0
    assert start_level(D("1/4")) == 1
    assert start_level(D("1/8")) == 1
    assert start_level(D(4)) == -1
    assert start_level(D(3)) == -1


def test_full_decomposition_is_a_partition_and_additive():
    rng = np.random.default_rng(3)
    U = TileUniverse(3, 2, 2)
    for _ in range(5):
        P = _random_convex(rng, U, 8)
        f1 = _sparse(rng, U)
        trace = full_decomposition(P, f1, 2, k_max=12, universe=U)
        assert trace.check_partition()
        ks = [k for k, _, _ in trace.levels]
        assert ks == list(range(ks[0], ks[0] + len(ks)))
        fs = [f1, _sparse(rng, U), _sparse(rng, U)]
        ev = FormEvaluator(*fs, U.N, U.M)
        terms = ev.terms(2, P)
        total = sum((terms[Q] for T in trace.trees() for Q in T.members), ZERO)
        total = total + sum((terms[Q] for Q in trace.remainder), ZERO)
        assert total == ev.value(2, P)


def test_maximal_function_matches_oracle():
    rng = np.random.default_rng(4)
    for _ in range(10):
        vals = [Fraction(int(v), 4) for v in rng.integers(0, 5, 16)]
        f = StepFunction.from_values(vals, 1, 3)
        got = [c.to_fraction() for c in dyadic_maximal_pow(f).refine(3).cells()]
        assert got == maximal_average_pow(vals, 1, 3)
        sq = [c.to_fraction() for c in dyadic_maximal_pow(f, 2).refine(3).cells()]
        assert sq == maximal_average_pow([v * v for v in vals], 1, 3)


def test_exceptional_set_empty_for_comparable_sets():
    E1 = DyadicSet.from_intervals([(0, 1)], 1, 4)
    E3 = DyadicSet.from_intervals([("1/2", "3/2")], 1, 4)
    F = exceptional_set([(E1, 2, Fraction(1, 2)), (E3, 2, Fraction(1, 2))])
    assert F.F.is_empty() and F.intervals == []


def test_exceptional_set_covers_tiny_set():
    E3 = DyadicSet.from_intervals([("3/4096", "4/4096")], 3, 12)
    eps = Fraction(1, 12)
    F = exceptional_set([(E3, 1 / (1 - eps), 1 - eps)])
    assert E3.issubset(F.F)
    assert F.measure().shift(1) < D(1)
    assert F.intervals == [(-11, 1)]


def test_exceptional_set_level_is_exact():
    # M(1_E) on [0,1/2) is 1, on [1/2,1) is 1/2; |E| = 1/2, q = 1, beta = 0
    E = DyadicSet.from_intervals([(0, "1/2")], 0, 1)
    assert exceptional_set([(E, 1, 0)], threshold_exp=-1).F == E
    assert exceptional_set([(E, 1, 0)], threshold_exp=Fraction(-3, 2)).F.measure() == 1


def test_major_subset():
    E = DyadicSet.from_intervals([(0, 1)], 0, 2)
    F = ExceptionalSet(DyadicSet.from_intervals([(0, "1/4")], 0, 2), [(-2, 0)])
    E2 = major_subset(E, F)
    assert E2.measure() == D("3/4")
    empty = ExceptionalSet(DyadicSet.empty(0, 2), [])
    assert major_subset(E, empty) == E
    big = ExceptionalSet(DyadicSet.from_intervals([(0, "3/4")], 0, 2), [(-1, 0), (-2, 2)])
    with pytest.raises(MajorityError):
        major_subset(E, big)


def _forest_over(U, F, g):
    P = bitiles_outside(U, F)
    trace = full_decomposition(P, g, 0, k_max=0, universe=U)
    return trace.levels[0]


def test_multi_frequency_member_packet():
    U = TileUniverse(2, 1, 2)
    F = ExceptionalSet(DyadicSet.from_intervals([(0, "1/8")], 1, U.r), [(-3, 0)])
    # the minimal tiles of 2^L P_d have width 1/4 and frequency [2, 3) * 4
    P = bitile(0, 0, 1)
    p = tile(-3, 0, 1)
    forest = Forest([Tree(P, frozenset({P}))], 0, [1])
    g3 = packet(p, U.M, U.r)
    mf = multi_frequency_decomposition(forest, g3, F, 0, U.L)
    assert mf.packets[(-3, 0)] == [p]
    assert mf.a == g3


def test_multi_frequency_support_precondition():
    U = TileUniverse(2, 1, 2)
    F = ExceptionalSet(DyadicSet.from_intervals([(0, "1/4")], 1, U.r), [(-2, 0)])
    g3 = StepFunction.indicator_interval(0, "1/2", 1, U.r)
    with pytest.raises(SupportError):
        multi_frequency_decomposition(Forest([]), g3, F, 0, U.L)


def test_multi_frequency_substitution_and_counts():
    rng = np.random.default_rng(5)
    U = TileUniverse(3, 2, 2, 6)
    for _ in range(5):
        Fs = DyadicSet.from_intervals([(Fraction(int(q), 8), Fraction(int(q) + 1, 8))
                                       for q in rng.choice(32, 3, replace=False)], U.M, U.r)
        F = ExceptionalSet(Fs, Fs.maximal_intervals())
        g1 = _sparse(rng, U)
        g2 = _sparse(rng, U).restrict(DyadicSet(~Fs.mask, U.r, U.M))
        g3 = _sparse(rng, U).restrict(Fs).shift_values(3)
        k, forest, _ = _forest_over(U, F, g1)
        mf = multi_frequency_decomposition(forest, g3, F, k, U.L)
        for I, tiles in mf.packets.items():
            assert len(tiles) <= mf.counts[I]
            assert parseval_piece(g3, tiles) == mf.pieces[I].norm_sq()
        # pieces live on disjoint intervals, so their energies add up
        assert mf.a.norm_sq() == sum((a.norm_sq() for a in mf.pieces.values()), ZERO)
        by_level = StepFunction.zeros(U.M, U.r)
        for a_m, _ in mf.levels.values():
            by_level = by_level + a_m
        assert by_level == mf.a
        base = FormEvaluator(g1, g2, g3, U.N, U.M).terms(U.L, forest.bitiles())
        alt = FormEvaluator(g1, g2, mf.a, U.N, U.M).terms(U.L, forest.bitiles())
        for T in forest:
            assert sum((base[P] for P in T.members), ZERO) == sum((alt[P] for P in T.members), ZERO)


def test_selection_error_is_runtime_error():
    assert issubclass(SelectionError, RuntimeError)
