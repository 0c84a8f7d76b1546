from fractions import Fraction

import numpy as np
import pytest

from oracles import packet_values, project_tiles, tile_coefficient
from walsh_quartile.stepfunction import StepFunction
from walsh_quartile.tiles import TileUniverse, bitile, convex_union_tiling, tile
from walsh_quartile.walsh import (OverlappingTilesError, PacketTable, coefficient, find_overlap,
                                  packet, projection, region_projection, walsh_pattern)

M, R = 1, 3


def _random_f(rng, M=M, R=R):
    vals = [Fraction(int(v), 4) for v in rng.integers(-4, 5, 2 ** (M + R))]
    return vals, StepFunction.from_values(vals, M, R)


def test_packets_match_rademacher_products():
    U = TileUniverse(1, M, 2, R)
    for p in U.tiles(R):
        assert list(packet(p, M, R).num) == packet_values(p.k, p.n, p.l, M, R)


def test_known_packet():
    # [0,1) x [2,3): +1 -1 +1 -1 on quarters
    assert list(walsh_pattern(2, 2)) == [1, -1, 1, -1]


def test_coefficients_and_table_match_oracle():
    rng = np.random.default_rng(0)
    vals, f = _random_f(rng)
    T = PacketTable(f)
    for p in TileUniverse(1, M, 2, R).tiles(R):
        want = tile_coefficient(vals, p.k, p.n, p.l, M, R)
        assert coefficient(f, p).to_fraction() == want
        assert T.coef(p).to_fraction() == want


def test_table_levels_below_resolution():
    f = StepFunction.from_values([1, 2, 3, 4], 0, 2)
    T = PacketTable(f)
    # tiles narrower than a cell: the zero frequency carries the value times the width
    assert T.coef(tile(-4, 5, 0)).to_fraction() == Fraction(2, 16)
    assert T.coef(tile(-4, 5, 3)) == 0


def test_projection_matches_oracle():
    rng = np.random.default_rng(1)
    vals, f = _random_f(rng)
    tiles = [tile(0, 0, 1), tile(-1, 2, 0), tile(-1, 3, 0), tile(-2, 1, 1)]
    got = projection(f, tiles).refine(R)
    want = project_tiles(vals, [(p.k, p.n, p.l) for p in tiles], M, R)
    assert [c.to_fraction() for c in got.cells()] == want


def test_projection_rejects_overlap():
    f = StepFunction.zeros(0, 2)
    with pytest.raises(OverlappingTilesError):
        projection(f, [tile(0, 0, 0), tile(-1, 0, 0)])
    assert find_overlap([tile(0, 0, 2), tile(-1, 0, 0)]) is None


def test_full_tiling_is_identity_and_parseval():
    rng = np.random.default_rng(2)
    _, f = _random_f(rng)
    full = [tile(M, 0, l) for l in range(2 ** (M + R))]
    assert projection(f, full) == f
    energy = sum((coefficient(f, p) ** 2).shift(-p.k).to_fraction() for p in full)
    assert energy == f.norm_sq().to_fraction()


def test_projection_independent_of_tiling():
    rng = np.random.default_rng(3)
    _, f = _random_f(rng, 1, 4)
    S = [bitile(0, 0, 1), bitile(0, 1, 1), bitile(1, 0, 0)]
    a = projection(f, convex_union_tiling(S, "time"))
    b = region_projection(f, S, prefer="frequency")
    assert a == b


def test_projection_idempotent():
    rng = np.random.default_rng(4)
    _, f = _random_f(rng)
    tiles = [tile(-1, 0, 1), tile(0, 1, 0)]
    p = projection(f, tiles)
    assert projection(p, tiles) == p
