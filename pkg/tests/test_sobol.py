import io

import numpy as np
import pytest
from scipy import stats
from scipy.stats import qmc

from rqmc_sqn.sobol import (
    MAX_INDEX,
    DirectionNumberError,
    MCSampler,
    SobolIndexError,
    SobolSampler,
    default_direction_numbers,
    draw_batch,
    load_direction_numbers,
    make_sampler,
    mc_batch,
    next_point,
)


def radical_inverse(i):
    """Base-2 digit reversal computed with plain integer arithmetic."""
    x, scale = 0.0, 0.5
    while i:
        x += scale * (i & 1)
        i >>= 1
        scale /= 2
    return x


class TestDirectionNumbers:
    def test_first_data_row(self):
        table = load_direction_numbers(io.StringIO("d s a m_i\n2 1 0 1\n"))
        # entry 0 is the synthesized dimension 1
        assert table.dimension == 2
        entry = table.degree[1], table.coeff[1], list(table.m[1])
        assert entry == (1, 0, [1])

    def test_empty_stream_dimension_one(self):
        table = load_direction_numbers(io.BytesIO(b""), dimension=1)
        assert table.dimension == 1
        v = table.matrix(1)
        assert v.shape == (1, 32)
        assert v[0, 0] == 1 << 31

    def test_even_m_rejected(self):
        with pytest.raises(DirectionNumberError):
            load_direction_numbers(io.StringIO("d s a m_i\n2 1 0 2\n"))

    def test_malformed_rows(self):
        for text in ("h\n2 1 0\n", "h\n2 x 0 1\n", "h\n3 1 0 1\n", "h\n2 2 0 1 3\n2 1 0 1\n", "h\n2 1 0 3\n"):
            with pytest.raises(DirectionNumberError):
                load_direction_numbers(io.StringIO(text))

    def test_dimension_exceeds_table(self):
        with pytest.raises(DirectionNumberError):
            load_direction_numbers(io.StringIO("h\n2 1 0 1\n"), dimension=3)

    def test_bundled_table_matches_scipy_points(self):
        pts = SobolSampler(50, "none").draw_batch(1024).points
        ref = qmc.Sobol(50, scramble=False).random(1024)
        # scipy emits Gray-code order; the point sets coincide
        assert np.array_equal(np.unique(pts, axis=0), np.unique(ref, axis=0))

    def test_bundled_table_size(self):
        assert default_direction_numbers().dimension >= 1000


class TestNextPoint:
    def test_van_der_corput_start(self):
        s = SobolSampler(1, "none")
        assert [next_point(s)[0] for _ in range(4)] == [0.0, 0.5, 0.25, 0.75]

    def test_radical_inverse_oracle(self):
        x = SobolSampler(1, "none").draw_batch(4096).points[:, 0]
        assert np.array_equal(x, [radical_inverse(i) for i in range(4096)])

    @pytest.mark.parametrize("dim", [1, 3, 17])
    def test_index_zero_is_origin(self, dim):
        assert np.all(SobolSampler(dim, "none").next_point() == 0.0)

    def test_clones_identical(self):
        a = SobolSampler(4, "scramble", seed=9)
        b = a.clone()
        assert np.array_equal(a.next_point(), b.next_point())
        assert np.array_equal(a.draw_batch(32).points, b.draw_batch(32).points)

    def test_overflow(self):
        s = SobolSampler(2, "none", index=MAX_INDEX - 1)
        s.next_point()
        with pytest.raises(SobolIndexError):
            s.next_point()


class TestDrawBatch:
    def test_single_unscrambled(self):
        b = draw_batch(SobolSampler(2, "none"), 1)
        assert b.points.tolist() == [[0.0, 0.0]] and b.k == 0

    @pytest.mark.parametrize("mode", ["none", "shift", "scramble"])
    def test_distinct_in_range(self, mode):
        p = SobolSampler(2, mode, seed=1).draw_batch(8).points
        assert p.shape == (8, 2)
        assert np.all((p >= 0) & (p < 1))
        assert len(np.unique(p, axis=0)) == 8

    def test_scrambled_mean(self):
        p = SobolSampler(3, "scramble", seed=4).draw_batch(512).points
        assert abs(p[:, 0].mean() - 0.5) <= 3 / np.sqrt(12 * 512)

    def test_fresh_randomization_per_batch(self):
        s = SobolSampler(3, "scramble", seed=2)
        a, b = s.draw_batch(16), s.draw_batch(16)
        assert (a.k, b.k) == (0, 1)
        assert not np.array_equal(a.points, b.points)

    def test_unrandomized_continues(self):
        s = SobolSampler(2, "none")
        first, second = s.draw_batch(4).points, s.draw_batch(4).points
        assert np.array_equal(np.vstack([first, second]), SobolSampler(2, "none").draw_batch(8).points)

    def test_same_seed_same_stream(self):
        a, b = SobolSampler(5, "scramble", seed=3), SobolSampler(5, "scramble", seed=3)
        for _ in range(3):
            assert np.array_equal(a.draw_batch(10).points, b.draw_batch(10).points)

    def test_batch_size_validation(self):
        with pytest.raises(ValueError):
            SobolSampler(2).draw_batch(0)

    def test_first_point_marginally_uniform(self):
        first = np.array([SobolSampler(4, "scramble", seed=r).draw_batch(1).points[0] for r in range(200)])
        for j in range(4):
            assert stats.kstest(first[:, j], "uniform").pvalue > 0.001

    @pytest.mark.parametrize("m", range(0, 14))
    def test_dyadic_equidistribution(self, m):
        n = 2**m
        x = SobolSampler(1, "none").draw_batch(n).points[:, 0]
        assert np.array_equal(np.sort(np.floor(x * n)), np.arange(n))

    def test_scrambled_projections_stay_nets(self):
        n = 256
        p = SobolSampler(6, "scramble", seed=5).draw_batch(n).points
        for j in range(6):
            assert np.array_equal(np.sort(np.floor(p[:, j] * n)), np.arange(n))


class TestMonteCarlo:
    def test_same_seed(self):
        assert np.array_equal(mc_batch(1, 10, 3).points, mc_batch(1, 10, 3).points)

    def test_mean(self):
        x = mc_batch(0, 10_000, 1).points[:, 0]
        assert abs(x.mean() - 0.5) <= 5 * np.sqrt(1 / 12 / 10_000)

    def test_seeds_differ(self):
        assert not np.array_equal(mc_batch(1, 4, 2).points, mc_batch(2, 4, 2).points)

    def test_iteration_index(self):
        s = MCSampler(2, seed=0)
        assert [s.draw_batch(3).k for _ in range(3)] == [0, 1, 2]


def test_make_sampler_kinds():
    assert isinstance(make_sampler("mc", 2), MCSampler)
    assert make_sampler("rqmc", 2).randomization.value == "scramble"
    assert make_sampler("qmc", 2).randomization.value == "none"
    with pytest.raises(ValueError):
        make_sampler("halton", 2)
    assert not np.array_equal(make_sampler("rqmc", 3, 0, 0).draw_batch(4).points,
                              make_sampler("rqmc", 3, 0, 1).draw_batch(4).points)


def test_rmse_rates():
    ns = [2**k for k in range(3, 12)]
    slopes = {}
    for kind in ("mc", "rqmc"):
        rmse = []
        for n in ns:
            est = [make_sampler(kind, 8, r).draw_batch(n).points.sum(axis=1).mean() for r in range(30)]
            rmse.append(np.sqrt(np.mean((np.array(est) - 4.0) ** 2)))
        slopes[kind] = np.polyfit(np.log2(ns), np.log2(rmse), 1)[0]
    assert -0.6 <= slopes["mc"] <= -0.4
    assert slopes["rqmc"] <= -1.0
