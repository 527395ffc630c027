import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import grid_from
from oracles import gaussian_blur_ref
from seedforge import BilateralParams, GridError, bilateral_filter


class TestParams:
    def test_default_radius(self):
        assert BilateralParams().radius == 6
        assert BilateralParams(sigma_spatial=1.4).radius == 3

    def test_invalid_sigma(self):
        with pytest.raises(GridError):
            BilateralParams(sigma_spatial=0.0)
        with pytest.raises(GridError):
            BilateralParams(sigma_range=-1.0)


class TestBilateral:
    def test_constant_unchanged(self):
        g = grid_from(np.full((8, 8), 0.4))
        out = bilateral_filter(g)
        assert np.allclose(out.values, 0.4, atol=1e-12)

    def test_single_bright_voxel_preserved(self):
        # Tight range kernel: the outlier dominates its own window sum.
        values = np.zeros((9, 9))
        values[4, 4] = 1.0
        params = BilateralParams(sigma_spatial=2.0, sigma_range=0.01, radius=4)
        out = bilateral_filter(grid_from(values), params)
        # Direct evaluation at (4,4): neighbors at dI=1 get range weight
        # exp(-1/(2*1e-4)) ~ 0, so the center keeps essentially 1.0.
        assert out.values[4, 4] > 0.99

    def test_step_edge_preserved(self):
        values = np.concatenate([np.zeros((8, 4)), np.ones((8, 4))], axis=1)
        params = BilateralParams(sigma_spatial=2.0, sigma_range=0.05, radius=4)
        out = bilateral_filter(grid_from(values), params)
        assert np.abs(out.values - values).max() < 0.05

    def test_dims_preserved_3d(self):
        g = grid_from(np.linspace(0, 1, 27).reshape(3, 3, 3))
        out = bilateral_filter(g, BilateralParams(sigma_spatial=1.0, radius=1))
        assert out.dims == (3, 3, 3)

    @given(
        arrays(
            np.float64,
            (5, 5),
            elements=st.floats(0.05, 0.95, allow_nan=False),
        )
    )
    @settings(max_examples=30, deadline=None)
    def test_convex_combination_bound(self, values):
        out = bilateral_filter(
            grid_from(values), BilateralParams(sigma_spatial=1.0, radius=2)
        )
        assert out.values.min() >= values.min()
        assert out.values.max() <= values.max()

    def test_commutes_with_inversion(self, rng):
        values = rng.uniform(0.0, 1.0, (10, 10))
        params = BilateralParams(sigma_spatial=1.5, sigma_range=0.2, radius=3)
        direct = bilateral_filter(grid_from(values), params).values
        inverted = bilateral_filter(grid_from(1.0 - values), params).values
        assert np.abs((1.0 - inverted) - direct).max() < 1e-12

    def test_wide_range_kernel_is_gaussian_blur(self, rng):
        values = rng.uniform(0.0, 1.0, (12, 12))
        params = BilateralParams(sigma_spatial=2.0, sigma_range=1e6, radius=4)
        out = bilateral_filter(grid_from(values), params).values
        ref = gaussian_blur_ref(values, 2.0, 4)
        assert np.abs(out - ref).max() < 1e-9
