import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seedforge import (
    FG,
    GridError,
    MetricsError,
    PhantomSpec,
    SeedMask,
    XorShift64Star,
    benchmark,
    dice,
    make_phantom,
    parse_config,
    seed_error,
)
from seedforge.evaluate import write_report


class TestDice:
    def test_identical_nonempty(self):
        a = np.zeros((3, 3), bool)
        a[1, 1] = True
        assert dice(a, a) == 1.0

    def test_half_overlap(self):
        a = np.zeros((2, 2), bool)
        b = np.zeros((2, 2), bool)
        a[0, 0] = a[0, 1] = True
        b[0, 1] = b[1, 1] = True
        assert dice(a, b) == 0.5

    def test_disjoint(self):
        a = np.zeros((2, 2), bool)
        b = np.zeros((2, 2), bool)
        a[0, 0] = True
        b[1, 1] = True
        assert dice(a, b) == 0.0

    def test_both_empty_is_one(self):
        assert dice(np.zeros((2, 2), bool), np.zeros((2, 2), bool)) == 1.0

    def test_dim_mismatch(self):
        with pytest.raises(MetricsError):
            dice(np.zeros((2, 2), bool), np.zeros((3, 3), bool))

    @given(
        arrays(np.bool_, (4, 4)),
        arrays(np.bool_, (4, 4)),
    )
    @settings(max_examples=50, deadline=None)
    def test_symmetry_and_identity(self, a, b):
        assert dice(a, b) == dice(b, a)
        assert dice(a, a) == 1.0

    @given(arrays(np.bool_, (4, 4)), arrays(np.bool_, (4, 4)), st.randoms())
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, a, b, rand):
        perm = list(range(16))
        rand.shuffle(perm)
        pa = a.ravel()[perm].reshape(4, 4)
        pb = b.ravel()[perm].reshape(4, 4)
        assert dice(a, b) == dice(pa, pb)


class TestSeedError:
    def _seeds(self, fg_coords, dims=(4, 4)):
        labels = np.zeros(dims, dtype=np.uint8)
        for c in fg_coords:
            labels[c] = FG
        return SeedMask(labels)

    def test_all_inside(self):
        truth = np.ones((4, 4), bool)
        assert seed_error(self._seeds([(0, 0), (1, 1)]), truth) == 0.0

    def test_fractional(self):
        truth = np.ones((40, 25), bool)
        truth[0, 0] = False
        coords = [(i // 25, i % 25) for i in range(1000)]
        rate = seed_error(self._seeds(coords, (40, 25)), truth)
        assert rate == pytest.approx(0.001)

    def test_all_outside(self):
        truth = np.zeros((4, 4), bool)
        assert seed_error(self._seeds([(2, 2)]), truth) == 1.0

    def test_no_fg_raises(self):
        with pytest.raises(MetricsError):
            seed_error(self._seeds([]), np.ones((4, 4), bool))


class TestXorShift:
    def test_deterministic(self):
        a = XorShift64Star(123).uniforms(16)
        b = XorShift64Star(123).uniforms(16)
        assert (a == b).all()

    def test_known_sequence_pinned(self):
        # Frozen from the xorshift64* recurrence; guards cross-run and
        # cross-platform reproducibility of every phantom.
        gen = XorShift64Star(1)
        assert [gen.next_u64() for _ in range(3)] == [
            5180492295206395165,
            12380297144915551517,
            13389498078930870103,
        ]

    def test_uniform_range(self):
        u = XorShift64Star(9).uniforms(1000)
        assert (u > 0).all() and (u <= 1).all()
        assert abs(u.mean() - 0.5) < 0.05

    def test_normals_moments(self):
        z = XorShift64Star(77).normals(4000)
        assert abs(z.mean()) < 0.06
        assert abs(z.std() - 1.0) < 0.06


class TestPhantom:
    def test_disk_truth_matches_circle_test(self):
        spec = PhantomSpec(dims=(64, 64), radius=10.0, noise_sigma=0.0)
        phantom = make_phantom(spec)
        yy, xx = np.indices((64, 64), dtype=np.float64)
        expected = ((yy - 31.5) ** 2 + (xx - 31.5) ** 2) <= 100.0
        assert (phantom.truth == expected).all()
        assert int(phantom.truth.sum()) == int(expected.sum())

    def test_bit_identical_for_fixed_seed(self):
        spec = PhantomSpec(dims=(32, 32), radius=8, noise_sigma=0.02, seed=5)
        a = make_phantom(spec)
        b = make_phantom(spec)
        assert a.grid.values.tobytes() == b.grid.values.tobytes()

    def test_two_blob_has_two_components(self):
        phantom = make_phantom(
            PhantomSpec(shape="two-blob", dims=(64, 64), radius=8, noise_sigma=0.0)
        )
        # BFS component count oracle.
        seen = np.zeros_like(phantom.truth)
        components = 0
        coords = {tuple(c) for c in np.argwhere(phantom.truth)}
        while coords:
            components += 1
            stack = [coords.pop()]
            while stack:
                y, x = stack.pop()
                seen[y, x] = True
                for n in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if n in coords:
                        coords.remove(n)
                        stack.append(n)
        assert components == 2

    def test_margin_enforced(self):
        with pytest.raises(GridError):
            make_phantom(PhantomSpec(dims=(32, 32), radius=15.0))

    def test_ellipse_and_3d(self):
        ph = make_phantom(
            PhantomSpec(shape="ellipse", dims=(32, 48), radii=(6.0, 12.0), noise_sigma=0.0)
        )
        assert ph.truth.any()
        ph3 = make_phantom(PhantomSpec(dims=(24, 24, 24), radius=6.0, noise_sigma=0.01, seed=1))
        assert ph3.grid.ndim == 3

    def test_bad_contrast(self):
        with pytest.raises(GridError):
            make_phantom(PhantomSpec(contrast=0.0))

    def test_spec_json_roundtrip(self):
        spec = PhantomSpec(shape="two-blob", dims=(48, 48), radius=7, seed=3)
        again = PhantomSpec.from_json(spec.to_json())
        assert again == spec


class TestBenchmark:
    def _phantoms(self, n=3):
        return [
            make_phantom(
                PhantomSpec(dims=(32, 32), radius=7, contrast=0.7, noise_sigma=0.02, seed=i)
            )
            for i in range(n)
        ]

    def test_row_and_aggregate_cardinality(self):
        configs = [(s, parse_config(s)) for s in ("So,gc", "Sm,Me,gc")]
        report = benchmark(configs, self._phantoms(3))
        assert len(report.rows) == 6
        assert len(report.aggregates) == 2

    def test_identical_configs_identical_aggregates(self):
        configs = [(s, parse_config("So,gc")) for s in ("a", "b")]
        report = benchmark(configs, self._phantoms(2))
        a, b = report.aggregates
        assert (a.dice_median, a.dice_mean, a.dice_std) == (
            b.dice_median, b.dice_mean, b.dice_std,
        )

    def test_failures_isolated(self):
        configs = [
            ("bad", parse_config("So,gc", {"border_thickness": 100})),
            ("good", parse_config("So,gc")),
        ]
        report = benchmark(configs, self._phantoms(2))
        bad_rows = [r for r in report.rows if r.config == "bad"]
        good_rows = [r for r in report.rows if r.config == "good"]
        assert all(r.error for r in bad_rows)
        assert all(r.metrics for r in good_rows)
        assert report.aggregates[0].failures == 2
        assert report.aggregates[1].failures == 0

    def test_single_row_aggregate_degenerates(self):
        report = benchmark([("c", parse_config("So,gc"))], self._phantoms(1))
        agg = report.aggregates[0]
        row = report.rows[0]
        assert agg.dice_median == agg.dice_mean == row.metrics.dice
        assert agg.dice_std == 0.0

    def test_emission(self, tmp_path):
        report = benchmark([("So,gc", parse_config("So,gc"))], self._phantoms(1))
        csv_path, json_path = write_report(report, str(tmp_path / "report"))
        csv_text = open(csv_path).read()
        assert "config,phantom,dice" in csv_text
        import json as json_mod

        data = json_mod.loads(open(json_path).read())
        assert data["rng"] == "xorshift64*"
        assert len(data["rows"]) == 1
