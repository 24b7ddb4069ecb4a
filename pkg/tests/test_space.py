import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from src.space.grid import (
    GridFunction,
    Smoothness,
    SpaceDescriptor,
    axpy,
    empirical_smoothness_constant,
    grid_nodes,
    lp_norm,
    smoothness_residual,
    sup_norm,
    trapezoid_weights,
)
from src.space.io import format_csv, parse_csv, read_csv, write_csv

values_11 = hnp.arrays(
    np.float64, (11, 1), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
)
SPACES = [
    SpaceDescriptor.sup(m=11),
    SpaceDescriptor.lp(1.0, m=11),
    SpaceDescriptor.lp(1.5, m=11),
    SpaceDescriptor.lp(2.0, m=11),
]


class TestGrid:
    def test_nodes_and_weights(self):
        nodes = grid_nodes(5)
        assert nodes[0] == 0.0 and nodes[-1] == 1.0
        assert np.allclose(np.diff(nodes), 0.25)
        assert trapezoid_weights(5).sum() == pytest.approx(1.0, abs=1e-15)

    def test_grid_function_is_immutable(self):
        f = GridFunction(np.zeros((4, 1)))
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_rejects_nan_and_tiny_grid(self):
        with pytest.raises(ValueError):
            GridFunction([0.0, float("nan"), 1.0])
        with pytest.raises(ValueError):
            GridFunction([1.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            GridFunction(np.zeros((4, 1))) + GridFunction(np.zeros((5, 1)))

    def test_arithmetic(self):
        x = GridFunction([1.0, 2.0, 3.0])
        y = GridFunction([0.5, 0.5, 0.5])
        assert axpy(2.0, x, y) == GridFunction([2.5, 4.5, 6.5])
        assert (x - x) == GridFunction.zero(3)
        assert (-x).values[2, 0] == -3.0


class TestNorms:
    def test_constant_function(self):
        f = GridFunction(np.full((11, 1), -2.0))
        assert sup_norm(f) == 2.0
        for p in (1.0, 1.5, 2.0, 3.0):
            assert lp_norm(f, p) == pytest.approx(2.0, rel=1e-14)

    def test_euclidean_fiber(self):
        f = GridFunction(np.tile([3.0, 4.0], (6, 1)))
        assert SpaceDescriptor.sup(m=6, d=2).norm(f) == pytest.approx(5.0)
        assert SpaceDescriptor.lp(1.0, m=6, d=2).norm(f) == pytest.approx(5.0)

    def test_sup_requires_no_exponent(self):
        with pytest.raises(ValueError):
            SpaceDescriptor(norm_kind="sup", p=2.0)
        with pytest.raises(ValueError):
            SpaceDescriptor(norm_kind="lp")

    def test_batched_norms_match(self, l1_space):
        rng = np.random.default_rng(0)
        batch = rng.standard_normal((7, l1_space.m, 1))
        batched = np.asarray(l1_space.norm_values(batch))
        single = [l1_space.norm(GridFunction(v)) for v in batch]
        assert np.allclose(batched, single, rtol=1e-14)

    @pytest.mark.parametrize("space", SPACES, ids=lambda s: s.label)
    @given(x=values_11, y=values_11)
    @settings(max_examples=50, deadline=None)
    def test_triangle_inequality(self, space, x, y):
        fx, fy = GridFunction(x), GridFunction(y)
        lhs = space.norm(fx + fy)
        assert lhs <= space.norm(fx) + space.norm(fy) + 1e-9 * (1.0 + lhs)

    @given(x=values_11)
    @settings(max_examples=50, deadline=None)
    def test_lp_norm_increases_with_exponent(self, x):
        # |x|^3 가 언더플로하지 않도록 아주 작은 값은 0 으로
        f = GridFunction(np.where(np.abs(x) < 1e-6, 0.0, x))
        norms = [lp_norm(f, p) for p in (1.0, 1.5, 2.0, 3.0)]
        for lower, higher in zip(norms, norms[1:]):
            assert lower <= higher * (1.0 + 1e-12)

    @given(x=values_11)
    @settings(max_examples=50, deadline=None)
    def test_sup_norm_dominates_lp_norm(self, x):
        f = GridFunction(x)
        top = sup_norm(f)
        for p in (1.0, 1.5, 2.0, 3.0):
            assert lp_norm(f, p) <= top * (1.0 + 1e-12)

    @pytest.mark.parametrize("space", SPACES, ids=lambda s: s.label)
    @given(x=values_11, a=st.floats(-100.0, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_homogeneity(self, space, x, a):
        f = GridFunction(x)
        assert space.norm(f * a) == pytest.approx(abs(a) * space.norm(f), rel=1e-12, abs=1e-12)


class TestSmoothness:
    def test_parallelogram_residual(self, hilbert_space):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(10_000):
            x = GridFunction(rng.standard_normal((hilbert_space.m, 1)))
            y = GridFunction(rng.standard_normal((hilbert_space.m, 1)))
            worst = max(worst, abs(smoothness_residual(x, y, hilbert_space)))
        assert worst <= 1e-10

    def test_empirical_constant_in_hilbert_space(self, hilbert_space):
        estimate = empirical_smoothness_constant(hilbert_space, 2000, seed=1)
        assert estimate == pytest.approx(2.0, rel=1e-9)

    def test_requires_declared_constant(self, sup_space):
        x = sup_space.zero()
        with pytest.raises(ValueError):
            smoothness_residual(x, x, sup_space)

    def test_smoothness_exponent_range(self):
        with pytest.raises(ValueError):
            Smoothness(p_smooth=2.5, D=1.0)


class TestCsv:
    def test_seventeen_digits(self):
        text = format_csv(GridFunction([0.1, 0.2]))
        assert text.splitlines()[0] == "t,v0"
        assert "0.10000000000000001" in text

    def test_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        f = GridFunction(rng.standard_normal((9, 2)))
        path = tmp_path / "f.csv"
        write_csv(path, f)
        assert read_csv(path) == f

    def test_bad_header(self):
        with pytest.raises(ValueError):
            parse_csv("x,v0\n0,1\n1,2\n")
