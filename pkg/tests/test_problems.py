"""Problem zoo: closed forms, constants, the LIBSVM parser, caching."""

import os

import numpy as np
import pytest

from zonewton import (
    Oracle,
    RngStream,
    estimate_gradient,
    gradient_error_bound,
    load_libsvm,
    logistic_gap_objective,
    make_cubic_box,
    make_logistic,
    make_quadratic,
    make_synthetic_dataset,
    random_spd,
    stiefel_sample,
)
from zonewton.problems import check_known_derivatives


class TestQuadratic:
    def test_identity(self):
        p = make_quadratic(np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(p.known.x_star, np.zeros(2))
        assert p.known.f_star == 0.0
        assert p.known.m == 1.0 and p.known.L1 == 1.0

    def test_solved_by_hand(self):
        p = make_quadratic(np.diag([1.0, 100.0]), np.array([1.0, 100.0]))
        np.testing.assert_allclose(p.known.x_star, np.ones(2), atol=1e-12)
        assert p.known.f_star == pytest.approx(-50.5)

    def test_quadratics_have_exact_gradient_estimates(self):
        assert p2_bound() == 0.0

    def test_rejects_non_spd(self):
        with pytest.raises(ValueError):
            make_quadratic(np.diag([1.0, -1.0]), np.zeros(2))
        with pytest.raises(ValueError):
            make_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))

    def test_constants_match_spectrum(self):
        a = random_spd(6, 50.0, RngStream(0))
        p = make_quadratic(a, np.zeros(6))
        w = np.linalg.eigvalsh(a)
        assert p.known.m == pytest.approx(w[0], abs=1e-10)
        assert p.known.L1 == pytest.approx(w[-1], abs=1e-10)


def p2_bound():
    p = make_quadratic(np.eye(3), np.zeros(3))
    return gradient_error_bound(3, p.known.L2, 0.5)


class TestCubicBox:
    def test_derivatives_at_one(self):
        p = make_cubic_box(1, 2.0)
        assert p.known.hessian(np.array([1.0]))[0, 0] == 3.0
        assert p.known.L2 == 2.0

    def test_strong_convexity_from_radius(self):
        assert make_cubic_box(3, 0.4).known.m == pytest.approx(0.2)
        assert make_cubic_box(3, 0.6).known.m is None  # not reported

    def test_gradient_bound_holds_at_random_points(self):
        d, mu = 4, 0.1
        p = make_cubic_box(d, 1.0)
        bound = gradient_error_bound(d, p.known.L2, mu)
        assert bound == pytest.approx(4 * 2 * 0.01 / 6)
        gen = np.random.default_rng(1)
        rng = RngStream(2)
        for _ in range(20):
            x = gen.uniform(-1.0, 1.0, size=d)
            probe = p.make_oracle().probe_batch(x, stiefel_sample(d, d, rng), mu)
            err = np.linalg.norm(p.known.gradient(x) - estimate_gradient(probe).g)
            assert err <= bound


class TestLogistic:
    def test_single_sample_closed_form(self):
        data_set = _single_sample_dataset()
        p = make_logistic(data_set, ridge=1.0, estimate_l2=False)
        assert p.fn(np.zeros(1)) == pytest.approx(np.log(2.0))
        assert p.known.gradient(np.zeros(1))[0] == pytest.approx(-0.5)
        assert p.known.m == 1.0

    def test_gradient_matches_central_difference(self):
        data_set = _single_sample_dataset()
        p = make_logistic(data_set, ridge=1.0, estimate_l2=False)
        mu = 1e-5
        fd = (p.fn(np.array([mu])) - p.fn(np.array([-mu]))) / (2 * mu)
        assert fd == pytest.approx(p.known.gradient(np.zeros(1))[0], abs=1e-8)

    def test_reference_minimizer_is_tight(self):
        data_set = make_synthetic_dataset(50, 4, RngStream(3))
        p = make_logistic(data_set, ridge=0.1, estimate_l2=False)
        assert np.linalg.norm(p.known.gradient(p.known.x_star)) <= 1e-12

    def test_l1_formula(self):
        data_set = make_synthetic_dataset(30, 3, RngStream(4))
        p = make_logistic(data_set, ridge=0.5, estimate_l2=False)
        expected = 0.5 + np.sum(data_set.features**2) / (4 * 30)
        assert p.known.L1 == pytest.approx(expected)

    def test_rejects_bad_ridge(self):
        with pytest.raises(ValueError):
            make_logistic(_single_sample_dataset(), ridge=0.0)


def _single_sample_dataset():
    from zonewton.problems import Dataset
    return Dataset(np.array([1.0]), np.array([[1.0]]))


class TestGapObjective:
    def test_zero_at_reference(self):
        data_set = make_synthetic_dataset(40, 5, RngStream(5))
        p = make_logistic(data_set, ridge=0.2, estimate_l2=False)
        gap = logistic_gap_objective(data_set, 0.2, p.known.x_star)
        assert gap(p.known.x_star) == 0.0

    def test_matches_raw_difference(self):
        data_set = make_synthetic_dataset(40, 5, RngStream(6))
        p = make_logistic(data_set, ridge=0.2, estimate_l2=False)
        gap = logistic_gap_objective(data_set, 0.2, p.known.x_star)
        gen = np.random.default_rng(7)
        for _ in range(10):
            x = p.known.x_star + gen.standard_normal(5)
            assert gap(x) == pytest.approx(p.fn(x) - p.known.f_star,
                                           rel=1e-9, abs=1e-12)

    def test_keeps_relative_accuracy_near_optimum(self):
        # the raw difference loses all digits at distance 1e-8; the gap
        # form must still agree with the quadratic model there
        data_set = make_synthetic_dataset(40, 5, RngStream(8))
        p = make_logistic(data_set, ridge=0.2, estimate_l2=False)
        gap = logistic_gap_objective(data_set, 0.2, p.known.x_star)
        h = p.known.hessian(p.known.x_star)
        gen = np.random.default_rng(9)
        v = gen.standard_normal(5)
        v /= np.linalg.norm(v)
        for scale in (1e-4, 1e-6, 1e-8):
            w = scale * v
            measured = gap(p.known.x_star + w)
            model = 0.5 * float(w @ h @ w)
            assert measured == pytest.approx(model, rel=1e-3)


class TestLoadLibsvm(object):
    def test_basic_line(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 1:0.5 3:2.0\n")
        ds = load_libsvm(path)
        assert ds.labels[0] == 1.0
        assert ds.dimension == 3
        np.testing.assert_array_equal(ds.features[0], [0.5, 0.0, 2.0])

    def test_zero_one_label_mapping(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("0 1:1\n1 1:2\n")
        ds = load_libsvm(path)
        np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])

    def test_non_increasing_index_rejected(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("1 3:1 2:1\n")
        with pytest.raises(ValueError, match="non-increasing index at line 1"):
            load_libsvm(path)

    def test_malformed_label(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("yes 1:1\n")
        with pytest.raises(ValueError, match="line 1"):
            load_libsvm(path)

    def test_malformed_feature(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 1:one\n")
        with pytest.raises(ValueError, match="line 1"):
            load_libsvm(path)

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("2 1:1\n")
        with pytest.raises(ValueError, match="line 1"):
            load_libsvm(path)

    def test_dimension_override(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("+1 2:1.0\n")
        assert load_libsvm(path, dimension=5).dimension == 5
        with pytest.raises(ValueError):
            load_libsvm(path, dimension=1)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("\n\n")
        with pytest.raises(ValueError, match="no samples"):
            load_libsvm(path)


def test_minimizer_cache_roundtrip(tmp_path):
    path = tmp_path / "train.libsvm"
    gen = np.random.default_rng(10)
    lines = []
    for _ in range(40):
        label = "+1" if gen.standard_normal() > 0 else "-1"
        feats = " ".join(f"{j + 1}:{gen.standard_normal():.6f}" for j in range(4))
        lines.append(f"{label} {feats}")
    path.write_text("\n".join(lines) + "\n")
    ds = load_libsvm(path)
    p1 = make_logistic(ds, ridge=0.3, estimate_l2=False)
    caches = [f for f in os.listdir(tmp_path) if ".xstar-" in f]
    assert len(caches) == 1
    # flat text format: first line "dim f_star", second line coordinates
    content = (tmp_path / caches[0]).read_text().splitlines()
    first = content[0].split()
    assert int(first[0]) == 4
    assert float(first[1]) == pytest.approx(p1.known.f_star)
    assert len(content[1].split()) == 4
    # a second construction must reuse the cached minimizer
    p2 = make_logistic(load_libsvm(path), ridge=0.3, estimate_l2=False)
    np.testing.assert_array_equal(p1.known.x_star, p2.known.x_star)


def test_sparse_storage_above_dimension_limit(tmp_path):
    """Dimensions >= 10^4 switch to CSR storage; the logistic objective and
    gradient must agree with a dense twin on the same samples."""
    import scipy.sparse

    from zonewton.problems import Dataset, _logistic_parts

    path = tmp_path / "wide.libsvm"
    gen = np.random.default_rng(21)
    lines = []
    dense = np.zeros((8, 10_000))
    labels = []
    for i in range(8):
        label = 1.0 if gen.standard_normal() > 0 else -1.0
        labels.append(label)
        idx = np.sort(gen.choice(10_000, size=5, replace=False))
        vals = np.array([float(f"{v:.6f}") for v in gen.standard_normal(5)])
        dense[i, idx] = vals
        feats = " ".join(f"{j + 1}:{v:.6f}" for j, v in zip(idx, vals))
        lines.append(f"{'+1' if label > 0 else '-1'} {feats}")
    path.write_text("\n".join(lines) + "\n")

    sparse_ds = load_libsvm(path, dimension=10_000)
    assert scipy.sparse.issparse(sparse_ds.features)
    dense_ds = Dataset(np.array(labels), dense)

    fn_s, grad_s, _ = _logistic_parts(sparse_ds, ridge=0.2)
    fn_d, grad_d, _ = _logistic_parts(dense_ds, ridge=0.2)
    for _ in range(3):
        w = gen.standard_normal(10_000) * 0.01
        assert fn_s(w) == pytest.approx(fn_d(w), rel=1e-12)
        np.testing.assert_allclose(grad_s(w), grad_d(w), atol=1e-14)


def test_synthetic_dataset_deterministic():
    a = make_synthetic_dataset(20, 3, RngStream(11))
    b = make_synthetic_dataset(20, 3, RngStream(11))
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}


def test_random_spd_spectrum():
    a = random_spd(5, 40.0, RngStream(12))
    assert np.array_equal(a, a.T)
    w = np.linalg.eigvalsh(a)
    np.testing.assert_allclose(w, np.linspace(1.0, 40.0, 5), rtol=1e-10)


def test_closed_forms_agree_with_finite_differences():
    problems = [
        make_quadratic(random_spd(4, 20.0, RngStream(13)), np.ones(4)),
        make_cubic_box(4, 0.5),
        make_logistic(make_synthetic_dataset(30, 4, RngStream(14)), 0.2,
                      estimate_l2=False),
    ]
    for p in problems:
        check_known_derivatives(p, seed=15)
