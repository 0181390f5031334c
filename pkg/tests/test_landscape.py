import numpy as np
import pytest

from conftest import assert_grad_matches_fd, fd_gradient, random_spd_hessian
from shadowopt.errors import BadLabel, EmptyDataset, NonSymmetric, ParseError
from shadowopt.landscape import (
    Dataset,
    generate_synthetic,
    load_dataset_csv,
    make_hosaki,
    make_quadratic,
    make_sigmoid_erm,
)
from shadowopt.dynamics import gd_map, generate_orbit


def test_quadratic_scalar_case():
    obj, quad = make_quadratic([[1.0]], [0.0])
    assert obj.value(np.array([1.0])) == 0.5
    assert obj.grad(np.array([1.0]))[0] == 1.0
    assert obj.smoothness == 1.0
    assert obj.strong_convexity == 1.0


def test_quadratic_diagonal_saddle_metadata():
    obj, quad = make_quadratic(np.diag([-1.0, 1.0]), np.zeros(2))
    assert obj.concavity == 1.0
    assert obj.strong_convexity is None
    assert quad.min_positive == 1.0
    assert quad.min_negative_magnitude == 1.0


def test_quadratic_eigenvalues_2x2_oracle():
    # characteristic polynomial of [[2,1],[1,2]]: (2-t)^2 - 1 = 0 -> t in {1, 3}
    obj, quad = make_quadratic([[2.0, 1.0], [1.0, 2.0]], np.zeros(2))
    assert np.allclose(np.sort(quad.eigenvalues), [1.0, 3.0], atol=1e-12)
    assert obj.smoothness == pytest.approx(3.0)
    assert obj.strong_convexity == pytest.approx(1.0)


def test_quadratic_rejects_asymmetry():
    with pytest.raises(NonSymmetric):
        make_quadratic([[1.0, 0.5], [0.0, 1.0]], np.zeros(2))


def test_quadratic_decomposition_invariants():
    rng = np.random.default_rng(11)
    for dim in (2, 3, 6):
        hessian = random_spd_hessian(rng, dim)
        _, quad = make_quadratic(hessian, rng.standard_normal(dim))
        recon = quad.eigenvectors @ np.diag(quad.eigenvalues) @ quad.eigenvectors.T
        assert np.linalg.norm(recon - hessian) <= 1e-10 * np.linalg.norm(hessian)
        assert np.linalg.norm(quad.eigenvectors.T @ quad.eigenvectors - np.eye(dim)) <= 1e-10


def test_quadratic_center_is_exact_stationary_point():
    rng = np.random.default_rng(5)
    center = rng.standard_normal(3)
    obj, _ = make_quadratic(random_spd_hessian(rng, 3), center)
    assert obj.value(center) == 0.0
    assert np.all(obj.grad(center) == 0.0)


def test_quadratic_metadata_brackets_curvature():
    rng = np.random.default_rng(7)
    obj, _ = make_quadratic(random_spd_hessian(rng, 4), np.zeros(4))
    hessian = np.asarray(
        [fd_gradient(lambda p: obj.grad(p)[i], np.zeros(4)) for i in range(4)]
    )
    for _ in range(50):
        u = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        quad_form = float(u @ hessian @ u)
        assert obj.strong_convexity - 1e-6 <= quad_form <= obj.smoothness + 1e-6


def test_quadratic_gradient_matches_fd():
    rng = np.random.default_rng(3)
    obj, _ = make_quadratic(random_spd_hessian(rng, 5), rng.standard_normal(5))
    assert_grad_matches_fd(obj, rng.standard_normal((20, 5)))


def _toy_dataset():
    return Dataset(
        features=np.array([[0.0, 1.0]]),  # one sample, bias column included
        labels=np.array([1.0]),
    )


def test_sigmoid_erm_value_at_zero():
    data = generate_synthetic(50, 4, seed=2)
    obj = make_sigmoid_erm(data, 0.0)
    assert obj.value(np.zeros(obj.dim)) == pytest.approx(0.5)


def test_sigmoid_erm_single_sample_value():
    # features zero, label 1, reg 1, x = e1: 0.5 ||x||^2 + phi(0) = 1.0
    obj = make_sigmoid_erm(_toy_dataset(), 1.0)
    assert obj.value(np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_sigmoid_erm_gradient_matches_fd():
    data = generate_synthetic(40, 6, seed=9)
    obj = make_sigmoid_erm(data, 0.01)
    rng = np.random.default_rng(1)
    assert_grad_matches_fd(obj, rng.standard_normal((20, obj.dim)))


def test_sigmoid_erm_rejects_empty():
    empty = Dataset(features=np.zeros((0, 3)), labels=np.zeros(0))
    with pytest.raises(EmptyDataset):
        make_sigmoid_erm(empty, 0.1)


def test_hosaki_vanishes_on_zero_line():
    obj = make_hosaki()
    assert obj.value(np.array([0.0, 0.0])) == 0.0


def test_hosaki_gradient_matches_fd():
    obj = make_hosaki()
    rng = np.random.default_rng(4)
    points = [np.array([2.0, 1.0])] + list(rng.uniform(0.2, 4.5, size=(19, 2)))
    assert_grad_matches_fd(obj, points)


def test_hosaki_global_minimum_by_grid_search():
    obj = make_hosaki()
    coarse = np.linspace(0.0, 5.0, 251)
    best = min(
        ((obj.value(np.array([u, v])), u, v) for u in coarse for v in coarse),
        key=lambda t: t[0],
    )
    fine_u = np.arange(best[1] - 0.02, best[1] + 0.02, 1e-3)
    fine_v = np.arange(best[2] - 0.02, best[2] + 0.02, 1e-3)
    best = min(
        ((obj.value(np.array([u, v])), u, v) for u in fine_u for v in fine_v),
        key=lambda t: t[0],
    )
    assert best[1] == pytest.approx(4.0, abs=2e-3)
    assert best[2] == pytest.approx(2.0, abs=2e-3)
    assert best[0] == pytest.approx(-2.345, abs=1e-3)


def test_load_dataset_csv_appends_bias(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("1.0,0.5,1\n-1.0,-0.5,-1\n")
    data = load_dataset_csv(path)
    assert data.n == 2
    assert data.dim == 3
    assert np.array_equal(data.features[:, -1], [1.0, 1.0])
    assert np.array_equal(data.labels, [1.0, -1.0])


def test_load_dataset_csv_parse_error_carries_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,0.5,1\nnot_a_number,0.1,1\n")
    with pytest.raises(ParseError) as err:
        load_dataset_csv(path)
    assert err.value.row == 2


def test_load_dataset_csv_rejects_bad_label(tmp_path):
    path = tmp_path / "bad_label.csv"
    path.write_text("1.0,0.5,2\n")
    with pytest.raises(BadLabel) as err:
        load_dataset_csv(path)
    assert err.value.row == 1


def test_generate_synthetic_is_deterministic():
    a = generate_synthetic(100, 5, seed=7)
    b = generate_synthetic(100, 5, seed=7)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_generate_synthetic_is_learnable():
    data = generate_synthetic(1000, 2, seed=1)
    obj = make_sigmoid_erm(data, 0.0)
    h = 0.9 / obj.smoothness
    orbit = generate_orbit(gd_map(obj, h), np.zeros(obj.dim), 500, h=h)
    weights = orbit.states[-1]
    accuracy = float(np.mean(np.sign(data.features @ weights) == data.labels))
    assert accuracy >= 0.95


def test_objectives_are_frozen():
    obj, _ = make_quadratic([[1.0]], [0.0])
    with pytest.raises(AttributeError):
        obj.smoothness = 2.0
