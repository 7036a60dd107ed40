"""Dataset container, CSV round-trips, and the three synthetic generators."""

import numpy as np
import pytest

from cclvq.data import Dataset, load_csv, save_csv, train_heldout_split
from cclvq.errors import ValidationError
from cclvq.synthetic import (
    FiniteConditionalLaw,
    MultimodalRegressionSpec,
    enumerate_finite_conditional,
    gen_finite_conditional,
    gen_multimodal,
    gen_two_dirac,
    mode_curve,
    mode_probs,
    random_finite_law,
    standard_normal,
)


def test_dataset_shapes_and_kinds():
    ds = Dataset(np.zeros((5, 2)), np.zeros((5, 1)))
    assert ds.n_samples == 5 and ds.in_dim == 2 and ds.out_dim == 1
    assert ds.input_kind == "vector"
    labels = Dataset(np.array([0, 1, 1]), np.zeros((3, 2)))
    assert labels.input_kind == "label" and labels.n_labels == 2


def test_dataset_row_mismatch_rejected():
    with pytest.raises(ValidationError):
        Dataset(np.zeros((4, 1)), np.zeros((5, 1)))


def test_subset_copies():
    ds = Dataset(np.arange(6, dtype=np.float64).reshape(-1, 1), np.zeros((6, 1)))
    sub = ds.subset([1, 3])
    sub.xs[0, 0] = 99.0
    assert ds.xs[1, 0] == 1.0


def test_train_heldout_split_partitions():
    ds = Dataset(np.arange(20, dtype=np.float64).reshape(-1, 1), np.zeros((20, 1)))
    tr, ho = train_heldout_split(ds, 0.25, seed=3)
    assert tr.n_samples == 15 and ho.n_samples == 5
    together = np.sort(np.concatenate([tr.xs[:, 0], ho.xs[:, 0]]))
    assert np.array_equal(together, np.arange(20))
    tr2, ho2 = train_heldout_split(ds, 0.25, seed=3)
    assert np.array_equal(ho.xs, ho2.xs)


def test_split_fraction_bounds():
    ds = Dataset(np.zeros((4, 1)), np.zeros((4, 1)))
    with pytest.raises(ValidationError):
        train_heldout_split(ds, 0.0, seed=0)
    with pytest.raises(ValidationError):
        train_heldout_split(ds, 1.0, seed=0)


class TestCsv:
    def test_vector_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(12, 2)), rng.normal(size=(12, 1)))
        path = tmp_path / "d.csv"
        save_csv(ds, path)
        back = load_csv(path)
        assert np.array_equal(back.xs, ds.xs)
        assert np.array_equal(back.ys, ds.ys)

    def test_label_round_trip_uses_x_label_header(self, tmp_path):
        ds = Dataset(np.array([2, 0, 1]), np.array([[1.5], [0.0], [-3.25]]))
        path = tmp_path / "lab.csv"
        save_csv(ds, path)
        assert open(path).readline().strip() == "x_label,y_0"
        back = load_csv(path)
        assert back.input_kind == "label"
        assert np.array_equal(back.xs, ds.xs)
        assert np.array_equal(back.ys, ds.ys)

    def test_mode_column_round_trip(self, tmp_path):
        ds = gen_two_dirac(20, seed=0)
        path = tmp_path / "m.csv"
        save_csv(ds, path, include_modes=True)
        back = load_csv(path)
        assert np.array_equal(back.modes, ds.modes)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x_0,y_0\n1.0,2.0\n3.0\n")
        with pytest.raises(ValidationError, match=":3"):
            load_csv(path)

    def test_unknown_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError):
            load_csv(path)


# -- generators ---------------------------------------------------------------


def test_standard_normal_is_deterministic_and_plausible():
    a = standard_normal(np.random.default_rng(4), 5000)
    b = standard_normal(np.random.default_rng(4), 5000)
    assert np.array_equal(a, b)
    assert abs(a.mean()) < 0.05 and abs(a.std() - 1.0) < 0.05


def test_mode_probs_softmax():
    spec = MultimodalRegressionSpec()
    p = mode_probs(spec, 0.7)
    assert p.shape == (3,)
    assert p.sum() == pytest.approx(1.0)
    # slopes (-1, 0, 1): large x favors the last mode
    assert mode_probs(spec, 5.0)[2] > 0.95


def test_mode_curve_values():
    assert mode_curve(0, 0.0) == pytest.approx(10.0)
    assert mode_curve(2, 0.0) == pytest.approx(30.0)
    x = 0.37
    assert mode_curve(1, x) == pytest.approx(np.sin(4 * x) + 20.0)


def test_gen_multimodal_respects_spec():
    spec = MultimodalRegressionSpec(n_samples=512, seed=9)
    ds = gen_multimodal(spec)
    assert ds.n_samples == 512 and ds.in_dim == 1 and ds.out_dim == 1
    assert ds.modes is not None and set(np.unique(ds.modes)) <= {0, 1, 2}
    # samples sit near their mode's curve (5 sigma)
    resid = ds.ys[:, 0] - np.array([mode_curve(m, x) for m, x in zip(ds.modes, ds.xs[:, 0])])
    assert np.abs(resid).max() < 5 * spec.sigma
    assert np.array_equal(gen_multimodal(spec).ys, ds.ys)


def test_gen_multimodal_validation():
    with pytest.raises(ValidationError):
        MultimodalRegressionSpec(n_samples=0)
    with pytest.raises(ValidationError):
        MultimodalRegressionSpec(sigma=-1.0)


def test_gen_two_dirac_branches():
    ds = gen_two_dirac(100, offset=100.0, seed=2)
    up = ds.modes == 0
    assert np.allclose(ds.ys[up, 0], ds.xs[up, 0] + 100.0)
    assert np.allclose(ds.ys[~up, 0], ds.xs[~up, 0] - 100.0)
    assert 20 < up.sum() < 80  # fair coin


def test_finite_law_validation():
    with pytest.raises(ValidationError):
        FiniteConditionalLaw(
            atoms=(np.array([[0.0]]),),
            weights=(np.array([0.5]),),  # doesn't sum to 1
        )


def test_gen_finite_conditional_draws_only_law_atoms():
    law = random_finite_law(np.random.default_rng(5))
    ds = gen_finite_conditional(law, 400, seed=6)
    assert ds.input_kind == "label"
    for l in range(law.n_labels):
        rows = ds.ys[ds.xs == l]
        # every drawn point is one of the label's atoms
        dists = np.abs(rows[:, None, :] - law.atoms[l][None]).sum(axis=2)
        assert (dists.min(axis=1) == 0).all()


def test_enumerate_finite_conditional_lists_every_atom_once():
    law = FiniteConditionalLaw(
        atoms=(np.array([[0.0], [1.0]]), np.array([[5.0]])),
        weights=(np.array([0.25, 0.75]), np.array([1.0])),
    )
    ds, joint = enumerate_finite_conditional(law)
    assert ds.n_samples == 3
    assert np.array_equal(ds.xs, [0, 0, 1])
    assert np.array_equal(ds.ys[:, 0], [0.0, 1.0, 5.0])
    # joint weight = atom weight / number of labels
    assert np.allclose(joint, [0.125, 0.375, 0.5])
    assert joint.sum() == pytest.approx(1.0)


def test_random_finite_law_weights_bounded_away_from_zero():
    for seed in range(10):
        law = random_finite_law(np.random.default_rng(seed))
        for w in law.weights:
            assert w.min() > 0.01
            assert w.sum() == pytest.approx(1.0)
