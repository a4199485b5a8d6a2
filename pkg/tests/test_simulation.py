import numpy as np
import pytest

from aslsl.simulation import (MissingnessSpec, SimulationError, SyntheticSpec,
                              generate_synthetic, inject_missingness, split_indices,
                              split_subjects)

SMALL = SyntheticSpec(n=60, m=3, k=3, dims=(10, 8, 12), informative_per_view=3, seed=7)


def test_generation_is_deterministic():
    a, ia = generate_synthetic(SMALL)
    b, ib = generate_synthetic(SMALL)
    for va, vb in zip(a.views, b.views):
        np.testing.assert_array_equal(va.features, vb.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert all(np.array_equal(x, y) for x, y in zip(ia, ib))


def test_generated_shapes_and_ranges():
    ds, informative = generate_synthetic(SMALL)
    assert ds.dims == [10, 8, 12] and ds.k == 3 and ds.n == 60
    assert all(v.features.min() >= 0 for v in ds.views)
    assert set(np.unique(ds.labels)) == {0.0, 1.0}
    assert all(len(i) == 3 for i in informative)
    assert np.all(ds.masks)


def test_noise_free_informative_rows_have_latent_rank():
    spec = SyntheticSpec(n=40, m=1, k=3, dims=(20,), informative_per_view=6,
                         noise_level=0.0, seed=3)
    ds, informative = generate_synthetic(spec)
    rows = ds.views[0].features[informative[0]]
    assert np.linalg.matrix_rank(rows, tol=1e-9) == 3


def test_invalid_spec():
    with pytest.raises(SimulationError):
        SyntheticSpec(m=2, dims=(5, 5, 5))
    with pytest.raises(SimulationError):
        MissingnessSpec(ratio=1.0)


@pytest.mark.parametrize("ratio", [0.1, 0.2, 0.3, 0.4, 0.5])
def test_exact_absent_counts_and_coverage(ratio):
    ds, _ = generate_synthetic(SMALL)
    out = inject_missingness(ds, MissingnessSpec(ratio, seed=11))
    np.testing.assert_array_equal((~out.masks).sum(axis=1), int(np.floor(ratio * 60)))
    assert out.masks.any(axis=0).all()


def test_present_columns_untouched_absent_zeroed():
    ds, _ = generate_synthetic(SMALL)
    out = inject_missingness(ds, MissingnessSpec(0.3, seed=2))
    for a, b in zip(ds.views, out.views):
        np.testing.assert_array_equal(b.features[:, b.presence], a.features[:, b.presence])
        assert np.all(b.features[:, ~b.presence] == 0)


def test_zero_ratio_is_identity():
    ds, _ = generate_synthetic(SMALL)
    assert inject_missingness(ds, MissingnessSpec(0.0)) is ds


def test_injection_deterministic_and_seed_sensitive():
    ds, _ = generate_synthetic(SMALL)
    a = inject_missingness(ds, MissingnessSpec(0.3, 1)).masks
    b = inject_missingness(ds, MissingnessSpec(0.3, 1)).masks
    c = inject_missingness(ds, MissingnessSpec(0.3, 2)).masks
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_single_view_cannot_lose_instances():
    spec = SyntheticSpec(n=20, m=1, dims=(5,), informative_per_view=2)
    ds, _ = generate_synthetic(spec)
    with pytest.raises(SimulationError):
        inject_missingness(ds, MissingnessSpec(0.2), retries=3)


def test_split_sizes_and_disjointness():
    tr, te = split_indices(100, 0.7, seed=5)
    assert len(tr) == 70 and len(te) == 30
    assert set(tr).isdisjoint(te) and set(tr) | set(te) == set(range(100))


def test_group_split_keeps_subjects_whole():
    groups = np.repeat(np.arange(10), 5)
    tr, te = split_indices(50, 0.7, seed=0, groups=groups)
    assert set(groups[tr]).isdisjoint(groups[te])
    assert len(set(groups[tr])) == 7


def test_split_subjects_returns_datasets():
    ds, _ = generate_synthetic(SMALL)
    train, test = split_subjects(ds, 0.7, seed=0)
    assert train.n == 42 and test.n == 18
