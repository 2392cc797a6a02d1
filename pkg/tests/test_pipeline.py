import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorvib.exceptions import (
    EmptyDataset,
    EmptyMask,
    EmptyMatrix,
    KTooLarge,
    LeakageError,
    SingleClass,
    UnknownFamily,
)
from rotorvib.features import Family, FeatureSchema, build_schema
from rotorvib.pipeline import (
    Dataset,
    MaskedPCA,
    Preprocessor,
    Split,
    Standardizer,
    apply_scaler,
    fit_pca,
    fit_scaler,
    select_family,
    stratified_split,
    transform_pca,
)


def power_iteration_eigvals(cov, k, iters=5000):
    """Dominant eigenvalues by power iteration with Hotelling deflation."""
    a = np.array(cov, dtype=float)
    out = []
    v0 = np.random.default_rng(0).normal(size=a.shape[0])
    for _ in range(k):
        v = v0 / np.linalg.norm(v0)
        for _ in range(iters):
            w = a @ v
            n = np.linalg.norm(w)
            if n == 0:
                break
            v = w / n
        lam = float(v @ a @ v)
        out.append(lam)
        a = a - lam * np.outer(v, v)
    return np.array(out)


def paper_labels():
    return np.array([0] * 480 + [1] * 1080)


def test_paper_split_counts():
    split = stratified_split(paper_labels(), 0.7, seed=3)
    y = paper_labels()
    assert split.train.size == 1092 and split.test.size == 468
    assert np.bincount(y[split.train]).tolist() == [336, 756]
    assert np.bincount(y[split.test]).tolist() == [144, 324]
    again = stratified_split(paper_labels(), 0.7, seed=3)
    assert np.array_equal(again.train, split.train)
    assert not np.array_equal(stratified_split(paper_labels(), 0.7, seed=4).train, split.train)


def test_split_errors():
    with pytest.raises(SingleClass):
        stratified_split(np.zeros(10, dtype=int))
    with pytest.raises(EmptyDataset):
        stratified_split(np.array([], dtype=int))
    with pytest.raises(LeakageError):
        Split(np.array([0, 1]), np.array([1, 2]), 0, 0.5)


@settings(max_examples=100)
@given(st.integers(1, 60), st.integers(1, 60), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
def test_split_stratification_property(n0, n1, frac, seed):
    y = np.array([0] * n0 + [1] * n1)
    split = stratified_split(y, frac, seed)
    assert np.union1d(split.train, split.test).size == y.size
    assert np.intersect1d(split.train, split.test).size == 0
    if split.train.size:
        for c, n in ((0, n0), (1, n1)):
            # half-up rounding per stratum keeps each class within one row
            assert abs(np.sum(y[split.train] == c) - frac * n) <= 0.5 + 1e-9


def test_experiment_mode_keeps_experiments_whole():
    y = np.array([0] * 20 + [1] * 40)
    groups = np.array([f"n{i // 5}" for i in range(20)] + [f"d{i // 5}" for i in range(40)], dtype=object)
    split = stratified_split(y, 0.7, 1, mode="experiment", groups=groups)
    assert not set(groups[split.train]) & set(groups[split.test])
    assert len(set(groups[split.train])) == 3 + 6  # round(0.7*4)=3, round(0.7*8)=6


def test_scaler_examples():
    sc = fit_scaler(np.array([[1.0, 7.0], [3.0, 7.0]]))
    assert sc.mean_.tolist() == [2.0, 7.0] and sc.std_.tolist() == [1.0, 0.0]
    out = apply_scaler(sc, np.array([[5.0, 9.0]]))
    assert out.tolist() == [[3.0, 2.0]]
    with pytest.raises(EmptyMatrix):
        fit_scaler(np.empty((0, 2)))
    back = Standardizer.from_dict(sc.to_dict())
    assert np.array_equal(back.transform([[5.0, 9.0]]), out)


def test_scaler_centers_training_data(rng):
    X = rng.normal(3, 2, size=(40, 6))
    Z = Standardizer().fit_transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.allclose(Z.std(axis=0), 1.0)


def test_pca_rank_one_line():
    t = np.linspace(-1, 1, 20)
    pca = fit_pca(np.column_stack([t, t]), 1)
    assert pca.explained_variance_ratio_[0] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(pca.components_[0], [np.sqrt(0.5), np.sqrt(0.5)])


def test_pca_power_iteration_oracle(rng):
    X = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
    pca = MaskedPCA(8).fit(X)
    cov = np.cov(X, rowvar=False)
    oracle = power_iteration_eigvals(cov, 8)
    assert np.allclose(pca.explained_variance_, oracle, rtol=1e-6)


def test_pca_full_rank_reconstruction(rng):
    X = rng.normal(size=(30, 6))
    pca = MaskedPCA(6).fit(X)
    assert np.max(np.abs(pca.inverse_transform_block(pca.transform(X)) - X)) < 1e-8
    assert np.all(np.diff(pca.explained_variance_ratio_) <= 1e-15)
    assert pca.explained_variance_ratio_.sum() == pytest.approx(1.0, abs=1e-12)
    C = pca.components_
    assert np.allclose(C @ C.T, np.eye(6), atol=1e-8)
    lead = C[np.arange(6), np.argmax(np.abs(C), axis=1)]
    assert np.all(lead > 0)


def test_pca_gram_route_matches_covariance_route(rng):
    X = rng.normal(size=(12, 40))
    wide = MaskedPCA(5).fit(X)
    # covariance eigendecomposition directly
    c = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(c.T @ c / 11)
    vals, vecs = vals[::-1][:5], vecs[:, ::-1][:, :5].T
    assert np.allclose(wide.explained_variance_, vals, rtol=1e-10)
    assert np.allclose(np.abs(wide.components_ @ vecs.T), np.eye(5), atol=1e-8)


def test_pca_mask_and_errors(rng):
    X = rng.normal(size=(10, 5))
    mask = np.array([True, False, True, True, False])
    pca = MaskedPCA(2, mask).fit(X)
    out = transform_pca(pca, X)
    assert out.shape == (10, 4)
    assert np.array_equal(out[:, :2], X[:, [1, 4]])
    with pytest.raises(KTooLarge):
        MaskedPCA(4, mask).fit(X)
    with pytest.raises(EmptyMask):
        MaskedPCA(1, np.zeros(5, bool)).fit(X)
    schema = FeatureSchema.generic(5)
    back = MaskedPCA.from_dict(pca.to_dict(schema), schema)
    assert np.array_equal(back.transform(X), out)
    back = MaskedPCA.from_dict(pca.to_dict())
    assert np.array_equal(back.transform(X), out)


def test_with_components_shares_basis(rng):
    X = rng.normal(size=(40, 10))
    big = MaskedPCA(8).fit(X)
    small = big.with_components(3)
    assert np.array_equal(small.transform(X), MaskedPCA(3).fit(X).transform(X))


def _dataset(rng, n=60):
    schema = build_schema(2, 3, 1)
    X = rng.normal(size=(n, len(schema)))
    y = np.array([0] * (n // 3) + [1] * (n - n // 3))
    return Dataset(X, y, np.array(["e"] * n, dtype=object), schema)


def test_select_family_counts():
    schema = build_schema(11, 65, 3)
    ds = Dataset(np.zeros((2, len(schema))), [0, 1], ["a", "b"], schema)
    assert select_family(ds, Family.WAVELET).X.shape[1] == 48
    td = select_family(ds, "TimeDomain")
    assert td.X.shape[1] == 24
    assert select_family(td, "TimeDomain").schema.names == td.schema.names
    with pytest.raises(UnknownFamily):
        select_family(td, Family.STFT)


def test_leakage_guard_bit_identical(rng):
    ds = _dataset(rng)
    split = stratified_split(ds, 0.7, 0)
    pre = Preprocessor(3, Family.STFT).fit(ds, split)
    X2 = ds.X.copy()
    X2[split.test] = rng.normal(100, 50, size=(split.test.size, X2.shape[1]))
    ds2 = Dataset(X2, ds.y, ds.experiment_ids, ds.schema)
    pre2 = Preprocessor(3, Family.STFT).fit(ds2, split)
    assert np.array_equal(pre.scaler_.mean_, pre2.scaler_.mean_)
    assert np.array_equal(pre.scaler_.std_, pre2.scaler_.std_)
    assert np.array_equal(pre.pca_.components_, pre2.pca_.components_)
    assert np.array_equal(pre.pca_.mean_, pre2.pca_.mean_)


def test_preprocessor_rejects_foreign_split(rng):
    ds = _dataset(rng, 30)
    bad = Split(np.arange(25, 40), np.arange(0, 5), 0, 0.7)
    with pytest.raises(LeakageError):
        Preprocessor().fit(ds, bad)


def test_preprocessor_round_trip(rng):
    ds = _dataset(rng)
    split = stratified_split(ds, 0.7, 0)
    pre = Preprocessor(4, "STFT").fit(ds, split)
    back = Preprocessor.from_dict(pre.to_dict(), ds.schema)
    assert np.array_equal(back.transform(ds.X), pre.transform(ds.X))
    assert back.schema_out_.names == pre.schema_out_.names
