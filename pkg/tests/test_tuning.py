import io

import numpy as np
import pytest

from hsvm import Dataset, DomainError, Grid, grid_search, kfold_split
from hsvm.data import SynthSpec, gen_binary_gaussian


class TestKfoldSplit:
    def test_singletons(self):
        folds = kfold_split(10, 10, seed=0)
        assert len(folds) == 10
        assert all(f.size == 1 for f in folds)

    def test_partition_property(self):
        folds = kfold_split(23, 5, seed=1)
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(23))
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_stratification_balanced_binary(self):
        labels = np.array([1] * 50 + [-1] * 50)
        folds = kfold_split(100, 10, labels=labels, seed=2)
        for f in folds:
            assert (labels[f] == 1).sum() == 5
            assert (labels[f] == -1).sum() == 5

    def test_deterministic_per_seed(self):
        a = kfold_split(40, 4, seed=7)
        b = kfold_split(40, 4, seed=7)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)
        c = kfold_split(40, 4, seed=8)
        assert any(not np.array_equal(fa, fc) for fa, fc in zip(a, c))

    def test_too_many_folds(self):
        with pytest.raises(DomainError):
            kfold_split(3, 5)


def separable_data(seed=0, n=60):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    y = np.where(X[:, 0] >= 0, 1, -1)
    X[:, 0] += y * 2.0  # widen the margin
    return Dataset(X, y)


class TestGridSearch:
    def test_single_point_returned(self):
        data = separable_data(1)
        grid = Grid([0.1], [1.0], folds=5)
        res = grid_search(data, grid, seed=0)
        assert res.best_lambda1 == 0.1 and res.best_lambda2 == 1.0
        assert len(res.table) == 5

    def test_perfect_point_wins(self):
        data = separable_data(2)
        # lambda1 = 50 kills every weight; 0.05 separates perfectly
        grid = Grid([50.0, 0.05], [1.0], folds=5)
        res = grid_search(data, grid, seed=0)
        assert res.best_lambda1 == 0.05
        assert res.mean_scores[(0.05, 1.0)] == 1.0

    def test_tie_breaks_toward_larger_lambda1(self):
        data = separable_data(3)
        grid = Grid([0.01, 0.05], [0.5, 1.0], folds=5)
        res = grid_search(data, grid, seed=0)
        tied = [pt for pt, v in res.mean_scores.items()
                if v == max(res.mean_scores.values())]
        best = max(tied)
        assert (res.best_lambda1, res.best_lambda2) == best

    def test_table_shape_and_range(self):
        data = separable_data(4)
        grid = Grid([0.1, 0.2], [0.5], folds=4)
        res = grid_search(data, grid, seed=0)
        assert len(res.table) == 2 * 4
        assert all(0.0 <= r.accuracy <= 1.0 for r in res.table)
        best_score = res.mean_scores[(res.best_lambda1, res.best_lambda2)]
        assert best_score == max(res.mean_scores.values())

    def test_lambda3_tied_to_lambda2(self):
        grid = Grid([0.1], [0.5], lambda3="lambda2")
        hp = grid.hyperparams(0.1, 0.5)
        assert hp.lambda3 == 0.5
        grid_fixed = Grid([0.1], [0.5], lambda3=2.0)
        assert grid_fixed.hyperparams(0.1, 0.5).lambda3 == 2.0

    def test_results_independent_of_thread_count(self, monkeypatch):
        data = gen_binary_gaussian(SynthSpec(kind="binary_gaussian", n=30,
                                             p=12, s=3, seed=5))
        grid = Grid([0.05, 0.1], [0.5, 1.0], lambda3="lambda2", folds=3)
        seq = grid_search(data, grid, seed=1)
        monkeypatch.setenv("HSVM_THREADS", "4")
        par = grid_search(data, grid, seed=1)
        assert seq.best_lambda1 == par.best_lambda1
        assert seq.best_lambda2 == par.best_lambda2
        assert seq.mean_scores == par.mean_scores

    def test_csv_has_summary_line(self):
        data = separable_data(6, n=20)
        res = grid_search(data, Grid([0.1], [1.0], folds=4), seed=0)
        buf = io.StringIO()
        res.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "lambda1,lambda2,fold,accuracy"
        assert lines[-1].startswith("best,")

    def test_unknown_solver(self):
        with pytest.raises(DomainError):
            grid_search(separable_data(7), Grid([0.1], [1.0]), solver="nope")

    def test_fold_count_exceeding_samples(self):
        data = separable_data(8, n=6)
        with pytest.raises(DomainError):
            grid_search(data, Grid([0.1], [1.0], folds=10))


class TestSolverFailureHandling:
    def test_failing_point_scored_zero(self, monkeypatch):
        import hsvm.tuning as tuning
        from hsvm.errors import HsvmError

        calls = {"n": 0}

        def flaky_fit(train, hp, opts=None):
            calls["n"] += 1
            if hp.lambda1 == 0.5:
                raise HsvmError("synthetic failure")
            from hsvm.solver import fit_binary
            return fit_binary(train, hp, opts)

        monkeypatch.setitem(tuning.SOLVERS, "bpgh", flaky_fit)
        data = separable_data(9, n=24)
        res = grid_search(data, Grid([0.5, 0.05], [1.0], folds=3), seed=0)
        assert res.mean_scores[(0.5, 1.0)] == 0.0
        assert res.best_lambda1 == 0.05
        assert all(r.accuracy == 0.0 for r in res.table if r.lambda1 == 0.5)
