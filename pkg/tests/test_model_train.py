"""Training loop: degenerate inputs, seeded reproducibility, metrics
conventions, and loss movement on a separable corpus."""

import numpy as np
import pytest

from ptracer.errors import DegenerateCorpus
from ptracer.model import Metrics, evaluate, forward, init_params, train
from ptracer.preprocess import build_vocabs_from_patches, encode_corpus

from conftest import CONVERGED_MODEL, TINY_MODEL, planted_corpus


def _encoded(n, seed, cfg):
    labeled = planted_corpus(n, seed=seed)
    vm, vc = build_vocabs_from_patches([lp.patch for lp in labeled])
    return encode_corpus(labeled, vm, vc, cfg.encode), vm, vc


class TestDegenerateInputs:
    def test_single_class_rejected(self):
        encs, vm, vc = _encoded(10, 3, TINY_MODEL)
        positives = [e for e in encs if e.label == 1]
        with pytest.raises(DegenerateCorpus):
            train(positives, TINY_MODEL, vm.size, vc.size)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DegenerateCorpus):
            train([], TINY_MODEL, 5, 5)

    def test_unlabeled_patch_rejected(self):
        encs, vm, vc = _encoded(10, 3, TINY_MODEL)
        encs[4].label = None
        with pytest.raises(DegenerateCorpus):
            train(encs, TINY_MODEL, vm.size, vc.size)


class TestReproducibility:
    def test_bit_identical_across_runs(self):
        encs, vm, vc = _encoded(30, 5, TINY_MODEL)
        p1, log1 = train(encs, TINY_MODEL, vm.size, vc.size)
        p2, log2 = train(encs, TINY_MODEL, vm.size, vc.size)
        for (n1, a), (n2, b) in zip(p1.arrays(), p2.arrays()):
            assert n1 == n2
            assert np.array_equal(a, b), n1
        assert [e.train_loss for e in log1] == [e.train_loss for e in log2]

    def test_seed_changes_outcome(self):
        encs, vm, vc = _encoded(30, 5, TINY_MODEL)
        from dataclasses import replace

        p1, _ = train(encs, TINY_MODEL, vm.size, vc.size)
        p2, _ = train(encs, replace(TINY_MODEL, seed=99), vm.size, vc.size)
        assert any(not np.array_equal(a, b)
                   for (_, a), (_, b) in zip(p1.arrays(), p2.arrays()))


class TestTrainingRun:
    def test_epoch_log_shape(self):
        encs, vm, vc = _encoded(30, 5, TINY_MODEL)
        _, log = train(encs, TINY_MODEL, vm.size, vc.size)
        assert len(log) == TINY_MODEL.epochs
        assert [e.epoch for e in log] == list(range(TINY_MODEL.epochs))
        assert all(np.isfinite(e.train_loss) for e in log)
        assert all(e.eval_metrics is not None for e in log)  # 30 // 10 == 3 held out

    def test_tiny_corpus_has_no_holdout(self):
        encs, vm, vc = _encoded(8, 5, TINY_MODEL)
        _, log = train(encs, TINY_MODEL, vm.size, vc.size)
        assert all(e.eval_metrics is None for e in log)

    def test_separable_corpus_learns(self):
        encs, vm, vc = _encoded(200, 11, CONVERGED_MODEL)
        params, log = train(encs, CONVERGED_MODEL, vm.size, vc.size)
        assert log[-1].train_loss < log[0].train_loss
        assert log[-1].eval_metrics.accuracy >= 0.95
        # the planted token really drives the separation
        scores = {e.label: forward(e, params) for e in encs[:2]}
        assert scores[1] > 0.5 > scores[0]

    def test_updates_leave_biases_trained(self):
        # biases start at zero but move once gradients flow
        encs, vm, vc = _encoded(60, 11, CONVERGED_MODEL)
        params, _ = train(encs, CONVERGED_MODEL, vm.size, vc.size)
        assert params.b_o.any() or params.b_h.any()


class TestMetrics:
    def test_worked_example(self):
        m = Metrics.from_counts(tp=2, fp=1, tn=6, fn=1)
        assert m.accuracy == pytest.approx(0.8)
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)

    def test_zero_denominator_conventions(self):
        none = Metrics.from_counts(0, 0, 0, 0)
        assert (none.accuracy, none.precision, none.recall, none.f1) == (0, 0, 0, 0)
        no_pred_pos = Metrics.from_counts(0, 0, 5, 2)
        assert no_pred_pos.precision == 0.0
        no_real_pos = Metrics.from_counts(0, 3, 5, 0)
        assert no_real_pos.recall == 0.0
        # precision+recall both zero leaves f1 at 0 rather than NaN
        assert Metrics.from_counts(0, 1, 1, 1).f1 == 0.0

    def test_as_dict_keys(self):
        d = Metrics.from_counts(1, 1, 1, 1).as_dict()
        assert set(d) == {"tp", "fp", "tn", "fn",
                          "accuracy", "precision", "recall", "f1"}


class TestEvaluate:
    def test_threshold_is_inclusive(self):
        encs, vm, vc = _encoded(10, 3, TINY_MODEL)
        params = init_params(TINY_MODEL, vm.size, vc.size).zeros_like()
        # all-zero params score exactly 0.5 everywhere; >= makes that positive
        m = evaluate(params, encs, 0.5)
        assert m.tp == sum(1 for e in encs if e.label == 1)
        assert m.fp == sum(1 for e in encs if e.label == 0)
        assert m.tn == m.fn == 0

    def test_threshold_validation(self):
        encs, vm, vc = _encoded(4, 3, TINY_MODEL)
        params = init_params(TINY_MODEL, vm.size, vc.size)
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                evaluate(params, encs, bad)

    def test_counts_total(self):
        encs, vm, vc = _encoded(20, 4, TINY_MODEL)
        params = init_params(TINY_MODEL, vm.size, vc.size, np.random.default_rng(5))
        m = evaluate(params, encs, 0.5)
        assert m.tp + m.fp + m.tn + m.fn == len(encs)
