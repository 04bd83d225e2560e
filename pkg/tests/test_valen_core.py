"""Solver core: enumeration, pattern extraction, consistency scoring."""

import numpy as np
import pytest
import torch

from valen.errors import DataError
from valen.model import (
    N_CELLS,
    OPTION_SLOT,
    PanelEncoder,
    ValenModel,
    enumerate_incomplete,
    option_loss,
)


def finite_difference(fn, params, eps=1e-5):
    """Central differences w.r.t. a flat parameter vector (float64)."""
    grads = torch.zeros_like(params)
    for i in range(params.numel()):
        p = params.clone()
        p[i] += eps
        hi = fn(p)
        p = params.clone()
        p[i] -= eps
        lo = fn(p)
        grads[i] = (hi - lo) / (2 * eps)
    return grads


def max_rel_error(analytic, numeric):
    denom = analytic.abs().maximum(numeric.abs()).clamp_min(1e-8)
    return float(((analytic - numeric).abs() / denom).max())


class TestEnumeration:
    def test_nine_contexts_each_omitting_its_index(self):
        reps = torch.randn(2, N_CELLS, 3, 5)
        contexts = enumerate_incomplete(reps)
        assert contexts.shape == (2, 9, 8, 3, 5)
        for n in range(9):
            kept = [i for i in range(9) if i != n]
            assert torch.equal(contexts[:, n], reps[:, kept])

    def test_counting_oracle_each_rep_appears_eight_times(self):
        # tag each cell with a unique scalar and count occurrences
        reps = torch.arange(9, dtype=torch.float64).reshape(1, 9, 1, 1)
        contexts = enumerate_incomplete(reps)
        flat = contexts.reshape(-1).tolist()
        for i in range(9):
            assert flat.count(float(i)) == 8

    def test_runs_fast(self):
        import time
        reps = torch.randn(8, N_CELLS, 4, 64)
        t0 = time.time()
        for _ in range(100):
            enumerate_incomplete(reps)
        assert time.time() - t0 < 1.0


class TestPanelEncoder:
    def test_output_shape(self):
        enc = PanelEncoder(dim=32, n_views=3, heads=4, depth=1)
        out = enc(torch.rand(5, 32, 32))
        assert out.shape == (5, 3, 32)

    def test_eval_mode_deterministic(self):
        enc = PanelEncoder(dim=16, n_views=2, heads=2, depth=1).eval()
        x = torch.rand(2, 32, 32)
        with torch.no_grad():
            assert torch.equal(enc(x), enc(x))

    def test_distinct_panels_distinct_reps(self):
        enc = PanelEncoder(dim=16, n_views=2, heads=2, depth=1).eval()
        with torch.no_grad():
            zero = enc(torch.zeros(1, 32, 32))
            one = enc(torch.ones(1, 32, 32))
        assert not torch.allclose(zero, one)


class TestModelInvariances:
    @pytest.fixture()
    def model(self):
        torch.manual_seed(3)
        return ValenModel(dim=16, n_views=2, n_patterns=2, heads=2,
                          encoder_depth=1, extractor_depth=1, analyzer_depth=1).eval()

    def test_score_candidates_shape(self, model):
        scores = model(torch.rand(2, 8, 32, 32), torch.rand(2, 8, 32, 32))
        assert scores.shape == (2, 8)

    def test_context_permutation_invariance(self, model):
        """Permuting the 8 memory contexts leaves the option score unchanged
        (the consistency decoder uses no positional encoding)."""
        reps = torch.randn(1, N_CELLS, 2, 16)
        patterns = model.extract_pattern_set(reps)  # [1, V, 9, M, D]
        with torch.no_grad():
            base = model.consistency_from_patterns(patterns)
            perm = torch.randperm(OPTION_SLOT)
            shuffled = patterns.clone()
            shuffled[:, :, :OPTION_SLOT] = patterns[:, :, perm]
            after = model.consistency_from_patterns(shuffled)
        assert torch.allclose(base, after, atol=1e-5)

    def test_every_context_entry_receives_gradient(self, model):
        """Finite-difference probe: score depends on every context cell."""
        reps = torch.randn(1, N_CELLS, 2, 16, requires_grad=True)
        score = model.score_matrix_reps(reps).sum()
        score.backward()
        cell_grads = reps.grad.abs().sum(dim=(0, 2, 3))
        assert (cell_grads > 0).all(), cell_grads

    def test_shuffled_pool_permuted_label_loss_invariant(self, model):
        statement = torch.rand(2, 8, 32, 32)
        pool = torch.rand(2, 8, 32, 32)
        answer = torch.tensor([3, 6])
        with torch.no_grad():
            base = option_loss(model(statement, pool), answer)
            perm = torch.randperm(8)
            inv = torch.argsort(perm)
            shuffled = option_loss(model(statement, pool[:, perm]), inv[answer])
        assert torch.allclose(base, shuffled, atol=1e-5)

    def test_statement_size_checked(self, model):
        with pytest.raises(DataError):
            model(torch.rand(1, 7, 32, 32), torch.rand(1, 8, 32, 32))


class TestOptionLoss:
    def test_uniform_scores_give_ln8(self):
        loss = option_loss(torch.zeros(4, 8), torch.tensor([0, 3, 5, 7]))
        assert float(loss) == pytest.approx(np.log(8.0), abs=1e-6)

    def test_softmax_shift_invariance(self):
        scores = torch.randn(3, 8)
        answer = torch.tensor([1, 2, 4])
        shifted = option_loss(scores + 100.0, answer)
        assert torch.allclose(option_loss(scores, answer), shifted, atol=1e-5)

    def test_answer_range_checked(self):
        with pytest.raises(DataError):
            option_loss(torch.zeros(1, 8), torch.tensor([8]))

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        scores = torch.randn(2, 8, dtype=torch.float64, requires_grad=True)
        answer = torch.tensor([2, 5])
        option_loss(scores, answer).backward()

        def fn(flat):
            return option_loss(flat.reshape(2, 8), answer)

        numeric = finite_difference(fn, scores.detach().reshape(-1))
        assert max_rel_error(scores.grad.reshape(-1), numeric) < 1e-4


class TestEndToEndGradient:
    def test_model_score_gradient_vs_finite_differences(self):
        """Full pipeline gradient, width-16 toy model, float64."""
        torch.manual_seed(1)
        model = ValenModel(dim=16, n_views=1, n_patterns=2, heads=2,
                           encoder_depth=1, extractor_depth=1,
                           analyzer_depth=1).double().eval()
        reps = torch.randn(1, N_CELLS, 1, 16, dtype=torch.float64)
        probe = model.analyzer.score_mlp[0].weight  # one representative tensor

        def fn(flat):
            with torch.no_grad():
                saved = probe.detach().clone()
                probe.copy_(flat.reshape(probe.shape))
            with torch.no_grad():
                out = model.score_matrix_reps(reps).sum()
                probe.copy_(saved)
            return float(out)

        model.zero_grad()
        model.score_matrix_reps(reps).sum().backward()
        numeric = finite_difference(fn, probe.detach().reshape(-1).clone())
        assert max_rel_error(probe.grad.reshape(-1), numeric) < 1e-4

    def test_training_loss_decreases(self):
        torch.manual_seed(0)
        model = ValenModel(dim=16, n_views=1, n_patterns=2, heads=2,
                           encoder_depth=1, extractor_depth=1, analyzer_depth=1)
        statement = torch.rand(4, 8, 32, 32)
        pool = torch.rand(4, 8, 32, 32)
        answer = torch.tensor([0, 1, 2, 3])
        opt = torch.optim.Adam(model.parameters(), lr=1e-3)
        first = None
        for step in range(50):
            loss = option_loss(model(statement, pool), answer)
            if step == 0:
                first = float(loss.detach())
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert float(loss.detach()) < first
