"""AdamW update semantics."""

import numpy as np
import pytest

from kanshift.optim import AdamWState, adamw_step


def reference_adamw(params, grad_seq, lr, beta1, beta2, eps, wd):
    """Independent re-implementation used to cross-check multi-step runs."""
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    p = params.copy()
    for k, g in enumerate(grad_seq, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1**k)
        vh = v / (1 - beta2**k)
        p = p - lr * mh / (np.sqrt(vh) + eps) - lr * wd * p
    return p


class TestAdamWStep:
    def test_single_step_hand_computed(self):
        # with zero moments, m_hat = g and v_hat = g^2, so the step is
        # -lr * g / (|g| + eps)
        g = np.array([0.3, -2.0, 1e-4])
        state = AdamWState.zeros(3, lr=1e-2, weight_decay=0.0)
        p = adamw_step(np.zeros(3), g, state)
        expected = -1e-2 * g / (np.abs(g) + state.eps)
        assert np.allclose(p, expected, rtol=1e-12, atol=1e-18)
        assert state.step_count == 1

    def test_zero_gradient_zero_decay_is_identity(self):
        params = np.array([1.0, -2.0, 3.5])
        state = AdamWState.zeros(3, weight_decay=0.0)
        out = adamw_step(params, np.zeros(3), state)
        assert np.array_equal(out, params)

    def test_decoupled_decay_pure_shrink(self):
        params = np.array([2.0, -4.0])
        state = AdamWState.zeros(2, lr=1e-3, weight_decay=0.1)
        out = adamw_step(params, np.zeros(2), state)
        assert np.allclose(out, params * (1 - 1e-3 * 0.1), rtol=0, atol=1e-18)

    def test_multi_step_matches_reference(self):
        rng = np.random.default_rng(0)
        params = rng.normal(size=5)
        grads = [rng.normal(size=5) for _ in range(7)]
        state = AdamWState.zeros(5, lr=3e-3, weight_decay=1e-2)
        p = params.copy()
        for g in grads:
            p = adamw_step(p, g, state)
        ref = reference_adamw(params, grads, 3e-3, state.beta1, state.beta2, state.eps, 1e-2)
        assert np.allclose(p, ref, rtol=1e-14, atol=1e-16)
        assert state.step_count == 7

    def test_length_mismatch_rejected(self):
        state = AdamWState.zeros(3)
        with pytest.raises(ValueError, match="mismatch"):
            adamw_step(np.zeros(3), np.zeros(4), state)

    def test_invalid_hyperparameters_rejected(self):
        with pytest.raises(ValueError):
            AdamWState.zeros(2, beta1=1.0)
        with pytest.raises(ValueError):
            AdamWState.zeros(2, lr=0.0)
