import math

import numpy as np
import pytest

from svagree.nn import (
    AdamState,
    ModelConfig,
    ParamStore,
    RecurrentModel,
    adam_update,
    checkpoint_dict,
    classifier_loss,
    example_loss,
    grad_check,
    init_params,
    lm_loss,
    load_checkpoint,
    lstm_step,
    model_from_checkpoint,
    save_checkpoint,
    softmax,
    srn_step,
)


def reference_lstm_step(ps, x, h_prev, c_prev):
    """Straight-line re-statement of the LSTM equations, used only as a test
    oracle against the production step."""

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    z = np.concatenate([x, h_prev])
    p = ps.params
    i = sig(z @ p["W_i"] + p["b_i"])
    f = sig(z @ p["W_f"] + p["b_f"])
    o = sig(z @ p["W_o"] + p["b_o"])
    g = np.tanh(z @ p["W_g"] + p["b_g"])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def reference_srn_step(ps, x, h_prev):
    z = np.concatenate([x, h_prev])
    return np.tanh(z @ ps.params["W"] + ps.params["b"])


def lstm_params(d, h, vocab=5, seed=None, zero=False):
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=vocab, dim=d, hidden=h)
    ps = init_params(config, np.random.default_rng(0 if seed is None else seed))
    if zero:
        for p in ps.params.values():
            p.fill(0.0)
    return config, ps


# --- cell steps -----------------------------------------------------------------


def test_lstm_step_all_zero_weights_and_input():
    _, ps = lstm_params(3, 3, zero=True)
    h, c = lstm_step(ps, np.zeros(3), np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(h, np.zeros(3))
    np.testing.assert_array_equal(c, np.zeros(3))


def test_lstm_forget_gate_saturation_preserves_cell():
    _, ps = lstm_params(3, 3, zero=True)
    ps.params["b_f"].fill(50.0)  # forget gate ~ 1
    c_prev = np.array([0.3, -0.7, 1.1])
    h, c = lstm_step(ps, np.zeros(3), np.zeros(3), c_prev)
    np.testing.assert_allclose(c, c_prev, atol=1e-6)


def test_lstm_step_matches_reference():
    _, ps = lstm_params(3, 3, seed=7)
    rng = np.random.default_rng(7)
    x = rng.normal(size=3)
    h_prev = rng.normal(size=3)
    c_prev = rng.normal(size=3)
    h, c = lstm_step(ps, x, h_prev, c_prev)
    h_ref, c_ref = reference_lstm_step(ps, x, h_prev, c_prev)
    np.testing.assert_allclose(h, h_ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-12)


def test_lstm_gates_bounded_and_cell_growth_bounded():
    _, ps = lstm_params(4, 4, seed=3)
    rng = np.random.default_rng(11)
    h_prev = np.zeros(4)
    c_prev = np.zeros(4)
    for _ in range(50):
        x = rng.normal(size=4) * 5
        h, c = lstm_step(ps, x, h_prev, c_prev)
        assert np.all(np.abs(c) <= np.abs(c_prev) + 1.0 + 1e-12)
        h_prev, c_prev = h, c


def test_lstm_step_shape_mismatch_raises():
    _, ps = lstm_params(3, 3)
    with pytest.raises(ValueError):
        lstm_step(ps, np.zeros(5), np.zeros(3), np.zeros(3))


def srn_params(d, h, seed=0, zero=False):
    config = ModelConfig(cell="srn", mode="classifier", vocab_size=5, dim=d, hidden=h)
    ps = init_params(config, np.random.default_rng(seed))
    if zero:
        for p in ps.params.values():
            p.fill(0.0)
    return config, ps


def test_srn_step_zero_weights():
    _, ps = srn_params(3, 3, zero=True)
    np.testing.assert_array_equal(
        srn_step(ps, np.ones(3), np.ones(3)), np.zeros(3)
    )


def test_srn_step_identity_recurrent_block():
    _, ps = srn_params(3, 3, zero=True)
    ps.params["W"][3:, :] = np.eye(3)  # recurrent block only
    h_prev = np.array([0.2, -0.4, 0.9])
    np.testing.assert_allclose(
        srn_step(ps, np.zeros(3), h_prev), np.tanh(h_prev), atol=1e-12
    )


def test_srn_step_matches_reference():
    _, ps = srn_params(3, 3, seed=7)
    rng = np.random.default_rng(7)
    x, h_prev = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(
        srn_step(ps, x, h_prev), reference_srn_step(ps, x, h_prev), atol=1e-12
    )


# --- forward ----------------------------------------------------------------------


def test_classifier_forward_distribution():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    result = model.forward([1, 2, 3])
    assert result.probs.shape == (2,)
    assert math.isclose(result.probs.sum(), 1.0, abs_tol=1e-9)


def test_lm_forward_one_distribution_per_position():
    config = ModelConfig(cell="lstm", mode="lm", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    result = model.forward([1, 2, 3, 4, 5])
    assert result.probs.shape == (5, 7)
    np.testing.assert_allclose(result.probs.sum(axis=1), np.ones(5), atol=1e-9)


def test_forward_trace_has_one_record_per_token():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    result = model.forward([1, 2, 3, 4], want_trace=True)
    assert result.trace.hidden.shape == (4, 4)
    assert result.trace.cell.shape == (4, 4)
    assert result.trace.probs.shape == (4, 2)


def test_forward_rejects_empty_and_out_of_range():
    config = ModelConfig(cell="srn", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    with pytest.raises(ValueError):
        model.forward([])
    with pytest.raises(ValueError):
        model.forward([7])


def test_untrained_model_fuzz_no_nan():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=11, dim=5, hidden=5)
    model = RecurrentModel(config, seed=9)
    rng = np.random.default_rng(2)
    for _ in range(1000):
        length = int(rng.integers(1, 12))
        ids = rng.integers(0, 11, size=length)
        probs = model.forward(ids).probs
        assert np.all(np.isfinite(probs))
        assert np.all(probs > 0) and np.all(probs < 1)


def test_softmax_extreme_logits_no_overflow():
    probs = softmax(np.array([800.0, -800.0, 0.0]))
    assert np.all(np.isfinite(probs))
    assert math.isclose(probs.sum(), 1.0, abs_tol=1e-9)
    near = softmax(np.array([500.0, 499.0]))
    assert math.isclose(near.sum(), 1.0, abs_tol=1e-9)


# --- backward ----------------------------------------------------------------------


def test_zero_loss_gradient_gives_zero_param_gradients():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    model.forward([1, 2, 3])
    model.ps.zero_grads()
    model.backward(np.zeros(2))
    for grad in model.ps.grads.values():
        np.testing.assert_array_equal(grad, np.zeros_like(grad))


def test_backward_before_forward_is_error():
    config = ModelConfig(cell="srn", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    with pytest.raises(RuntimeError):
        model.backward(np.zeros(2))


def test_absent_token_embeddings_get_zero_gradient():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=9, dim=4, hidden=4)
    model = RecurrentModel(config, seed=5)
    model.ps.zero_grads()
    loss, _, dlogits = example_loss(model, [2, 4, 2], 1)
    model.backward(dlogits)
    E_grad = model.ps.grads["E"]
    used = {2, 4}
    for row in range(9):
        if row in used:
            assert np.any(E_grad[row] != 0.0)
        else:
            np.testing.assert_array_equal(E_grad[row], np.zeros(4))


@pytest.mark.parametrize(
    "cell,mode",
    [("lstm", "classifier"), ("srn", "classifier"), ("lstm", "lm"), ("srn", "lm")],
)
def test_bptt_matches_finite_differences(cell, mode):
    config = ModelConfig(cell=cell, mode=mode, vocab_size=11, dim=4, hidden=4)
    report = grad_check(config, seed=1, tolerance=1e-4, seq_len=6)
    assert report.passed, report.max_rel_error


def test_grad_check_detects_corrupted_gradient():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=11, dim=4, hidden=4)
    rng = np.random.default_rng(1)
    model = RecurrentModel(config, init_params(config, rng))
    ids = rng.integers(0, 11, size=6)
    target = int(rng.integers(0, 2))
    model.ps.zero_grads()
    loss, _, dlogits = example_loss(model, ids, target)
    model.backward(dlogits)
    analytic = {n: g.copy() for n, g in model.ps.grads.items()}
    # corrupt the largest-magnitude gate-weight gradient entry
    flat = analytic["W_i"].reshape(-1)
    flat[np.argmax(np.abs(flat))] *= 2.0

    from svagree.nn import _relative_errors, finite_difference_grads

    numeric = finite_difference_grads(
        lambda: example_loss(model, ids, target)[0], model.ps
    )
    worst = float(np.max(_relative_errors(analytic["W_i"], numeric["W_i"])))
    assert worst > 1e-4


# --- losses -------------------------------------------------------------------------


def test_classifier_loss_gradient_shape_and_value():
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    result = model.forward([1, 2])
    loss, dlogits = classifier_loss(result, 1)
    assert loss > 0
    np.testing.assert_allclose(dlogits, result.probs - np.array([0.0, 1.0]), atol=1e-12)


def test_lm_loss_is_mean_token_cross_entropy():
    config = ModelConfig(cell="lstm", mode="lm", vocab_size=7, dim=4, hidden=4)
    model = RecurrentModel(config, seed=1)
    result = model.forward([1, 2, 3])
    targets = [2, 3, 4]
    loss, dlogits = lm_loss(result, targets)
    expected = -np.mean(
        [np.log(result.probs[t, targets[t]]) for t in range(3)]
    )
    assert math.isclose(loss, float(expected), rel_tol=1e-12)
    assert dlogits.shape == (3, 7)


# --- Adam --------------------------------------------------------------------------


def test_adam_zero_gradient_leaves_params_moments_decay():
    config, ps = lstm_params(3, 3, seed=2)
    state = AdamState.for_params(ps)
    before = ps.copy_params()
    ps.zero_grads()
    adam_update(ps, state)
    for name in ps.params:
        np.testing.assert_array_equal(ps.params[name], before[name])
    assert state.step == 1


def test_adam_step_counter_increments():
    _, ps = lstm_params(3, 3, seed=2)
    state = AdamState.for_params(ps)
    for expected in (1, 2, 3):
        adam_update(ps, state)
        assert state.step == expected


def test_adam_constant_gradient_update_magnitude_approaches_lr():
    ps = ParamStore({"w": np.zeros(4)})
    state = AdamState.for_params(ps, lr=1e-3)
    g = np.array([0.5, -1.5, 2.0, -0.1])
    previous = ps.params["w"].copy()
    for _ in range(1000):
        np.copyto(ps.grads["w"], g)
        previous = ps.params["w"].copy()
        adam_update(ps, state)
    last_update = np.abs(ps.params["w"] - previous)
    np.testing.assert_allclose(last_update, 1e-3, rtol=0.01)


def test_adam_only_nonzero_gradients_move_params():
    ps = ParamStore({"w": np.zeros(4)})
    state = AdamState.for_params(ps)
    ps.grads["w"][:] = np.array([0.0, 1.0, 0.0, -2.0])
    adam_update(ps, state)
    moved = ps.params["w"] != 0.0
    assert list(moved) == [False, True, False, True]


# --- determinism and checkpoints ------------------------------------------------------


def test_update_determinism_bitwise():
    def run():
        config = ModelConfig(cell="lstm", mode="classifier", vocab_size=9, dim=4, hidden=4)
        model = RecurrentModel(config, init_params(config, np.random.default_rng(3)))
        state = AdamState.for_params(model.ps)
        rng = np.random.default_rng(4)
        for _ in range(20):
            ids = rng.integers(0, 9, size=5)
            target = int(rng.integers(0, 2))
            model.ps.zero_grads()
            _, _, dlogits = example_loss(model, ids, target)
            model.backward(dlogits)
            adam_update(model.ps, state)
        return model.ps.params

    first, second = run(), run()
    for name in first:
        np.testing.assert_array_equal(first[name], second[name])


def test_checkpoint_round_trip_bit_exact(tmp_path):
    config = ModelConfig(cell="lstm", mode="classifier", vocab_size=9, dim=4, hidden=4)
    model = RecurrentModel(config, seed=12)
    path = tmp_path / "ckpt.json"
    save_checkpoint(
        path, checkpoint_dict(model, vocab_data={"words": ["a"]}, objective="number_pred")
    )
    doc = load_checkpoint(path)
    clone = model_from_checkpoint(doc)
    for name, p in model.ps.params.items():
        np.testing.assert_array_equal(p, clone.ps.params[name])
    # byte-identical re-serialization
    save_checkpoint(tmp_path / "again.json", checkpoint_dict(clone, vocab_data={"words": ["a"]}, objective="number_pred"))
    assert (tmp_path / "ckpt.json").read_bytes() == (tmp_path / "again.json").read_bytes()
