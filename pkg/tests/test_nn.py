"""Layers, attention vs direct-formula oracles, losses, optimizers."""

import math

import numpy as np
import pytest

from latentdrive.diffcore import (
    MLP,
    Adam,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    SGD,
    Tensor,
    cross_entropy,
    focal_loss,
    l1_loss,
    mse_loss,
)

from helpers import attention_oracle as _attention_oracle
from helpers import check_gradients


def _rng(seed=0):
    return np.random.default_rng(seed)


# --- mlp -----------------------------------------------------------------------


def test_mlp_zero_weights_annihilate():
    mlp = MLP(4, 3, _rng(0))
    for p in mlp.parameters():
        p.data = np.zeros_like(p.data)
    out = mlp(Tensor(_rng(1).normal(size=(5, 4))))
    np.testing.assert_array_equal(out.data, np.zeros((5, 3)))


def test_single_linear_identity():
    lin = Linear(4, 4, _rng(2))
    lin.weight.data = np.eye(4)
    lin.bias.data = np.zeros(4)
    x = _rng(3).normal(size=(2, 4))
    np.testing.assert_allclose(lin(Tensor(x)).data, x)


def test_mlp_gradients_match_finite_differences():
    mlp = MLP(3, 2, _rng(4), d_hidden=5)
    x = Tensor(_rng(5).normal(size=(4, 3)))
    w = _rng(6).normal(size=(4, 2))
    check_gradients(lambda: (mlp(x) * w).sum(), mlp.parameters())


def test_mlp_dimension_mismatch():
    mlp = MLP(3, 2, _rng(7))
    from latentdrive.diffcore import ShapeError

    with pytest.raises(ShapeError):
        mlp(Tensor(np.zeros((4, 5))))


# --- attention -------------------------------------------------------------------


def test_self_attention_single_token_is_affine():
    attn = MultiHeadAttention(8, 8, 1, _rng(8))
    x = _rng(9).normal(size=(1, 8))
    got = attn(Tensor(x), Tensor(x)).data
    # with one token the attention weight is exactly 1
    want = (x @ attn.v_proj.weight.data + attn.v_proj.bias.data) @ attn.out_proj.weight.data + attn.out_proj.bias.data
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_self_attention_duplicate_tokens_duplicate_rows():
    attn = MultiHeadAttention(8, 8, 4, _rng(10))
    row = _rng(11).normal(size=8)
    x = Tensor(np.stack([row, row, row]))
    out = attn(x, x).data
    np.testing.assert_allclose(out[0], out[1], atol=1e-12)
    np.testing.assert_allclose(out[0], out[2], atol=1e-12)


def test_self_attention_matches_formula_oracle():
    attn = MultiHeadAttention(8, 8, 1, _rng(12))
    x = _rng(13).normal(size=(3, 8))
    got = attn(Tensor(x), Tensor(x)).data
    np.testing.assert_allclose(got, _attention_oracle(x, x, attn), atol=1e-10)


def test_multihead_attention_matches_formula_oracle():
    attn = MultiHeadAttention(8, 6, 4, _rng(14))
    q = _rng(15).normal(size=(2, 8))
    c = _rng(16).normal(size=(5, 6))
    got = attn(Tensor(q), Tensor(c)).data
    np.testing.assert_allclose(got, _attention_oracle(q, c, attn), atol=1e-10)


def test_attention_batched_equals_per_item():
    attn = MultiHeadAttention(8, 8, 2, _rng(17))
    q = _rng(18).normal(size=(3, 4, 8))
    c = _rng(19).normal(size=(3, 6, 8))
    batched = attn(Tensor(q), Tensor(c)).data
    for b in range(3):
        single = attn(Tensor(q[b]), Tensor(c[b])).data
        np.testing.assert_allclose(batched[b], single, atol=1e-12)


def test_self_attention_permutation_equivariance():
    attn = MultiHeadAttention(8, 8, 4, _rng(20))
    x = _rng(21).normal(size=(5, 8))
    perm = np.array([3, 0, 4, 1, 2])
    out = attn(Tensor(x), Tensor(x)).data
    out_p = attn(Tensor(x[perm]), Tensor(x[perm])).data
    np.testing.assert_allclose(out_p, out[perm], atol=1e-10)


def test_cross_attention_context_permutation_invariance():
    attn = MultiHeadAttention(8, 8, 2, _rng(22))
    q = _rng(23).normal(size=(4, 8))
    c = _rng(24).normal(size=(6, 8))
    perm = np.array([5, 2, 0, 4, 1, 3])
    np.testing.assert_allclose(
        attn(Tensor(q), Tensor(c)).data,
        attn(Tensor(q), Tensor(c[perm])).data,
        atol=1e-10,
    )


def test_cross_attention_single_context_token():
    attn = MultiHeadAttention(8, 8, 2, _rng(25))
    q = _rng(26).normal(size=(4, 8))
    c = _rng(27).normal(size=(1, 8))
    out = attn(Tensor(q), Tensor(c)).data
    want = (c @ attn.v_proj.weight.data + attn.v_proj.bias.data) @ attn.out_proj.weight.data + attn.out_proj.bias.data
    for row in out:
        np.testing.assert_allclose(row, want[0], atol=1e-12)


def test_attention_head_divisibility_enforced():
    with pytest.raises(ValueError, match="divisible"):
        MultiHeadAttention(10, 10, 4, _rng(28))


def test_attention_gradients():
    attn = MultiHeadAttention(4, 4, 2, _rng(29))
    q = Tensor(_rng(30).normal(size=(3, 4)), requires_grad=True)
    c = Tensor(_rng(31).normal(size=(5, 4)), requires_grad=True)
    w = _rng(32).normal(size=(3, 4))
    check_gradients(lambda: (attn(q, c) * w).sum(), [q, c] + attn.parameters())


# --- losses ----------------------------------------------------------------------


def test_l1_mse_zero_at_identity():
    x = Tensor(_rng(33).normal(size=(3, 4)))
    assert l1_loss(x, Tensor(x.data.copy())).item() == 0.0
    assert mse_loss(x, Tensor(x.data.copy())).item() == 0.0


def test_l1_mse_match_direct_formulas():
    a = _rng(34).normal(size=(5, 2))
    b = _rng(35).normal(size=(5, 2))
    assert abs(l1_loss(Tensor(a), Tensor(b)).item() - np.abs(a - b).mean()) < 1e-12
    assert abs(mse_loss(Tensor(a), Tensor(b)).item() - ((a - b) ** 2).mean()) < 1e-12


def test_loss_shape_mismatch():
    from latentdrive.diffcore import ShapeError

    with pytest.raises(ShapeError):
        l1_loss(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_focal_perfect_confidence_is_zero():
    probs = Tensor(np.array([0.0, 1.0]))
    assert focal_loss(probs, 1, gamma=2.0).item() < 1e-11


def test_focal_hand_value():
    # -(1 - 0.75)^2 * ln(0.75) = 0.017980129528236306
    loss = focal_loss(Tensor(np.array([0.25, 0.75])), 1, gamma=2.0)
    assert abs(loss.item() - 0.017980129528236306) < 1e-12


def test_focal_index_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        focal_loss(Tensor(np.array([0.5, 0.5])), 2)


def test_focal_zero_probability_is_clamped():
    loss = focal_loss(Tensor(np.array([1.0, 0.0])), 1, gamma=2.0)
    assert np.isfinite(loss.item())


def test_cross_entropy_uniform_is_log_c():
    logits = Tensor(np.zeros((6, 4)))
    ids = np.array([0, 1, 2, 3, 0, 1])
    assert abs(cross_entropy(logits, ids).item() - math.log(4)) < 1e-12


def test_cross_entropy_confident_correct_goes_to_zero():
    ids = np.array([2, 0])
    logits = np.full((2, 3), -50.0)
    logits[np.arange(2), ids] = 50.0
    assert cross_entropy(Tensor(logits), ids).item() < 1e-12


def test_cross_entropy_matches_direct_oracle():
    rng = _rng(36)
    logits = rng.normal(size=(7, 5))
    ids = rng.integers(0, 5, size=7)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    p = e / e.sum(axis=1, keepdims=True)
    want = -np.log(p[np.arange(7), ids]).mean()
    got = cross_entropy(Tensor(logits), ids).item()
    assert abs(got - want) < 1e-10


def test_cross_entropy_rejects_bad_ids():
    with pytest.raises(ValueError, match="out of range"):
        cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_loss_gradients():
    pred = Tensor(_rng(37).normal(size=(4, 3)), requires_grad=True)
    target = Tensor(_rng(38).normal(size=(4, 3)))
    check_gradients(lambda: mse_loss(pred, target), [pred])
    check_gradients(lambda: l1_loss(pred, target), [pred])

    logits = Tensor(_rng(39).normal(size=(5, 4)), requires_grad=True)
    ids = _rng(40).integers(0, 4, size=5)
    check_gradients(lambda: cross_entropy(logits, ids), [logits])

    raw = Tensor(_rng(41).normal(size=(4,)), requires_grad=True)
    from latentdrive.diffcore import softmax

    check_gradients(lambda: focal_loss(softmax(raw), 2), [raw])


# --- parameter registry ------------------------------------------------------------


class _Net(Module):
    def __init__(self, rng):
        self.enc = MLP(3, 4, rng)
        self.heads = [Linear(4, 2, rng), Linear(4, 2, rng)]
        self.scale = Parameter(np.ones(1))


def test_named_parameters_are_unique_and_dotted():
    net = _Net(_rng(42))
    names = [n for n, _ in net.named_parameters()]
    assert len(names) == len(set(names))
    assert "enc.fc1.weight" in names
    assert "heads.0.weight" in names and "heads.1.bias" in names
    assert "scale" in names
    # names stick to the parameters themselves
    assert net.scale.name == "scale"


def test_zero_grad_clears_all():
    net = _Net(_rng(43))
    out = net.enc(Tensor(np.ones((1, 3)))).sum()
    out.backward()
    assert any(p.grad is not None for p in net.parameters())
    net.zero_grad()
    assert all(p.grad is None for p in net.parameters())


# --- optimizers ---------------------------------------------------------------------


def test_sgd_matches_definition_exactly():
    p = Parameter(np.array([1.0, -2.0, 3.0]))
    p.grad = np.array([0.5, 0.5, -1.0])
    SGD([p], lr=0.1).step()
    np.testing.assert_array_equal(p.data, [1.0 - 0.05, -2.0 - 0.05, 3.0 + 0.1])


def test_adam_zero_grad_is_exact_noop():
    p = Parameter(np.array([1.0, 2.0]))
    opt = Adam([p], lr=1e-2)
    p.grad = np.zeros(2)
    before = p.data.copy()
    opt.step()
    np.testing.assert_array_equal(p.data, before)
    p.grad = None
    opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_adam_on_convex_quadratic_monotone_after_warmup():
    # f(w) = mean((w - target)^2), a strictly convex bowl
    target = np.array([3.0, -1.0, 0.5])
    p = Parameter(np.zeros(3))
    opt = Adam([p], lr=0.05)
    losses = []
    for _ in range(100):
        p.grad = None
        loss = mse_loss(p, Tensor(target))
        loss.backward()
        opt.step()
        losses.append(loss.item())
    for i in range(5, 99):
        assert losses[i + 1] <= losses[i] + 1e-12
    assert losses[-1] < 0.01 * losses[0]


def test_optimizer_determinism_bit_identical():
    def run():
        rng = _rng(44)
        mlp = MLP(3, 2, rng)
        opt = Adam(mlp.parameters(), lr=1e-3)
        x = Tensor(rng.normal(size=(6, 3)))
        y = Tensor(rng.normal(size=(6, 2)))
        for _ in range(20):
            opt.zero_grad()
            mse_loss(mlp(x), y).backward()
            opt.step()
        return [p.data.copy() for p in mlp.parameters()]

    for a, b in zip(run(), run()):
        assert a.tobytes() == b.tobytes()


def test_sgd_frozen_at_zero_lr():
    p = Parameter(np.array([1.0]))
    p.grad = np.array([5.0])
    SGD([p], lr=0.0).step()
    np.testing.assert_array_equal(p.data, [1.0])
