"""Shared oracles for the test suite (finite differences, error metrics)."""

import math

import numpy as np

FD_STEP = 1e-5


def attention_oracle(x_q, x_c, attn):
    """Literal multi-head attention formula on numpy arrays (2-D inputs)."""
    q = x_q @ attn.q_proj.weight.data + attn.q_proj.bias.data
    k = x_c @ attn.k_proj.weight.data + attn.k_proj.bias.data
    v = x_c @ attn.v_proj.weight.data + attn.v_proj.bias.data
    h, dh = attn.heads, attn.d_head
    out = np.zeros((q.shape[0], h * dh))
    for i in range(h):
        qs = q[:, i * dh : (i + 1) * dh]
        ks = k[:, i * dh : (i + 1) * dh]
        vs = v[:, i * dh : (i + 1) * dh]
        scores = qs @ ks.T / math.sqrt(dh)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        w = e / e.sum(axis=1, keepdims=True)
        out[:, i * dh : (i + 1) * dh] = w @ vs
    return out @ attn.out_proj.weight.data + attn.out_proj.bias.data


def finite_difference_grad(f, tensor, h=FD_STEP, coords=None, rng=None):
    """Central-difference gradient of scalar ``f()`` w.r.t. ``tensor.data``.

    ``f`` must rebuild its forward pass from the live tensor on every call
    and return a float. If ``coords`` is given, only that many randomly
    chosen coordinates are probed and (flat_index, value) pairs are returned.
    """
    flat = tensor.data.reshape(-1)
    if coords is None:
        idxs = range(flat.size)
        out = np.zeros_like(flat)
    else:
        rng = rng or np.random.default_rng(0)
        idxs = rng.choice(flat.size, size=min(coords, flat.size), replace=False)
        out = []
    for i in idxs:
        orig = flat[i]
        flat[i] = orig + h
        hi = f()
        flat[i] = orig - h
        lo = f()
        flat[i] = orig
        d = (hi - lo) / (2.0 * h)
        if coords is None:
            out[i] = d
        else:
            out.append((int(i), d))
    return out if coords is not None else out.reshape(tensor.data.shape)


def max_rel_err(analytic, numeric, floor=1e-3):
    """Largest elementwise relative error with a denominator floor."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float((np.abs(analytic - numeric) / denom).max())


def grid_overlap_oracle(ca, ea, ha, cb, eb, hb, step=0.05):
    """Dense grid-sampling rectangle-overlap oracle (0.05 m default grid)."""

    def contains(pts, c, e, h):
        rot = np.array([[np.cos(h), np.sin(h)], [-np.sin(h), np.cos(h)]])
        rel = (pts - c) @ rot.T
        return (np.abs(rel[:, 0]) <= e[0] / 2 + 1e-12) & (
            np.abs(rel[:, 1]) <= e[1] / 2 + 1e-12
        )

    def cover(c, e, h):
        xs = np.arange(-e[0] / 2, e[0] / 2 + step / 2, step)
        ys = np.arange(-e[1] / 2, e[1] / 2 + step / 2, step)
        gx, gy = np.meshgrid(xs, ys)
        local = np.stack([gx.ravel(), gy.ravel()], axis=1)
        rot = np.array([[np.cos(h), -np.sin(h)], [np.sin(h), np.cos(h)]])
        return local @ rot.T + c

    return bool(
        contains(cover(ca, ea, ha), cb, eb, hb).any()
        or contains(cover(cb, eb, hb), ca, ea, ha).any()
    )


def tiny_model(d=8, k=2, views=1, image_size=16, s=2, classes=3, horizon=1,
               heads=2, seed=0):
    """A minimal planner plus its camera rig for fast whole-model tests."""
    from latentdrive.geometry import IntentionPointSet
    from latentdrive.simworld import GenConfig, build_rig
    from latentdrive.worldmodel import DrivingPlanner, ModelConfig

    rng = np.random.default_rng(seed)
    cfg = ModelConfig(views=views, image_size=image_size, d=d, heads=heads, k=k,
                      s=s, classes=classes, horizon=horizon)
    rig = build_rig(GenConfig(views=views, image_size=image_size,
                              feature_size=cfg.feature_size))
    pts = np.zeros((3, k, 2))
    pts[:, :, 0] = rng.uniform(2, 12, size=(3, k))
    pts[0, :, 1] = rng.uniform(3, 6, size=k)
    pts[1, :, 1] = rng.uniform(-1, 1, size=k)
    pts[2, :, 1] = rng.uniform(-6, -3, size=k)
    points = IntentionPointSet(pts)
    model = DrivingPlanner(cfg, points, rig, rng)
    return model, cfg


def random_batch(cfg, seed=0, b=2):
    """Random training arrays matching a ModelConfig."""
    from latentdrive.worldmodel import TrainBatch

    rng = np.random.default_rng(seed)
    m, hw, fs = cfg.views, cfg.image_size, cfg.feature_size

    def images():
        return rng.integers(0, 256, size=(b, m, hw, hw, 3), dtype=np.uint8)

    def depth():
        return rng.uniform(1.0, 40.0, size=(b, m, fs, fs))

    sem = rng.integers(0, cfg.classes, size=(b, m, fs, fs)).astype(np.uint8)
    sem[rng.random(size=sem.shape) < 0.1] = 255
    return TrainBatch(
        images_prev=images(),
        images_cur=images(),
        images_fut_prev=images(),
        images_fut=images(),
        depth_prev=depth(),
        depth_cur=depth(),
        depth_fut_prev=depth(),
        depth_fut=depth(),
        semantics_cur=sem,
        commands=rng.integers(0, 3, size=b),
        expert=rng.normal(size=(b, cfg.s, 2)) * 3.0,
    )


def check_gradients(make_loss, tensors, tol=1e-4, h=FD_STEP):
    """make_loss() -> scalar Tensor. Checks every tensor's grad against FD."""
    for t in tensors:
        t.grad = None
    loss = make_loss()
    loss.backward()
    worst = 0.0
    for t in tensors:
        assert t.grad is not None, "tensor received no gradient"
        numeric = finite_difference_grad(lambda: make_loss().item(), t, h=h)
        worst = max(worst, max_rel_err(t.grad, numeric))
    assert worst < tol, f"gradient mismatch: max relative error {worst:.3e} >= {tol}"
    return worst
