"""Policy-network tests: analytic vs finite-difference gradients, sampling
log-probabilities, GAE reductions, checkpoint integrity."""

import math

import numpy as np
import pytest
import torch

from softsnake import policy
from softsnake.policy import (ACTION_WIDTH, Batch, C1_INPUT_WIDTH,
                              K_F_OPTIONS, LearnerConfig, PolicyNet,
                              R2_INPUT_WIDTH, gae_advantages, load_checkpoint,
                              ppo_update, sample_step, save_checkpoint,
                              value_update)


def _zero_net(role):
    net = PolicyNet(role)
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
    return net


# ---------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------

def test_zero_weights_forward():
    net = _zero_net("c1")
    out = net.forward_np(np.ones(C1_INPUT_WIDTH))
    assert np.allclose(out["mean"], 0)
    assert np.allclose(out["log_std"], 0)  # zeroed parameter
    assert out["value"] == 0.0
    assert out["beta"] == pytest.approx(0.5)
    logits = out["option_logits"]
    assert np.allclose(logits, logits[0])  # uniform option distribution


def test_forward_width_and_finite_checks():
    net = PolicyNet("r2")
    with pytest.raises(policy.PolicyError):
        net.forward_np(np.zeros(C1_INPUT_WIDTH))
    bad = np.zeros(R2_INPUT_WIDTH)
    bad[0] = np.nan
    with pytest.raises(policy.PolicyError):
        net.forward_np(bad)
    with pytest.raises(policy.PolicyError):
        PolicyNet("c3")


def test_forward_determinism():
    torch.manual_seed(3)
    net = PolicyNet("c1")
    zeta = np.random.default_rng(0).standard_normal(C1_INPUT_WIDTH)
    a = net.forward_np(zeta)
    b = net.forward_np(zeta)
    for k in a:
        assert np.array_equal(a[k], b[k])


# ---------------------------------------------------------------------
# gradients: analytic backward vs central finite differences on random
# small networks (the acceptance-level check lives in test_acceptance)
# ---------------------------------------------------------------------

def _tiny_net(role, rng):
    """Random 2-hidden-unit network of the same head structure."""
    net = PolicyNet(role)
    with torch.no_grad():
        for p in net.parameters():
            p.copy_(torch.as_tensor(
                rng.standard_normal(tuple(p.shape)) * 0.5))
    return net


def _loss_of(net, zeta, action, opt_index):
    out = net(torch.as_tensor(zeta))
    a = torch.as_tensor(action)
    var = torch.exp(2 * out["log_std"])
    logp = (-0.5 * (a - out["mean"]) ** 2 / var - out["log_std"]).sum()
    loss = -logp + out["value"] ** 2
    if net.role == "c1":
        loss = (loss
                - torch.log_softmax(out["option_logits"], -1)[opt_index]
                - torch.log(out["beta"]))
    return loss


@pytest.mark.parametrize("role", ["c1", "r2"])
def test_gradient_matches_finite_difference(role):
    rng = np.random.default_rng(17)
    eps = 1e-6
    for trial in range(5):
        net = _tiny_net(role, rng)
        width = C1_INPUT_WIDTH if role == "c1" else R2_INPUT_WIDTH
        zeta = rng.standard_normal(width)
        action = rng.standard_normal(ACTION_WIDTH)
        opt = int(rng.integers(len(K_F_OPTIONS)))
        loss = _loss_of(net, zeta, action, opt)
        net.zero_grad()
        loss.backward()
        params = list(net.parameters())
        flat = torch.cat([p.detach().flatten() for p in params])
        # probe 30 random coordinates per trial
        for j in rng.choice(flat.numel(), size=30, replace=False):
            # locate parameter containing flat index j
            k = int(j)
            for p in params:
                if k < p.numel():
                    break
                k -= p.numel()
            with torch.no_grad():
                orig = p.flatten()[k].item()
                p.flatten()[k] = orig + eps
                lp = _loss_of(net, zeta, action, opt).item()
                p.flatten()[k] = orig - eps
                lm = _loss_of(net, zeta, action, opt).item()
                p.flatten()[k] = orig
            fd = (lp - lm) / (2 * eps)
            an = p.grad.flatten()[k].item()
            assert an == pytest.approx(fd, rel=1e-4, abs=1e-7)


# ---------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------

def test_sample_step_logprob_analytic():
    torch.manual_seed(5)
    net = PolicyNet("r2")
    zeta = np.zeros(R2_INPUT_WIDTH)
    out = net.forward_np(zeta)
    s = sample_step(net, zeta, np.random.default_rng(2))
    std = np.exp(out["log_std"])
    expect = float(-0.5 * np.sum((s.action - out["mean"]) ** 2 / std ** 2)
                   - np.sum(out["log_std"])
                   - 0.5 * ACTION_WIDTH * math.log(2 * math.pi))
    assert s.log_prob == pytest.approx(expect, rel=1e-12)
    assert s.option_index == 0 and s.beta == 0.0  # r2 has no option head


def test_option_gating():
    net = _zero_net("c1")
    zeta = np.zeros(C1_INPUT_WIDTH)
    rng = np.random.default_rng(0)
    # beta head forced low: option must persist
    with torch.no_grad():
        net.termination.bias.fill_(-50.0)
    s = sample_step(net, zeta, rng, prev_option_index=2)
    assert not s.terminated and s.option_index == 2
    # first step always draws, even with beta ~ 0
    s0 = sample_step(net, zeta, rng, prev_option_index=None)
    assert s0.terminated
    # beta head forced high: always redraws
    with torch.no_grad():
        net.termination.bias.fill_(50.0)
    draws = {sample_step(net, zeta, np.random.default_rng(i), 2).terminated
             for i in range(5)}
    assert draws == {True}
    # uniform logits: option log-prob is -log(n)
    s = sample_step(net, zeta, rng, None)
    assert s.option_log_prob == pytest.approx(-math.log(len(K_F_OPTIONS)))


# ---------------------------------------------------------------------
# GAE
# ---------------------------------------------------------------------

def test_gae_lambda_zero_is_td():
    rng = np.random.default_rng(1)
    r = rng.standard_normal(6)
    v = rng.standard_normal(6)
    boot = 0.3
    adv, ret = gae_advantages(r, v, boot, terminal=False, gamma=0.9, lam=0.0)
    nxt = np.append(v[1:], boot)
    assert np.allclose(adv, r + 0.9 * nxt - v)
    assert np.allclose(ret, adv + v)


def test_gae_lambda_one_is_discounted_return():
    rng = np.random.default_rng(2)
    r = rng.standard_normal(5)
    v = rng.standard_normal(5)
    adv, ret = gae_advantages(r, v, 0.0, terminal=True, gamma=0.95, lam=1.0)
    g = np.zeros(5)
    acc = 0.0
    for t in range(4, -1, -1):
        acc = r[t] + 0.95 * acc
        g[t] = acc
    assert np.allclose(ret, g)
    assert np.allclose(adv, g - v)


def test_gae_terminal_ignores_bootstrap():
    r = np.array([1.0, 1.0])
    v = np.zeros(2)
    a1, _ = gae_advantages(r, v, 100.0, terminal=True, gamma=0.9, lam=0.9)
    a2, _ = gae_advantages(r, v, -100.0, terminal=True, gamma=0.9, lam=0.9)
    assert np.array_equal(a1, a2)


def test_gae_empty_rejected():
    with pytest.raises(policy.PolicyError):
        gae_advantages(np.array([]), np.array([]), 0.0, True, 0.9, 0.9)
    with pytest.raises(policy.PolicyError):
        gae_advantages(np.ones(3), np.ones(2), 0.0, True, 0.9, 0.9)


# ---------------------------------------------------------------------
# updates
# ---------------------------------------------------------------------

def _toy_batch(rng, width, n=32, with_options=False):
    kwargs = {}
    if with_options:
        kwargs = {"option_indices": rng.integers(4, size=n),
                  "option_log_probs": np.full(n, -math.log(4))}
    return Batch(obs=rng.standard_normal((n, width)),
                 actions=rng.standard_normal((n, ACTION_WIDTH)),
                 log_probs=rng.standard_normal(n) - 3,
                 advantages=rng.standard_normal(n),
                 returns=rng.standard_normal(n), **kwargs)


def test_ppo_update_moves_learner_only():
    torch.manual_seed(11)
    rng = np.random.default_rng(11)
    net = PolicyNet("c1")
    before = [p.detach().clone() for p in net.parameters()]
    cfg = LearnerConfig(minibatch_size=16, epochs=2)
    stats = ppo_update(net, _toy_batch(rng, C1_INPUT_WIDTH,
                                       with_options=True), cfg)
    assert math.isfinite(stats["loss"])
    moved = any(not torch.equal(b, p.detach())
                for b, p in zip(before, net.parameters()))
    assert moved


def test_value_update_leaves_actor_untouched():
    torch.manual_seed(13)
    net = PolicyNet("r2")
    rng = np.random.default_rng(13)
    obs = rng.standard_normal((64, R2_INPUT_WIDTH))
    rets = rng.standard_normal(64)
    zeta = rng.standard_normal(R2_INPUT_WIDTH)
    mean_before = net.forward_np(zeta)["mean"]
    body_before = [p.detach().clone() for p in net.body.parameters()]
    loss0 = value_update(net, obs, rets, LearnerConfig(), epochs=1)
    loss1 = value_update(net, obs, rets, LearnerConfig(), epochs=60)
    assert loss1 < loss0
    assert np.array_equal(net.forward_np(zeta)["mean"], mean_before)
    for b, p in zip(body_before, net.body.parameters()):
        assert torch.equal(b, p.detach())


def test_batch_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(policy.PolicyError):
        Batch(obs=np.zeros((0, 4)), actions=np.zeros((0, 4)),
              log_probs=np.zeros(0), advantages=np.zeros(0),
              returns=np.zeros(0))
    with pytest.raises(policy.PolicyError):
        Batch(obs=rng.standard_normal((4, 14)),
              actions=rng.standard_normal((3, 4)),
              log_probs=np.zeros(4), advantages=np.zeros(4),
              returns=np.zeros(4))


def test_learner_config_validation():
    with pytest.raises(policy.PolicyError):
        LearnerConfig(gamma=1.0)
    with pytest.raises(policy.PolicyError):
        LearnerConfig(gae_lambda=1.5)
    with pytest.raises(policy.PolicyError):
        LearnerConfig(options=(0.5, -1.0))


# ---------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    torch.manual_seed(21)
    nets = {"pi1": PolicyNet("c1"), "pi2": PolicyNet("r2")}
    path = tmp_path / "joint.ckpt"
    save_checkpoint(str(path), nets, meta={"note": "x"})
    loaded, meta = load_checkpoint(str(path))
    assert meta["note"] == "x"
    zeta1 = np.random.default_rng(4).standard_normal(C1_INPUT_WIDTH)
    zeta2 = np.random.default_rng(5).standard_normal(R2_INPUT_WIDTH)
    for k in ("mean", "value"):
        assert np.array_equal(loaded["pi1"].forward_np(zeta1)[k],
                              nets["pi1"].forward_np(zeta1)[k])
        assert np.array_equal(loaded["pi2"].forward_np(zeta2)[k],
                              nets["pi2"].forward_np(zeta2)[k])


def test_checkpoint_digest_mismatch(tmp_path):
    nets = {"pi1": PolicyNet("c1")}
    path = tmp_path / "joint.ckpt"
    save_checkpoint(str(path), nets)
    payload = torch.load(str(path), weights_only=False)
    payload["meta"]["note"] = "tampered"
    torch.save(payload, str(path))
    with pytest.raises(policy.PolicyError):
        load_checkpoint(str(path))


def test_checkpoint_bad_version(tmp_path):
    path = tmp_path / "bad.ckpt"
    torch.save({"version": 999}, str(path))
    with pytest.raises(policy.PolicyError):
        load_checkpoint(str(path))
