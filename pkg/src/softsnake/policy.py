"""Feed-forward policy/value networks and the clipped-surrogate update.

Two roles share one architecture:

* C1 (gait controller): input ``zeta[0:14]``; heads for the action mean,
  a state-independent log-std, the scalar value, a categorical option
  head selecting the frequency ratio K_f, and a termination probability
  ``beta`` gating when the option may change.
* R2 (contact regulator): input ``zeta[0:26]``; action and value heads
  only.

All math runs in double precision on CPU.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import torch
from torch import nn

__all__ = [
    "PolicyError",
    "K_F_OPTIONS",
    "C1_INPUT_WIDTH",
    "R2_INPUT_WIDTH",
    "ACTION_WIDTH",
    "LearnerConfig",
    "PolicyNet",
    "StepSample",
    "sample_step",
    "gae_advantages",
    "Batch",
    "ppo_update",
    "save_checkpoint",
    "load_checkpoint",
]

K_F_OPTIONS: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
C1_INPUT_WIDTH = 14
R2_INPUT_WIDTH = 26
ACTION_WIDTH = 4
_HIDDEN = 128
_LOG_STD_INIT = math.log(0.5)
CHECKPOINT_VERSION = 1

torch.set_default_dtype(torch.float64)


class PolicyError(Exception):
    """Raised on invalid policy inputs, configs, or corrupt checkpoints."""


@dataclass
class LearnerConfig:
    """Hyperparameters of the on-policy update."""

    gamma: float = 0.99
    gae_lambda: float = 0.96
    clip_ratio: float = 0.2
    learning_rate: float = 5e-4
    minibatch_size: int = 256
    epochs: int = 8
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    options: tuple[float, ...] = K_F_OPTIONS

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise PolicyError("gamma must lie in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise PolicyError("gae_lambda must lie in [0, 1]")
        for name in ("clip_ratio", "learning_rate", "minibatch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise PolicyError(f"{name} must be positive")
        if len(self.options) < 1 or any(k <= 0 for k in self.options):
            raise PolicyError("option set must contain positive K_f values")


class PolicyNet(nn.Module):
    """Four-layer tanh MLP with role-dependent heads.

    ``role`` is ``"c1"`` (option-critic controller) or ``"r2"``
    (action-only regulator).
    """

    def __init__(self, role: str, n_options: int = len(K_F_OPTIONS),
                 hidden: int = _HIDDEN):
        super().__init__()
        if role not in ("c1", "r2"):
            raise PolicyError(f"unknown policy role {role!r}")
        if hidden < 1:
            raise PolicyError("hidden width must be positive")
        self.role = role
        self.n_options = n_options if role == "c1" else 0
        in_width = C1_INPUT_WIDTH if role == "c1" else R2_INPUT_WIDTH
        self.in_width = in_width
        self.body = nn.Sequential(
            nn.Linear(in_width, hidden), nn.Tanh(),
            nn.Linear(hidden, hidden), nn.Tanh(),
        )
        self.action_mean = nn.Linear(hidden, ACTION_WIDTH)
        self.log_std = nn.Parameter(torch.full((ACTION_WIDTH,), _LOG_STD_INIT))
        self.value = nn.Linear(hidden, 1)
        if role == "c1":
            self.option_logits = nn.Linear(hidden, self.n_options)
            self.termination = nn.Linear(hidden, 1)

    def forward(self, zeta: torch.Tensor) -> dict[str, torch.Tensor]:
        if zeta.shape[-1] != self.in_width:
            raise PolicyError(
                f"{self.role} expects input width {self.in_width}, "
                f"got {zeta.shape[-1]}")
        if not torch.isfinite(zeta).all():
            raise PolicyError("non-finite policy input")
        h = self.body(zeta)
        out = {
            "mean": self.action_mean(h),
            "log_std": self.log_std.expand(*zeta.shape[:-1], ACTION_WIDTH),
            "value": self.value(h).squeeze(-1),
        }
        if self.role == "c1":
            out["option_logits"] = self.option_logits(h)
            out["beta"] = torch.sigmoid(self.termination(h)).squeeze(-1)
        return out

    def forward_np(self, zeta: np.ndarray) -> dict[str, np.ndarray]:
        """Deterministic numpy evaluation (no gradients)."""
        with torch.no_grad():
            out = self.forward(torch.as_tensor(zeta, dtype=torch.float64))
        return {k: v.detach().numpy() for k, v in out.items()}


def _gaussian_logprob(a: torch.Tensor, mean: torch.Tensor,
                      log_std: torch.Tensor) -> torch.Tensor:
    var = torch.exp(2.0 * log_std)
    return (-0.5 * ((a - mean) ** 2 / var)
            - log_std - 0.5 * math.log(2.0 * math.pi)).sum(-1)


@dataclass
class StepSample:
    """One sampled control decision."""

    action: np.ndarray
    log_prob: float
    option_index: int
    option_log_prob: float
    beta: float
    terminated: bool
    value: float


def sample_step(net: PolicyNet, zeta: np.ndarray, rng: np.random.Generator,
                prev_option_index: Optional[int] = None) -> StepSample:
    """Sample an action (and, for C1, a beta-gated option switch).

    With probability ``beta`` the current option terminates and a fresh
    option is drawn from the categorical head; otherwise the previous
    option persists. On the first step (``prev_option_index is None``)
    an option is always drawn.
    """
    out = net.forward_np(np.asarray(zeta, dtype=float))
    mean, log_std = out["mean"], out["log_std"]
    std = np.exp(log_std)
    action = mean + std * rng.standard_normal(ACTION_WIDTH)
    logp = float(-0.5 * np.sum((action - mean) ** 2 / std ** 2)
                 - np.sum(log_std) - 0.5 * ACTION_WIDTH * math.log(2 * math.pi))
    option_index, option_logp, beta, terminated = 0, 0.0, 0.0, False
    if net.role == "c1":
        beta = float(out["beta"])
        logits = out["option_logits"]
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        terminated = prev_option_index is None or rng.random() < beta
        if terminated:
            option_index = int(rng.choice(len(probs), p=probs))
        else:
            option_index = int(prev_option_index)
        option_logp = float(np.log(probs[option_index]))
    return StepSample(action=action, log_prob=logp, option_index=option_index,
                      option_log_prob=option_logp, beta=beta,
                      terminated=terminated, value=float(out["value"]))


def gae_advantages(rewards: np.ndarray, values: np.ndarray,
                   bootstrap: float, terminal: bool, gamma: float,
                   lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one trajectory segment.

    ``values`` holds V(s_t) for each step; ``bootstrap`` is V(s_T) of the
    state after the last step (ignored when ``terminal``). Returns
    ``(advantages, returns)`` with ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(rewards)
    if n == 0:
        raise PolicyError("empty trajectory")
    if len(values) != n:
        raise PolicyError("values must match rewards in length")
    next_values = np.append(values[1:], 0.0 if terminal else bootstrap)
    adv = np.zeros(n)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        mask = 0.0 if (terminal and t == n - 1) else 1.0
        delta = rewards[t] + gamma * next_values[t] * mask - values[t]
        gae = delta + gamma * lam * gae * mask
        adv[t] = gae
    return adv, adv + values


@dataclass
class Batch:
    """Flattened on-policy batch for one learner."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    option_indices: Optional[np.ndarray] = None
    option_log_probs: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = len(self.obs)
        if n == 0:
            raise PolicyError("empty batch")
        for name in ("actions", "log_probs", "advantages", "returns"):
            if len(getattr(self, name)) != n:
                raise PolicyError(f"batch field {name} length mismatch")


def ppo_update(net: PolicyNet, batch: Batch, config: LearnerConfig,
               optimizer: Optional[torch.optim.Optimizer] = None,
               ) -> dict[str, float]:
    """Several epochs of clipped-surrogate + value regression.

    Aborts (raises PolicyError) if a non-finite gradient appears; the
    parameters are left at their last finite state.
    """
    if optimizer is None:
        optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    obs = torch.as_tensor(batch.obs, dtype=torch.float64)
    actions = torch.as_tensor(batch.actions, dtype=torch.float64)
    old_logp = torch.as_tensor(batch.log_probs, dtype=torch.float64)
    adv = torch.as_tensor(batch.advantages, dtype=torch.float64)
    ret = torch.as_tensor(batch.returns, dtype=torch.float64)
    if adv.numel() > 1 and adv.std() > 0:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    use_options = net.role == "c1" and batch.option_indices is not None
    if use_options:
        opt_idx = torch.as_tensor(batch.option_indices, dtype=torch.long)
        old_opt_logp = torch.as_tensor(batch.option_log_probs,
                                       dtype=torch.float64)
    n = len(batch.obs)
    losses: list[float] = []
    for _ in range(config.epochs):
        perm = torch.randperm(n)
        for start in range(0, n, config.minibatch_size):
            idx = perm[start:start + config.minibatch_size]
            out = net(obs[idx])
            logp = _gaussian_logprob(actions[idx], out["mean"],
                                     out["log_std"])
            ratio = torch.exp(logp - old_logp[idx])
            clipped = torch.clamp(ratio, 1 - config.clip_ratio,
                                  1 + config.clip_ratio)
            policy_loss = -torch.min(ratio * adv[idx],
                                     clipped * adv[idx]).mean()
            if use_options:
                log_popt = torch.log_softmax(out["option_logits"], dim=-1)
                opt_logp = log_popt.gather(
                    -1, opt_idx[idx].unsqueeze(-1)).squeeze(-1)
                opt_ratio = torch.exp(opt_logp - old_opt_logp[idx])
                opt_clipped = torch.clamp(opt_ratio, 1 - config.clip_ratio,
                                          1 + config.clip_ratio)
                policy_loss = policy_loss - torch.min(
                    opt_ratio * adv[idx], opt_clipped * adv[idx]).mean()
            value_loss = ((out["value"] - ret[idx]) ** 2).mean()
            entropy = (out["log_std"]
                       + 0.5 * math.log(2 * math.pi * math.e)).sum()
            loss = (policy_loss + config.value_coef * value_loss
                    - config.entropy_coef * entropy)
            optimizer.zero_grad()
            loss.backward()
            for p in net.parameters():
                if p.grad is not None and not torch.isfinite(p.grad).all():
                    optimizer.zero_grad()
                    raise PolicyError("non-finite gradient; update aborted")
            nn.utils.clip_grad_norm_(net.parameters(), config.max_grad_norm)
            optimizer.step()
            losses.append(float(loss.detach()))
    return {"loss": float(np.mean(losses)),
            "final_loss": losses[-1] if losses else float("nan")}


def value_update(net: PolicyNet, obs: np.ndarray, returns: np.ndarray,
                 config: LearnerConfig, epochs: int = 30) -> float:
    """Regress only the value head onto empirical returns.

    Used by policy evaluation: the actor heads (and shared body, to keep
    the acting distribution bit-identical) are left untouched; only the
    final value layer moves.
    """
    obs_t = torch.as_tensor(obs, dtype=torch.float64)
    ret_t = torch.as_tensor(returns, dtype=torch.float64)
    opt = torch.optim.Adam(net.value.parameters(), lr=config.learning_rate)
    loss_val = float("nan")
    for _ in range(epochs):
        with torch.no_grad():
            h = net.body(obs_t)
        pred = net.value(h).squeeze(-1)
        loss = ((pred - ret_t) ** 2).mean()
        opt.zero_grad()
        loss.backward()
        opt.step()
        loss_val = float(loss.detach())
    return loss_val


def _config_digest(meta: dict) -> str:
    return hashlib.sha256(
        json.dumps(meta, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path: str, nets: dict[str, PolicyNet],
                    meta: Optional[dict] = None) -> None:
    """Serialize named policies with a format version and config digest."""
    meta = dict(meta or {})
    meta.update({
        role: {"role": net.role, "n_options": net.n_options}
        for role, net in nets.items()
    })
    payload = {
        "version": CHECKPOINT_VERSION,
        "meta": meta,
        "digest": _config_digest(meta),
        "state": {role: net.state_dict() for role, net in nets.items()},
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path: str) -> tuple[dict[str, PolicyNet], dict]:
    """Load policies saved by :func:`save_checkpoint`."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("version") != CHECKPOINT_VERSION:
        raise PolicyError("unsupported checkpoint format")
    meta = payload["meta"]
    if payload.get("digest") != _config_digest(meta):
        raise PolicyError("checkpoint digest mismatch")
    nets = {}
    for role, state in payload["state"].items():
        spec = meta[role]
        net = PolicyNet(spec["role"], n_options=max(spec["n_options"], 1)
                        if spec["role"] == "c1" else len(K_F_OPTIONS))
        net.load_state_dict(state)
        nets[role] = net
    return nets, meta
