"""
Actor-critic network: tanh MLP trunk shared by a softmax action head and a scalar value head,
with analytic gradients of the A2C loss and an Adam optimizer. Pure numpy, float64.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from core.errors import DimensionError, NonFiniteLossError
from core.models import A2CConfig

logger = logging.getLogger(__name__)

N_ACTIONS = 4
POLICY_HEAD = ("Wpi", "bpi")
VALUE_HEAD = ("Wv", "bv")


@dataclass
class PolicyParams:
    """Named arrays: W0/b0 .. Wk/bk for the trunk, then Wpi/bpi and Wv/bv"""
    arrays: Dict[str, np.ndarray]

    @property
    def n_hidden_layers(self) -> int:
        return sum(1 for name in self.arrays if name.startswith("W") and name[1:].isdigit())

    @property
    def input_dim(self) -> int:
        return self.arrays["W0"].shape[0]

    def names(self) -> List[str]:
        return list(self.arrays)

    def copy(self) -> "PolicyParams":
        return PolicyParams({name: a.copy() for name, a in self.arrays.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays.values())


def init_policy(obs_dim: int, hidden_sizes: Sequence[int], rng: np.random.Generator,
                head_scale: float = 0.0) -> PolicyParams:
    """Trunk weights ~ N(0, 1/fan_in); heads scaled by head_scale (0 gives uniform actions and V = 0)"""
    arrays: Dict[str, np.ndarray] = {}
    fan_in = obs_dim
    for i, width in enumerate(hidden_sizes):
        arrays[f"W{i}"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, width))
        arrays[f"b{i}"] = np.zeros(width)
        fan_in = width
    arrays["Wpi"] = head_scale * rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, N_ACTIONS))
    arrays["bpi"] = np.zeros(N_ACTIONS)
    arrays["Wv"] = head_scale * rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, 1))
    arrays["bv"] = np.zeros(1)
    return PolicyParams(arrays)


@dataclass
class ForwardCache:
    activations: List[np.ndarray]
    logits: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray
    values: np.ndarray


def _forward(p: PolicyParams, obs: np.ndarray) -> ForwardCache:
    x = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if x.shape[1] != p.input_dim:
        raise DimensionError(f"Observation width {x.shape[1]} does not match network input {p.input_dim}")
    activations = [x]
    h = x
    for i in range(p.n_hidden_layers):
        h = np.tanh(h @ p.arrays[f"W{i}"] + p.arrays[f"b{i}"])
        activations.append(h)
    logits = h @ p.arrays["Wpi"] + p.arrays["bpi"]
    values = (h @ p.arrays["Wv"] + p.arrays["bv"])[:, 0]
    return ForwardCache(activations, logits, log_softmax(logits, axis=1), softmax(logits, axis=1), values)


def policy_value_forward(p: PolicyParams, obs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Action probabilities (B, 4) and values (B,) for a batch; a single vector gives B = 1"""
    cache = _forward(p, obs)
    return cache.probs, cache.values


def entropy(probs: np.ndarray, log_probs: np.ndarray) -> np.ndarray:
    return -(probs * log_probs).sum(axis=1)


@dataclass
class LossReport:
    policy_loss: float
    value_loss: float
    entropy: float
    total_loss: float
    grad_norm: float
    clipped_grad_norm: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return {
            "policy_loss": self.policy_loss,
            "value_loss": self.value_loss,
            "entropy": self.entropy,
            "total_loss": self.total_loss,
            "grad_norm": self.grad_norm,
            "clipped_grad_norm": self.clipped_grad_norm,
        }


def a2c_loss_and_grads(p: PolicyParams, obs: np.ndarray, actions: np.ndarray, returns: np.ndarray,
                       advantages: np.ndarray, ent_coef: float, vf_coef: float
                       ) -> Tuple[LossReport, Dict[str, np.ndarray]]:
    """
    loss = -mean(log pi(a|s) * A) + vf_coef * mean((R - V)^2) - ent_coef * mean(H(pi(.|s)))
    Advantages are constants; returns the report (grad norms unset) and dloss/dparam.
    """
    cache = _forward(p, obs)
    actions = np.asarray(actions, dtype=np.int64)
    returns = np.asarray(returns, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    batch = cache.probs.shape[0]
    rows = np.arange(batch)

    chosen_log_probs = cache.log_probs[rows, actions]
    ent = entropy(cache.probs, cache.log_probs)
    policy_loss = -float(np.mean(chosen_log_probs * advantages))
    value_error = cache.values - returns
    value_loss = float(np.mean(value_error ** 2))
    mean_entropy = float(np.mean(ent))
    total = policy_loss + vf_coef * value_loss - ent_coef * mean_entropy
    report = LossReport(policy_loss, value_loss, mean_entropy, total, grad_norm=0.0)
    if not np.isfinite(total):
        raise NonFiniteLossError(f"Non-finite A2C loss {total}", diagnostics=report.to_dict())

    one_hot = np.zeros_like(cache.probs)
    one_hot[rows, actions] = 1.0
    d_logits = (-advantages[:, None] * (one_hot - cache.probs)
                + ent_coef * cache.probs * (cache.log_probs + ent[:, None])) / batch
    d_values = (2.0 * vf_coef / batch) * value_error

    grads: Dict[str, np.ndarray] = {}
    h = cache.activations[-1]
    grads["Wpi"] = h.T @ d_logits
    grads["bpi"] = d_logits.sum(axis=0)
    grads["Wv"] = h.T @ d_values[:, None]
    grads["bv"] = np.array([d_values.sum()])
    d_h = d_logits @ p.arrays["Wpi"].T + d_values[:, None] @ p.arrays["Wv"].T
    for i in reversed(range(p.n_hidden_layers)):
        d_z = d_h * (1.0 - cache.activations[i + 1] ** 2)
        grads[f"W{i}"] = cache.activations[i].T @ d_z
        grads[f"b{i}"] = d_z.sum(axis=0)
        d_h = d_z @ p.arrays[f"W{i}"].T
    return report, {name: grads[name] for name in p.arrays}


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """Scale all gradients by max_norm / norm when norm exceeds max_norm; returns the pre-clip norm"""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = {name: g * scale for name, g in grads.items()}
    return grads, norm


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, p: PolicyParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(a) for name, a in p.arrays.items()},
            v={name: np.zeros_like(a) for name, a in p.arrays.items()},
            t=0,
        )

    def copy(self) -> "AdamState":
        return AdamState({k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()}, self.t)


def adam_step(p: PolicyParams, opt: AdamState, grads: Dict[str, np.ndarray], lr: float,
              betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-7) -> Tuple[PolicyParams, AdamState]:
    """Bias-corrected Adam; returns new params and state, inputs untouched"""
    beta1, beta2 = betas
    t = opt.t + 1
    new_arrays, new_m, new_v = {}, {}, {}
    for name, a in p.arrays.items():
        if opt.m[name].shape != a.shape:
            raise DimensionError(f"Optimizer moment for {name} has shape {opt.m[name].shape}, param {a.shape}")
        g = grads[name]
        m = beta1 * opt.m[name] + (1.0 - beta1) * g
        v = beta2 * opt.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_arrays[name] = a - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return PolicyParams(new_arrays), AdamState(new_m, new_v, t)


def apply_gradients(p: PolicyParams, opt: AdamState, grads: Dict[str, np.ndarray], cfg: A2CConfig,
                    report: Optional[LossReport] = None) -> Tuple[PolicyParams, AdamState, float]:
    """Clip, check, step. Returns the pre-clip norm."""
    clipped, norm = clip_by_global_norm(grads, cfg.max_grad_norm)
    if not np.isfinite(norm):
        diagnostics = report.to_dict() if report else {}
        diagnostics["grad_norm"] = norm
        raise NonFiniteLossError(f"Non-finite gradient norm {norm}", diagnostics=diagnostics)
    new_params, new_opt = adam_step(p, opt, clipped, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    if report is not None:
        report.grad_norm = norm
        report.clipped_grad_norm = global_norm(clipped)
    return new_params, new_opt, norm
