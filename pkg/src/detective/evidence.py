"""Dirichlet evidence: expected probabilities, uncertainties and training losses.

Scoring helpers work on plain ndarrays of concentrations with shape
``(n, K)`` (or a single ``(K,)`` vector); losses take graph Values so they
can be differentiated.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .diffcore.tape import Value, as_value
from .diffcore.tape import digamma as v_digamma
from .diffcore.tape import lgamma as v_lgamma
from .diffcore.special import digamma, lgamma
from .errors import ConfigError, DomainError, UsageError


@dataclass(frozen=True)
class LossWeights:
    lambda_mar: float = 1.0
    lambda_kl: float = 1.0
    kl_anneal_epochs: int = 10

    def __post_init__(self):
        if self.lambda_mar < 0 or self.lambda_kl < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.kl_anneal_epochs < 0:
            raise ConfigError("kl_anneal_epochs must be >= 0")

    def kl_weight(self, epoch):
        if self.kl_anneal_epochs == 0:
            return self.lambda_kl
        return self.lambda_kl * min(1.0, epoch / self.kl_anneal_epochs)


class UncertaintyScore(NamedTuple):
    id: int
    u_dom: float
    u_pre: float
    u_int: float


def _check_alpha(alpha):
    arr = np.asarray(alpha, dtype=np.float64)
    if not np.all(arr > 0):
        raise DomainError("Dirichlet concentrations must all be > 0")
    if not np.isfinite(arr).all():
        raise DomainError("Dirichlet concentrations must be finite")
    return arr


def _squeeze(out, alpha):
    return float(out[0]) if alpha.ndim == 1 else out


def expected_prob(alpha):
    """alpha / sum(alpha), the mean of Dir(alpha). Differentiable when given a Value."""
    if isinstance(alpha, Value):
        if not np.all(alpha.data > 0):
            raise DomainError("Dirichlet concentrations must all be > 0")
        return alpha / alpha.sum(axis=1)
    arr = _check_alpha(alpha)
    return arr / arr.sum(axis=-1, keepdims=True)


def entropy(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def _digamma_gap(arr):
    # psi(S + 1) - psi(alpha_k + 1), per class
    S = arr.sum(axis=-1, keepdims=True)
    return digamma(S + 1.0) - digamma(arr + 1.0)


def predictive_uncertainty(alpha):
    """Expected entropy of p under Dir(alpha)."""
    arr = _check_alpha(alpha)
    a2 = np.atleast_2d(arr)
    p = a2 / a2.sum(axis=-1, keepdims=True)
    out = (p * _digamma_gap(a2)).sum(axis=-1)
    return _squeeze(out, arr)


def domain_uncertainty(alpha):
    """Mutual information between label and p: entropy of the mean minus mean entropy."""
    arr = _check_alpha(alpha)
    a2 = np.atleast_2d(arr)
    p = a2 / a2.sum(axis=-1, keepdims=True)
    out = -(p * _digamma_gap(a2)).sum(axis=-1) + entropy(p)
    return _squeeze(out, arr)


def integrated_uncertainty(u_dom, u_pre, lambda_dom=7.5, lambda_pre=0.5):
    if lambda_dom < 0 or lambda_pre < 0:
        raise ConfigError(f"uncertainty weights must be >= 0, got ({lambda_dom}, {lambda_pre})")
    return lambda_dom * u_dom + lambda_pre * u_pre


@dataclass
class DirichletOutput:
    alpha: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.alpha = np.atleast_2d(_check_alpha(self.alpha))

    @property
    def prob(self):
        return expected_prob(self.alpha)

    @property
    def u_dom(self):
        return domain_uncertainty(self.alpha)

    @property
    def u_pre(self):
        return predictive_uncertainty(self.alpha)

    def scores(self, lambda_dom=7.5, lambda_pre=0.5):
        u_dom, u_pre = self.u_dom, self.u_pre
        u_int = integrated_uncertainty(u_dom, u_pre, lambda_dom, lambda_pre)
        ids = self.ids if self.ids is not None else np.arange(len(self.alpha))
        return [UncertaintyScore(int(i), float(a), float(b), float(c)) for i, a, b, c in zip(ids, u_dom, u_pre, u_int)]


def _one_hot(y, K):
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.size and (y.min() < 0 or y.max() >= K):
        raise DomainError(f"class index outside 0..{K - 1}")
    out = np.zeros((len(y), K))
    out[np.arange(len(y)), y] = 1.0
    return out


def _alpha_value(alpha):
    alpha = as_value(alpha)
    if not np.all(alpha.data > 0):
        raise DomainError("Dirichlet concentrations must all be > 0")
    return alpha


def loss_marginal(alpha, y):
    """Per-sample ``log S - log alpha_y`` as an ``(n, 1)`` Value."""
    alpha = _alpha_value(alpha)
    beta = _one_hot(y, alpha.shape[1])
    if len(beta) != alpha.shape[0]:
        raise UsageError("one label per row of alpha is required")
    return (beta * (alpha.sum(axis=1).log() - alpha.log())).sum(axis=1)


def loss_kl(alpha, y):
    """Per-sample KL[Dir(alpha_hat) || Dir(1)] with the true-class evidence removed."""
    alpha = _alpha_value(alpha)
    K = alpha.shape[1]
    beta = _one_hot(y, K)
    if len(beta) != alpha.shape[0]:
        raise UsageError("one label per row of alpha is required")
    a_hat = beta + (1.0 - beta) * alpha
    s_hat = a_hat.sum(axis=1)
    log_norm = v_lgamma(s_hat) - v_lgamma(a_hat).sum(axis=1) - float(lgamma(float(K)))
    spread = ((a_hat - 1.0) * (v_digamma(a_hat) - v_digamma(s_hat))).sum(axis=1)
    return log_norm + spread


def loss_total(alpha, y, weights, epoch):
    """Batch mean of ``lambda_mar * L_mar + lambda_kl(epoch) * L_kl``."""
    alpha = as_value(alpha)
    if alpha.shape[0] == 0 or np.size(y) == 0:
        raise UsageError("loss_total needs a non-empty batch")
    total = weights.lambda_mar * loss_marginal(alpha, y)
    kl_w = weights.kl_weight(epoch)
    if kl_w:
        total = total + kl_w * loss_kl(alpha, y)
    return total.mean()
