"""Mini-batch SGD with momentum and decoupled weight decay."""

import logging

import numpy as np

from ..diffcore import backward, zero_grad
from ..errors import NumericError, UsageError
from ..evidence import LossWeights, loss_total
from ..prng import XorShift64Star
from ..udn import alpha_graph

log = logging.getLogger(__name__)


class SGD:
    """Per step: ``p *= 1 - lr * wd``, then ``v = momentum * v + grad``, ``p -= lr * v``.

    With ``max_grad_norm`` set, the joint gradient is rescaled to at most
    that Euclidean norm before entering the momentum buffer.
    """

    def __init__(self, lr, momentum=0.9, weight_decay=0.0, max_grad_norm=None):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.max_grad_norm = max_grad_norm
        self._velocity = {}

    def step(self, params):
        shrink = 1.0 - self.lr * self.weight_decay
        scale = 1.0
        if self.max_grad_norm:
            norm = np.sqrt(sum(float((p.grad * p.grad).sum()) for p in params))
            if norm > self.max_grad_norm:
                scale = self.max_grad_norm / norm
        for p in params:
            g = p.grad if scale == 1.0 else p.grad * scale
            v = self._velocity.get(id(p))
            v = g.copy() if v is None else self.momentum * v + g
            self._velocity[id(p)] = v
            p.data *= shrink
            p.data -= self.lr * v


def train_rounds(model, x, y, cfg, epochs, seed, epoch_offset=0, phase="main", optimizer=None, target=None):
    """Run ``epochs`` passes of shuffled mini-batch SGD over ``(x, y)``.

    ``target`` optionally holds the labelled target samples ``(xt, yt)``.
    With ``cfg.target_batch_size > 0`` every batch of ``(x, y)`` is extended
    by up to that many labelled target samples, cycling through a reshuffled
    target list; otherwise the target samples are simply pooled with
    ``(x, y)``.  ``epoch_offset`` positions the KL annealing ramp when
    training resumes across rounds.  Returns the mean batch loss per epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    xt = yt = None
    if target is not None and len(target[0]):
        xt = np.asarray(target[0], dtype=np.float64)
        yt = np.asarray(target[1], dtype=np.int64)
        if cfg.target_batch_size <= 0:
            x, y = np.vstack([x, xt]), np.concatenate([y, yt])
            xt = yt = None
    if len(x) == 0:
        raise UsageError("train_rounds needs at least one labelled sample")
    weights = LossWeights(cfg.lambda_mar, cfg.lambda_kl, cfg.kl_anneal_epochs)
    opt = optimizer or SGD(cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.max_grad_norm)
    params = model.trainable(phase)
    rng = XorShift64Star(seed)
    tgt_order, tgt_pos = [], 0
    trace = []
    for e in range(epochs):
        epoch = epoch_offset + e
        perm = rng.permutation(len(x))
        total, batches = 0.0, 0
        for start in range(0, len(x), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            if xt is not None:
                take = []
                while len(take) < min(cfg.target_batch_size, len(xt)):
                    if tgt_pos == len(tgt_order):
                        tgt_order, tgt_pos = rng.permutation(len(xt)), 0
                    take.append(tgt_order[tgt_pos])
                    tgt_pos += 1
                xb, yb = np.vstack([xb, xt[take]]), np.concatenate([yb, yt[take]])
            zero_grad(params)
            alpha = alpha_graph(model, xb, phase)
            if not np.isfinite(alpha.data).all():
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {batches}: model output is not finite")
            loss = loss_total(alpha, yb, weights, epoch)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {batches}")
            backward(loss)
            opt.step(params)
            total += value
            batches += 1
        trace.append(total / batches)
    return trace
