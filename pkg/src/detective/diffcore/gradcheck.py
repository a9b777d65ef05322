"""Central finite-difference verification of analytic gradients."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import GradCheckError, UsageError
from .tape import backward, record_relu_inputs, zero_grad


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst: tuple | None = None  # (param index, coordinate)
    checked: int = 0
    excluded: list = field(default_factory=list)


def _evaluate(f):
    with record_relu_inputs() as patterns:
        out = f()
    return out, patterns


def _same_pattern(a, b):
    if len(a) != len(b):
        return False
    return all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def grad_check_details(f, params, step=1e-5):
    """Compare ``backward`` gradients with central differences.

    A coordinate is skipped when the perturbed evaluations land on different
    sides of a relu kink, since
    the central difference is meaningless there.
    """
    if not 1e-7 <= step <= 1e-3:
        raise UsageError(f"step must lie in [1e-7, 1e-3], got {step}")
    zero_grad(params)
    loss, _ = _evaluate(f)
    if loss.data.size != 1:
        raise UsageError("grad_check needs a scalar-valued function")
    backward(loss)
    analytic = [p.grad.copy() for p in params]

    result = GradCheckResult(max_rel_error=0.0)
    for pi, p in enumerate(params):
        for coord in np.ndindex(p.data.shape):
            orig = p.data[coord]
            p.data[coord] = orig + step
            plus, pat_plus = _evaluate(f)
            p.data[coord] = orig - step
            minus, pat_minus = _evaluate(f)
            p.data[coord] = orig
            fp, fm = plus.item(), minus.item()
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradCheckError(pi, coord)
            if not _same_pattern(pat_plus, pat_minus):
                result.excluded.append((pi, coord))
                continue
            numeric = (fp - fm) / (2.0 * step)
            err = abs(analytic[pi][coord] - numeric) / max(1.0, abs(numeric))
            result.checked += 1
            if err > result.max_rel_error or result.worst is None:
                result.max_rel_error = float(max(err, result.max_rel_error))
                result.worst = (pi, coord)
    zero_grad(params)
    return result


def grad_check(f, params, step=1e-5):
    """Max relative gradient error of ``f`` over every coordinate of ``params``.

    The error per coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    Raises :class:`GradCheckError` if a perturbed loss is not finite.
    """
    return grad_check_details(f, params, step).max_rel_error
