"""Universal dynamic network: a static MLP backbone followed by dynamic
classifier layers whose weights a hypernetwork generates per sample.

Three classifier strategies are supported:

``gpg``
    every dynamic layer's weight and bias are produced by the generator.
``lps``
    a static classifier is pretrained with the backbone, frozen as a basis,
    and the generator only adds per-sample residuals to it.
``static``
    an ordinary fixed-weight classifier (no hypernetwork), used for ablation.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diffcore import Value, concat, matmul, no_grad, relu, slice_cols
from .errors import ConfigError, NumericError, ParseError, ShapeError
from .evidence import DirichletOutput
from .prng import XorShift64Star

STRATEGIES = ("gpg", "lps", "static")
LOGIT_CLAMP = 10.0


@dataclass(frozen=True)
class Architecture:
    d: int
    K: int
    backbone_hidden: tuple = (64, 32)
    dynamic_hidden: tuple = ()
    embed_dim: int = 16
    generator_hidden: int = 32

    @property
    def feature_dim(self):
        return self.backbone_hidden[-1] if self.backbone_hidden else self.d

    @property
    def dynamic_shapes(self):
        dims = (self.feature_dim,) + tuple(self.dynamic_hidden) + (self.K,)
        return tuple(zip(dims[:-1], dims[1:]))


def _uniform_init(rng, fan_in, shape, scale=1.0):
    bound = scale / math.sqrt(fan_in)
    return Value(rng.uniform(-bound, bound, shape), requires_grad=True)


def _expanders(n_in, n_out):
    # h @ expand repeats each input unit n_out times; (.) @ collapse sums over inputs
    expand = np.zeros((n_in, n_in * n_out))
    collapse = np.zeros((n_in * n_out, n_out))
    for i in range(n_in):
        expand[i, i * n_out : (i + 1) * n_out] = 1.0
        collapse[i * n_out : (i + 1) * n_out, :] = np.eye(n_out)
    return expand, collapse


class UdnModel:
    """Parameters of one network plus the bookkeeping for its strategy.

    ``params`` maps names like ``backbone.0.W`` or ``hyper.0.W2`` to leaf
    Values.  ``basis`` holds the frozen LPS classifier as plain arrays and
    stays ``None`` until :meth:`freeze_basis` is called.
    """

    def __init__(self, arch, strategy="gpg", seed=0):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self.arch = arch
        self.strategy = strategy
        self.basis = None
        self.backbone_frozen = False
        self.params = {}
        self._init_params(XorShift64Star(seed))
        self._expanders = {shape: _expanders(*shape) for shape in arch.dynamic_shapes}

    def _init_params(self, rng):
        a = self.arch
        dims = (a.d,) + tuple(a.backbone_hidden)
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"backbone.{i}.W"] = _uniform_init(rng, n_in, (n_in, n_out))
            self.params[f"backbone.{i}.b"] = _uniform_init(rng, n_in, (1, n_out))
        f = a.feature_dim
        for n, (n_in, n_out) in enumerate(a.dynamic_shapes):
            gen_out = n_in * n_out + n_out
            self.params[f"hyper.{n}.enc.W"] = _uniform_init(rng, f, (f, a.embed_dim))
            self.params[f"hyper.{n}.enc.b"] = _uniform_init(rng, f, (1, a.embed_dim))
            self.params[f"hyper.{n}.W1"] = _uniform_init(rng, a.embed_dim, (a.embed_dim, a.generator_hidden))
            self.params[f"hyper.{n}.B1"] = _uniform_init(rng, a.embed_dim, (1, a.generator_hidden))
            # small generator output keeps initial dynamic weights near zero (alpha near 1)
            self.params[f"hyper.{n}.W2"] = _uniform_init(rng, a.generator_hidden, (a.generator_hidden, gen_out), 0.1)
            self.params[f"hyper.{n}.B2"] = _uniform_init(rng, a.generator_hidden, (1, gen_out), 0.1)
        for n, (n_in, n_out) in enumerate(a.dynamic_shapes):
            self.params[f"static.{n}.W"] = _uniform_init(rng, n_in, (n_in, n_out))
            self.params[f"static.{n}.b"] = _uniform_init(rng, n_in, (1, n_out))

    def group(self, prefix):
        return [v for k, v in self.params.items() if k.startswith(prefix + ".")]

    def trainable(self, phase="main"):
        """Parameters updated in a training phase.

        ``phase="pretrain"`` is the first LPS stage (backbone plus static
        classifier).  In the main phase LPS trains only the generator, GPG
        trains backbone and generator, and static trains backbone and classifier.
        """
        if phase == "pretrain" or self.strategy == "static":
            return self.group("backbone") + self.group("static")
        hyper = self.group("hyper")
        if self.strategy == "lps" or self.backbone_frozen:
            return hyper
        return self.group("backbone") + hyper

    def freeze_basis(self):
        """Snapshot the static classifier as the frozen LPS basis and freeze the backbone."""
        self.basis = [
            (self.params[f"static.{n}.W"].data.copy(), self.params[f"static.{n}.b"].data.copy())
            for n in range(len(self.arch.dynamic_shapes))
        ]
        self.backbone_frozen = True

    def copy(self):
        other = UdnModel.__new__(UdnModel)
        other.arch = self.arch
        other.strategy = self.strategy
        other.basis = None if self.basis is None else [(w.copy(), b.copy()) for w, b in self.basis]
        other.backbone_frozen = self.backbone_frozen
        other.params = {k: Value(v.data, requires_grad=True) for k, v in self.params.items()}
        other._expanders = self._expanders
        return other

    def state(self):
        return {k: v.data for k, v in self.params.items()}


def _as_input(x, d):
    x = x if isinstance(x, Value) else Value(x)
    if x.shape[1] != d:
        raise ShapeError(f"expected feature width {d}, got {x.shape[1]}")
    return x


def backbone_forward(model, x):
    x = _as_input(x, model.arch.d)
    h = x
    n_layers = len(model.arch.backbone_hidden)
    for i in range(n_layers):
        h = relu(matmul(h, model.params[f"backbone.{i}.W"]) + model.params[f"backbone.{i}.b"])
    return h


def hyper_generate(model, features):
    """Per-sample ``(weight, bias)`` Values for every dynamic layer.

    Weights come back flattened row-major with shape ``(batch, N_in * N_out)``.
    """
    p = model.params
    out = []
    for n, (n_in, n_out) in enumerate(model.arch.dynamic_shapes):
        embed = relu(matmul(features, p[f"hyper.{n}.enc.W"]) + p[f"hyper.{n}.enc.b"])
        hidden = matmul(embed, p[f"hyper.{n}.W1"]) + p[f"hyper.{n}.B1"]
        flat = matmul(hidden, p[f"hyper.{n}.W2"]) + p[f"hyper.{n}.B2"]
        assert flat.shape[1] == n_in * n_out + n_out
        out.append((slice_cols(flat, 0, n_in * n_out), slice_cols(flat, n_in * n_out, n_in * n_out + n_out)))
    return out


def _per_sample_affine(model, h, weight, bias, shape):
    expand, collapse = model._expanders[shape]
    return matmul(matmul(h, expand) * weight, collapse) + bias


def _static_layer(model, h, n):
    if model.strategy == "lps" and model.basis is not None:
        w, b = model.basis[n]
        return matmul(h, Value(w)) + Value(b)
    return matmul(h, model.params[f"static.{n}.W"]) + model.params[f"static.{n}.b"]


def classifier_forward(model, features, generated=None, use_basis_only=False):
    """Logits of the dynamic classifier.

    ``use_basis_only`` evaluates the plain static classifier (LPS pretraining
    and the static strategy); otherwise ``generated`` must come from
    :func:`hyper_generate` on the same batch.
    """
    shapes = model.arch.dynamic_shapes
    static = use_basis_only or model.strategy == "static"
    if model.strategy == "lps" and not static and model.basis is None:
        raise ConfigError("LPS strategy needs a pretrained classifier basis; call freeze_basis() first")
    h = features
    for n, shape in enumerate(shapes):
        if static:
            h = _static_layer(model, h, n)
        else:
            weight, bias = generated[n]
            dyn = _per_sample_affine(model, h, weight, bias, shape)
            h = _static_layer(model, h, n) + dyn if model.strategy == "lps" else dyn
        if n < len(shapes) - 1:
            h = relu(h)
    return h


def logits_forward(model, x, phase="main"):
    feats = backbone_forward(model, x)
    if phase == "pretrain" or model.strategy == "static":
        return classifier_forward(model, feats, use_basis_only=True)
    return classifier_forward(model, feats, hyper_generate(model, feats))


def alpha_from_logits(logits):
    return logits.clamp(-LOGIT_CLAMP, LOGIT_CLAMP).exp()


def alpha_graph(model, x, phase="main"):
    """Differentiable concentrations ``exp(clamp(logits, -10, 10))``."""
    return alpha_from_logits(logits_forward(model, x, phase))


def predict_alpha(model, x, ids=None, phase="main"):
    with no_grad():
        logits = logits_forward(model, x, phase).data
    bad = ~np.isfinite(logits).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        who = f"sample id {int(ids[row])}" if ids is not None else f"row {row}"
        raise NumericError(f"non-finite logits for {who}")
    alpha = np.exp(np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP))
    return DirichletOutput(alpha, None if ids is None else np.asarray(ids))


def extract_features(model, x):
    with no_grad():
        return backbone_forward(model, x).data


# Checkpoint layout (text, UTF-8):
#   line 1   "detective-checkpoint 1"
#   line 2   "arch d=.. K=.. backbone=64,32 dynamic= embed=16 generator=32 strategy=gpg frozen=0"
#   then per tensor: "tensor <name> <rows> <cols>" followed by <rows> lines of
#   space-separated values printed with 17 significant digits.
# The frozen LPS basis is stored as tensors named basis.<n>.W / basis.<n>.b.

_MAGIC = "detective-checkpoint 1"


def _fmt_dims(dims):
    return ",".join(str(x) for x in dims)


def save_checkpoint(model, path):
    a = model.arch
    lines = [
        _MAGIC,
        f"arch d={a.d} K={a.K} backbone={_fmt_dims(a.backbone_hidden)} dynamic={_fmt_dims(a.dynamic_hidden)} "
        f"embed={a.embed_dim} generator={a.generator_hidden} strategy={model.strategy} "
        f"frozen={int(model.backbone_frozen)}",
    ]
    tensors = [(k, v.data) for k, v in model.params.items()]
    if model.basis is not None:
        for n, (w, b) in enumerate(model.basis):
            tensors += [(f"basis.{n}.W", w), (f"basis.{n}.b", b)]
    for name, arr in tensors:
        lines.append(f"tensor {name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(" ".join(format(v, ".17g") for v in row) for row in arr)
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_dims(text):
    return tuple(int(x) for x in text.split(",") if x)


def load_checkpoint(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ParseError("not a detective checkpoint", 1)
    try:
        fields = dict(tok.split("=", 1) for tok in lines[1].split()[1:])
        arch = Architecture(
            d=int(fields["d"]),
            K=int(fields["K"]),
            backbone_hidden=_parse_dims(fields["backbone"]),
            dynamic_hidden=_parse_dims(fields["dynamic"]),
            embed_dim=int(fields["embed"]),
            generator_hidden=int(fields["generator"]),
        )
        strategy = fields["strategy"]
        frozen = fields["frozen"] == "1"
    except (KeyError, ValueError, IndexError):
        raise ParseError("malformed arch line", 2) from None
    model = UdnModel(arch, strategy)
    model.backbone_frozen = frozen
    basis = {}
    i = 2
    while i < len(lines):
        head = lines[i].split()
        if len(head) != 4 or head[0] != "tensor":
            raise ParseError(f"expected tensor header, got {lines[i]!r}", i + 1)
        name, rows, cols = head[1], int(head[2]), int(head[3])
        try:
            arr = np.array([[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]).reshape(rows, cols)
        except (ValueError, IndexError):
            raise ParseError(f"bad data for tensor {name}", i + 1) from None
        if name.startswith("basis."):
            basis[name] = arr
        elif name in model.params:
            if model.params[name].shape != arr.shape:
                raise ParseError(f"tensor {name} has shape {arr.shape}, expected {model.params[name].shape}", i + 1)
            model.params[name] = Value(arr, requires_grad=True)
        else:
            raise ParseError(f"unknown tensor {name}", i + 1)
        i += 1 + rows
    if basis:
        model.basis = [(basis[f"basis.{n}.W"], basis[f"basis.{n}.b"]) for n in range(len(arch.dynamic_shapes))]
    return model
