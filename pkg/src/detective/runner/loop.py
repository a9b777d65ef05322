"""The multi-round active-labeling experiment."""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..datagen import BlobConfig, gen_blobs, preset, read_dataset, rotation_transforms, split_target_pool
from ..errors import ConfigError
from ..evidence import entropy, integrated_uncertainty
from ..prng import derive_seed
from ..selector import BudgetState, ScheduleConfig, baseline_select, candidate_count, detective_select
from ..udn import Architecture, UdnModel, extract_features, predict_alpha
from .training import SGD, train_rounds

log = logging.getLogger(__name__)

# Published full-scale Office-Home mean accuracy (ResNet-50); shown for context only.
REFERENCE_OFFICE_HOME_MEAN = 89.99


@dataclass
class RoundReport:
    round: object  # int, or "final" for the closing evaluation
    selected: list
    loss_trace: list
    accuracy: dict  # domain name -> accuracy in [0, 1]
    mean_accuracy: float
    n_labeled: int
    wall_time: float = 0.0


@dataclass
class SelectionRecord:
    round: int
    id: int
    u_dom: float
    u_pre: float
    u_int: float
    density: float
    selected: bool


@dataclass
class ExperimentResult:
    label: str
    config: object
    reports: list
    selection_log: list
    model: object = None
    oracle_queries: int = 0
    budget: int = 0
    domain_names: list = field(default_factory=list)

    @property
    def final(self):
        return self.reports[-1]

    @property
    def target_accuracy(self):
        return self.final.accuracy["target"]


def domain_names(M):
    return [f"source{m}" for m in range(M)] + ["target"]


def evaluate(model, ds, phase="main"):
    """Per-domain accuracy of argmax expected probability, plus their mean.

    Ties in the argmax go to the lowest class index.  Domains with no samples
    are left out of the result rather than scored as zero.
    """
    out = {}
    names = domain_names(ds.M)
    for dom, name in enumerate(names):
        mask = ds.domains == dom
        if not mask.any():
            continue
        prob = predict_alpha(model, ds.features[mask], phase=phase).prob
        pred = np.argmax(prob, axis=1)
        out[name] = float(np.mean(pred == ds.labels[mask]))
    mean = float(np.mean(list(out.values()))) if out else float("nan")
    return out, mean


def load_dataset(cfg):
    if cfg.data:
        return read_dataset(cfg.data)
    seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    overrides = {}
    for key in ("samples_per_domain", "class_separation", "noise_sigma"):
        if getattr(cfg, key) is not None:
            overrides[key] = getattr(cfg, key)
    if cfg.rotations is not None:
        overrides["domain_transforms"] = rotation_transforms(cfg.rotations)
        overrides["M"] = len(cfg.rotations) - 1
    return gen_blobs(preset(cfg.preset, seed=seed, **overrides))


def build_model(cfg, ds, seed):
    arch = Architecture(
        d=ds.d,
        K=ds.K,
        backbone_hidden=tuple(cfg.backbone_hidden),
        dynamic_hidden=tuple(cfg.dynamic_hidden),
        embed_dim=cfg.embed_dim,
        generator_hidden=cfg.generator_hidden,
    )
    return UdnModel(arch, cfg.effective_strategy, seed=seed)


class _Trainer:
    """Owns the model and optimiser state across rounds (warm start by default)."""

    def __init__(self, cfg, ds):
        self.cfg = cfg
        self.ds = ds
        self.epoch = 0
        self.phase_count = 0
        self.reset()

    def reset(self):
        cfg = self.cfg
        self.model = build_model(cfg, self.ds, derive_seed(cfg.seed, "init"))
        self.opt = SGD(cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.max_grad_norm)
        self.epoch = 0
        if self.model.strategy == "lps":
            src = self.ds.domains < self.ds.M
            train_rounds(
                self.model,
                self.ds.features[src],
                self.ds.labels[src],
                cfg,
                cfg.pretrain_epochs,
                derive_seed(cfg.seed, "pretrain"),
                phase="pretrain",
            )
            self.model.freeze_basis()

    def train(self, labeled_ids, labels):
        cfg, ds = self.cfg, self.ds
        src = ds.domains < ds.M
        rows = ds.rows(labeled_ids)
        target = (ds.features[rows], np.array([labels[i] for i in labeled_ids], dtype=np.int64))
        seed = derive_seed(cfg.seed, f"shuffle{self.phase_count}")
        self.phase_count += 1
        trace = train_rounds(
            self.model,
            ds.features[src],
            ds.labels[src],
            cfg,
            cfg.epochs_per_round,
            seed,
            self.epoch,
            optimizer=self.opt,
            target=target,
        )
        self.epoch += cfg.epochs_per_round
        return trace


def _score_pool(cfg, model, ds, pool):
    rows = ds.rows(pool)
    out = predict_alpha(model, ds.features[rows], ids=pool)
    u_dom, u_pre = out.u_dom, out.u_pre
    if cfg.disable_ius:
        u_int = entropy(out.prob)
    else:
        u_int = integrated_uncertainty(u_dom, u_pre, cfg.lambda_dom, cfg.lambda_pre)
    feats = extract_features(model, ds.features[rows])
    return out.prob, u_dom, u_pre, u_int, feats


def _select(cfg, model, ds, budget, r, b):
    pool = list(budget.unlabeled)
    prob, u_dom, u_pre, u_int, feats = _score_pool(cfg, model, ds, pool)
    pos = {i: n for n, i in enumerate(pool)}
    records = []
    if cfg.selection == "detective":
        n_hat = candidate_count(ScheduleConfig(cfg.lambda_u, cfg.tau), b, r, budget.rounds, len(pool))
        scores = dict(zip(pool, u_int.tolist()))
        features = dict(zip(pool, feats))
        selected, cand = detective_select(scores, features, b, n_hat, cfg.density_k, use_cdc=not cfg.disable_cdc)
        chosen = set(selected)
        for i, dens in zip(cand.ids, cand.densities):
            n = pos[i]
            records.append(SelectionRecord(r, i, u_dom[n], u_pre[n], u_int[n], float(dens), i in chosen))
    else:
        selected = baseline_select(cfg.selection, pool, prob, b, derive_seed(cfg.seed, f"random{r}"))
        for i in sorted(selected):
            n = pos[i]
            records.append(SelectionRecord(r, i, u_dom[n], u_pre[n], u_int[n], float("nan"), True))
    return selected, records


def run_active_loop(cfg, ds=None):
    """Train, score, select and query for ``cfg.rounds`` rounds, then train once more.

    Each round trains on the sources plus every target sample labelled so
    far, evaluates, and spends that round's share of the budget.  A closing
    round (``round == "final"``) trains on the full labelled set and gives the
    summary accuracy.  With a zero budget only the closing round runs.
    """
    ds = ds if ds is not None else load_dataset(cfg)
    pool, oracle = split_target_pool(ds, derive_seed(cfg.seed, "oracle"))
    total = int(math.floor(cfg.budget_fraction * len(pool) + 1e-9))
    if total > len(pool):
        raise ConfigError(f"budget {total} exceeds target pool of {len(pool)}")
    budget = BudgetState(total, cfg.rounds, pool)
    trainer = _Trainer(cfg, ds)
    labels = {}
    reports, sel_log = [], []

    rounds = range(1, cfg.rounds + 1) if total > 0 else ()
    for r in rounds:
        t0 = time.perf_counter()
        if cfg.reinit_each_round and r > 1:
            trainer.reset()
        trace = trainer.train(budget.labeled, labels)
        acc, mean = evaluate(trainer.model, ds)
        b = budget.round_budget(r)
        selected, records = _select(cfg, trainer.model, ds, budget, r, b)
        for i in selected:
            labels[i] = oracle(i)
        budget.commit(selected)
        sel_log.extend(records)
        reports.append(RoundReport(r, list(selected), trace, acc, mean, len(budget.labeled), time.perf_counter() - t0))
        log.info("%s round %d: target acc %.4f, labelled %d", cfg.run_label, r, acc["target"], len(budget.labeled))

    t0 = time.perf_counter()
    if cfg.reinit_each_round and reports:
        trainer.reset()
    trace = trainer.train(budget.labeled, labels)
    acc, mean = evaluate(trainer.model, ds)
    reports.append(RoundReport("final", [], trace, acc, mean, len(budget.labeled), time.perf_counter() - t0))
    return ExperimentResult(
        label=cfg.run_label,
        config=cfg,
        reports=reports,
        selection_log=sel_log,
        model=trainer.model,
        oracle_queries=oracle.query_count,
        budget=total,
        domain_names=domain_names(ds.M),
    )
