"""Synthetic multi-domain blobs, CSV persistence and the target-label oracle.

A dataset holds ``M`` labelled source domains (domain tags ``0..M-1``) and
one target domain (tag ``M``) over a shared label space ``{0..K-1}``.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, OracleError, ParseError
from .prng import XorShift64Star


class Sample(NamedTuple):
    features: np.ndarray
    label: int
    domain: int
    id: int


@dataclass(frozen=True)
class DomainTransform:
    angle_deg: float = 0.0
    scale: float = 1.0
    translation: tuple = ()


@dataclass(frozen=True)
class BlobConfig:
    K: int = 5
    d: int = 2
    M: int = 3
    samples_per_domain: int = 500
    class_separation: float = 3.0
    noise_sigma: float = 1.0
    domain_transforms: tuple = field(default_factory=tuple)
    seed: int = 0

    def validate(self):
        problems = []
        if self.K < 2:
            problems.append(f"K={self.K} (need K >= 2)")
        if self.d < 1:
            problems.append(f"d={self.d} (need d >= 1)")
        if self.M < 2:
            problems.append(f"M={self.M} (need M >= 2)")
        if not self.noise_sigma > 0:
            problems.append(f"noise_sigma={self.noise_sigma} (need noise_sigma > 0)")
        if self.samples_per_domain < self.K:
            problems.append(
                f"samples_per_domain={self.samples_per_domain} (need samples_per_domain >= K={self.K})"
            )
        if len(self.domain_transforms) != self.M + 1:
            problems.append(
                f"domain_transforms has {len(self.domain_transforms)} entries (need M + 1 = {self.M + 1})"
            )
        for i, t in enumerate(self.domain_transforms):
            if t.translation and len(t.translation) != self.d:
                problems.append(f"domain_transforms[{i}].translation length {len(t.translation)} != d={self.d}")
            if t.angle_deg and self.d < 2:
                problems.append(f"domain_transforms[{i}].angle_deg needs d >= 2")
        if problems:
            raise ConfigError("invalid BlobConfig: " + "; ".join(problems))


def rotation_transforms(angles_deg):
    return tuple(DomainTransform(angle_deg=float(a)) for a in angles_deg)


# Source rotations 0/25/50 degrees, target at 75 degrees.
PRESETS = {
    "blobs3": dict(
        K=5,
        d=2,
        M=3,
        samples_per_domain=500,
        class_separation=3.0,
        noise_sigma=1.0,
        domain_transforms=rotation_transforms((0, 25, 50, 75)),
    ),
}


def preset(name, seed=0, **overrides):
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
    base.update(overrides)
    return BlobConfig(seed=seed, **base)


class MultiDomainDataset:
    """Immutable columnar store of every sample, sources first then target."""

    def __init__(self, ids, domains, labels, features, K, M, seed=None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.domains = np.asarray(domains, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.features = np.asarray(features, dtype=np.float64)
        self.K = int(K)
        self.M = int(M)
        self.seed = seed
        for arr in (self.ids, self.domains, self.labels, self.features):
            arr.setflags(write=False)
        self._index = {int(i): n for n, i in enumerate(self.ids)}
        self._check()

    def _check(self):
        n = len(self.ids)
        if not (len(self.domains) == len(self.labels) == n and self.features.shape[0] == n):
            raise ConfigError("dataset columns have inconsistent lengths")
        if len(self._index) != n:
            raise ConfigError("sample ids are not unique")
        if self.M < 2:
            raise ConfigError(f"need M >= 2 source domains, got {self.M}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.K):
            raise ConfigError(f"labels must lie in 0..{self.K - 1}")
        if not np.isfinite(self.features).all():
            raise ConfigError("features must be finite")
        for dom in range(self.M + 1):
            if not (self.domains == dom).any():
                raise ConfigError(f"domain {dom} is empty")

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, MultiDomainDataset):
            return NotImplemented
        return (
            self.K == other.K
            and self.M == other.M
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.domains, other.domains)
            and np.array_equal(self.labels, other.labels)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    def __hash__(self):
        return hash((self.K, self.M, self.ids.tobytes(), self.labels.tobytes(), self.features.tobytes()))

    def domain_mask(self, domain):
        return self.domains == domain

    def rows(self, ids):
        return np.array([self._index[int(i)] for i in ids], dtype=np.int64)

    def has_id(self, sample_id):
        return int(sample_id) in self._index

    def domain_of(self, sample_id):
        return int(self.domains[self._index[int(sample_id)]])

    def samples(self, domain=None):
        for n in range(len(self.ids)):
            if domain is None or self.domains[n] == domain:
                yield Sample(self.features[n], int(self.labels[n]), int(self.domains[n]), int(self.ids[n]))

    @property
    def sources(self):
        return [list(self.samples(m)) for m in range(self.M)]

    @property
    def target(self):
        return list(self.samples(self.M))

    @property
    def target_ids(self):
        return self.ids[self.domains == self.M]


def _apply_transform(points, t, d):
    out = points.copy()
    if d >= 2:
        a = math.radians(t.angle_deg)
        c, s = math.cos(a), math.sin(a)
        x, y = points[:, 0].copy(), points[:, 1].copy()
        out[:, 0] = t.scale * (c * x - s * y)
        out[:, 1] = t.scale * (s * x + c * y)
    else:
        out[:, 0] = t.scale * points[:, 0]
    if t.translation:
        out = out + np.asarray(t.translation, dtype=np.float64)
    return out


def gen_blobs(cfg):
    """Draw ``K`` class prototypes once, then sample every domain around its transformed copy."""
    cfg.validate()
    rng = XorShift64Star(cfg.seed)
    prototypes = rng.normal((cfg.K, cfg.d)) * cfg.class_separation
    n = cfg.samples_per_domain
    labels_one = np.arange(n) % cfg.K

    ids, domains, labels, feats = [], [], [], []
    next_id = 0
    for dom, t in enumerate(cfg.domain_transforms):
        centers = _apply_transform(prototypes, t, cfg.d)
        noise = rng.normal((n, cfg.d)) * cfg.noise_sigma
        feats.append(centers[labels_one] + noise)
        labels.append(labels_one)
        domains.append(np.full(n, dom))
        ids.append(np.arange(next_id, next_id + n))
        next_id += n
    return MultiDomainDataset(
        np.concatenate(ids),
        np.concatenate(domains),
        np.concatenate(labels),
        np.vstack(feats),
        K=cfg.K,
        M=cfg.M,
        seed=cfg.seed,
    )


def _meta_path(path):
    path = Path(path)
    return path.with_suffix(".meta")


def write_dataset(ds, path):
    """Write ``path`` (CSV) and its ``.meta`` sidecar; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["id", "domain", "label"] + [f"f{j}" for j in range(ds.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n in range(len(ds)):
            w.writerow(
                [int(ds.ids[n]), int(ds.domains[n]), int(ds.labels[n])]
                + [format(v, ".17g") for v in ds.features[n]]
            )
    seed = "none" if ds.seed is None else str(ds.seed)
    _meta_path(path).write_text(f"K={ds.K}\nd={ds.d}\nM={ds.M}\nseed={seed}\n")


def _read_meta(path):
    meta = {}
    mp = _meta_path(path)
    if not mp.exists():
        return meta
    for lineno, line in enumerate(mp.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{mp}: expected key=value", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        meta[key] = val
    return meta


def _parse_int(text, column, lineno):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"column {column!r}: not an integer: {text!r}", lineno) from None


def read_dataset(path):
    """Inverse of :func:`write_dataset`. The sidecar is optional; without it K and M are inferred."""
    path = Path(path)
    meta = _read_meta(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        for col in ("id", "domain", "label"):
            if col not in header:
                raise ParseError(f"missing column {col!r}", 1)
        if "d" in meta:
            d = int(meta["d"])
        else:
            d = sum(1 for h in header if h.startswith("f") and h[1:].isdigit())
        for j in range(d):
            if f"f{j}" not in header:
                raise ParseError(f"missing column 'f{j}'", 1)
        pos = {h: i for i, h in enumerate(header)}
        fcols = [pos[f"f{j}"] for j in range(d)]
        K = int(meta["K"]) if "K" in meta else None
        M = int(meta["M"]) if "M" in meta else None

        ids, domains, labels, feats = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            sid = _parse_int(row[pos["id"]], "id", lineno)
            dom = _parse_int(row[pos["domain"]], "domain", lineno)
            lab = _parse_int(row[pos["label"]], "label", lineno)
            if lab < 0 or (K is not None and lab >= K):
                raise ParseError(f"label {lab} outside 0..{(K or 0) - 1} (row id {sid})", lineno)
            if dom < 0 or (M is not None and dom > M):
                raise ParseError(f"domain {dom} outside 0..{M} (row id {sid})", lineno)
            try:
                vec = [float(row[c]) for c in fcols]
            except ValueError:
                raise ParseError(f"non-numeric feature (row id {sid})", lineno) from None
            if not all(math.isfinite(v) for v in vec):
                raise ParseError(f"non-finite feature (row id {sid})", lineno)
            ids.append(sid)
            domains.append(dom)
            labels.append(lab)
            feats.append(vec)
    if not ids:
        raise ParseError("no data rows", 2)
    K = K if K is not None else max(labels) + 1
    M = M if M is not None else max(domains)
    seed = meta.get("seed")
    seed = None if seed in (None, "none") else int(seed)
    try:
        return MultiDomainDataset(ids, domains, labels, np.array(feats, dtype=np.float64).reshape(-1, d), K, M, seed)
    except ConfigError as exc:
        raise ParseError(str(exc)) from None


class Oracle:
    """The only route to target labels. Every call counts as one query."""

    def __init__(self, labels, seed=None):
        self._labels = dict(labels)
        self.seed = seed
        self.query_count = 0

    def __call__(self, sample_id):
        sample_id = int(sample_id)
        if sample_id not in self._labels:
            raise OracleError(f"id {sample_id} is not an unlabeled target sample")
        self.query_count += 1
        return self._labels[sample_id]

    def __contains__(self, sample_id):
        return int(sample_id) in self._labels

    def __len__(self):
        return len(self._labels)


def split_target_pool(ds, oracle_seed=None):
    """All target ids (ascending) start unlabeled; their labels hide behind an :class:`Oracle`."""
    mask = ds.domains == ds.M
    ids = [int(i) for i in ds.ids[mask]]
    labels = {int(i): int(y) for i, y in zip(ds.ids[mask], ds.labels[mask])}
    return sorted(ids), Oracle(labels, seed=oracle_seed)
