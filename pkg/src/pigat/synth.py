"""Synthetic interaction-log generator with controllable structure.

Generative process: every user and item gets a latent vector; an
interaction's label is Bernoulli(sigmoid(<user latent, item latent>)).
Item popularity follows a power law (low indices popular, high indices
long-tail), items cluster around shared centers that also name their
category field, and the acting user's latent can drift a little after
every event, so preferences move over time. A configurable fraction of
noise events picks the item uniformly and labels it by a coin flip.

Everything is driven by one seed: the same spec file always produces
byte-identical records.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .config import parse_kv_lines
from .data import InteractionLog, RawInteraction
from .errors import DataError
from .nn import sigmoid

Array = np.ndarray

N_CLUSTERS = 8
N_SEGMENTS = 4


@dataclass
class SynthSpec:
    users: int
    items: int
    events: int
    latent_dim: int = 8
    tastes: int = 1  # taste vectors per user; affinity is the max over them
    drift: float = 0.0  # per-event latent turnover of the acting user, in [0, 1]
    exponent: float = 1.0  # item popularity power-law exponent
    scale: float = 3.0  # typical magnitude of the label logit
    noise: float = 0.0  # fraction of uniformly random, coin-labeled events
    seed: int = 0

    def validate(self) -> "SynthSpec":
        if self.users < 2 or self.items < 2:
            raise DataError("need at least 2 users and 2 items")
        if self.events < 10:
            raise DataError(f"need at least 10 events, got {self.events}")
        if self.latent_dim < 1:
            raise DataError("latent_dim must be positive")
        if self.tastes < 1:
            raise DataError("tastes must be positive")
        if not 0.0 <= self.drift <= 1.0:
            raise DataError(f"drift must be in [0, 1], got {self.drift}")
        if self.exponent < 0.0:
            raise DataError(f"exponent must be non-negative, got {self.exponent}")
        if self.scale <= 0.0:
            raise DataError(f"scale must be positive, got {self.scale}")
        if not 0.0 <= self.noise < 1.0:
            raise DataError(f"noise must be in [0, 1), got {self.noise}")
        return self


def read_synth_spec(path: str) -> SynthSpec:
    pairs = parse_kv_lines(path)
    kinds = {f.name: (float if f.type == "float" else int) for f in fields(SynthSpec)}
    kwargs = {}
    for key, raw in pairs.items():
        if key not in kinds:
            raise DataError(f"unknown generator key {key!r}")
        try:
            kwargs[key] = kinds[key](raw)
        except ValueError:
            raise DataError(f"generator key {key} expects {kinds[key].__name__}, got {raw!r}") from None
    missing = {"users", "items", "events"} - set(kwargs)
    if missing:
        raise DataError(f"generator spec is missing {sorted(missing)}")
    return SynthSpec(**kwargs).validate()


@dataclass
class GroundTruth:
    """The latents behind a generated log, for diagnostics."""

    initial_users: Array
    final_users: Array
    items: Array
    clusters: Array
    segments: Array


def generate(spec: SynthSpec) -> tuple[InteractionLog, GroundTruth]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d = spec.latent_dim
    # Entry scale chosen so <u, v> has standard deviation `scale`.
    s = np.sqrt(spec.scale / np.sqrt(d))

    # A user is a bundle of taste vectors and likes an item that suits
    # any one of them; with a single taste this is plain dot-product
    # affinity. Several tastes make the liked set multi-modal, so its
    # centroid stops being a faithful summary of the user.
    users = rng.standard_normal((spec.users, spec.tastes, d)) * s
    centers = rng.standard_normal((N_CLUSTERS, d)) * s
    clusters = rng.integers(N_CLUSTERS, size=spec.items)
    # items mix a shared cluster direction with their own identity;
    # 0.6^2 + 0.8^2 = 1 keeps the marginal scale unchanged
    items = 0.6 * centers[clusters] + 0.8 * rng.standard_normal((spec.items, d)) * s
    segments = rng.integers(N_SEGMENTS, size=spec.users)

    ranks = np.arange(1, spec.items + 1, dtype=np.float64)
    popularity = ranks**-spec.exponent
    popularity /= popularity.sum()

    initial_users = users.copy()
    keep = np.sqrt(1.0 - spec.drift)
    stir = np.sqrt(spec.drift)
    records = []
    for step in range(1, spec.events + 1):
        u = int(rng.integers(spec.users))
        if rng.random() < spec.noise:
            i = int(rng.integers(spec.items))
            label = int(rng.integers(2))
        else:
            i = int(rng.choice(spec.items, p=popularity))
            affinity = float(np.max(users[u] @ items[i]))
            label = int(rng.random() < sigmoid(affinity))
        records.append(
            RawInteraction(
                timestamp=step,
                user_values=(f"u{u}", f"s{segments[u]}"),
                item_values=(f"i{i}", f"c{clusters[i]}"),
                signal=float(label),
                line_no=0,
            )
        )
        if spec.drift > 0.0:
            users[u] = keep * users[u] + stir * rng.standard_normal((spec.tastes, d)) * s

    log = InteractionLog(["uid", "seg"], ["iid", "cat"], records)
    truth = GroundTruth(initial_users, users, items, clusters, segments)
    return log, truth


def write_latents(path: str, truth: GroundTruth) -> None:
    """Ground-truth dump: part, name, stage, comma-joined coordinates.

    A multi-taste user's vectors are concatenated taste by taste."""

    def fmt(vec: Array) -> str:
        return ",".join(repr(float(x)) for x in vec.reshape(-1))

    with open(path, "w", encoding="utf-8") as fh:
        for idx in range(truth.initial_users.shape[0]):
            fh.write(f"user\tu{idx}\tinitial\t{fmt(truth.initial_users[idx])}\n")
            fh.write(f"user\tu{idx}\tfinal\t{fmt(truth.final_users[idx])}\n")
        for idx in range(truth.items.shape[0]):
            fh.write(f"item\ti{idx}\tstatic\t{fmt(truth.items[idx])}\n")


def degree_summary(log: InteractionLog, total_items: int, threshold: int = 3) -> dict:
    """Interaction counts per item over the whole log; items the
    generator never drew count as zero-degree (they are the deep tail)."""
    counts: dict[str, int] = {}
    for rec in log.records:
        counts[rec.item_values[0]] = counts.get(rec.item_values[0], 0) + 1
    if total_items < len(counts):
        raise DataError(f"log names {len(counts)} items but only {total_items} exist")
    at_most = sum(1 for c in counts.values() if c <= threshold)
    at_most += total_items - len(counts)
    return {
        "events": len(log.records),
        "items": total_items,
        "items_seen": len(counts),
        "longtail_threshold": threshold,
        "longtail_fraction": at_most / total_items,
    }
