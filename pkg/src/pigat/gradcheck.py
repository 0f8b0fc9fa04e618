"""Whole-model gradient verification.

Builds a small but structurally complete model (multi-field schema,
cold / partial / full neighbor windows) and compares every analytic
gradient against central finite differences of the batch loss.

Finite differences are only meaningful where the loss is locally smooth,
so case construction rejects draws that put any leaky-relu pre-activation
within a safety margin of its kink, or the output inside its clamp band.
The margin is an order of magnitude above the worst pre-activation shift
a single coordinate step can cause; as a second line of defense, any
coordinate whose difference quotient disagrees with the analytic value is
re-measured at smaller steps. A kink crossing shrinks with the step, a
wrong analytic gradient does not, so the retry cannot hide a real bug.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import NumericError
from .features import Batch, FeatureSchema, FieldVocab, encode_instance
from .graph import ITEM, USER, InteractionEvent, InteractionGraph
from .model import backward, bce_loss, forward, init_params, named_parameters

SMOOTH_MARGIN = 2e-4
DEFAULT_STEP = 1e-5
RETRY_STEPS = (1e-6, 1e-7)  # used only when a coordinate disagrees at DEFAULT_STEP
RETRY_THRESHOLD = 1e-4
# Central differences of an O(1) loss carry ~1e-11 of float64 rounding noise,
# so a 1e-4 relative comparison is only meaningful above ~1e-7. Coordinates
# where both sides sit below this floor agree to measurement precision.
REL_ERR_FLOOR = 1e-6


def toy_config(confidence: str = "ce", attention: str = "ffn-3", **overrides) -> TrainConfig:
    base = dict(
        confidence=confidence,
        attention=attention,
        max_neighbors=4,
        user_embed_width=8,
        item_embed_width=8,
        dropout=0.0,
        graph_mode="dynamic",
    )
    base.update(overrides)
    return TrainConfig(**base).validate()


def toy_schema(config: TrainConfig) -> FeatureSchema:
    return FeatureSchema(
        user_fields=[FieldVocab("uid", ["u0", "u1", "u2"]), FieldVocab("seg", ["a", "b"])],
        item_fields=[FieldVocab("iid", ["i0", "i1", "i2", "i3"]), FieldVocab("cat", ["x", "y"])],
        user_width=config.user_embed_width,
        item_width=config.item_embed_width,
    )


def _toy_batch(schema: FeatureSchema, config: TrainConfig, rng: np.random.Generator) -> Batch:
    """Three instances: full window, partial window, cold start."""
    g = InteractionGraph()
    segs, cats = ["a", "b"], ["x", "y"]

    def event(u, i, ts, label):
        uname, iname = f"u{u}", f"i{i}"
        return InteractionEvent(
            user=schema.node_index(USER, uname),
            item=schema.node_index(ITEM, iname),
            timestamp=ts,
            label=label,
            user_ids=schema.encode_profile(USER, (uname, segs[u % 2])),
            item_ids=schema.encode_profile(ITEM, (iname, cats[i % 2])),
        )

    history = [(0, 0), (0, 1), (1, 2), (0, 2), (1, 0), (0, 3), (0, 1)]
    for ts, (u, i) in enumerate(history, start=1):
        g.insert(event(u, i, ts, int(rng.random() < 0.5)))
    end = len(history) + 1
    queries = [event(0, 3, end, 1), event(1, 1, end, 0), event(2, 0, end, 1)]
    snap = g.snapshot_at(end)
    k = config.max_neighbors
    return Batch.from_instances([encode_instance(schema, q, snap, k) for q in queries])


def build_case(config: TrainConfig, seed: int, max_tries: int = 200):
    """Deterministic (params, batch) pair with a smooth loss surface.

    Biases get a small random offset: with zero biases an all-masked
    window parks adaptive pre-activations exactly on the leaky kink,
    where finite differences do not measure the derivative.
    """
    for attempt in range(max_tries):
        rng = np.random.default_rng(seed + 7919 * attempt)
        schema = toy_schema(config)
        params = init_params(rng, schema, config)
        for arr in named_parameters(params).values():
            if arr.ndim == 1:
                arr += rng.uniform(0.02, 0.1, arr.shape) * rng.choice([-1.0, 1.0], arr.shape)
        batch = _toy_batch(schema, config, rng)
        state = forward(params, batch, mode="train")
        clamp_ok = bool(state.clamp_active.all())
        if state.leaky_margin > SMOOTH_MARGIN and clamp_ok:
            return params, batch
    raise NumericError(
        f"could not find a smooth verification point for seed {seed} "
        f"after {max_tries} tries"
    )


def relative_error(a: float, f: float) -> float:
    denom = max(abs(a), abs(f))
    if denom < REL_ERR_FLOOR:
        return 0.0
    return abs(a - f) / denom


@dataclass
class GradCheckReport:
    per_group: dict[str, float]  # parameter name -> max relative error
    checked: dict[str, int]  # parameter name -> coordinates compared

    @property
    def max_rel_err(self) -> float:
        return max(self.per_group.values()) if self.per_group else 0.0


def check_gradients(
    params,
    batch: Batch,
    samples_per_array: int | None = 6,
    h: float = DEFAULT_STEP,
    sample_seed: int = 0,
) -> GradCheckReport:
    """Compare backward() to finite differences on sampled coordinates.

    samples_per_array=None checks every coordinate of every parameter.
    Parameters are perturbed in place and restored exactly.
    """
    state = forward(params, batch, mode="train")
    grads = backward(params, state, batch.labels)
    named = named_parameters(params)
    if set(grads) != set(named):
        raise NumericError(
            f"backward covered {sorted(grads)} but the model has {sorted(named)}"
        )

    def loss_now() -> float:
        st = forward(params, batch, mode="train")
        return bce_loss(st.prob, batch.labels)

    rng = np.random.default_rng(sample_seed)
    per_group: dict[str, float] = {}
    checked: dict[str, int] = {}
    for name, arr in named.items():
        flat = arr.reshape(-1)
        if samples_per_array is None or samples_per_array >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=samples_per_array, replace=False)
        worst = 0.0
        g_flat = grads[name].reshape(-1)
        for c in coords:
            keep = flat[c]

            def quotient(step: float) -> float:
                flat[c] = keep + step
                up = loss_now()
                flat[c] = keep - step
                down = loss_now()
                flat[c] = keep
                return (up - down) / (2.0 * step)

            err = relative_error(float(g_flat[c]), quotient(h))
            for step in RETRY_STEPS:
                if err <= RETRY_THRESHOLD:
                    break
                err = min(err, relative_error(float(g_flat[c]), quotient(step)))
            worst = max(worst, err)
        per_group[name] = worst
        checked[name] = len(coords)
    return GradCheckReport(per_group, checked)


def run_case(
    confidence: str,
    attention: str,
    seed: int,
    samples_per_array: int | None = 6,
    h: float = DEFAULT_STEP,
    **config_overrides,
) -> GradCheckReport:
    config = toy_config(confidence, attention, **config_overrides)
    params, batch = build_case(config, seed)
    return check_gradients(params, batch, samples_per_array, h, sample_seed=seed)


def run_matrix(
    confidences: tuple[str, ...],
    attentions: tuple[str, ...],
    seeds: range,
    samples_per_array: int | None = 6,
    h: float = DEFAULT_STEP,
) -> dict[tuple[str, str], float]:
    """Max relative error per (confidence, attention) combination."""
    results: dict[tuple[str, str], float] = {}
    for conf in confidences:
        for att in attentions:
            worst = 0.0
            for seed in seeds:
                report = run_case(conf, att, seed, samples_per_array, h)
                worst = max(worst, report.max_rel_err)
            results[(conf, att)] = worst
    return results
