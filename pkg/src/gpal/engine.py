"""Active-learning loop: train, evaluate, score, select, query, repeat.

One run owns its state exclusively.  All randomness derives from the config
seed, so a run with the simulated oracle replays bit-identically.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import acquisition, softmax, svgp
from .data import NO_LABEL, FeatureDataset, l2_normalize
from .errors import OracleError, ValidationError
from .rng import DEFAULT_EVAL_SEED, STREAM_EVAL, STREAM_INIT, derive_rng, derive_seed

MODEL_SVGP = "svgp"
MODEL_SOFTMAX = "softmax"
INITIAL_RANDOM = "random"
INITIAL_PRELABELED = "prelabeled"


@dataclass
class ALConfig:
    """Everything a run needs besides the dataset and the oracle."""

    initial_size: int = 40
    batch_size: int = 40
    max_cycles: int = 10
    stop_accuracy: float | None = None
    strategy: str = acquisition.STRATEGY_UNCERTAINTY
    model_kind: str = MODEL_SVGP
    train: svgp.TrainConfig = field(default_factory=svgp.TrainConfig)
    eval_every_cycle: bool = True
    seed: int = 0
    warm_start: bool = False
    num_inducing: int = svgp.DEFAULT_INDUCING
    mc_samples_predict: int = svgp.MC_PREDICT
    mc_samples_train: int = svgp.MC_TRAIN
    initial_policy: str = INITIAL_RANDOM
    l2_normalize: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.max_cycles < 0:
            raise ValidationError("max_cycles must be >= 0")
        if self.stop_accuracy is not None and not 0.0 < self.stop_accuracy <= 1.0:
            raise ValidationError("stop_accuracy must be in (0, 1]")
        if self.strategy not in acquisition.STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.model_kind not in (MODEL_SVGP, MODEL_SOFTMAX):
            raise ValidationError(f"unknown model_kind {self.model_kind!r}")
        if self.model_kind == MODEL_SOFTMAX and self.strategy == acquisition.STRATEGY_UNCERTAINTY:
            raise ValidationError(
                "the softmax baseline exposes no uncertainty; use strategy=random"
            )
        if self.initial_policy not in (INITIAL_RANDOM, INITIAL_PRELABELED):
            raise ValidationError(f"unknown initial_policy {self.initial_policy!r}")
        if self.initial_policy == INITIAL_RANDOM and self.initial_size < 1:
            raise ValidationError("initial_size must be >= 1")
        if self.stop_accuracy is not None and not self.eval_every_cycle:
            raise ValidationError("stop_accuracy needs eval_every_cycle")

    def to_dict(self) -> dict:
        return {
            "initial_size": self.initial_size,
            "batch_size": self.batch_size,
            "max_cycles": self.max_cycles,
            "stop_accuracy": self.stop_accuracy,
            "strategy": self.strategy,
            "model_kind": self.model_kind,
            "train": {
                "epochs": self.train.epochs,
                "learning_rate": self.train.learning_rate,
                "minibatch_size": self.train.minibatch_size,
                "seed": self.train.seed,
                "train_hyperparams": self.train.train_hyperparams,
                "train_inducing": self.train.train_inducing,
            },
            "eval_every_cycle": self.eval_every_cycle,
            "seed": self.seed,
            "warm_start": self.warm_start,
            "num_inducing": self.num_inducing,
            "mc_samples_predict": self.mc_samples_predict,
            "mc_samples_train": self.mc_samples_train,
            "initial_policy": self.initial_policy,
            "l2_normalize": self.l2_normalize,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ALConfig":
        # keys starting with "_" are comments and ignored
        raw = {k: v for k, v in raw.items() if not k.startswith("_")}
        train_raw = {k: v for k, v in raw.pop("train", {}).items() if not k.startswith("_")}
        known = {f for f in cls.__dataclass_fields__ if f != "train"}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(train=svgp.TrainConfig(**train_raw), **raw)


@dataclass
class OracleQueryItem:
    sample_id: str
    score: float
    image_uri: str | None = None


class Oracle(Protocol):
    """Label source queried once per selection batch."""

    def request_labels(self, items: Sequence[OracleQueryItem]) -> dict[str, int]:
        """Return a class id for exactly the requested sample ids."""
        ...


class SimulatedOracle:
    """Reads held-out ground truth; used by every benchmark run."""

    def __init__(self, ds: FeatureDataset):
        self._labels = {sid: int(lab) for sid, lab in zip(ds.sample_ids, ds.labels)}

    def request_labels(self, items: Sequence[OracleQueryItem]) -> dict[str, int]:
        out = {}
        for item in items:
            label = self._labels.get(item.sample_id, NO_LABEL)
            if label == NO_LABEL:
                raise OracleError(f"no ground-truth label for {item.sample_id!r}")
            out[item.sample_id] = label
        return out


@dataclass
class CycleRecord:
    cycle: int
    labeled_count: int
    test_accuracy: float
    balanced_accuracy: float
    wall_time: float  # not serialized into reports


@dataclass
class BatchRecord:
    cycle: int
    indices: list[int]
    class_counts: list[int]


@dataclass
class ALState:
    """Mutable run state: the labeled/pool partition plus history."""

    labeled: list[int]
    pool: list[int]
    labels: np.ndarray  # grows as the oracle answers; NO_LABEL where unknown
    cycle: int = 0
    records: list[CycleRecord] = field(default_factory=list)
    batches: list[BatchRecord] = field(default_factory=list)

    def check_partition(self, train_pool: np.ndarray) -> None:
        labeled = set(self.labeled)
        pool = set(self.pool)
        if labeled & pool:
            raise ValidationError("labeled and pool sets overlap")
        if labeled | pool != set(int(i) for i in train_pool):
            raise ValidationError("labeled and pool sets do not partition the train pool")


@dataclass
class RunReport:
    config: dict
    seed: int
    class_names: list[str]
    curve: list[dict]
    batches: list[dict]
    pool_composition: dict
    totals: dict
    incomplete: bool = False

    def accuracies(self) -> list[float]:
        return [point["test_accuracy"] for point in self.curve]

    def labeled_counts(self) -> list[int]:
        return [point["labeled_count"] for point in self.curve]


def evaluate(model, ds: FeatureDataset, split: str = "test", mc_samples: int | None = None) -> float:
    """Fraction of argmax-correct test predictions (ties to the lowest class)."""
    acc, _ = evaluate_with_balance(model, ds, split=split, mc_samples=mc_samples)
    return acc


def evaluate_with_balance(
    model, ds: FeatureDataset, split: str = "test", mc_samples: int | None = None
) -> tuple[float, float]:
    """Overall accuracy plus mean per-class recall on the given split."""
    idx = ds.split_indices(split)
    if idx.size == 0:
        raise ValidationError(f"empty {split} split")
    y = ds.labels[idx]
    if np.any(y == NO_LABEL):
        raise ValidationError(f"{split} split has unlabeled samples")
    probs = predict_proba_any(model, ds.features64(idx), mc_samples=mc_samples)
    pred = probs.argmax(axis=1)
    acc = float(np.mean(pred == y))
    recalls = [float(np.mean(pred[y == k] == k)) for k in range(ds.n_classes) if np.any(y == k)]
    return acc, float(np.mean(recalls))


def predict_proba_any(model, x: np.ndarray, mc_samples: int | None = None) -> np.ndarray:
    """Probability means from either model kind (fixed internal MC seed)."""
    if isinstance(model, svgp.SvgpModel):
        post = svgp.predict_proba(
            model, x, mc_samples=mc_samples or svgp.MC_PREDICT, seed=DEFAULT_EVAL_SEED
        )
        return post.prob_mean
    return softmax.predict_softmax(model, x)


def train_model(ds, labeled, cfg: ALConfig, cycle: int = 0, previous=None):
    labeled = np.asarray(sorted(labeled), dtype=np.int64)
    train_cfg = svgp.TrainConfig(
        epochs=cfg.train.epochs,
        learning_rate=cfg.train.learning_rate,
        minibatch_size=cfg.train.minibatch_size,
        seed=derive_seed(cfg.seed, STREAM_INIT, cycle, cfg.train.seed),
        train_hyperparams=cfg.train.train_hyperparams,
        train_inducing=cfg.train.train_inducing,
    )
    if cfg.model_kind == MODEL_SOFTMAX:
        model, _ = softmax.train_softmax(ds, labeled, train_cfg)
        return model
    if cfg.warm_start and previous is not None:
        base = previous
    else:
        base = svgp.init_model(ds, labeled, num_inducing=cfg.num_inducing, seed=train_cfg.seed)
        base.mc_samples = cfg.mc_samples_train
    model, _ = svgp.train(base, ds, labeled, train_cfg)
    return model


def run_al(
    ds: FeatureDataset,
    cfg: ALConfig,
    oracle: Oracle,
    initial_indices: Sequence[int] | None = None,
    observer: Callable[[str, object], None] | None = None,
) -> RunReport:
    """Full active-learning experiment; returns the report.

    ``observer`` receives ("training"|"cycle_evaluated"|"batch_labeled"|
    "finished", payload) events so a serving layer can mirror progress
    without a second engine.
    """
    if cfg.l2_normalize:
        ds = l2_normalize(ds)
    train_pool = ds.train_pool_indices()
    if train_pool.size == 0:
        raise ValidationError("dataset has no train_pool samples")
    test_idx = ds.test_indices()
    if test_idx.size == 0 or np.any(ds.labels[test_idx] == NO_LABEL):
        raise ValidationError("dataset needs a labeled test split")
    notify = observer or (lambda event, payload: None)

    state = ALState(
        labeled=[],
        pool=[int(i) for i in train_pool],
        labels=ds.labels.copy(),
    )
    # Engine-held labels: answers arrive through the oracle, never by
    # mutating the dataset.
    state.labels.flags.writeable = True

    if initial_indices is not None:
        initial = [int(i) for i in initial_indices]
    elif cfg.initial_policy == INITIAL_PRELABELED:
        initial = [int(i) for i in train_pool if ds.has_label(int(i))]
        if not initial:
            raise ValidationError("prelabeled initial policy needs sidecar labels")
    else:
        size = min(cfg.initial_size, train_pool.size)
        rng = derive_rng(cfg.seed, STREAM_INIT)
        initial = sorted(int(i) for i in rng.choice(train_pool, size=size, replace=False))
    if len(initial) < ds.n_classes:
        warnings.warn(
            f"initial set of {len(initial)} is smaller than the {ds.n_classes} classes"
        )
    bad = set(initial) - set(state.pool)
    if bad:
        raise ValidationError(f"initial indices outside the train pool: {sorted(bad)[:5]}")

    incomplete = False
    stop_reason = "max_cycles"
    try:
        _acquire(state, ds, initial, oracle, scores=None)
        state.labeled = sorted(initial)
        state.pool = sorted(set(state.pool) - set(initial))

        ds_known = _with_labels(ds, state.labels)
        model = None
        while True:
            notify("training", state.cycle)
            started = time.perf_counter()
            model = train_model(ds_known, state.labeled, cfg, state.cycle, previous=model)
            at_end = state.cycle >= cfg.max_cycles or not state.pool
            accuracy = None
            if cfg.eval_every_cycle or at_end:
                accuracy, balanced = evaluate_with_balance(
                    model, ds_known, mc_samples=cfg.mc_samples_predict
                )
                state.records.append(
                    CycleRecord(
                        cycle=state.cycle,
                        labeled_count=len(state.labeled),
                        test_accuracy=accuracy,
                        balanced_accuracy=balanced,
                        wall_time=time.perf_counter() - started,
                    )
                )
                notify("cycle_evaluated", state.records[-1])
            state.check_partition(train_pool)

            if cfg.stop_accuracy is not None and accuracy is not None and accuracy >= cfg.stop_accuracy:
                stop_reason = "stop_accuracy"
                break
            if state.cycle >= cfg.max_cycles:
                stop_reason = "max_cycles"
                break
            if not state.pool:
                stop_reason = "pool_exhausted"
                break

            selection, scores = _select(model, ds_known, state, cfg)
            if selection.exhausted or not selection.indices:
                stop_reason = "pool_exhausted"
                break
            _acquire(state, ds, selection.indices, oracle, scores=scores)
            state.batches.append(
                BatchRecord(
                    cycle=state.cycle + 1,
                    indices=list(selection.indices),
                    class_counts=_counts(state.labels, selection.indices, ds.n_classes),
                )
            )
            notify("batch_labeled", _batch_row(ds, state.batches[-1]))
            state.labeled = sorted(state.labeled + list(selection.indices))
            state.pool = sorted(set(state.pool) - set(selection.indices))
            state.cycle += 1
            ds_known = _with_labels(ds, state.labels)
    except OracleError:
        incomplete = True
        stop_reason = "oracle_failure"

    report = _build_report(ds, cfg, state, stop_reason, incomplete)
    notify("finished", report)
    return report


def _select(model, ds_known, state: ALState, cfg: ALConfig):
    pool = np.asarray(state.pool, dtype=np.int64)
    if cfg.strategy == acquisition.STRATEGY_RANDOM:
        return acquisition.select_random(pool, cfg.batch_size, cfg.seed, cycle=state.cycle), None
    posterior = svgp.predict_proba(
        model,
        ds_known.features64(pool),
        mc_samples=cfg.mc_samples_predict,
        seed=derive_seed(cfg.seed, STREAM_EVAL, state.cycle),
    )
    scores = acquisition.score_uncertainty(posterior, pool)
    selection = acquisition.select_top(scores, cfg.batch_size, cycle=state.cycle)
    return selection, {s.index: s.score for s in scores}


def _acquire(state: ALState, ds: FeatureDataset, indices, oracle: Oracle, scores) -> None:
    """Ask the oracle for any missing labels among ``indices``."""
    missing = [i for i in indices if state.labels[i] == NO_LABEL]
    if not missing:
        return
    items = [
        OracleQueryItem(
            sample_id=ds.sample_ids[i],
            score=0.0 if scores is None else scores.get(i, 0.0),
            image_uri=ds.image_uris[i],
        )
        for i in missing
    ]
    answers = oracle.request_labels(items)
    requested = {item.sample_id for item in items}
    if set(answers) != requested:
        raise ValidationError(
            f"oracle answered {sorted(set(answers) ^ requested)[:5]} out of step with the request"
        )
    for i in missing:
        label = int(answers[ds.sample_ids[i]])
        if not 0 <= label < ds.n_classes:
            raise ValidationError(f"oracle label {label} out of range")
        state.labels[i] = label


def _with_labels(ds: FeatureDataset, labels: np.ndarray) -> FeatureDataset:
    if np.array_equal(labels, ds.labels):
        return ds
    return FeatureDataset(
        features=ds.features,
        labels=labels.copy(),
        sample_ids=list(ds.sample_ids),
        class_names=list(ds.class_names),
        splits=list(ds.splits),
        image_uris=list(ds.image_uris),
    )


def _counts(labels: np.ndarray, indices, n_classes: int) -> list[int]:
    return np.bincount(labels[list(indices)], minlength=n_classes).astype(int).tolist()


def _batch_row(ds: FeatureDataset, batch: BatchRecord) -> dict:
    total = sum(batch.class_counts)
    return {
        "cycle": batch.cycle,
        "counts": {name: c for name, c in zip(ds.class_names, batch.class_counts)},
        "fractions": {
            name: (c / total if total else 0.0)
            for name, c in zip(ds.class_names, batch.class_counts)
        },
    }


def _build_report(ds, cfg: ALConfig, state: ALState, stop_reason: str, incomplete: bool) -> RunReport:
    curve = [
        {
            "cycle": r.cycle,
            "labeled_count": r.labeled_count,
            "test_accuracy": r.test_accuracy,
            "balanced_accuracy": r.balanced_accuracy,
        }
        for r in state.records
    ]
    batches = [_batch_row(ds, b) for b in state.batches]
    pool_comp = _pool_composition(ds, state)
    totals = {
        "cycles": state.cycle,
        "pool_size": int(ds.train_pool_indices().size),
        "final_labeled": len(state.labeled),
        "final_accuracy": state.records[-1].test_accuracy if state.records else None,
        "stop_reason": stop_reason,
    }
    return RunReport(
        config=cfg.to_dict(),
        seed=cfg.seed,
        class_names=list(ds.class_names),
        curve=curve,
        batches=batches,
        pool_composition=pool_comp,
        totals=totals,
        incomplete=incomplete,
    )


def _pool_composition(ds: FeatureDataset, state: ALState) -> dict:
    """Class mix of the whole train pool, from the labels known so far.

    Simulated runs know every label; human-oracle runs cover what has been
    labeled to date (the basis size is reported alongside).
    """
    train_pool = ds.train_pool_indices()
    known = [int(i) for i in train_pool if state.labels[i] != NO_LABEL]
    if not known:
        return {"counts": {}, "fractions": {}, "basis": 0}
    counts = _counts(state.labels, known, ds.n_classes)
    total = sum(counts)
    return {
        "counts": {name: c for name, c in zip(ds.class_names, counts)},
        "fractions": {name: c / total for name, c in zip(ds.class_names, counts)},
        "basis": total,
    }


def batch_composition(report: RunReport) -> list[dict]:
    """Per-cycle class fractions of newly labeled batches, after a baseline row.

    Row 0 is the whole-pool mix; rows 1..k are the acquisition batches.
    """
    if not report.batches:
        raise ValidationError("report has no acquisition batches")
    rows = [{"cycle": 0, "fractions": dict(report.pool_composition["fractions"])}]
    for batch in report.batches:
        rows.append({"cycle": batch["cycle"], "fractions": dict(batch["fractions"])})
    return rows


def aggregate_runs(reports: Sequence[RunReport]) -> list[dict]:
    """Pointwise mean and cross-seed sample standard deviation of the curves."""
    if not reports:
        raise ValidationError("no reports to aggregate")
    ref = {k: v for k, v in reports[0].config.items() if k != "seed"}
    length = len(reports[0].curve)
    for rep in reports[1:]:
        other = {k: v for k, v in rep.config.items() if k != "seed"}
        if other != ref:
            raise ValidationError("reports differ in more than the seed")
        if len(rep.curve) != length:
            raise ValidationError(
                f"curve lengths differ: {length} vs {len(rep.curve)}"
            )
    out = []
    for i in range(length):
        counts = {rep.curve[i]["labeled_count"] for rep in reports}
        if len(counts) != 1:
            raise ValidationError(f"labeled counts diverge at checkpoint {i}")
        accs = np.array([rep.curve[i]["test_accuracy"] for rep in reports])
        std = float(np.std(accs, ddof=1)) if len(reports) > 1 else 0.0
        out.append(
            {
                "cycle": reports[0].curve[i]["cycle"],
                "labeled_count": counts.pop(),
                "mean_accuracy": float(accs.mean()),
                "std_accuracy": std,
                "n_runs": len(reports),
            }
        )
    return out
