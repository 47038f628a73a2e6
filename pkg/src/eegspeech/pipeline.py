"""Per-task orchestration of the three-level hierarchy.

For each fold of the chosen protocol: preprocess trials, extract channel
cross-covariance, fit channel rejection on the training fold, build
standardized network inputs, train the CNN and LSTM branches, fuse their
penultimate features, train the autoencoder, encode, and fit the boosted-tree
classifier; then score held-out trials.  A leakage audit object checks that
no fitting step ever sees a held-out trial index.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import covariance, gbt, metrics, networks
from . import rng as rng_mod
from .config import RunConfig
from .errors import DataError, LeakageError, TrainingError
from .nn import load_tensors, save_tensors
from .nn.checkpoint import write_bytes_atomic
from .recording import PROMPTS, Recording, bandpass_filter, subtract_channel_means

HOLDOUT = "random_holdout"
LOSO = "leave_one_subject_out"


@dataclass(frozen=True)
class Task:
    task_id: str
    positives: tuple[str, ...]

    def __post_init__(self):
        positives = tuple(self.positives)
        if not positives:
            raise ValueError("task needs a non-empty positive prompt set")
        unknown = set(positives) - set(PROMPTS)
        if unknown:
            raise ValueError(f"unknown prompts in task table: {sorted(unknown)}")
        if set(positives) == set(PROMPTS):
            raise ValueError("positive set must be a strict subset of the prompts")
        object.__setattr__(self, "positives", positives)


def task_from_config(cfg: RunConfig, task_id: str) -> Task:
    return Task(task_id=task_id, positives=tuple(cfg.task_table[task_id]))


def derive_label(prompt: str, task: Task) -> int:
    if prompt not in PROMPTS:
        raise ValueError(f"unknown prompt {prompt!r}")
    return 1 if prompt in task.positives else 0


@dataclass(frozen=True)
class SplitPlan:
    mode: str
    seed: int

    def __post_init__(self):
        if self.mode not in (HOLDOUT, LOSO):
            raise ValueError(f"unknown split mode {self.mode!r}")


@dataclass(frozen=True)
class Fold:
    name: str
    train: tuple[int, ...]
    dev: tuple[int, ...]
    test: tuple[int, ...]


def make_splits(recordings, plan: SplitPlan) -> list[Fold]:
    """Index folds over the recording list.

    Holdout: one fold; dev and test each get floor(n/10) shuffled trials and
    the remainder trains.  Leave-one-subject-out: one fold per subject, the
    subject's trials test, a shuffled 10% of the rest serve as dev.
    """
    n = len(recordings)
    if plan.mode == HOLDOUT:
        if n < 10:
            raise DataError(f"holdout split needs at least 10 trials, got {n}")
        n_part = n // 10
        order = rng_mod.stream(plan.seed, "split", "holdout").permutation(n)
        test = tuple(sorted(int(i) for i in order[:n_part]))
        dev = tuple(sorted(int(i) for i in order[n_part : 2 * n_part]))
        train = tuple(sorted(int(i) for i in order[2 * n_part :]))
        return [Fold(name="holdout", train=train, dev=dev, test=test)]
    subjects = sorted({rec.subject_id for rec in recordings})
    if len(subjects) < 2:
        raise DataError(
            f"leave-one-subject-out needs at least 2 subjects, got {len(subjects)}")
    folds = []
    for subject in subjects:
        test = [i for i, rec in enumerate(recordings) if rec.subject_id == subject]
        rest = [i for i, rec in enumerate(recordings) if rec.subject_id != subject]
        n_dev = len(rest) // 10
        order = rng_mod.stream(plan.seed, "split", "loso", subject).permutation(len(rest))
        dev = tuple(sorted(rest[int(j)] for j in order[:n_dev]))
        train = tuple(sorted(rest[int(j)] for j in order[n_dev:]))
        folds.append(Fold(name=f"subject-{subject}", train=train, dev=dev,
                          test=tuple(test)))
    return folds


@dataclass
class LeakageAudit:
    """Records fitting calls and rejects any that touch held-out indices."""

    held_out: frozenset
    log: list = field(default_factory=list)

    def check(self, stage: str, indices) -> None:
        indices = tuple(indices)
        touched = self.held_out.intersection(indices)
        if touched:
            raise LeakageError(
                f"{stage} fit on held-out trials {sorted(touched)[:5]}")
        self.log.append((stage, len(indices)))


def preprocess(rec: Recording, cfg: RunConfig) -> Recording:
    return subtract_channel_means(bandpass_filter(rec, cfg.preprocessing))


def fit_channel_rejection(covs, train_indices, threshold: float,
                          audit: LeakageAudit | None = None) -> tuple[int, ...]:
    """Channels kept in at least half of the training trials' rejections.

    Falls back to the two most frequently kept channels when the vote leaves
    fewer than two.
    """
    if audit is not None:
        audit.check("channel-rejection", train_indices)
    if not train_indices:
        raise DataError("channel rejection needs at least one training trial")
    n_channels = covs[train_indices[0]].k
    votes = np.zeros(n_channels, dtype=np.int64)
    for idx in train_indices:
        cov = covs[idx]
        if cov.k != n_channels:
            raise DataError("training trials disagree on channel count")
        kept = covariance.reject_channels(cov, threshold).kept_channels
        votes[list(kept)] += 1
    half = len(train_indices) / 2.0
    kept = tuple(int(c) for c in range(n_channels) if votes[c] >= half)
    if len(kept) < 2:
        order = sorted(range(n_channels), key=lambda c: (-votes[c], c))
        kept = tuple(sorted(order[:2]))
    return kept


@dataclass
class ModelBundle:
    task_id: str
    fold_name: str
    mode: str
    config_fingerprint: str
    kept_channels: tuple[int, ...]
    input_size: int
    sequence_axis: str
    cnn: networks.CnnModel
    lstm: networks.LstmModel
    dae: networks.DaeModel
    ensemble: gbt.Ensemble

    def predict(self, network_input: np.ndarray) -> tuple[int, float]:
        fused = networks.extract_fused(self.cnn, self.lstm, network_input)
        latent = networks.encode(self.dae, fused)
        prob = float(self.ensemble.predict_proba(latent[None, :])[0])
        return (1 if prob >= 0.5 else 0), prob


def save_bundle(bundle: ModelBundle, root: str | os.PathLike) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "task": bundle.task_id,
        "fold": bundle.fold_name,
        "mode": bundle.mode,
        "config_fingerprint": bundle.config_fingerprint,
        "kept_channels": list(bundle.kept_channels),
        "input_size": bundle.input_size,
        "sequence_axis": bundle.sequence_axis,
        "fused_dim": bundle.dae.input_dim,
    }
    write_bytes_atomic(root / "meta.json",
                       (json.dumps(meta, indent=2) + "\n").encode("utf-8"))
    save_tensors(root / "cnn.tensors", bundle.cnn.net.state_dict())
    save_tensors(root / "lstm.tensors", bundle.lstm.net.state_dict())
    dae_state = dict(bundle.dae.net.state_dict())
    dae_state["standardize.mean"] = bundle.dae.mean
    dae_state["standardize.std"] = bundle.dae.std
    save_tensors(root / "dae.tensors", dae_state)
    write_bytes_atomic(root / "gbt.bin", gbt.ensemble_to_bytes(bundle.ensemble))


def load_bundle(root: str | os.PathLike) -> ModelBundle:
    root = Path(root)
    try:
        meta = json.loads((root / "meta.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read bundle metadata under {root}: {exc}") from exc
    size = int(meta["input_size"])
    cnn = networks.build_cnn_model(size)
    cnn.net.load_state_dict(load_tensors(root / "cnn.tensors"))
    lstm = networks.build_lstm_model(size, sequence_axis=meta["sequence_axis"])
    lstm.net.load_state_dict(load_tensors(root / "lstm.tensors"))
    dae_state = dict(load_tensors(root / "dae.tensors"))
    dae = networks.build_dae_model(int(meta["fused_dim"]))
    dae.mean = dae_state.pop("standardize.mean")
    dae.std = dae_state.pop("standardize.std")
    dae.net.load_state_dict(dae_state)
    ensemble = gbt.ensemble_from_bytes((root / "gbt.bin").read_bytes())
    return ModelBundle(task_id=meta["task"], fold_name=meta["fold"], mode=meta["mode"],
                       config_fingerprint=meta["config_fingerprint"],
                       kept_channels=tuple(int(c) for c in meta["kept_channels"]),
                       input_size=size, sequence_axis=meta["sequence_axis"],
                       cnn=cnn, lstm=lstm, dae=dae, ensemble=ensemble)


@dataclass
class TrialPrediction:
    index: int
    trial_id: str
    subject_id: str
    prompt: str
    fold: str
    truth: int
    prediction: int
    probability: float


@dataclass
class FoldReport:
    name: str
    skipped: bool = False
    reason: str = ""
    n_train: int = 0
    n_dev: int = 0
    n_test: int = 0
    kept_channels: tuple[int, ...] = ()
    accuracy: float = 0.0
    kappa: float = 0.0
    kappa_degenerate: bool = False
    dev_accuracy: float = 0.0
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))


@dataclass
class EvalReport:
    task_id: str
    mode: str
    seed: int
    config_fingerprint: str
    folds: list[FoldReport]
    confusion: np.ndarray
    accuracy: float
    kappa: float
    kappa_degenerate: bool
    predictions: list[TrialPrediction]

    @property
    def skipped_folds(self) -> list[str]:
        return [f.name for f in self.folds if f.skipped]


@dataclass
class _FoldOutcome:
    report: FoldReport
    bundle: ModelBundle | None
    predictions: list[TrialPrediction]


def _network_inputs(covs, kept: tuple[int, ...], input_size: int) -> list[np.ndarray]:
    inputs = []
    for cov in covs:
        sub = covariance.submatrix(cov, kept)
        inputs.append(covariance.to_network_input(sub, input_size))
    return inputs


def _run_fold(recordings, covs, labels, task: Task, fold: Fold, cfg: RunConfig,
              mode: str, fingerprint: str, trial_ids) -> _FoldOutcome:
    report = FoldReport(name=fold.name, n_train=len(fold.train),
                        n_dev=len(fold.dev), n_test=len(fold.test))
    train_labels = labels[list(fold.train)]
    class_counts = np.bincount(train_labels, minlength=2)
    if class_counts.min() < 2:
        report.skipped = True
        report.reason = ("single-class training labels" if class_counts.min() == 0
                         else "fewer than 2 training examples per class")
        return _FoldOutcome(report=report, bundle=None, predictions=[])

    audit = LeakageAudit(held_out=frozenset(fold.dev) | frozenset(fold.test))
    kept = fit_channel_rejection(covs, fold.train, cfg.covariance.threshold, audit)
    report.kept_channels = kept
    inputs = _network_inputs(covs, kept, cfg.covariance.input_size)

    fold_seed = rng_mod.child_seed(cfg.seed, "task", task.task_id, "fold", fold.name)
    train_inputs = [inputs[i] for i in fold.train]

    audit.check("cnn-train", fold.train)
    cnn = networks.train_cnn(
        train_inputs, train_labels,
        networks.TrainSettings(epochs=cfg.cnn.epochs, batch_size=cfg.cnn.batch_size,
                               learning_rate=cfg.cnn.learning_rate, seed=fold_seed))
    audit.check("lstm-train", fold.train)
    lstm = networks.train_lstm(
        train_inputs, train_labels,
        networks.TrainSettings(epochs=cfg.lstm.epochs, batch_size=cfg.lstm.batch_size,
                               learning_rate=cfg.lstm.learning_rate, seed=fold_seed,
                               sequence_axis=cfg.lstm.sequence_axis))

    fused = {i: networks.extract_fused(cnn, lstm, inputs[i])
             for i in (*fold.train, *fold.dev, *fold.test)}
    audit.check("dae-train", fold.train)
    dae = networks.train_dae(
        [fused[i] for i in fold.train],
        networks.TrainSettings(epochs=cfg.dae.epochs, batch_size=cfg.dae.batch_size,
                               learning_rate=cfg.dae.learning_rate, seed=fold_seed))
    latents = {i: networks.encode(dae, fused[i]) for i in fused}

    audit.check("gbt-fit", fold.train)
    ensemble = gbt.fit(np.stack([latents[i] for i in fold.train]), train_labels,
                       gbt.GbtConfig(n_estimators=cfg.gbt.n_estimators,
                                     max_depth=cfg.gbt.max_depth,
                                     learning_rate=cfg.gbt.learning_rate,
                                     reg_lambda=cfg.gbt.reg_lambda, gamma=cfg.gbt.gamma,
                                     subsample=cfg.gbt.subsample,
                                     colsample=cfg.gbt.colsample,
                                     min_child_weight=cfg.gbt.min_child_weight,
                                     seed=fold_seed))

    bundle = ModelBundle(task_id=task.task_id, fold_name=fold.name, mode=mode,
                         config_fingerprint=fingerprint, kept_channels=kept,
                         input_size=cfg.covariance.input_size,
                         sequence_axis=cfg.lstm.sequence_axis,
                         cnn=cnn, lstm=lstm, dae=dae, ensemble=ensemble)

    if fold.dev:
        dev_probs = ensemble.predict_proba(np.stack([latents[i] for i in fold.dev]))
        dev_pred = (dev_probs >= 0.5).astype(np.int64)
        report.dev_accuracy = float((dev_pred == labels[list(fold.dev)]).mean())

    test_probs = ensemble.predict_proba(np.stack([latents[i] for i in fold.test]))
    test_pred = (test_probs >= 0.5).astype(np.int64)
    test_truth = labels[list(fold.test)]
    report.confusion = metrics.confusion_matrix(test_truth, test_pred)
    report.accuracy = metrics.accuracy(report.confusion)
    kappa = metrics.cohen_kappa(report.confusion)
    report.kappa = kappa.value
    report.kappa_degenerate = kappa.degenerate

    predictions = [
        TrialPrediction(index=i, trial_id=trial_ids[i], subject_id=recordings[i].subject_id,
                        prompt=recordings[i].prompt, fold=fold.name,
                        truth=int(test_truth[j]), prediction=int(test_pred[j]),
                        probability=float(test_probs[j]))
        for j, i in enumerate(fold.test)
    ]
    return _FoldOutcome(report=report, bundle=bundle, predictions=predictions)


def run_task(recordings, task: Task, plan: SplitPlan, cfg: RunConfig,
             trial_ids=None, threads: int = 1):
    """Train and score every fold of one task.

    Returns (bundles by fold name, EvalReport).  Folds whose training labels
    lack two examples of each class are skipped and flagged; if every fold is
    skipped the task cannot be scored and a TrainingError is raised.
    """
    recordings = list(recordings)
    if trial_ids is None:
        trial_ids = [f"t{i:04d}" for i in range(len(recordings))]
    covs = [covariance.ccv_matrix(preprocess(rec, cfg), lag=cfg.covariance.lag)
            for rec in recordings]
    labels = np.array([derive_label(rec.prompt, task) for rec in recordings],
                      dtype=np.int64)
    folds = make_splits(recordings, plan)

    def work(fold):
        return _run_fold(recordings, covs, labels, task, fold, cfg, plan.mode,
                         cfg.fingerprint(), trial_ids)

    if threads > 1 and len(folds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, folds))
    else:
        outcomes = [work(fold) for fold in folds]

    report = _assemble_report(outcomes, task, plan, cfg)
    bundles = {o.report.name: o.bundle for o in outcomes if o.bundle is not None}
    return bundles, report


def _assemble_report(outcomes, task: Task, plan: SplitPlan, cfg: RunConfig) -> EvalReport:
    scored = [o for o in outcomes if not o.report.skipped]
    if not scored:
        raise TrainingError(
            f"task {task.task_id!r}: every fold was skipped "
            f"({outcomes[0].report.reason})")
    pooled = np.zeros((2, 2), dtype=np.int64)
    for o in scored:
        pooled += o.report.confusion
    kappa = metrics.cohen_kappa(pooled)
    predictions = [p for o in outcomes for p in o.predictions]
    return EvalReport(task_id=task.task_id, mode=plan.mode, seed=cfg.seed,
                      config_fingerprint=cfg.fingerprint(),
                      folds=[o.report for o in outcomes], confusion=pooled,
                      accuracy=metrics.accuracy(pooled), kappa=kappa.value,
                      kappa_degenerate=kappa.degenerate, predictions=predictions)


def evaluate_bundles(recordings, task: Task, plan: SplitPlan, cfg: RunConfig,
                     bundles: dict, trial_ids=None) -> EvalReport:
    """Re-score held-out trials with previously trained fold bundles.

    The split is recomputed from the plan seed, so this hits the same test
    trials the bundles were trained against.  Folds without a bundle are
    flagged as skipped.
    """
    recordings = list(recordings)
    if trial_ids is None:
        trial_ids = [f"t{i:04d}" for i in range(len(recordings))]
    covs = [covariance.ccv_matrix(preprocess(rec, cfg), lag=cfg.covariance.lag)
            for rec in recordings]
    labels = np.array([derive_label(rec.prompt, task) for rec in recordings],
                      dtype=np.int64)
    outcomes = []
    for fold in make_splits(recordings, plan):
        report = FoldReport(name=fold.name, n_train=len(fold.train),
                            n_dev=len(fold.dev), n_test=len(fold.test))
        bundle = bundles.get(fold.name)
        if bundle is None:
            report.skipped = True
            report.reason = "no bundle for fold"
            outcomes.append(_FoldOutcome(report=report, bundle=None, predictions=[]))
            continue
        report.kept_channels = bundle.kept_channels
        preds = []
        probs = []
        for i in fold.test:
            sub = covariance.submatrix(covs[i], bundle.kept_channels)
            pred, prob = bundle.predict(covariance.to_network_input(sub, bundle.input_size))
            preds.append(pred)
            probs.append(prob)
        truth = labels[list(fold.test)]
        report.confusion = metrics.confusion_matrix(truth, preds)
        report.accuracy = metrics.accuracy(report.confusion)
        kappa = metrics.cohen_kappa(report.confusion)
        report.kappa = kappa.value
        report.kappa_degenerate = kappa.degenerate
        predictions = [
            TrialPrediction(index=i, trial_id=trial_ids[i],
                            subject_id=recordings[i].subject_id,
                            prompt=recordings[i].prompt, fold=fold.name,
                            truth=int(truth[j]), prediction=int(preds[j]),
                            probability=float(probs[j]))
            for j, i in enumerate(fold.test)
        ]
        outcomes.append(_FoldOutcome(report=report, bundle=bundle,
                                     predictions=predictions))
    return _assemble_report(outcomes, task, plan, cfg)


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready dict with a fixed key order."""
    return {
        "task": report.task_id,
        "mode": report.mode,
        "seed": report.seed,
        "config_fingerprint": report.config_fingerprint,
        "accuracy": report.accuracy,
        "kappa": report.kappa,
        "kappa_degenerate": report.kappa_degenerate,
        "confusion": report.confusion.tolist(),
        "skipped_folds": report.skipped_folds,
        "folds": [
            {
                "name": f.name,
                "skipped": f.skipped,
                "reason": f.reason,
                "n_train": f.n_train,
                "n_dev": f.n_dev,
                "n_test": f.n_test,
                "kept_channels": list(f.kept_channels),
                "accuracy": f.accuracy,
                "kappa": f.kappa,
                "kappa_degenerate": f.kappa_degenerate,
                "dev_accuracy": f.dev_accuracy,
                "confusion": np.asarray(f.confusion).tolist(),
            }
            for f in report.folds
        ],
    }


def write_report_json(report: EvalReport, path: str | os.PathLike) -> None:
    blob = json.dumps(report_to_dict(report), indent=2) + "\n"
    write_bytes_atomic(path, blob.encode("utf-8"))


def write_predictions_csv(report: EvalReport, path: str | os.PathLike) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial_id", "subject_id", "prompt", "task", "fold",
                     "truth", "prediction", "probability"])
    for p in sorted(report.predictions, key=lambda p: p.index):
        writer.writerow([p.trial_id, p.subject_id, p.prompt, report.task_id,
                         p.fold, p.truth, p.prediction, repr(p.probability)])
    write_bytes_atomic(path, buf.getvalue().encode("utf-8"))
