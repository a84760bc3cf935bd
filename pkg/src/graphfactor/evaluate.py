"""Node-classification evaluation of embeddings.

Protocol: repeated stratified random train/test splits at a given train
fraction; a one-vs-rest L2-regularized logistic regression per label;
Micro-F1 (globally pooled true/false positives and false negatives) and
Macro-F1 (unweighted mean of per-label F1). Everything is a
deterministic function of its inputs and the seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.special

from .dataio import EmbeddingMatrix, LabelSet
from .errors import NumericalError

__all__ = [
    "OvrClassifier",
    "EvalReport",
    "logistic_loss",
    "train_ovr",
    "predict",
    "micro_f1",
    "macro_f1",
    "evaluate",
    "stratified_split",
]

PREDICT_MODES = ("single-label", "multi-label-topk")


@dataclass(frozen=True)
class OvrClassifier:
    """One binary logistic model per label.

    l2_strength is the inverse regularization strength: the penalty on
    label j's weight vector is ||w_j||^2 / (2 * l2_strength). Labels
    with no positive training examples are degenerate: they always
    predict negative and are flagged in degenerate_labels.
    """

    num_labels: int
    weights: np.ndarray
    biases: np.ndarray
    l2_strength: float
    degenerate_labels: tuple = ()

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class EvalReport:
    train_fraction: float
    repeats: int
    micro_f1_mean: float
    micro_f1_std: float
    macro_f1_mean: float
    macro_f1_std: float
    per_repeat_micro: list = field(default_factory=list)
    per_repeat_macro: list = field(default_factory=list)
    degenerate_label_counts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "train_fraction": float(self.train_fraction),
            "repeats": int(self.repeats),
            "micro_f1_mean": float(self.micro_f1_mean),
            "micro_f1_std": float(self.micro_f1_std),
            "macro_f1_mean": float(self.macro_f1_mean),
            "macro_f1_std": float(self.macro_f1_std),
            "per_repeat_micro": [float(v) for v in self.per_repeat_micro],
            "per_repeat_macro": [float(v) for v in self.per_repeat_macro],
            "degenerate_label_counts": [int(v) for v in self.degenerate_label_counts],
        }


def logistic_loss(
    weights: np.ndarray,
    bias: float,
    x: np.ndarray,
    y: np.ndarray,
    l2_strength: float,
) -> float:
    """Regularized negative log-likelihood with +/-1 targets."""
    z = x @ weights + bias
    margins = y * z
    data_term = np.logaddexp(0.0, -margins).sum()
    return float(data_term + (weights @ weights) / (2.0 * l2_strength))


def _fit_binary(x: np.ndarray, y: np.ndarray, l2_strength: float):
    """Minimize the convex logistic objective; bias is unpenalized."""
    dim = x.shape[1]

    def objective(params):
        w = params[:dim]
        b = params[dim]
        margins = y * (x @ w + b)
        loss = np.logaddexp(0.0, -margins).sum() + (w @ w) / (2.0 * l2_strength)
        slack = y * scipy.special.expit(-margins)
        grad = np.empty(dim + 1)
        grad[:dim] = -(x.T @ slack) + w / l2_strength
        grad[dim] = -slack.sum()
        return loss, grad

    result = scipy.optimize.minimize(
        objective,
        np.zeros(dim + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 1000, "gtol": 1e-6, "ftol": 1e-15},
    )
    if not np.all(np.isfinite(result.x)):
        raise NumericalError("logistic regression produced non-finite weights")
    return result.x[:dim], float(result.x[dim])


def train_ovr(
    emb: EmbeddingMatrix,
    labels: LabelSet,
    train_idx,
    l2_strength: float = 1.0,
) -> OvrClassifier:
    """Fit one binary classifier per label on the given training nodes."""
    train_idx = [int(i) for i in train_idx]
    if not train_idx:
        raise ValueError("train_idx must be nonempty")
    if not l2_strength > 0:
        raise ValueError(f"l2_strength must be positive, got {l2_strength}")
    for node in train_idx:
        if node < 0 or node >= emb.num_nodes:
            raise ValueError(f"train node {node} outside embedding rows")
        if not labels.labels_of(node):
            raise ValueError(f"train node {node} has no labels")

    x = emb.rows[train_idx]
    weights = np.zeros((labels.num_labels, emb.dim))
    biases = np.zeros(labels.num_labels)
    degenerate = []
    for label in range(labels.num_labels):
        y = np.array(
            [1.0 if label in labels.labels_of(n) else -1.0 for n in train_idx]
        )
        if not np.any(y > 0):
            degenerate.append(label)
            continue
        weights[label], biases[label] = _fit_binary(x, y, l2_strength)
    return OvrClassifier(
        num_labels=labels.num_labels,
        weights=weights,
        biases=biases,
        l2_strength=l2_strength,
        degenerate_labels=tuple(degenerate),
    )


def _score_matrix(clf: OvrClassifier, rows: np.ndarray) -> np.ndarray:
    scores = rows @ clf.weights.T + clf.biases
    for label in clf.degenerate_labels:
        scores[:, label] = -np.inf
    return scores


def _top_k(scores: np.ndarray, k: int) -> frozenset:
    """k highest-scoring labels; ties broken toward the lowest label id."""
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return frozenset(int(label) for label in order[:k])


def predict(
    clf: OvrClassifier,
    emb: EmbeddingMatrix,
    node: int,
    mode: str = "single-label",
    k: int | None = None,
) -> frozenset:
    """Predicted label set for one node.

    single-label returns the argmax label; multi-label-topk returns the
    k best labels and requires k (callers pass the node's true label
    count).
    """
    if mode not in PREDICT_MODES:
        raise ValueError(f"mode must be one of {PREDICT_MODES}, got {mode!r}")
    if node < 0 or node >= emb.num_nodes:
        raise ValueError(f"node {node} outside embedding rows")
    scores = _score_matrix(clf, emb.rows[node : node + 1])[0]
    if mode == "single-label":
        return _top_k(scores, 1)
    if k is None:
        raise ValueError("multi-label-topk requires k")
    if k < 1 or k > clf.num_labels:
        raise ValueError(f"k must be in [1, {clf.num_labels}], got {k}")
    return _top_k(scores, k)


def _pooled_counts(predicted, truth) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for pred, true in zip(predicted, truth):
        pred = frozenset(pred)
        true = frozenset(true)
        tp += len(pred & true)
        fp += len(pred - true)
        fn += len(true - pred)
    return tp, fp, fn


def micro_f1(predicted, truth) -> float:
    """F1 over TP/FP/FN pooled across every label and node."""
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth must cover the same nodes")
    if not predicted:
        raise ValueError("cannot score an empty evaluation set")
    tp, fp, fn = _pooled_counts(predicted, truth)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(predicted, truth, num_labels: int | None = None) -> float:
    """Unweighted mean of per-label F1.

    Labels with no true and no predicted instances contribute 0. The
    label universe is 0..num_labels-1 when given, else the union of
    labels seen in truth or predictions.
    """
    predicted = [frozenset(p) for p in predicted]
    truth = [frozenset(t) for t in truth]
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth must cover the same nodes")
    if not predicted:
        raise ValueError("cannot score an empty evaluation set")
    if num_labels is None:
        universe = sorted(set().union(*predicted, *truth))
    else:
        universe = list(range(num_labels))
    if not universe:
        raise ValueError("no labels to score")
    total = 0.0
    for label in universe:
        tp = fp = fn = 0
        for pred, true in zip(predicted, truth):
            hit_pred = label in pred
            hit_true = label in true
            tp += hit_pred and hit_true
            fp += hit_pred and not hit_true
            fn += hit_true and not hit_pred
        denom = 2 * tp + fp + fn
        total += 2 * tp / denom if denom else 0.0
    return total / len(universe)


def stratified_split(
    labels: LabelSet, train_fraction: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """Split labeled nodes into train/test, stratified by label set.

    Nodes sharing an identical label set form one stratum; each stratum
    contributes round(fraction * size) nodes to training. Guarantees
    both sides nonempty by moving a single node if needed.
    """
    groups: dict[tuple, list[int]] = {}
    for node in labels.labeled_nodes():
        key = tuple(sorted(labels.labels_of(node)))
        groups.setdefault(key, []).append(node)
    if not groups:
        raise ValueError("no labeled nodes to split")
    train: list[int] = []
    test: list[int] = []
    starving = []
    for key in sorted(groups):
        members = groups[key]
        order = rng.permutation(len(members))
        n_train = int(np.floor(train_fraction * len(members) + 0.5))
        n_train = min(max(n_train, 0), len(members))
        if n_train == 0:
            starving.append(key)
        shuffled = [members[i] for i in order]
        train.extend(shuffled[:n_train])
        test.extend(shuffled[n_train:])
    if starving:
        warnings.warn(
            f"{len(starving)} label group(s) received no training nodes "
            f"at fraction {train_fraction}",
            stacklevel=2,
        )
    if not train:
        train.append(test.pop(0))
    if not test:
        test.append(train.pop())
    return sorted(train), sorted(test)


def evaluate(
    emb: EmbeddingMatrix,
    labels: LabelSet,
    train_fraction: float,
    repeats: int = 10,
    seed: int = 0,
    l2_strength: float = 1.0,
) -> EvalReport:
    """Repeated stratified split evaluation; deterministic in the seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    labeled = labels.labeled_nodes()
    if len(labeled) < 2:
        raise ValueError("need at least 2 labeled nodes to evaluate")
    if labeled and max(labeled) >= emb.num_nodes:
        raise ValueError(
            f"label file references node {max(labeled)} but embeddings "
            f"have {emb.num_nodes} rows"
        )
    micro_scores = []
    macro_scores = []
    degenerate_counts = []
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        train_idx, test_idx = stratified_split(labels, train_fraction, rng)
        clf = train_ovr(emb, labels, train_idx, l2_strength)
        scores = _score_matrix(clf, emb.rows[test_idx])
        predicted = []
        truth = []
        for pos, node in enumerate(test_idx):
            true = labels.labels_of(node)
            predicted.append(_top_k(scores[pos], len(true)))
            truth.append(true)
        micro_scores.append(micro_f1(predicted, truth))
        macro_scores.append(macro_f1(predicted, truth, num_labels=labels.num_labels))
        degenerate_counts.append(len(clf.degenerate_labels))
    return EvalReport(
        train_fraction=train_fraction,
        repeats=repeats,
        micro_f1_mean=float(np.mean(micro_scores)),
        micro_f1_std=float(np.std(micro_scores)),
        macro_f1_mean=float(np.mean(macro_scores)),
        macro_f1_std=float(np.std(macro_scores)),
        per_repeat_micro=[float(v) for v in micro_scores],
        per_repeat_macro=[float(v) for v in macro_scores],
        degenerate_label_counts=degenerate_counts,
    )
