"""TF-IDF features, class-weighted logistic regression, and PU learning.

Training is deterministic: full-batch gradient descent with backtracking line
search from a zero initialization, so identical seeds and inputs give
bitwise-identical parameters. numpy/scipy provide the array and sparse
primitives; the loss, gradient, optimizer, and the positive-unlabeled scheme
are implemented here.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

DEFAULT_C = 0.1151

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class TrainingError(RuntimeError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens split on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Term -> (dense index, document frequency) plus the corpus size."""

    terms: dict[str, tuple[int, int]]
    total_docs: int

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, weight) pairs; indices strictly increasing."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]


def fit_vocabulary(
    corpus: Iterable[str], min_df: int = 1, max_features: int | None = None
) -> Vocabulary:
    """Build a vocabulary from document frequencies.

    Terms with df < min_df are dropped; with ``max_features`` set, the most
    frequent terms are kept, ties broken lexicographically. Retained terms
    get dense indices in lexicographic order.
    """
    df: Counter[str] = Counter()
    total_docs = 0
    for doc in corpus:
        total_docs += 1
        df.update(set(tokenize(doc)))
    if total_docs == 0:
        raise TrainingError("cannot fit a vocabulary on an empty corpus")

    kept = [(term, count) for term, count in df.items() if count >= min_df]
    if max_features is not None:
        kept.sort(key=lambda item: (-item[1], item[0]))
        kept = kept[:max_features]
    if not kept:
        raise TrainingError(
            f"vocabulary is empty (min_df={min_df} over {total_docs} documents)")
    kept.sort(key=lambda item: item[0])
    return Vocabulary(
        terms={term: (index, count) for index, (term, count) in enumerate(kept)},
        total_docs=total_docs,
    )


def featurize(sentence: str, vocab: Vocabulary) -> SparseVector:
    """L2-normalized smooth TF-IDF vector; out-of-vocabulary tokens ignored.

    weight(t) = tf(t) * (ln((1 + N) / (1 + df(t))) + 1), then the vector is
    scaled to unit L2 norm. A sentence with no in-vocabulary term yields the
    zero vector.
    """
    counts = Counter(tokenize(sentence))
    pairs = []
    for term, tf in counts.items():
        entry = vocab.terms.get(term)
        if entry is None:
            continue
        index, df = entry
        idf = math.log((1 + vocab.total_docs) / (1 + df)) + 1.0
        pairs.append((index, tf * idf))
    if not pairs:
        return SparseVector(indices=(), weights=())
    pairs.sort()
    norm = math.sqrt(sum(w * w for _, w in pairs))
    return SparseVector(
        indices=tuple(i for i, _ in pairs),
        weights=tuple(w / norm for _, w in pairs),
    )


def compute_class_weights(labels: Sequence[int]) -> tuple[float, float]:
    """Inverse-frequency weights w_c = N / (2 * N_c); (1, 1) when balanced."""
    n = len(labels)
    n_pos = sum(1 for y in labels if y)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("both classes must be present to compute class weights")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def stack_features(
    features: Sequence[SparseVector] | np.ndarray | sp.spmatrix,
    n_features: int | None = None,
) -> sp.csr_matrix:
    """Assemble a CSR matrix from SparseVectors or an array."""
    if sp.issparse(features):
        return features.tocsr()
    if isinstance(features, np.ndarray):
        return sp.csr_matrix(np.atleast_2d(features).astype(float))
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    width = 0
    for vec in features:
        indices.extend(vec.indices)
        data.extend(vec.weights)
        indptr.append(len(indices))
        if vec.indices:
            width = max(width, vec.indices[-1] + 1)
    if n_features is None:
        n_features = width
    elif width > n_features:
        raise ValueError(f"feature index {width - 1} exceeds n_features={n_features}")
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int32)),
        shape=(len(indptr) - 1, n_features),
    )


@dataclass(eq=False)
class LinearModel:
    """Weighted logistic regression: sigmoid(weights . x + bias)."""

    weights: np.ndarray
    bias: float
    class_weights: tuple[float, float]
    C: float
    n_features: int

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)


@dataclass(eq=False)
class PUModel:
    """Two-stage positive-unlabeled classifier."""

    labeling_model: LinearModel
    c_estimate: float
    final_model: LinearModel


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    X: sp.csr_matrix,
    y: np.ndarray,
    sample_weight: np.ndarray,
    C: float,
) -> tuple[float, np.ndarray, float]:
    """Class/sample-weighted negative log-likelihood with L2 penalty
    ||w||^2 / (2C), and its analytic gradient."""
    z = X @ weights + bias
    # -log sigma(z) = logaddexp(0, -z); numerically stable on both tails.
    nll = y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    loss = float(np.dot(sample_weight, nll) + np.dot(weights, weights) / (2.0 * C))
    residual = sample_weight * (expit(z) - y)
    grad_w = X.T @ residual + weights / C
    grad_b = float(residual.sum())
    return loss, np.asarray(grad_w).ravel(), grad_b


def train_logreg(
    features: Sequence[SparseVector] | np.ndarray | sp.spmatrix,
    labels: Sequence[int],
    class_weights: tuple[float, float],
    C: float = DEFAULT_C,
    seed: int = 0,
    max_epochs: int = 500,
    tol: float = 1e-6,
    sample_weights: Sequence[float] | None = None,
    n_features: int | None = None,
) -> LinearModel:
    """Fit weighted logistic regression by deterministic gradient descent.

    Minimizes the class-weighted negative log-likelihood with an L2 penalty
    of ||w||^2 / (2C), using full-batch descent with Armijo backtracking from
    a zero start. Stops when the largest gradient component drops below
    ``tol`` or after ``max_epochs``. The ``seed`` is accepted for interface
    uniformity; the procedure has no random choices.
    """
    del seed
    if C <= 0:
        raise ValueError("C must be positive")
    X = stack_features(features, n_features=n_features)
    y = np.asarray(labels, dtype=float)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    w_pos, w_neg = class_weights
    weight = np.where(y == 1.0, w_pos, w_neg)
    if sample_weights is not None:
        extra = np.asarray(sample_weights, dtype=float)
        if extra.shape[0] != y.shape[0]:
            raise ValueError("sample_weights length does not match labels")
        weight = weight * extra

    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    loss, grad_w, grad_b = loss_and_gradient(w, b, X, y, weight, C)
    for epoch in range(max_epochs):
        if math.isnan(loss):
            raise TrainingError(f"loss became NaN at epoch {epoch}")
        if max(float(np.max(np.abs(grad_w), initial=0.0)), abs(grad_b)) < tol:
            break
        grad_sq = float(np.dot(grad_w, grad_w) + grad_b * grad_b)
        t = step
        while True:
            w_next = w - t * grad_w
            b_next = b - t * grad_b
            loss_next, grad_w_next, grad_b_next = loss_and_gradient(w_next, b_next, X, y, weight, C)
            if loss_next <= loss - 1e-4 * t * grad_sq or t < 1e-12:
                break
            t *= 0.5
        w, b = w_next, b_next
        loss, grad_w, grad_b = loss_next, grad_w_next, grad_b_next
        step = t * 2.0

    if math.isnan(loss):
        raise TrainingError(f"loss became NaN at epoch {max_epochs}")
    return LinearModel(weights=w, bias=float(b), class_weights=(float(w_pos), float(w_neg)),
                       C=float(C), n_features=X.shape[1])


def predict_proba(
    model: LinearModel,
    features: Sequence[SparseVector] | np.ndarray | sp.spmatrix,
) -> np.ndarray:
    """Positive-class probabilities, one per feature row."""
    X = stack_features(features, n_features=model.n_features)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return expit(X @ model.weights + model.bias)


def predict(
    model: LinearModel,
    features: Sequence[SparseVector] | np.ndarray | sp.spmatrix,
    threshold: float = 0.5,
) -> np.ndarray:
    """Binary labels: positive iff probability >= threshold."""
    return (predict_proba(model, features) >= threshold).astype(int)


def train_pu(
    features: Sequence[SparseVector] | np.ndarray | sp.spmatrix,
    observed_labels: Sequence[int],
    seed: int,
    C: float = DEFAULT_C,
    max_epochs: int = 500,
    tol: float = 1e-6,
    holdout_fraction: float = 0.2,
    n_features: int | None = None,
) -> PUModel:
    """Two-stage positive-unlabeled training.

    observed_labels: 1 = labeled positive, 0 = unlabeled. Stage one fits a
    labeled-vs-unlabeled model on everything except a seeded hold-out slice
    of the labeled positives; the mean predicted probability over that slice
    estimates how often a true positive is labeled. Stage two weighs each
    unlabeled sample by q(x) = ((1-c)/c) * g(x)/(1-g(x)), clipped to [0, 1],
    and trains the final model with positives at weight one and every
    unlabeled sample duplicated: once as positive with weight q(x), once as
    negative with weight 1-q(x).
    """
    X = stack_features(features, n_features=n_features)
    s = np.asarray(observed_labels, dtype=int)
    if s.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {s.shape[0]} labels")
    pos_idx = np.flatnonzero(s == 1)
    unl_idx = np.flatnonzero(s == 0)
    if pos_idx.size == 0:
        raise TrainingError("no labeled positives to hold out")
    if unl_idx.size == 0:
        raise TrainingError("no unlabeled samples")

    rng = np.random.default_rng(seed)
    n_hold = max(1, int(round(holdout_fraction * pos_idx.size)))
    holdout = np.sort(rng.choice(pos_idx, size=n_hold, replace=False))
    train_mask = np.ones(s.shape[0], dtype=bool)
    train_mask[holdout] = False
    s_train = s[train_mask]
    if s_train.sum() == 0:
        raise TrainingError("no labeled positives left outside the hold-out slice")

    # Stage one stays unweighted: the hold-out estimate needs calibrated
    # probabilities.
    labeling = train_logreg(X[train_mask], s_train, class_weights=(1.0, 1.0),
                            C=C, seed=seed, max_epochs=max_epochs, tol=tol)
    c_estimate = float(predict_proba(labeling, X[holdout]).mean())
    if c_estimate <= 0.0:
        raise TrainingError("labeling-frequency estimate is zero")
    c_estimate = min(c_estimate, 1.0)

    g = predict_proba(labeling, X[unl_idx])
    g = np.clip(g, 1e-12, 1.0 - 1e-12)
    q = np.clip((1.0 - c_estimate) / c_estimate * g / (1.0 - g), 0.0, 1.0)

    X_final = sp.vstack([X[pos_idx], X[unl_idx], X[unl_idx]]).tocsr()
    y_final = np.concatenate([
        np.ones(pos_idx.size), np.ones(unl_idx.size), np.zeros(unl_idx.size)])
    weights_final = np.concatenate([np.ones(pos_idx.size), q, 1.0 - q])
    final = train_logreg(X_final, y_final, class_weights=(1.0, 1.0), C=C, seed=seed,
                         max_epochs=max_epochs, tol=tol, sample_weights=weights_final)
    return PUModel(labeling_model=labeling, c_estimate=c_estimate, final_model=final)


def _linear_to_record(model: LinearModel) -> dict:
    return {
        "weights": [float(x) for x in model.weights],
        "bias": model.bias,
        "class_weights": [model.class_weights[0], model.class_weights[1]],
        "C": model.C,
        "n_features": model.n_features,
    }


def _linear_from_record(record: dict) -> LinearModel:
    return LinearModel(
        weights=np.asarray(record["weights"], dtype=float),
        bias=float(record["bias"]),
        class_weights=(float(record["class_weights"][0]), float(record["class_weights"][1])),
        C=float(record["C"]),
        n_features=int(record["n_features"]),
    )


def save_model(
    path: str | Path,
    model: LinearModel | PUModel,
    vocab: Vocabulary | None = None,
) -> None:
    """Write a versioned model container; float round-trips are exact."""
    payload: dict = {"format_version": 1}
    if isinstance(model, PUModel):
        payload["kind"] = "pu"
        payload["c_estimate"] = model.c_estimate
        payload["labeling_model"] = _linear_to_record(model.labeling_model)
        payload["final_model"] = _linear_to_record(model.final_model)
    else:
        payload["kind"] = "linear"
        payload["model"] = _linear_to_record(model)
    if vocab is not None:
        payload["vocabulary"] = {
            "total_docs": vocab.total_docs,
            "terms": {term: [index, df] for term, (index, df) in vocab.terms.items()},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> tuple[LinearModel | PUModel, Vocabulary | None]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != 1:
        raise ValueError(f"{path}: unsupported model format version {version!r}")
    vocab = None
    if "vocabulary" in payload:
        raw = payload["vocabulary"]
        vocab = Vocabulary(
            terms={term: (int(pair[0]), int(pair[1])) for term, pair in raw["terms"].items()},
            total_docs=int(raw["total_docs"]),
        )
    if payload["kind"] == "pu":
        model: LinearModel | PUModel = PUModel(
            labeling_model=_linear_from_record(payload["labeling_model"]),
            c_estimate=float(payload["c_estimate"]),
            final_model=_linear_from_record(payload["final_model"]),
        )
    elif payload["kind"] == "linear":
        model = _linear_from_record(payload["model"])
    else:
        raise ValueError(f"{path}: unknown model kind {payload['kind']!r}")
    return model, vocab
