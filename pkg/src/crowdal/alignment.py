"""Distribution alignment: labeled/unlabeled classifier with gradient
reversal, latent mixing of representation/label pairs, and the combined
regression + classification training step."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (LatentMap, ModelError, RegressorState, _forward_flat,
                    apply_sgd, extractor_backprop)

LABELED, UNLABELED = 0.0, 1.0


class AlignmentError(Exception):
    pass


@dataclass(frozen=True)
class ClassifierState:
    """Per-channel linear map on the latent followed by global average
    pooling to a single logit."""
    params: dict[str, np.ndarray]  # w: (latent_dim,), b: scalar
    velocity: dict[str, np.ndarray]
    momentum: float


def init_classifier(latent_dim: int, momentum: float = 0.95,
                    rng=None) -> ClassifierState:
    rng = np.random.default_rng(rng)
    params = {"w": rng.normal(0, 1.0 / np.sqrt(latent_dim), size=latent_dim),
              "b": np.array(0.0)}
    return ClassifierState(params=params,
                           velocity={k: np.zeros_like(v)
                                     for k, v in params.items()},
                           momentum=momentum)


def sample_lambda(alpha: float, rng) -> float:
    """Draw lambda' = max(lambda, 1 - lambda), lambda ~ Beta(alpha, alpha)."""
    if alpha <= 0:
        raise AlignmentError("alpha must be positive")
    lam = float(rng.beta(alpha, alpha))
    return max(lam, 1.0 - lam)


@dataclass(frozen=True)
class MixSample:
    z_mixed: LatentMap
    y_mixed: float
    lambda_prime: float


def _crop_common(a: np.ndarray, b: np.ndarray):
    """Top-left crop both latent grids to the smaller common height/width."""
    h = min(a.shape[0], b.shape[0])
    w = min(a.shape[1], b.shape[1])
    if a.shape[2] != b.shape[2]:
        raise AlignmentError(f"latent depth mismatch: {a.shape[2]} vs "
                             f"{b.shape[2]}")
    return a[:h, :w], b[:h, :w]


def mixup(z1: LatentMap, y1: float, z2: LatentMap, y2: float,
          lambda_prime: float) -> MixSample:
    """Convex combination of two latent maps and their distribution labels."""
    if not (0.5 <= lambda_prime <= 1.0):
        raise AlignmentError("lambda_prime must lie in [0.5, 1]")
    for y in (y1, y2):
        if not (0.0 <= y <= 1.0):
            raise AlignmentError("distribution labels must lie in [0, 1]")
    a, b = _crop_common(z1.values, z2.values)
    z = lambda_prime * a + (1.0 - lambda_prime) * b
    y = lambda_prime * y1 + (1.0 - lambda_prime) * y2
    return MixSample(z_mixed=LatentMap(values=z), y_mixed=float(y),
                     lambda_prime=float(lambda_prime))


def classifier_logit(clf: ClassifierState, z_flat: np.ndarray) -> float:
    """1x1-conv analogue plus global average pooling."""
    return float(np.mean(z_flat @ clf.params["w"]) + clf.params["b"])


def _bce_with_logits(logit: float, y: float) -> float:
    # stable form: max(x,0) - x*y + log(1 + exp(-|x|))
    return max(logit, 0.0) - logit * y + float(np.log1p(np.exp(-abs(logit))))


def dc_loss(clf: ClassifierState, samples) -> float:
    """Mean binary cross entropy (logits form) over (LatentMap, label) pairs."""
    if not samples:
        raise AlignmentError("empty sample list")
    total = 0.0
    for z, y in samples:
        if not (0.0 <= y <= 1.0):
            raise AlignmentError(f"distribution label {y} outside [0, 1]")
        total += _bce_with_logits(classifier_logit(clf, z.flat()), y)
    return total / len(samples)


def draw_pairs(n_labeled: int, n_unlabeled: int, n_pairs: int, alpha: float,
               rng, use_mixup: bool = True):
    """Pre-draw pair endpoints and mixing weights for one training step.

    Each endpoint's pool is chosen uniformly (labeled/unlabeled with
    probability 1/2 when both are nonempty), then a uniform member index.
    Returns (side, index, side, index, lambda') tuples; side 0 = labeled.
    """
    pairs = []
    for _ in range(n_pairs):
        ends = []
        for _ in range(2):
            if n_unlabeled == 0:
                side = 0
            else:
                side = int(rng.integers(2))
            n = n_labeled if side == 0 else n_unlabeled
            ends.append((side, int(rng.integers(n))))
        lam = sample_lambda(alpha, rng) if use_mixup else 1.0
        pairs.append((ends[0][0], ends[0][1], ends[1][0], ends[1][1], lam))
    return pairs


def _dc_batch_terms(z_caches, pairs, use_mixup):
    """Expand pairs into (z_flat, label, contribution list) BCE terms.

    Each contribution is (endpoint_key, weight): the coefficient of that
    endpoint's latent inside the term's z, used to route gradients back.
    """
    terms = []
    for s1, i1, s2, i2, lam in pairs:
        z1 = z_caches[(s1, i1)]["z"]
        z2 = z_caches[(s2, i2)]["z"]
        y1 = LABELED if s1 == 0 else UNLABELED
        y2 = LABELED if s2 == 0 else UNLABELED
        terms.append((z1, y1, [((s1, i1), 1.0)]))
        terms.append((z2, y2, [((s2, i2), 1.0)]))
        if use_mixup:
            n = min(len(z1), len(z2))
            zmix = lam * z1[:n] + (1.0 - lam) * z2[:n]
            ymix = lam * y1 + (1.0 - lam) * y2
            terms.append((zmix, ymix, [((s1, i1), lam), ((s2, i2), 1.0 - lam)]))
    return terms


def aligned_gradients(reg_state: RegressorState, clf_state: ClassifierState,
                      labeled_batch, unlabeled_batch, pairs, beta: float,
                      use_mixup: bool = True):
    """Losses and gradients for the combined objective on fixed pairs.

    Returns (loss_reg, loss_dc, reg_grads, clf_grads, dc_extractor_grads)
    where reg_grads already includes the reversed (negated, beta-scaled)
    classification contribution for extractor parameters, and
    dc_extractor_grads is that contribution before reversal.
    """
    if not labeled_batch:
        raise AlignmentError("labeled batch must be nonempty")
    params = reg_state.params
    K = len(labeled_batch)

    # forward passes, cached per endpoint
    z_caches = {}
    for i, (features, _) in enumerate(labeled_batch):
        z_caches[(0, i)] = _forward_flat(params, features.flat())
    for j, features in enumerate(unlabeled_batch):
        z_caches[(1, j)] = _forward_flat(params, features.flat())

    # regression loss and gradients on the labeled batch
    loss_reg = 0.0
    reg_grads = {k: np.zeros_like(v) for k, v in params.items()}
    d_z_latent = {key: np.zeros_like(c["z"]) for key, c in z_caches.items()}
    for i, (features, gt) in enumerate(labeled_batch):
        cache = z_caches[(0, i)]
        resid = cache["pred"] - gt.values.ravel()
        loss_reg += float((resid ** 2).sum()) / (2 * K)
        d_out = (resid / K) * (cache["out_pre"] > 0)
        reg_grads["wh"] += cache["z"].T @ d_out
        reg_grads["bh"] += d_out.sum()
        d_z_latent[(0, i)] += d_out[:, None] * params["wh"][None, :]

    # classification loss over individuals and their mixed representations
    terms = _dc_batch_terms(z_caches, pairs, use_mixup)
    w = clf_state.params["w"]
    loss_dc = 0.0
    clf_grads = {"w": np.zeros_like(w), "b": np.zeros_like(clf_state.params["b"])}
    dc_z = {key: np.zeros_like(c["z"]) for key, c in z_caches.items()}
    n_terms = len(terms)
    for z_flat, y, contribs in terms:
        n_cells = len(z_flat)
        logit = float(np.mean(z_flat @ w) + clf_state.params["b"])
        loss_dc += _bce_with_logits(logit, y)
        d_logit = (1.0 / (1.0 + np.exp(-logit)) - y) / n_terms
        clf_grads["w"] += d_logit * z_flat.mean(axis=0)
        clf_grads["b"] += d_logit
        d_z = (d_logit / n_cells) * w[None, :]
        for key, weight in contribs:
            dc_z[key][:n_cells] += weight * d_z
    loss_dc /= n_terms
    clf_grads = {k: beta * v for k, v in clf_grads.items()}

    # extractor gradients: regression path plus the dc path through the
    # latent; the reversal layer negates the latter
    dc_extractor = {k: np.zeros_like(params[k])
                    for k in ("w1", "b1", "w2", "b2")}
    for key, cache in z_caches.items():
        for k, g in extractor_backprop(params, cache, dc_z[key]).items():
            dc_extractor[k] += g
        for k, g in extractor_backprop(params, cache, d_z_latent[key]).items():
            reg_grads[k] += g
    for k in dc_extractor:
        reg_grads[k] -= beta * dc_extractor[k]

    return loss_reg, loss_dc, reg_grads, clf_grads, dc_extractor


def aligned_train_step(reg_state: RegressorState, clf_state: ClassifierState,
                       labeled_batch, unlabeled_batch, beta: float, lr: float,
                       rng, alpha: float = 0.5, use_mixup: bool = True):
    """One combined update: regression on labeled data plus reversed-gradient
    distribution classification over both pools (and their mixes)."""
    if beta == 0.0 or not unlabeled_batch:
        pairs = []
    else:
        pairs = draw_pairs(len(labeled_batch), len(unlabeled_batch),
                           n_pairs=len(labeled_batch), alpha=alpha, rng=rng,
                           use_mixup=use_mixup)
    if not pairs:
        from .model import train_step
        return train_step(reg_state, labeled_batch, lr), clf_state
    _, _, reg_grads, clf_grads, _ = aligned_gradients(
        reg_state, clf_state, labeled_batch, unlabeled_batch, pairs, beta,
        use_mixup)
    new_p, new_v = apply_sgd(reg_state.params, reg_state.velocity, reg_grads,
                             lr, reg_state.momentum)
    new_reg = replace(reg_state, params=new_p, velocity=new_v)
    cp, cv = apply_sgd(clf_state.params, clf_state.velocity, clf_grads, lr,
                       clf_state.momentum)
    new_clf = replace(clf_state, params=cp, velocity=cv)
    return new_reg, new_clf
