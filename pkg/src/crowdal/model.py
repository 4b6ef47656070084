"""Desk-scale density regressor: geometric cell features, a two-stage latent
extractor, a linear density head, and analytic SGD-with-momentum training."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Scene
from .density import DensityMap, grid_shape

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "w2", "b2", "wh", "bh")


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class FeatureParams:
    cell_size: float = 16.0
    radii: tuple[float, ...] = (16.0, 32.0, 64.0)

    @property
    def dim(self) -> int:
        return len(self.radii) + 2  # counts per radius + normalized coords


@dataclass(frozen=True)
class FeatureGrid:
    values: np.ndarray  # (height_cells, width_cells, feature_dim)
    cell_size: float

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.values.shape[-1])


@dataclass(frozen=True)
class LatentMap:
    values: np.ndarray  # (height_cells, width_cells, latent_dim)

    @property
    def latent_dim(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.values.shape[-1])


@dataclass(frozen=True)
class RegressorState:
    params: dict[str, np.ndarray]
    velocity: dict[str, np.ndarray]
    momentum: float
    feature_params: FeatureParams
    hidden: int
    latent_dim: int


def featurize(scene: Scene, feat: FeatureParams) -> FeatureGrid:
    """Per-cell multi-radius point counts (area-normalized) plus cell coords."""
    hc, wc = grid_shape(scene.width, scene.height, feat.cell_size)
    xs = (np.arange(wc) + 0.5) * feat.cell_size
    ys = (np.arange(hc) + 0.5) * feat.cell_size
    pts = scene.point_array()
    out = np.zeros((hc, wc, feat.dim))
    if len(pts):
        # squared distances from every cell center to every point
        d2 = (xs[None, :, None] - pts[None, None, :, 0]) ** 2 + \
             (ys[:, None, None] - pts[None, None, :, 1]) ** 2
        cell_area = feat.cell_size ** 2
        for fi, r in enumerate(feat.radii):
            counts = (d2 <= r * r).sum(axis=2)
            # log-compressed per-cell density estimate at this radius
            out[:, :, fi] = np.log1p(counts * cell_area / (np.pi * r * r))
    out[:, :, -2] = xs[None, :] / (wc * feat.cell_size)
    out[:, :, -1] = ys[:, None] / (hc * feat.cell_size)
    return FeatureGrid(values=out, cell_size=feat.cell_size)


def init_state(feat: FeatureParams, hidden: int = 16, latent_dim: int = 8,
               momentum: float = 0.95, rng=None) -> RegressorState:
    rng = np.random.default_rng(rng)
    f = feat.dim
    params = {
        "w1": rng.normal(0, 1.0 / np.sqrt(f), size=(hidden, f)),
        "b1": np.full(hidden, 0.1),
        "w2": rng.normal(0, 1.0 / np.sqrt(hidden), size=(latent_dim, hidden)),
        "b2": np.full(latent_dim, 0.1),
        # non-negative head start: latent activations are >= 0, so a mixed
        # -sign head can initialize with every cell clamped (dead net)
        "wh": np.abs(rng.normal(0, 1.0 / np.sqrt(latent_dim),
                                size=latent_dim)),
        "bh": np.array(0.1),
    }
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    return RegressorState(params=params, velocity=velocity, momentum=momentum,
                          feature_params=feat, hidden=hidden,
                          latent_dim=latent_dim)


def zero_state(feat: FeatureParams, hidden: int = 16, latent_dim: int = 8,
               momentum: float = 0.95) -> RegressorState:
    """All-zero parameters (predicts zero density everywhere)."""
    st = init_state(feat, hidden, latent_dim, momentum, rng=0)
    return replace(st, params={k: np.zeros_like(v)
                               for k, v in st.params.items()})


def _forward_flat(params, X):
    """ReLU(w1 x + b1) -> ReLU(w2 h + b2) -> head, clamped at zero."""
    h_pre = X @ params["w1"].T + params["b1"]
    h = np.maximum(h_pre, 0.0)
    z_pre = h @ params["w2"].T + params["b2"]
    z = np.maximum(z_pre, 0.0)
    out_pre = z @ params["wh"] + params["bh"]
    pred = np.maximum(out_pre, 0.0)
    return {"X": X, "h_pre": h_pre, "h": h, "z_pre": z_pre, "z": z,
            "out_pre": out_pre, "pred": pred}


def forward(state: RegressorState, features: FeatureGrid):
    """Latent map and non-negative density prediction for one scene."""
    for v in state.params.values():
        if not np.all(np.isfinite(v)):
            raise ModelError("non-finite model parameter")
    hc, wc, _ = features.values.shape
    cache = _forward_flat(state.params, features.flat())
    latent = LatentMap(values=cache["z"].reshape(hc, wc, -1))
    pred = DensityMap(values=cache["pred"].reshape(hc, wc),
                      cell_size=features.cell_size)
    return latent, pred


def reg_loss(pred_maps, gt_maps) -> float:
    """Pixel-wise squared error: (1/2K) sum_k ||pred_k - gt_k||^2 over cells."""
    if len(pred_maps) != len(gt_maps) or not pred_maps:
        raise ModelError("need equal-length nonempty map lists")
    K = len(pred_maps)
    total = 0.0
    for p, g in zip(pred_maps, gt_maps):
        if p.values.shape != g.values.shape:
            raise ModelError(f"map shapes differ: {p.values.shape} vs "
                             f"{g.values.shape}")
        total += float(((p.values - g.values) ** 2).sum())
    return total / (2 * K)


def extractor_backprop(params, cache, d_z):
    """Gradients of a scalar objective w.r.t. extractor params, given the
    objective's gradient at the latent output z (flattened, (N, D))."""
    d_zpre = d_z * (cache["z_pre"] > 0)
    grads = {
        "w2": d_zpre.T @ cache["h"],
        "b2": d_zpre.sum(axis=0),
    }
    d_h = d_zpre @ params["w2"]
    d_hpre = d_h * (cache["h_pre"] > 0)
    grads["w1"] = d_hpre.T @ cache["X"]
    grads["b1"] = d_hpre.sum(axis=0)
    return grads


def reg_gradients(state: RegressorState, batch):
    """Loss and analytic parameter gradients on a batch of
    (FeatureGrid, DensityMap ground truth) pairs."""
    if not batch:
        raise ModelError("empty batch")
    K = len(batch)
    params = state.params
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    loss = 0.0
    for features, gt in batch:
        cache = _forward_flat(params, features.flat())
        target = gt.values.ravel()
        resid = cache["pred"] - target
        loss += float((resid ** 2).sum()) / (2 * K)
        # clamp passes gradient only where the pre-clamp output is positive
        d_out = (resid / K) * (cache["out_pre"] > 0)
        grads["wh"] += cache["z"].T @ d_out
        grads["bh"] += d_out.sum()
        d_z = d_out[:, None] * params["wh"][None, :]
        for k, v in extractor_backprop(params, cache, d_z).items():
            grads[k] += v
    return loss, grads


def apply_sgd(params, velocity, grads, lr, momentum):
    """One momentum-SGD update; returns new (params, velocity) dicts."""
    new_v, new_p = {}, {}
    for k in params:
        g = grads[k]
        if not np.all(np.isfinite(g)):
            raise ModelError(f"non-finite gradient for parameter {k!r}")
        new_v[k] = momentum * velocity[k] + g
        new_p[k] = params[k] - lr * new_v[k]
    return new_p, new_v


def train_step(state: RegressorState, batch, lr: float) -> RegressorState:
    """One SGD-with-momentum update on the regression loss."""
    _, grads = reg_gradients(state, batch)
    if lr == 0.0:
        return state  # a zero step is a no-op, momentum included
    new_p, new_v = apply_sgd(state.params, state.velocity, grads, lr,
                             state.momentum)
    return replace(state, params=new_p, velocity=new_v)


def save_checkpoint(state: RegressorState, path) -> None:
    np.savez(path,
             version=np.array(CHECKPOINT_VERSION),
             momentum=np.array(state.momentum),
             hidden=np.array(state.hidden),
             latent_dim=np.array(state.latent_dim),
             cell_size=np.array(state.feature_params.cell_size),
             radii=np.array(state.feature_params.radii),
             **{f"p_{k}": v for k, v in state.params.items()},
             **{f"v_{k}": v for k, v in state.velocity.items()})


def load_checkpoint(path) -> RegressorState:
    with np.load(path) as npz:
        version = int(npz["version"])
        if version != CHECKPOINT_VERSION:
            raise ModelError(f"unsupported checkpoint version {version}")
        feat = FeatureParams(cell_size=float(npz["cell_size"]),
                             radii=tuple(float(r) for r in npz["radii"]))
        params = {k: npz[f"p_{k}"].copy() for k in PARAM_NAMES}
        velocity = {k: npz[f"v_{k}"].copy() for k in PARAM_NAMES}
        return RegressorState(params=params, velocity=velocity,
                              momentum=float(npz["momentum"]),
                              feature_params=feat,
                              hidden=int(npz["hidden"]),
                              latent_dim=int(npz["latent_dim"]))
