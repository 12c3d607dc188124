"""Alternating metric estimation / model optimization training loop.

Every run starts with all NC values at 0, so the high channel is empty in
epoch 1. After each epoch whose validation accuracy strictly beats the best
so far, the model's predictions become pseudo labels, NC is recomputed for
every node, and the new masks take effect from the next epoch. Training
stops after ``patience`` consecutive epochs without a new best, and the
test accuracy is read from the best-validation snapshot.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import adam_step, sigmoid
from .config import TrainConfig
from .data import Dataset
from .errors import DataError, InputError, TrainingError
from .graph import check_partition, khop_index, symmetric_normalize
from .metrics import (NcState, build_masks, group_report, mask_recall, neighborhood_confusion,
                      nh_masks, node_homophily)
from .model import (CHANNELS, ModelParams, PropagationSet, build_propagation, forward,
                    init_params, loss_and_grads, predict)

log = logging.getLogger(__name__)


@dataclass
class Splits:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.train, self.val, self.test):
            h.update(np.asarray(part, dtype=np.int64).tobytes())
            h.update(b"|")
        return h.hexdigest()[:16]


def make_splits(labels: np.ndarray, seed) -> Splits:
    """Class-stratified 60% train; the pooled remainder is shuffled and halved into val/test.

    ``seed`` is anything ``np.random.default_rng`` accepts.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, rest = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < 2:
            raise DataError(f"class {c} has {members.size} node(s); every class needs at least 2")
        members = rng.permutation(members)
        n_train = max(1, int(math.floor(0.6 * members.size)))
        train.append(members[:n_train])
        rest.append(members[n_train:])
    pool = rng.permutation(np.concatenate(rest))
    half = pool.size // 2
    return Splits(np.sort(np.concatenate(train)), np.sort(pool[:half]), np.sort(pool[half:]))


def evaluate(params: ModelParams, prop: PropagationSet, X: np.ndarray, labels: np.ndarray,
             idx) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise InputError("cannot evaluate accuracy on an empty index set")
    pred = predict(forward(params, prop, X).B)
    return float(np.mean(pred[idx] == labels[idx]))


def _group_accuracy(correct: np.ndarray, idx: np.ndarray, group: np.ndarray) -> float | None:
    sel = idx[group[idx]]
    return float(np.mean(correct[sel])) if sel.size else None


@dataclass
class RunResult:
    seed: int
    test_accuracy: float
    best_val_accuracy: float
    best_epoch: int
    epochs_run: int
    per_group_test_accuracy: dict[str, float | None]
    split_hash: str
    final_nc: list[float]
    final_high_nodes: list[int]
    alpha: dict[str, float]
    history: list[dict] = field(default_factory=list)
    nh_groups: dict | None = None
    nc_groups: dict | None = None
    invariant_violations: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> RunResult:
        return cls(**d)


def _masks_for(variant: str, index, index1, labels: np.ndarray, C: int, T: float):
    """Metric values and (low, high) masks from a labeling, per the variant's separation rule."""
    nc = neighborhood_confusion(index, labels, C)
    if variant == "nh_separation":
        return nc, nh_masks(node_homophily(index1, labels), 0.5)
    return nc, build_masks(nc, T)


def _check_invariants(params: ModelParams, prop: PropagationSet, cache) -> int:
    """Count violations of mask partition and channel locality for one forward pass."""
    bad = 0 if check_partition(prop.mask_low, prop.mask_high) else 1
    if params.variant == "no_separation":
        return bad
    for s in CHANNELS:
        off = ~prop.mask(s)
        if np.any(cache.H1[s][off] != 0.0) or np.any(cache.H2[s][off] != 0.0):
            bad += 1
    return bad


def train(config: TrainConfig, data: Dataset, splits: Splits | None = None,
          check_invariants: bool = False) -> RunResult:
    """One seeded run. The seed derives independent streams for splits, init and dropout."""
    cfg = config.validate()
    X, y, C, n = data.X, np.asarray(data.labels), data.C, data.n
    split_ss, init_ss, drop_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    splits = splits or make_splits(y, split_ss)
    for name in ("train", "val", "test"):
        if getattr(splits, name).size == 0:
            raise DataError(f"{name} split is empty")
    drop_rng = np.random.default_rng(drop_ss)

    S = symmetric_normalize(data.A, cfg.add_self_loop)
    index = khop_index(data.A, cfg.k)
    index1 = index if cfg.k == 1 else khop_index(data.A, 1)

    # ground-truth groups: NC at (k, T) for reporting, the variant's own rule for mask recall
    truth_nc = neighborhood_confusion(index, y, C)
    truth_low, truth_high = build_masks(truth_nc, cfg.T)
    _, (_, truth_sep_high) = _masks_for(cfg.variant, index, index1, y, C, cfg.T)

    params = init_params(data.f, cfg.hidden, C, np.random.default_rng(init_ss), cfg.variant,
                         cfg.dropout_low, cfg.dropout_high, cfg.dropout_raw, cfg.mask_output)
    state = NcState.initial(n, cfg.k, cfg.T)
    prop = build_propagation(S, (state.mask_low, state.mask_high), state.version)

    acc_max = 0.0
    best = (params.state(), prop, 0)
    since_best = 0
    history: list[dict] = []
    violations = 0

    for epoch in range(1, cfg.max_epochs + 1):
        if prop.version != state.version:
            prop = build_propagation(S, (state.mask_low, state.mask_high), state.version)
        loss, _, cache = loss_and_grads(params, prop, X, y, splits.train, cfg.reduction,
                                        rng=drop_rng, mask_version=state.version)
        if not math.isfinite(loss):
            raise TrainingError(f"epoch {epoch}: loss is {loss}")
        if check_invariants:
            violations += _check_invariants(params, prop, cache)
        adam_step(params.parameters(), cfg.lr, cfg.weight_decay)

        eval_cache = forward(params, prop, X)
        pred = predict(eval_cache.B)
        correct = pred == y
        acc_val = float(np.mean(correct[splits.val]))
        if check_invariants:
            violations += _check_invariants(params, prop, eval_cache)
        record = {
            "epoch": epoch,
            "loss": loss,
            "val_acc": acc_val,
            "n_high": int(state.mask_high.sum()),
            "high_recall": mask_recall(state.mask_high, truth_sep_high),
            "test_acc_low": _group_accuracy(correct, splits.test, truth_low),
            "test_acc_high": _group_accuracy(correct, splits.test, truth_high),
            "nc_updated": False,
        }
        if acc_val > acc_max:
            acc_max = acc_val
            best = (params.state(), prop, epoch)
            since_best = 0
            pseudo = pred.copy()
            if cfg.nc_label_source == "truth_train_pseudo_rest":
                pseudo[splits.train] = y[splits.train]
            nc, masks = _masks_for(cfg.variant, index, index1, pseudo, C, cfg.T)
            state.update(nc, masks)
            record["nc_updated"] = True
        else:
            since_best += 1
        history.append(record)
        if since_best >= cfg.patience:
            break

    best_state, best_prop, best_epoch = best
    params.load_state(best_state)
    final = forward(params, best_prop, X)
    correct = predict(final.B) == y
    test_idx = splits.test
    nh_true = node_homophily(index1, y)
    return RunResult(
        seed=cfg.seed,
        test_accuracy=float(np.mean(correct[test_idx])),
        best_val_accuracy=acc_max,
        best_epoch=best_epoch,
        epochs_run=len(history),
        per_group_test_accuracy={
            "low": _group_accuracy(correct, test_idx, truth_low),
            "high": _group_accuracy(correct, test_idx, truth_high),
        },
        split_hash=splits.digest(),
        final_nc=state.nc.tolist(),
        final_high_nodes=np.flatnonzero(state.mask_high).tolist(),
        alpha={s: float(sigmoid(params.channel(s).mix_logit.value)) for s in CHANNELS},
        history=history,
        nh_groups=group_report(nh_true[test_idx], correct[test_idx], truth_high[test_idx]).to_dict(),
        nc_groups=group_report(truth_nc[test_idx], correct[test_idx], truth_high[test_idx]).to_dict(),
        invariant_violations=violations,
    )


AGGREGATE_FIELDS = ("test_accuracy", "best_val_accuracy", "acc_low", "acc_high", "epochs_run")


def _field(r: RunResult, name: str):
    if name == "acc_low":
        return r.per_group_test_accuracy["low"]
    if name == "acc_high":
        return r.per_group_test_accuracy["high"]
    return getattr(r, name)


def aggregate(results: list[RunResult]) -> dict[str, dict[str, float | None]]:
    """Mean and sample standard deviation per field (std 0 for a single run)."""
    out = {}
    for name in AGGREGATE_FIELDS:
        vals = [float(v) for v in (_field(r, name) for r in results) if v is not None]
        if not vals:
            out[name] = {"mean": None, "std": None, "count": 0}
            continue
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[name] = {"mean": statistics.fmean(vals), "std": std, "count": len(vals)}
    return out


def _train_one(args) -> RunResult:
    config, data, check = args
    return train(config, data, check_invariants=check)


def run_seeds(config: TrainConfig, data: Dataset, seeds, workers: int = 1,
              check_invariants: bool = False) -> tuple[list[RunResult], dict]:
    """Train once per seed (seed fixes split, init and dropout). Results keep seed order."""
    jobs = [(config.replace(seed=int(s)), data, check_invariants) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    return results, aggregate(results)


def grid_search(template: TrainConfig, data: Dataset, grids: dict[str, list], seeds=(0,)):
    """Exhaustive search by mean validation accuracy.

    Grid points are visited in ``itertools.product`` order over the keys as
    given; ties keep the earlier point. A point that raises is logged and
    skipped. Returns the winning config and one row per grid point.
    """
    keys = list(grids)
    best_cfg, best_score = None, -1.0
    table = []
    for combo in itertools.product(*(grids[k] for k in keys)):
        point = dict(zip(keys, combo))
        try:
            cfg = template.replace(**point).validate()
            _, agg = run_seeds(cfg, data, seeds)
            score = agg["best_val_accuracy"]["mean"]
        except Exception as exc:  # noqa: BLE001 - a failing point must not abort the search
            log.warning("grid point %s failed: %s", point, exc)
            table.append({"point": point, "val_mean": None, "error": str(exc)})
            continue
        table.append({"point": point, "val_mean": score, "error": None})
        if score > best_score:
            best_cfg, best_score = cfg, score
    if best_cfg is None:
        raise TrainingError("every grid point failed")
    return best_cfg, table
