"""Dataset tensorization, splitting, normalization, training, evaluation,
and the normal-vs-normal+shear ablation study.

Tensor layout is (N, C, 5, 10) with channels stacked frame-major,
axis-minor: frame 0 (x, y, z), frame 1 (x, y, z), ... The normal-only
ablation keeps just the z channel of every frame, so C is 366 or 122.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .geometry import GRID
from .gestures import N_FRAMES, GestureRecording
from .nn import AdamState, CnnModel, softmax_cross_entropy

N_CLASSES = 13

# Full-scale split of the 3861-recording study: 3081 / 390 / 390.
SPLIT_RATIO = (3081, 390, 390)

STD_FLOOR = 1e-8


class AblationMode(enum.Enum):
    NORMAL_ONLY = "normal_only"  # z per frame -> 122 input channels
    NORMAL_AND_SHEAR = "normal_and_shear"  # x, y, z per frame -> 366


class TrainingDivergedError(RuntimeError):
    pass


def channels_for(mode: AblationMode) -> int:
    return N_FRAMES if mode is AblationMode.NORMAL_ONLY else 3 * N_FRAMES


def assemble_tensor(recordings: list[GestureRecording], mode: AblationMode,
                    dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
    """Stack each recording's frames along the channel axis via the grid map."""
    for rec in recordings:
        if rec.frames.shape[0] != N_FRAMES:
            raise ValueError(f"recording {rec.recording_id} has {rec.frames.shape[0]} frames")
    n = len(recordings)
    labels = np.array([int(r.label) for r in recordings], dtype=np.int64)
    rr, cc = np.nonzero(GRID.valid_mask)
    c = channels_for(mode)
    tensor = np.zeros((n, c, GRID.rows, GRID.cols), dtype=dtype)
    for i, rec in enumerate(recordings):
        if mode is AblationMode.NORMAL_AND_SHEAR:
            vals = rec.frames.transpose(0, 2, 1).reshape(c, 49)  # (366, 49)
        else:
            vals = rec.frames[:, :, 2]  # (122, 49)
        tensor[i][:, rr, cc] = vals
    return tensor, labels


@dataclass(frozen=True)
class DatasetSplit:
    train: list[int]
    val: list[int]
    test: list[int]


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(int)
    short = total - base.sum()
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:short]] += 1
    return base


def split_dataset(recordings: list[GestureRecording], seed: int,
                  ratio: tuple[int, int, int] = SPLIT_RATIO) -> DatasetSplit:
    """Per-user proportional split at the global train/val/test ratio.

    Each user's recordings are shuffled by the seed; per-user allocations use
    largest-remainder rounding, then a repair pass pins the global sizes.
    """
    if not recordings:
        raise ValueError("cannot split an empty dataset")
    users = sorted({r.user_id for r in recordings})
    by_user = {u: [r.recording_id for r in recordings if r.user_id == u] for u in users}
    n_total = len(recordings)
    r_tot = sum(ratio)
    targets = _largest_remainder(np.array([n_total * r / r_tot for r in ratio]), n_total)

    # per-user largest-remainder allocation
    quotas = {u: np.array([len(by_user[u]) * r / r_tot for r in ratio]) for u in users}
    alloc = {u: _largest_remainder(quotas[u], len(by_user[u])) for u in users}

    # repair pass: shift single recordings between splits until global totals match
    def totals():
        return np.sum([alloc[u] for u in users], axis=0)

    cur = totals()
    while not np.array_equal(cur, targets):
        over = int(np.argmax(cur - targets))
        under = int(np.argmin(cur - targets))
        # move from the user most over-allocated in the oversized split
        candidates = [u for u in users if alloc[u][over] > 0]
        donor = max(candidates, key=lambda u: (alloc[u][over] - quotas[u][over], -u))
        alloc[donor][over] -= 1
        alloc[donor][under] += 1
        cur = totals()

    train, val, test = [], [], []
    for u in users:
        ids = np.array(by_user[u])
        rng = np.random.default_rng(np.random.SeedSequence([seed, u, 0x53504C54]))
        rng.shuffle(ids)
        a, b, c = alloc[u]
        train += ids[:a].tolist()
        val += ids[a:a + b].tolist()
        test += ids[a + b:a + b + c].tolist()
    return DatasetSplit(train=train, val=val, test=test)


def select(recordings: list[GestureRecording], ids: list[int]) -> list[GestureRecording]:
    by_id = {r.recording_id: r for r in recordings}
    return [by_id[i] for i in ids]


@dataclass(frozen=True)
class NormalizationStats:
    """Per-force-axis mean/std pooled over recordings, frames, and taxels."""

    mode: AblationMode
    mean: np.ndarray  # (3,) or (1,)
    std: np.ndarray


def _axis_view(tensor: np.ndarray, mode: AblationMode) -> np.ndarray:
    n, c, h, w = tensor.shape
    n_axes = 3 if mode is AblationMode.NORMAL_AND_SHEAR else 1
    return tensor.reshape(n, c // n_axes, n_axes, h, w)


def fit_normalization(train_tensor: np.ndarray, mode: AblationMode) -> NormalizationStats:
    if train_tensor.size == 0:
        raise ValueError("empty training tensor")
    view = _axis_view(train_tensor, mode)
    axes = (0, 1, 3, 4)
    mean = view.mean(axis=axes)
    std = np.maximum(view.std(axis=axes), STD_FLOOR)
    return NormalizationStats(mode=mode, mean=mean, std=std)


def apply_normalization(stats: NormalizationStats, tensor: np.ndarray) -> np.ndarray:
    view = _axis_view(tensor, stats.mode)
    out = (view - stats.mean[None, None, :, None, None]) / stats.std[None, None, :, None, None]
    return out.reshape(tensor.shape)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0
    lr: float = 1e-4


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float


def _predict_batched(model: CnnModel, x: np.ndarray, batch: int = 64) -> np.ndarray:
    preds = np.empty(len(x), dtype=np.int64)
    for i in range(0, len(x), batch):
        preds[i:i + batch] = model.predict(np.asarray(x[i:i + batch], dtype=np.float64))
    return preds


def train(train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray, val_y: np.ndarray,
          config: TrainConfig) -> tuple[CnnModel, list[EpochRecord]]:
    """Mini-batch Adam; returns the best-validation-accuracy checkpoint."""
    model = CnnModel(in_channels=train_x.shape[1], seed=config.seed)
    if config.epochs == 0:
        return model, []
    adam = AdamState(lr=config.lr)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x545241494E]))
    history: list[EpochRecord] = []
    best_acc = -1.0
    best_params = model.clone_params()
    for epoch in range(config.epochs):
        perm = rng.permutation(len(train_x))
        losses = []
        for i in range(0, len(perm), config.batch_size):
            idx = perm[i:i + config.batch_size]
            xb = np.asarray(train_x[idx], dtype=np.float64)
            yb = train_y[idx]
            loss, grads = model.loss_and_grads(xb, yb, train=True, dropout_rng=rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} at epoch {epoch}, batch {i // config.batch_size}")
            adam.step(model.params, grads)
            losses.append(loss)
        val_acc = float(np.mean(_predict_batched(model, val_x) == val_y)) if len(val_y) else 0.0
        history.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_acc=val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = model.clone_params()
    model.set_params(best_params)
    return model, history


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (13, 13) true x predicted

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "ConfusionMatrix":
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts=counts)

    def rates(self) -> np.ndarray:
        row = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, row, out=np.zeros((N_CLASSES, N_CLASSES)), where=row > 0)

    @property
    def overall_accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0

    def per_class_accuracy(self) -> np.ndarray:
        row = self.counts.sum(axis=1)
        return np.divide(np.diag(self.counts), row,
                         out=np.zeros(N_CLASSES), where=row > 0)

    @property
    def macro_accuracy(self) -> float:
        row = self.counts.sum(axis=1)
        if not row.any():
            return 0.0
        return float(self.per_class_accuracy()[row > 0].mean())


@dataclass(frozen=True)
class EvaluationResult:
    confusion: ConfusionMatrix
    overall_accuracy: float
    macro_accuracy: float


def evaluate(model: CnnModel, test_x: np.ndarray, test_y: np.ndarray) -> EvaluationResult:
    if test_x.shape[1] != model.in_channels:
        raise ValueError(f"tensor has {test_x.shape[1]} channels, model expects {model.in_channels}")
    preds = _predict_batched(model, test_x)
    cm = ConfusionMatrix.from_predictions(test_y, preds)
    return EvaluationResult(confusion=cm, overall_accuracy=cm.overall_accuracy,
                            macro_accuracy=cm.macro_accuracy)


@dataclass(frozen=True)
class AblationArm:
    mode: AblationMode
    result: EvaluationResult
    history: list[EpochRecord]


@dataclass(frozen=True)
class AblationReport:
    normal_only: AblationArm
    normal_and_shear: AblationArm

    def per_class_delta(self) -> np.ndarray:
        """Shear-arm minus normal-arm per-class accuracy."""
        return (self.normal_and_shear.result.confusion.per_class_accuracy()
                - self.normal_only.result.confusion.per_class_accuracy())

    def shear_wins(self) -> int:
        return int(np.sum(self.per_class_delta() > 0))


def run_arm(recordings: list[GestureRecording], split: DatasetSplit, mode: AblationMode,
            config: TrainConfig, dtype=np.float32) -> AblationArm:
    tr = select(recordings, split.train)
    va = select(recordings, split.val)
    te = select(recordings, split.test)
    train_x, train_y = assemble_tensor(tr, mode, dtype=dtype)
    stats = fit_normalization(train_x, mode)
    train_x = apply_normalization(stats, train_x).astype(dtype)
    val_x, val_y = assemble_tensor(va, mode, dtype=dtype)
    val_x = apply_normalization(stats, val_x).astype(dtype)
    test_x, test_y = assemble_tensor(te, mode, dtype=dtype)
    test_x = apply_normalization(stats, test_x).astype(dtype)
    model, history = train(train_x, train_y, val_x, val_y, config)
    return AblationArm(mode=mode, result=evaluate(model, test_x, test_y), history=history)


def ablate(recordings: list[GestureRecording], config: TrainConfig,
           split_seed: int = 0) -> AblationReport:
    """Train and evaluate both arms on identical splits and seeds."""
    split = split_dataset(recordings, seed=split_seed)
    normal = run_arm(recordings, split, AblationMode.NORMAL_ONLY, config)
    both = run_arm(recordings, split, AblationMode.NORMAL_AND_SHEAR, config)
    return AblationReport(normal_only=normal, normal_and_shear=both)
