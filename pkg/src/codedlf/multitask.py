"""Multi-task and auxiliary-loss weighting strategies, plus the training loop.

Two tasks are trained from a coded light field: the central view and the
disparity map, each with a Huber main loss.  Auxiliary losses per task:
SSIM and spectral-cosine for the central view, edge-aware smoothness and
normal similarity for disparity.  Strategies:

* naive / st-cv / st-disp: static task weights (0.5, 0.5), (1, 0), (0, 1).
* mtu: per-task trainable log-variances s_i; total = sum_i exp(-s_i)/2 * L_i
  + s_i/2 (Kendall et al. 2018); the s_i take the same optimizer step as
  the network weights.
* gradnorm: task weights chased toward equalized, rate-adjusted shared
  gradient norms (Chen et al. 2018), renormalized to sum to the task count.
* gradsim: per-batch auxiliary weights from the truncated cosine between
  main and auxiliary shared-trunk gradients (Du et al. 2018).
* normgradsim: auxiliary gates alpha_j (truncated cosine target) and scale
  equalizers beta_j (target |G_main| / |G_aux_j|), each nudged one clipped
  step per batch toward its target, inside the normalized combination

      L_task = (L_main + sum_j alpha_j beta_j L_aux_j) / (1 + sum_j alpha_j)

  whose gradient stays on the scale of the main loss when the betas sit at
  their targets.
* mtu+al: MTU task weighting of the normgradsim per-task losses.

All similarity and norm computations use the shared-trunk gradient by
default (configurable to all parameters).  The alpha, beta and task
weights are treated as constants in the network update itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import coding, losses_metrics, scenegen

STRATEGIES = (
    "st-cv",
    "st-disp",
    "naive",
    "mtu",
    "gradnorm",
    "gradsim",
    "normgradsim",
    "mtu+al",
)

TASKS = ("cv", "disp")

# Auxiliary losses per task, in a fixed order.
AUX_LOSSES = {
    "cv": (
        ("ssim", losses_metrics.ssim_loss),
        ("cos", losses_metrics.spectral_cos_loss),
    ),
    "disp": (
        ("tv", losses_metrics.tv_smoothness),
        ("normal", losses_metrics.normal_similarity),
    ),
}


@dataclass
class TaskWeights:
    """Static or adapted per-task weights, always positive."""

    values: np.ndarray  # shape (n_tasks,)
    mode: str = "static"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0):
            raise ValueError("task weights must be non-negative")


@dataclass
class AuxWeights:
    """Per-task auxiliary gates alpha in [0, 1] and scales beta > 0."""

    alpha: dict[str, np.ndarray]
    beta: dict[str, np.ndarray]

    @classmethod
    def initial(cls, n_aux: dict[str, int]) -> "AuxWeights":
        return cls(
            alpha={t: np.zeros(n) for t, n in n_aux.items()},
            beta={t: np.ones(n) for t, n in n_aux.items()},
        )


@dataclass
class MtuState:
    """Trainable per-task log-variances, initialized at zero."""

    s: np.ndarray

    @classmethod
    def initial(cls, n_tasks: int = 2) -> "MtuState":
        return cls(s=np.zeros(n_tasks))


@dataclass
class GradNormState:
    """Adaptive task weights, initial losses, and the asymmetry exponent."""

    weights: np.ndarray
    gamma: float = 1.5
    lr: float = 0.1
    initial_losses: np.ndarray | None = None

    @classmethod
    def initial(cls, n_tasks: int = 2, gamma: float = 1.5, lr: float = 0.1):
        return cls(weights=np.ones(n_tasks), gamma=gamma, lr=lr)


def combine_naive(losses: np.ndarray, w: TaskWeights) -> float:
    """Weighted sum of per-task losses (regularization lives in the optimizer)."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != w.values.shape:
        raise ValueError(f"{losses.shape} losses vs {w.values.shape} weights")
    return float(w.values @ losses)


def mtu_loss(losses: np.ndarray, state: MtuState) -> tuple[float, np.ndarray]:
    """Uncertainty-weighted total and its gradient with respect to s.

    total = sum_i exp(-s_i)/2 * L_i + s_i/2;  d total / d s_i is zero
    exactly when exp(s_i) = L_i.
    """
    losses = np.asarray(losses, dtype=np.float64)
    total = float(np.sum(0.5 * np.exp(-state.s) * losses + 0.5 * state.s))
    ds = 0.5 * (1.0 - np.exp(-state.s) * losses)
    return total, ds


def mtu_effective_weights(state: MtuState) -> np.ndarray:
    return 0.5 * np.exp(-state.s)


def gradnorm_update(
    grad_norms: np.ndarray, losses: np.ndarray, state: GradNormState
) -> TaskWeights:
    """One subgradient step on the GradNorm balancing objective.

    Targets per task: mean_i(w_i |G_i|) * r_i^gamma with r_i the relative
    inverse training rate (L_i / L_i(0), normalized); targets are treated
    as constants.  Weights are clamped positive and renormalized to sum to
    the number of tasks.
    """
    grad_norms = np.asarray(grad_norms, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if np.all(grad_norms == 0.0):
        warnings.warn("all task gradient norms are zero; skipping gradnorm update")
        return TaskWeights(values=state.weights.copy(), mode="gradnorm")
    if state.initial_losses is None:
        state.initial_losses = np.maximum(losses.copy(), 1e-12)
    ratios = losses / state.initial_losses
    r = ratios / ratios.mean()
    weighted = state.weights * grad_norms
    target = weighted.mean() * np.power(r, state.gamma)
    grad_w = np.sign(weighted - target) * grad_norms
    w = state.weights - state.lr * grad_w
    w = np.maximum(w, 1e-4)
    w *= len(w) / w.sum()
    state.weights = w
    return TaskWeights(values=w.copy(), mode="gradnorm")


def _truncated_cosine(g_main: np.ndarray, g_aux: np.ndarray) -> float:
    nm = float(np.linalg.norm(g_main))
    na = float(np.linalg.norm(g_aux))
    if nm == 0.0 or na == 0.0:
        return 0.0
    return max(0.0, float(g_main @ g_aux) / (nm * na))


def gradsim_weights(g_main: np.ndarray, g_aux: list[np.ndarray]) -> np.ndarray:
    """Truncated cosine similarity of each auxiliary gradient to the main one."""
    return np.array([_truncated_cosine(g_main, g) for g in g_aux])


def normgradsim_update(
    g_main: np.ndarray,
    g_aux: list[np.ndarray],
    alpha: np.ndarray,
    beta: np.ndarray,
    step: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """Move alpha and beta one clipped step toward their per-batch targets.

    Targets: alpha_j* = truncated cosine(g_main, g_aux_j) and
    beta_j* = |g_main| / |g_aux_j|.  The move is the signed-subgradient step
    on |alpha_j - alpha_j*| and |beta_j |g_aux_j|| - |g_main||, clipped to
    the distance to the target so the fixed points are reached exactly.
    Degenerate (zero-norm) gradients leave the pair unchanged.  Alphas are
    clamped to [0, 1], betas kept strictly positive.
    """
    alpha = np.asarray(alpha, dtype=np.float64).copy()
    beta = np.asarray(beta, dtype=np.float64).copy()
    nm = float(np.linalg.norm(g_main))
    for j, g in enumerate(g_aux):
        na = float(np.linalg.norm(g))
        if nm == 0.0 or na == 0.0:
            warnings.warn(f"degenerate gradient norm for auxiliary loss {j}; skipped")
            continue
        a_target = _truncated_cosine(g_main, g)
        b_target = nm / na
        alpha[j] += np.clip(a_target - alpha[j], -step, step)
        beta[j] += np.clip(b_target - beta[j], -step, step)
    alpha = np.clip(alpha, 0.0, 1.0)
    beta = np.maximum(beta, 1e-8)
    return alpha, beta


def normgradsim_loss(
    l_main: float, l_aux: np.ndarray, alpha: np.ndarray, beta: np.ndarray
) -> float:
    """Normalized auxiliary combination for one task.

    (L_main + sum_j alpha_j beta_j L_aux_j) / (1 + sum_j alpha_j); the
    weights are constants with respect to the network parameters.
    """
    l_aux = np.asarray(l_aux, dtype=np.float64)
    return float((l_main + np.sum(alpha * beta * l_aux)) / (1.0 + np.sum(alpha)))


def normgradsim_coefficients(
    alpha: np.ndarray, beta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Coefficients (c_main, c_aux_j) so the task loss is their linear mix."""
    denom = 1.0 + float(np.sum(alpha))
    return 1.0 / denom, (alpha * beta) / denom


def combined_loss(
    main_losses: np.ndarray,
    aux_losses: dict[str, np.ndarray],
    tw: TaskWeights,
    aw: AuxWeights,
) -> float:
    """Overall loss: task-weighted sum of per-task normalized combinations."""
    main_losses = np.asarray(main_losses, dtype=np.float64)
    if main_losses.shape != tw.values.shape:
        raise ValueError("per-task losses and weights disagree")
    total = 0.0
    for i, task in enumerate(TASKS[: len(main_losses)]):
        la = aux_losses.get(task, np.zeros(0))
        total += tw.values[i] * normgradsim_loss(
            float(main_losses[i]), la, aw.alpha.get(task, np.zeros(0)),
            aw.beta.get(task, np.zeros(0)),
        )
    return float(total)


# ---------------------------------------------------------------------------
# dataset and training loop


@dataclass
class Sample:
    lightfield: np.ndarray  # (U, V, S, T, C)
    cv: np.ndarray  # (S, T, C)
    disp: np.ndarray  # (S, T)


def make_toy_dataset(
    n: int, dims: tuple[int, int, int, int, int], seed: int
) -> list[Sample]:
    """Render n random scenes at the given light-field dimensions."""
    samples = []
    rng = np.random.default_rng(seed)
    for _ in range(n):
        spec = scenegen.sample_spec(dims, int(rng.integers(2**63)))
        cv, disp = scenegen.make_scene(spec)
        lf = scenegen.render_lightfield(cv, disp, dims[0], dims[1])
        samples.append(Sample(lightfield=lf, cv=cv, disp=disp))
    return samples


def baseline_losses(train: list[Sample], val: list[Sample]) -> tuple[float, float]:
    """Huber losses of the constant predictor (pixelwise train mean) on val."""
    cv_mean = np.mean([s.cv for s in train], axis=0)
    disp_mean = np.mean([s.disp for s in train], axis=0)
    cv_l = np.mean(
        [losses_metrics.huber(cv_mean, s.cv, with_grad=False).value for s in val]
    )
    disp_l = np.mean(
        [losses_metrics.huber(disp_mean, s.disp, with_grad=False).value for s in val]
    )
    return float(cv_l), float(disp_l)


@dataclass
class TrainConfig:
    strategy: str = "naive"
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-2
    momentum: float = 0.0
    weight_decay: float = 0.0
    seed: int = 0
    val_fraction: float = 0.2
    gradnorm_gamma: float = 1.5
    gradnorm_lr: float = 0.1
    normgradsim_step: float = 0.1
    grad_subset: str = "shared"  # or "all"
    # Optional early stop: quit once active-task validation losses drop
    # below these (cv, disp) thresholds; None disables.
    stop_below: tuple[float | None, float | None] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.grad_subset not in ("shared", "all"):
            raise ValueError("grad_subset must be 'shared' or 'all'")


def _static_weights(strategy: str) -> np.ndarray:
    if strategy == "st-cv":
        return np.array([1.0, 0.0])
    if strategy == "st-disp":
        return np.array([0.0, 1.0])
    return np.array([0.5, 0.5])


def _derive_seed(*parts: int) -> int:
    # Fold parts into one 64-bit seed with SplitMix-style mixing.
    acc = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        for p in parts:
            acc = coding._splitmix64(
                np.array([acc + np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
            )[0]
    return int(acc)


def _uses_aux(strategy: str) -> bool:
    return strategy in ("gradsim", "normgradsim", "mtu+al")


def _active_tasks(strategy: str) -> tuple[bool, bool]:
    return (strategy != "st-disp", strategy != "st-cv")


@dataclass
class EpochLog:
    epoch: int
    loss_cv: float
    loss_disp: float
    alphas: dict[str, list[float]]
    betas: dict[str, list[float]]
    task_weights: list[float]

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss_cv": self.loss_cv,
            "loss_disp": self.loss_disp,
            "alphas": self.alphas,
            "betas": self.betas,
            "task_weights": self.task_weights,
        }


def _flatten_subset(grads: dict[str, list[np.ndarray]], subset: str) -> np.ndarray:
    if subset == "shared":
        return ad.flatten_group(grads, "shared")
    return np.concatenate(
        [ad.flatten_group(grads, g) for g in ("shared", "cv", "disp")]
    )


def _zero_grads_like(net: ad.ToyNet) -> dict[str, list[np.ndarray]]:
    return {
        g: [np.zeros_like(p.value) for p in ps] for g, ps in net.params.items()
    }


def _accumulate(total, grads, groups, scale):
    if scale == 0.0:
        return
    for g in groups:
        for t, src in zip(total[g], grads[g]):
            t += scale * src


def validate(
    net: ad.ToyNet, val: list[Sample], base_seed: int
) -> tuple[float, float]:
    """Mean Huber validation losses under fixed per-sample masks."""
    n_s, n_t, n_c = net.dims[2], net.dims[3], net.dims[4]
    cv_losses, disp_losses = [], []
    for i, sample in enumerate(val):
        m = coding.random_mask(n_s, n_t, n_c, _derive_seed(base_seed, 1, i))
        coded = coding.encode(sample.lightfield, m)
        cv_hat, disp_hat = ad.forward(net, coded)
        cv_losses.append(
            losses_metrics.huber(cv_hat, sample.cv, with_grad=False).value
        )
        disp_losses.append(
            losses_metrics.huber(disp_hat, sample.disp, with_grad=False).value
        )
    return float(np.mean(cv_losses)), float(np.mean(disp_losses))


def train(
    net: ad.ToyNet, dataset: list[Sample], config: TrainConfig
) -> tuple[ad.ToyNet, list[EpochLog]]:
    """Train the two-head net with the chosen weighting strategy.

    Fresh coding masks are drawn per sample and epoch during training;
    validation always uses the fixed evaluation masks.  Returns the net and
    one log entry per epoch with validation losses and the current
    weights.  Deterministic in (dataset, config, net seed).
    """
    n_val = max(1, int(round(len(dataset) * config.val_fraction)))
    train_set = dataset[:-n_val]
    val_set = dataset[-n_val:]
    if not train_set:
        raise ValueError("dataset too small for the validation split")

    n_s, n_t, n_c = net.dims[2], net.dims[3], net.dims[4]
    strategy = config.strategy
    active = _active_tasks(strategy)
    use_aux = _uses_aux(strategy)
    n_aux = {t: len(AUX_LOSSES[t]) for t in TASKS}
    aw = AuxWeights.initial(n_aux)
    mtu_state = MtuState.initial()
    gn_state = GradNormState.initial(
        gamma=config.gradnorm_gamma, lr=config.gradnorm_lr
    )
    static_w = _static_weights(strategy)
    rng = np.random.default_rng(_derive_seed(config.seed, 0xD5))
    params = net.all_params()
    velocity = [np.zeros_like(p.value) for p in params] if config.momentum else None
    velocity_s = np.zeros_like(mtu_state.s)
    logs: list[EpochLog] = []

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            idxs = order[start : start + config.batch_size]
            coded = np.stack(
                [
                    coding.encode(
                        train_set[i].lightfield,
                        coding.random_mask(
                            n_s, n_t, n_c, _derive_seed(config.seed, 2, epoch, int(i))
                        ),
                    )
                    for i in idxs
                ]
            ).astype(np.float64)
            cv_truth = [train_set[i].cv for i in idxs]
            disp_truth = [train_set[i].disp for i in idxs]

            cv_node, disp_node = net.forward_batch(coded)
            pred = {"cv": cv_node, "disp": disp_node}
            truth = {"cv": cv_truth, "disp": disp_truth}

            # Per-loss values and parameter gradients (main, then auxiliaries).
            main_vals = np.zeros(2)
            main_grads: dict[str, dict] = {}
            aux_vals = {t: np.zeros(n_aux[t]) for t in TASKS}
            aux_grads: dict[str, list[dict]] = {t: [] for t in TASKS}
            for ti, task in enumerate(TASKS):
                if not active[ti]:
                    continue
                node = ad.batched_loss(pred[task], losses_metrics.huber, truth[task])
                main_vals[ti] = float(node.value)
                main_grads[task] = ad.collect_gradients(net, node)
                if use_aux:
                    for j, (_, fn) in enumerate(AUX_LOSSES[task]):
                        anode = ad.batched_loss(pred[task], fn, truth[task])
                        aux_vals[task][j] = float(anode.value)
                        aux_grads[task].append(ad.collect_gradients(net, anode))

            # Strategy: derive task weights and per-task aux coefficients.
            task_coeffs = static_w.copy()
            aux_coeffs = {t: np.zeros(n_aux[t]) for t in TASKS}
            if strategy in ("gradsim", "normgradsim", "mtu+al") and use_aux:
                for ti, task in enumerate(TASKS):
                    if not active[ti]:
                        continue
                    g_main = _flatten_subset(main_grads[task], config.grad_subset)
                    g_aux = [
                        _flatten_subset(g, config.grad_subset)
                        for g in aux_grads[task]
                    ]
                    if strategy == "gradsim":
                        aux_coeffs[task] = gradsim_weights(g_main, g_aux)
                    else:
                        aw.alpha[task], aw.beta[task] = normgradsim_update(
                            g_main,
                            g_aux,
                            aw.alpha[task],
                            aw.beta[task],
                            step=config.normgradsim_step,
                        )

            # Per-task effective losses for mtu/gradnorm bookkeeping.
            task_losses = main_vals.copy()
            if strategy in ("normgradsim", "mtu+al"):
                for ti, task in enumerate(TASKS):
                    if active[ti]:
                        task_losses[ti] = normgradsim_loss(
                            main_vals[ti], aux_vals[task], aw.alpha[task], aw.beta[task]
                        )

            if strategy == "gradnorm":
                norms = np.array(
                    [
                        np.linalg.norm(
                            _flatten_subset(main_grads[t], config.grad_subset)
                        )
                        for t in TASKS
                    ]
                )
                task_coeffs = gradnorm_update(norms, task_losses, gn_state).values
            elif strategy in ("mtu", "mtu+al"):
                _, ds = mtu_loss(task_losses, mtu_state)
                task_coeffs = mtu_effective_weights(mtu_state)
                # the log-variances take the same optimizer step as the net
                velocity_s = config.momentum * velocity_s + ds
                mtu_state.s -= config.lr * velocity_s

            # Assemble the parameter gradient of the combined loss.
            total_grads = _zero_grads_like(net)
            groups = ("shared", "cv", "disp")
            for ti, task in enumerate(TASKS):
                if not active[ti] or task_coeffs[ti] == 0.0:
                    continue
                if strategy in ("normgradsim", "mtu+al"):
                    c_main, c_aux = normgradsim_coefficients(
                        aw.alpha[task], aw.beta[task]
                    )
                elif strategy == "gradsim":
                    c_main, c_aux = 1.0, aux_coeffs[task]
                else:
                    c_main, c_aux = 1.0, np.zeros(n_aux[task])
                _accumulate(
                    total_grads, main_grads[task], groups, task_coeffs[ti] * c_main
                )
                for j, g in enumerate(aux_grads[task]):
                    _accumulate(
                        total_grads, g, groups, task_coeffs[ti] * float(c_aux[j])
                    )

            flat = [g for grp in groups for g in total_grads[grp]]
            if velocity is not None:
                for vel, g in zip(velocity, flat):
                    vel *= config.momentum
                    vel += g
                flat = velocity
            ad.sgd_step(params, flat, config.lr, config.weight_decay)

        loss_cv, loss_disp = validate(net, val_set, config.seed)
        # gradsim has no persistent gates; log its last per-batch weights
        alphas_now = aux_coeffs if strategy == "gradsim" else aw.alpha
        logs.append(
            EpochLog(
                epoch=epoch,
                loss_cv=loss_cv,
                loss_disp=loss_disp,
                alphas={t: [float(x) for x in alphas_now[t]] for t in TASKS},
                betas={t: [float(x) for x in aw.beta[t]] for t in TASKS},
                task_weights=[float(x) for x in task_coeffs],
            )
        )
        if config.stop_below is not None:
            cv_target, disp_target = config.stop_below
            cv_ok = (not active[0]) or cv_target is None or loss_cv < cv_target
            disp_ok = (not active[1]) or disp_target is None or loss_disp < disp_target
            if cv_ok and disp_ok:
                break
    return net, logs
