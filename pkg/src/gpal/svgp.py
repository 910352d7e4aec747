"""Multi-class sparse variational GP classifier.

One latent GP per class over a shared RBF kernel, approximated through M
inducing points with a whitened Gaussian variational posterior per class
(mean m_c, lower-triangular root L_Sc against a standard-normal prior).
Class probabilities come from Monte Carlo softmax over the latent marginals,
so a prediction carries both a probability mean and a probability variance.

Training maximizes the minibatch evidence lower bound

    scale * sum_batch E_q[log softmax(f_i)_{y_i}]  -  sum_c KL_c

with reparameterized sampling (f = mu + sqrt(var) * eps, eps fixed per seed)
and hand-derived gradients for the variational parameters, the log-space
kernel hyperparameters, and optionally the inducing inputs.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import NO_LABEL, FeatureDataset
from .errors import NumericalError, ValidationError
from .kernels import KernelParams, gram_from_sq_dists, kernel_diag, median_heuristic_lengthscale, sq_dists
from .linalg import cholesky_with_ladder, gauss_kl_whitened, tri_solve
from .optim import Adam
from .rng import STREAM_MC, STREAM_TRAIN, derive_rng, derive_seed

# Predictive variances this far below zero indicate broken algebra, not roundoff.
VAR_CLAMP = -1e-12

DEFAULT_INDUCING = 128
MC_TRAIN = 256
MC_PREDICT = 512


@dataclass
class SvgpModel:
    """Inducing inputs plus per-class whitened variational parameters."""

    inducing: np.ndarray  # (M, D) float64
    q_mean: np.ndarray  # (M, C)
    q_root: np.ndarray  # (C, M, M) lower-triangular, positive diagonal
    kernel: KernelParams
    class_names: list[str]
    mc_samples: int = MC_TRAIN

    @property
    def num_inducing(self) -> int:
        return self.inducing.shape[0]

    @property
    def num_classes(self) -> int:
        return self.q_mean.shape[1]

    @property
    def dim(self) -> int:
        return self.inducing.shape[1]

    def validate(self) -> None:
        m, c = self.q_mean.shape
        if self.inducing.shape[0] != m or m < 1:
            raise ValidationError("q_mean rows must match inducing count")
        if c < 2:
            raise ValidationError("need at least 2 classes")
        if self.q_root.shape != (c, m, m):
            raise ValidationError("q_root must be (C, M, M)")
        if not np.all(np.isfinite(self.inducing)):
            raise ValidationError("inducing inputs must be finite")
        for k in range(c):
            if np.any(np.triu(self.q_root[k], k=1) != 0.0):
                raise ValidationError("q_root blocks must be lower-triangular")
            if np.any(np.diag(self.q_root[k]) <= 0.0):
                raise ValidationError("q_root diagonals must be positive")

    def kl(self) -> float:
        return sum(
            gauss_kl_whitened(self.q_mean[:, k], self.q_root[k])
            for k in range(self.num_classes)
        )

    def copy(self) -> "SvgpModel":
        return SvgpModel(
            inducing=self.inducing.copy(),
            q_mean=self.q_mean.copy(),
            q_root=self.q_root.copy(),
            kernel=replace(self.kernel),
            class_names=list(self.class_names),
            mc_samples=self.mc_samples,
        )


@dataclass
class TrainConfig:
    """Optimizer settings shared by the GP and the linear baseline."""

    epochs: int = 24
    learning_rate: float = 0.001
    minibatch_size: int = 64  # 0 = full batch
    seed: int = 0
    train_hyperparams: bool = True
    train_inducing: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValidationError("learning_rate must be positive")
        if self.minibatch_size < 0:
            raise ValidationError("minibatch_size must be >= 0")


@dataclass
class PredictiveLatent:
    """Per-sample, per-class latent marginals q(f)."""

    mean: np.ndarray  # (n, C)
    var: np.ndarray  # (n, C), >= 0


@dataclass
class ClassPosterior:
    """Monte Carlo mean and variance of the softmax class probabilities."""

    prob_mean: np.ndarray  # (n, C), rows sum to 1
    prob_var: np.ndarray  # (n, C), in [0, 0.25]


@dataclass
class TrainingTrace:
    elbo_per_epoch: list[float] = field(default_factory=list)


def init_model(
    ds: FeatureDataset,
    labeled: np.ndarray,
    num_inducing: int = DEFAULT_INDUCING,
    seed: int = 0,
) -> SvgpModel:
    """Fresh model: seeded inducing subsample, zero mean, identity roots.

    Lengthscale starts at the median pairwise distance of the labeled rows;
    kernel variance starts at 1.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ValidationError("cannot initialize a model with no labeled samples")
    if num_inducing < 1:
        raise ValidationError("need at least one inducing point")
    labels = ds.labels[labeled]
    if np.any(labels == NO_LABEL):
        raise ValidationError("labeled set contains samples without labels")
    missing = [name for k, name in enumerate(ds.class_names) if not np.any(labels == k)]
    if missing:
        warnings.warn(f"classes absent from the labeled set: {', '.join(missing)}")

    rng = derive_rng(seed, STREAM_TRAIN, 0)
    m = min(num_inducing, labeled.size)
    if m < num_inducing:
        warnings.warn(
            f"inducing count capped to the {labeled.size} labeled samples"
        )
    chosen = rng.choice(labeled.size, size=m, replace=False)
    x_labeled = ds.features64(labeled)
    inducing = x_labeled[np.sort(chosen)]

    ell = median_heuristic_lengthscale(x_labeled, rng=rng)
    kernel = KernelParams(log_lengthscale=float(np.log(ell)), log_variance=0.0)

    c = ds.n_classes
    q_root = np.broadcast_to(np.eye(m), (c, m, m)).copy()
    return SvgpModel(
        inducing=inducing,
        q_mean=np.zeros((m, c)),
        q_root=q_root,
        kernel=kernel,
        class_names=list(ds.class_names),
    )


def _latent_core(model: SvgpModel, x: np.ndarray):
    """Shared forward pass; returns intermediates needed by the backward pass."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValidationError(f"inputs must be (n, {model.dim})")
    d2_zz = sq_dists(model.inducing, model.inducing)
    k_zz = gram_from_sq_dists(d2_zz, model.kernel)
    factor = cholesky_with_ladder(k_zz)
    d2_zx = sq_dists(model.inducing, x)
    k_zx = gram_from_sq_dists(d2_zx, model.kernel)
    a = tri_solve(factor, k_zx)  # (M, n)

    mean = a.T @ model.q_mean  # (n, C)
    prior_part = kernel_diag(x.shape[0], model.kernel) - np.einsum("mn,mn->n", a, a)
    b = np.einsum("cjm,jn->cmn", model.q_root, a)  # (C, M, n): L_Sc^T @ A
    var = prior_part[None, :] + np.einsum("cmn,cmn->cn", b, b)  # (C, n)
    return x, d2_zz, k_zz, factor, d2_zx, k_zx, a, b, mean, var.T


def _clamp_var(var: np.ndarray) -> np.ndarray:
    if np.any(var < VAR_CLAMP):
        worst = float(var.min())
        raise NumericalError(
            f"predictive variance {worst:.3e} is below the roundoff clamp"
        )
    return np.maximum(var, 0.0)


def predict_latent(model: SvgpModel, x: np.ndarray) -> PredictiveLatent:
    """Latent mean and variance per sample and class."""
    *_, mean, var = _latent_core(model, x)
    return PredictiveLatent(mean=mean, var=_clamp_var(var))


def _class_key(name: str) -> int:
    """Stable 64-bit stream tag for a class, independent of slot position.

    Keying noise by class identity (not column index) makes every Monte Carlo
    prediction exactly covariant under joint class permutations.
    """
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "big")


def _mc_eps(seed: int, draws: int, n: int, class_keys: list[int]) -> np.ndarray:
    """(draws, n, C) standard normals, one independent stream per class."""
    eps = np.empty((draws, n, len(class_keys)))
    for slot, key in enumerate(class_keys):
        eps[:, :, slot] = derive_rng(seed, STREAM_MC, key).standard_normal((draws, n))
    return eps


def _antithetic_eps(seed: int, mc_samples: int, n: int, class_keys: list[int]) -> np.ndarray:
    """Paired +/- standard-normal draws (odd counts get one unpaired draw).

    Pairing keeps every marginal exactly N(0,1) while cancelling most of the
    Monte Carlo error of the softmax mean.
    """
    half = (mc_samples + 1) // 2
    eps = _mc_eps(seed, half, n, class_keys)
    return np.concatenate([eps, -eps], axis=0)[:mc_samples]


def posterior_from_latents(
    mean: np.ndarray,
    var: np.ndarray,
    mc_samples: int,
    seed: int,
    class_keys: list[int] | None = None,
) -> ClassPosterior:
    """Softmax Monte Carlo over diagonal-Gaussian latents."""
    if mc_samples < 2:
        raise ValidationError("mc_samples must be >= 2")
    mean = np.asarray(mean, dtype=np.float64)
    var = _clamp_var(np.asarray(var, dtype=np.float64))
    n, c = mean.shape
    if class_keys is None:
        class_keys = list(range(c))
    eps = _antithetic_eps(seed, mc_samples, n, class_keys)
    f = mean[None, :, :] + np.sqrt(var)[None, :, :] * eps
    f -= f.max(axis=2, keepdims=True)
    p = np.exp(f)
    p /= p.sum(axis=2, keepdims=True)
    prob_mean = p.mean(axis=0)
    prob_var = p.var(axis=0, ddof=1)
    return ClassPosterior(prob_mean=prob_mean, prob_var=prob_var)


def class_keys_for(model: SvgpModel) -> list[int]:
    return [_class_key(name) for name in model.class_names]


def predict_proba(
    model: SvgpModel, x: np.ndarray, mc_samples: int = MC_PREDICT, seed: int = 0
) -> ClassPosterior:
    """Class-probability mean and variance in one shot."""
    latent = predict_latent(model, x)
    return posterior_from_latents(
        latent.mean, latent.var, mc_samples, seed, class_keys=class_keys_for(model)
    )


def _log_softmax(f: np.ndarray) -> np.ndarray:
    shifted = f - f.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_batch(model: SvgpModel, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1:
        raise ValidationError("labels must be a 1-d array")
    if y.size and (y.min() < 0 or y.max() >= model.num_classes):
        raise ValidationError(f"labels must be in [0, {model.num_classes})")
    return y


def elbo(
    model: SvgpModel,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    scale: float = 1.0,
    seed: int = 0,
    mc_samples: int | None = None,
) -> float:
    """Minibatch evidence lower bound with seed-fixed Monte Carlo draws."""
    value, _ = _elbo_impl(model, x_batch, y_batch, scale, seed, mc_samples, want_grad=False)
    return value


@dataclass
class ElboGrad:
    """Gradient of the seeded ELBO estimator, by parameter group."""

    q_mean: np.ndarray  # (M, C)
    q_root: np.ndarray  # (C, M, M), strictly lower + diagonal
    log_lengthscale: float
    log_variance: float
    inducing: np.ndarray | None  # (M, D) when requested


def elbo_grad(
    model: SvgpModel,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    scale: float = 1.0,
    seed: int = 0,
    mc_samples: int | None = None,
    wrt_inducing: bool = False,
) -> ElboGrad:
    """Gradients of exactly the estimator :func:`elbo` computes."""
    _, grad = _elbo_impl(
        model, x_batch, y_batch, scale, seed, mc_samples, want_grad=True, wrt_inducing=wrt_inducing
    )
    return grad


def _phi_lower_half_diag(m: np.ndarray) -> np.ndarray:
    out = np.tril(m)
    np.fill_diagonal(out, 0.5 * np.diag(m))
    return out


def _elbo_impl(
    model: SvgpModel,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    scale: float,
    seed: int,
    mc_samples: int | None,
    want_grad: bool,
    wrt_inducing: bool = False,
):
    y = _check_batch(model, y_batch)
    s = mc_samples or model.mc_samples
    if s < 1:
        raise ValidationError("mc_samples must be >= 1")
    x, d2_zz, k_zz, factor, d2_zx, k_zx, a, b, mean, var = _latent_core(model, x_batch)
    if y.size != x.shape[0]:
        raise ValidationError("labels and feature rows disagree in length")
    n, c = mean.shape
    var = _clamp_var(var)
    sd = np.sqrt(var)

    eps = _mc_eps(seed, s, n, class_keys_for(model))
    f = mean[None] + sd[None] * eps
    logp = _log_softmax(f)  # (S, n, C)
    loglik = logp[:, np.arange(n), y].mean(axis=0).sum()
    kl = model.kl()
    value = float(scale * loglik - kl)
    if not want_grad:
        return value, None

    # d loglik / d logits, averaged over draws: one-hot(y) - softmax(f).
    p = np.exp(logp)
    g_f = -p
    g_f[:, np.arange(n), y] += 1.0

    g_mean = scale * g_f.mean(axis=0)  # (n, C)
    # d f / d var = eps / (2 sd); guard exact-zero variances (gradient unused there).
    safe_sd = np.where(sd > 0.0, sd, 1.0)
    g_var = scale * (g_f * eps).mean(axis=0) / (2.0 * safe_sd)
    g_var[sd == 0.0] = 0.0

    # Variational parameters.
    grad_q_mean = a @ g_mean - model.q_mean
    grad_q_root = np.empty_like(model.q_root)
    for k in range(c):
        grad_q_root[k] = 2.0 * (a * g_var[:, k][None, :]) @ b[k].T
        grad_q_root[k] -= model.q_root[k]
        grad_q_root[k] += np.diag(1.0 / np.diag(model.q_root[k]))
        grad_q_root[k] = np.tril(grad_q_root[k])

    # Pull the latent gradients back to the kernel matrices.
    # mean = A^T q_mean; var = k_diag - colsum(A*A) + sum_c colsum(B_c*B_c).
    g_var_total = g_var.sum(axis=1)  # (n,)
    a_bar = model.q_mean @ g_mean.T  # (M, n)
    a_bar -= 2.0 * a * g_var_total[None, :]
    for k in range(c):
        a_bar += 2.0 * (model.q_root[k] @ b[k]) * g_var[:, k][None, :]
    k_diag_bar = g_var_total

    # A = L^{-1} K_zx: gradients for K_zx and (through the factor) K_zz.
    lower = factor.lower
    k_zx_bar = tri_solve(factor, a_bar, side="lower-transpose")
    l_bar = -k_zx_bar @ a.T
    phi = _phi_lower_half_diag(lower.T @ l_bar)
    tmp = tri_solve(factor, phi.T, side="lower-transpose").T
    k_zz_bar = tri_solve(factor, tmp, side="lower-transpose")
    k_zz_bar = 0.5 * (k_zz_bar + k_zz_bar.T)

    ell2 = np.exp(2.0 * model.kernel.log_lengthscale)
    variance = np.exp(model.kernel.log_variance)
    # The factored matrix was k_zz + jitter with jitter proportional to the
    # kernel variance, so the whole matrix scales with it.
    k_zz_jittered = k_zz + factor.jitter * np.eye(model.num_inducing)
    grad_log_var = float(
        np.sum(k_zz_bar * k_zz_jittered)
        + np.sum(k_zx_bar * k_zx)
        + np.sum(k_diag_bar) * variance
    )
    grad_log_ell = float(
        np.sum(k_zz_bar * k_zz * d2_zz) / ell2 + np.sum(k_zx_bar * k_zx * d2_zx) / ell2
    )

    grad_inducing = None
    if wrt_inducing:
        # d k(z_a, x_j) / d z_a = k * (x_j - z_a) / ell^2, and twice that
        # pattern for the symmetric K_zz block.
        w_zx = k_zx_bar * k_zx / ell2  # (M, n)
        grad_inducing = w_zx @ x - w_zx.sum(axis=1)[:, None] * model.inducing
        w_zz = 2.0 * k_zz_bar * k_zz / ell2  # (M, M)
        grad_inducing += w_zz @ model.inducing - w_zz.sum(axis=1)[:, None] * model.inducing

    return value, ElboGrad(
        q_mean=grad_q_mean,
        q_root=grad_q_root,
        log_lengthscale=grad_log_ell,
        log_variance=grad_log_var,
        inducing=grad_inducing,
    )


class _ParamPacker:
    """Flattens trainable parameter groups into one Adam-ready vector.

    The variational root diagonal rides in log space so steps cannot cross
    zero; everything else is raw.
    """

    def __init__(self, model: SvgpModel, cfg: TrainConfig):
        self.m = model.num_inducing
        self.c = model.num_classes
        self.d = model.dim
        self.cfg = cfg
        self.tril = np.tril_indices(self.m, k=-1)
        sizes = [self.m * self.c, self.c * len(self.tril[0]), self.c * self.m]
        if cfg.train_hyperparams:
            sizes.append(2)
        if cfg.train_inducing:
            sizes.append(self.m * self.d)
        self.size = sum(sizes)

    def pack(self, model: SvgpModel) -> np.ndarray:
        parts = [model.q_mean.ravel()]
        strict = np.stack([model.q_root[k][self.tril] for k in range(self.c)])
        parts.append(strict.ravel())
        log_diag = np.log(np.stack([np.diag(model.q_root[k]) for k in range(self.c)]))
        parts.append(log_diag.ravel())
        if self.cfg.train_hyperparams:
            parts.append(np.array([model.kernel.log_lengthscale, model.kernel.log_variance]))
        if self.cfg.train_inducing:
            parts.append(model.inducing.ravel())
        return np.concatenate(parts)

    def unpack_into(self, vec: np.ndarray, model: SvgpModel) -> None:
        pos = 0
        model.q_mean = vec[pos : pos + self.m * self.c].reshape(self.m, self.c)
        pos += self.m * self.c
        n_strict = len(self.tril[0])
        strict = vec[pos : pos + self.c * n_strict].reshape(self.c, n_strict)
        pos += self.c * n_strict
        log_diag = vec[pos : pos + self.c * self.m].reshape(self.c, self.m)
        pos += self.c * self.m
        root = np.zeros((self.c, self.m, self.m))
        for k in range(self.c):
            root[k][self.tril] = strict[k]
            root[k][np.diag_indices(self.m)] = np.exp(log_diag[k])
        model.q_root = root
        if self.cfg.train_hyperparams:
            model.kernel = KernelParams(
                log_lengthscale=float(vec[pos]), log_variance=float(vec[pos + 1])
            )
            pos += 2
        if self.cfg.train_inducing:
            model.inducing = vec[pos : pos + self.m * self.d].reshape(self.m, self.d)
            pos += self.m * self.d

    def pack_grad(self, model: SvgpModel, grad: ElboGrad) -> np.ndarray:
        parts = [grad.q_mean.ravel()]
        strict = np.stack([grad.q_root[k][self.tril] for k in range(self.c)])
        parts.append(strict.ravel())
        # Chain rule onto the log-diagonal coordinates.
        diag_grad = np.stack(
            [np.diag(grad.q_root[k]) * np.diag(model.q_root[k]) for k in range(self.c)]
        )
        parts.append(diag_grad.ravel())
        if self.cfg.train_hyperparams:
            parts.append(np.array([grad.log_lengthscale, grad.log_variance]))
        if self.cfg.train_inducing:
            parts.append(grad.inducing.ravel())
        return np.concatenate(parts)


def train(
    model: SvgpModel,
    ds: FeatureDataset,
    labeled: np.ndarray,
    cfg: TrainConfig,
) -> tuple[SvgpModel, TrainingTrace]:
    """Adam ascent on the ELBO over reshuffled minibatches.

    Returns a new model; the input model is not mutated.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ValidationError("cannot train with no labeled samples")
    x_all = ds.features64(labeled)
    y_all = ds.labels[labeled]
    if np.any(y_all == NO_LABEL):
        raise ValidationError("labeled set contains samples without labels")

    model = model.copy()
    model.validate()
    packer = _ParamPacker(model, cfg)
    params = packer.pack(model)
    adam = Adam(params.size, lr=cfg.learning_rate)
    n = labeled.size
    batch = cfg.minibatch_size or n
    trace = TrainingTrace()

    shuffle_rng = derive_rng(cfg.seed, STREAM_TRAIN, 1)
    step = 0
    try:
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            epoch_values = []
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                scale = n / idx.size
                mc_seed = derive_seed(cfg.seed, STREAM_MC, step)
                value, grad = _elbo_impl(
                    model, x_all[idx], y_all[idx], scale, mc_seed,
                    mc_samples=None, want_grad=True, wrt_inducing=cfg.train_inducing,
                )
                params = adam.step(params, packer.pack_grad(model, grad))
                packer.unpack_into(params, model)
                epoch_values.append(value)
                step += 1
            trace.elbo_per_epoch.append(float(np.mean(epoch_values)))
    except NumericalError as exc:
        raise NumericalError(f"training failed at epoch {epoch}, step {step}: {exc}") from exc
    return model, trace
