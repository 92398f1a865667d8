"""Energy-regularized GAN training on 2-D toy data, and a GD Gaussian fit.

The discriminator minimizes the usual binary cross-entropy. The generator
minimizes the non-saturating adversarial loss plus ``lam`` times the mean
energy of its batch, with the energy gradient flowing through the frozen
extractor into the generator.

Random streams are split by purpose (initialization, minibatches/latents,
energy reference draws, evaluation). With ``lam == 0`` the energy path is
skipped entirely, so the trajectory is bit-identical to the unregularized
baseline; with ``lam > 0`` only the energy stream is consumed in addition.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .energy import (
    EnergyConfig,
    FeatureExtractor,
    draw_references,
    energy_data_mse_paired,
    energy_entropy_and_grad,
    feature_matching_grad,
)
from .errors import InvalidInput, NumericalError
from .gaussian_tradeoff import GaussianSpec
from .metrics import median_heuristic, mmd2, frechet_gaussian
from .neural import Network, OptimizerState, apply_step, backward, forward, write_weights
from .toy_data import ToyDataset

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
TRACE_HEADER = ("step", "d_loss", "g_loss", "energy_mean", "mmd2", "frechet")

_STREAM_INIT, _STREAM_TRAIN, _STREAM_ENERGY, _STREAM_EVAL = range(4)


@dataclass
class TrainConfig:
    latent_dim: int = 2
    g_hidden: tuple = (64, 64)
    d_hidden: tuple = (64, 64)
    g_lr: float = 1e-3
    d_lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 64
    lam: float = 0.0
    steps: int = 2000
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    extractor_path: str | None = None
    seed: int = 0
    eval_every: int = 500
    n_eval: int = 1000

    def __post_init__(self):
        self.g_hidden = tuple(int(h) for h in self.g_hidden)
        self.d_hidden = tuple(int(h) for h in self.d_hidden)
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise InvalidInput(f"lambda must be finite and nonnegative, got {self.lam}")
        if self.batch_size < 2:
            raise InvalidInput("batch_size must be at least 2")
        if self.steps < 1 or self.eval_every < 1 or self.latent_dim < 1:
            raise InvalidInput("steps, eval_every and latent_dim must be positive")
        if self.n_eval < 3:
            raise InvalidInput("n_eval must be at least 3")


@dataclass
class TraceRow:
    step: int
    d_loss: float
    g_loss: float
    energy_mean: float
    mmd2: float
    frechet: float

    def values(self):
        return (self.step, self.d_loss, self.g_loss, self.energy_mean, self.mmd2, self.frechet)


@dataclass
class TrainTrace:
    rows: list
    generator: Network
    discriminator: Network
    config: TrainConfig

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for r in self.rows:
                w.writerow([r.step] + [repr(float(v)) for v in r.values()[1:]])

    def save_checkpoints(self, directory, prefix="") -> None:
        d = Path(directory)
        write_weights(d / f"{prefix}generator.txt", self.generator)
        write_weights(d / f"{prefix}discriminator.txt", self.discriminator)

    def fingerprint(self) -> bytes:
        """Bytes that change if any trace entry or generator parameter changes."""
        rows = np.array([r.values() for r in self.rows], dtype=float)
        params = np.concatenate([p.ravel() for p in self.generator.params()])
        return rows.tobytes() + params.tobytes()


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _stream(seed, purpose):
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose]))


def build_networks(cfg: TrainConfig, rng: np.random.Generator):
    G = Network.init([cfg.latent_dim, *cfg.g_hidden, 2], "leaky_relu", rng)
    D = Network.init([2, *cfg.d_hidden, 1], "leaky_relu", rng)
    return G, D


def resolve_extractor(cfg: TrainConfig, extractor: FeatureExtractor | None):
    if cfg.lam == 0:
        return None
    if extractor is not None:
        return extractor
    if not cfg.extractor_path:
        raise InvalidInput("lambda > 0 requires an extractor (extractor_path is not set)")
    path = Path(cfg.extractor_path)
    if not path.exists():
        raise InvalidInput(f"extractor file {path} does not exist")
    return FeatureExtractor.load(path)


class EnergyTerm:
    """The generator-side regularizer for one training run."""

    def __init__(self, cfg: EnergyConfig, f: FeatureExtractor, training: np.ndarray, rng):
        self.cfg = cfg
        self.f = f
        self.training = training
        self.rng = rng
        self.train_feats = f(training)

    def __call__(self, fake):
        """Return ``(per-sample energies, d(mean energy)/d fake)``."""
        B = fake.shape[0]
        if self.cfg.kind == "data_mse":
            idx = draw_references(self.rng, B, self.training.shape[0], self.cfg.n_mc)
            e, g = energy_data_mse_paired(fake, self.train_feats[idx], self.f)
            return e, g / B
        if self.cfg.kind == "entropy_min":
            e, g = energy_entropy_and_grad(fake, self.f, self.cfg.entropy_sign)
            return e, g / B
        real = self.training[self.rng.integers(0, self.training.shape[0], size=B)]
        loss, g = feature_matching_grad(real, fake, self.f)
        return np.full(B, loss), g


def generator_energy_grad(G: Network, z, term: EnergyTerm):
    """Mean energy of ``G(z)`` and its gradient w.r.t. the generator parameters."""
    fake, tape = forward(G, z)
    e, dx = term(fake)
    grads, _ = backward(G, tape, dx)
    return float(np.mean(e)), grads


def train_gan(data: ToyDataset, cfg: TrainConfig, extractor: FeatureExtractor | None = None) -> TrainTrace:
    """Alternating D/G updates on ``data.limited``; metrics against ``data.full``.

    ``extractor`` overrides ``cfg.extractor_path``. It is re-normalized with
    the mean and standard deviation of the training subset.
    """
    f = resolve_extractor(cfg, extractor)
    training = data.limited
    rng_init = _stream(cfg.seed, _STREAM_INIT)
    rng = _stream(cfg.seed, _STREAM_TRAIN)
    G, D = build_networks(cfg, rng_init)
    opt_g = OptimizerState.for_params(G.params(), lr=cfg.g_lr, betas=(cfg.beta1, cfg.beta2))
    opt_d = OptimizerState.for_params(D.params(), lr=cfg.d_lr, betas=(cfg.beta1, cfg.beta2))

    term = None
    if f is not None:
        std = training.std(axis=0)
        f = f.with_normalization(training.mean(axis=0), np.where(std > 0, std, 1.0))
        term = EnergyTerm(cfg.energy, f, training, _stream(cfg.seed, _STREAM_ENERGY))

    z_eval = _stream(cfg.seed, _STREAM_EVAL).standard_normal((cfg.n_eval, cfg.latent_dim))
    bandwidth = median_heuristic(data.full, data.full)
    B = cfg.batch_size
    rows = []

    for step in range(1, cfg.steps + 1):
        # discriminator
        real = training[rng.integers(0, training.shape[0], size=B)]
        fake = G(rng.standard_normal((B, cfg.latent_dim)))
        lr_, tape_r = forward(D, real)
        lf_, tape_f = forward(D, fake)
        d_loss = float(np.mean(_softplus(-lr_)) + np.mean(_softplus(lf_)))
        gr, _ = backward(D, tape_r, -_sigmoid(-lr_) / B)
        gf, _ = backward(D, tape_f, _sigmoid(lf_) / B)
        apply_step(D, opt_d, [a + b for a, b in zip(gr, gf)])

        # generator
        fake, tape_g = forward(G, rng.standard_normal((B, cfg.latent_dim)))
        lg, tape_dg = forward(D, fake)
        g_loss = float(np.mean(_softplus(-lg)))
        _, dx = backward(D, tape_dg, -_sigmoid(-lg) / B)
        energy_mean = 0.0
        if term is not None:
            e, de = term(fake)
            energy_mean = float(np.mean(e))
            g_loss += cfg.lam * energy_mean
            dx = dx + cfg.lam * de
        grads, _ = backward(G, tape_g, dx)
        if not (math.isfinite(d_loss) and math.isfinite(g_loss)):
            raise NumericalError("non-finite loss", step=step)
        try:
            apply_step(G, opt_g, grads)
        except NumericalError as exc:
            raise NumericalError("non-finite generator gradient", step=step) from exc

        if step % cfg.eval_every == 0 or step == cfg.steps:
            samples = G(z_eval)
            if not np.all(np.isfinite(samples)):
                raise NumericalError("non-finite generator output", step=step)
            m2, _ = mmd2(data.full, samples, bandwidth)
            row = TraceRow(step, d_loss, g_loss, energy_mean, m2, frechet_gaussian(data.full, samples))
            log.debug("step %d: %s", step, row)
            rows.append(row)

    return TrainTrace(rows, G, D, cfg)


def train_baseline(data: ToyDataset, cfg: TrainConfig) -> TrainTrace:
    """The unregularized GAN: same loop with no extractor and zero weight."""
    return train_gan(data, replace(cfg, lam=0.0, extractor_path=None), extractor=None)


def sample_generator(G: Network, n: int, seed: int = 0) -> np.ndarray:
    """``n`` samples ``G(z)`` with ``z ~ N(0, I)`` drawn from ``seed``."""
    out_dim = G.dims[-1]
    if n == 0:
        return np.empty((0, out_dim))
    z = np.random.default_rng(seed).standard_normal((n, G.dims[0]))
    return G(z)


def fit_gaussian_gd(spec: GaussianSpec, sample, lam: float, lr: float | None = None, steps: int = 200) -> float:
    """Gradient descent on the regularized Gaussian negative log-likelihood.

    Minimizes ``mean((mu - x)^2) / (2 s2) + lam (mu - mu_pre)^2 / (2 s2)``
    starting from ``mu = 0``. The objective has curvature ``(1 + lam) / s2``,
    so ``lr`` must stay below ``2 s2 / (1 + lam)``; the default is half that.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise InvalidInput("fit_gaussian_gd needs a nonempty sample")
    if not lam >= 0:
        raise InvalidInput("lambda must be nonnegative")
    s2 = spec.sigma2
    if lr is None:
        lr = s2 / (1.0 + lam)
    xbar = float(np.mean(x))
    mu = 0.0
    g0 = abs(((mu - xbar) + lam * (mu - spec.mu_pre)) / s2)
    for step in range(1, steps + 1):
        grad = ((mu - xbar) + lam * (mu - spec.mu_pre)) / s2
        mu -= lr * grad
        if not math.isfinite(mu):
            raise NumericalError("gradient descent diverged", step=step)
    g_end = abs(((mu - xbar) + lam * (mu - spec.mu_pre)) / s2)
    if g_end > g0 and g_end > 1e-12:
        raise NumericalError(f"gradient descent diverged (lr={lr} exceeds the stability bound)", step=steps)
    return mu


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["energy"] = asdict(cfg.energy)
    return d
