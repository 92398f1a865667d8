"""Energy functions and regularizers built on a frozen feature extractor.

The default energy is the data-dependent feature distance

    E(x) = mean over reference points x' of ||f(x) - f(x')||^2 / d

where the reference points are training samples. With ``n_mc = 1`` a single
uniformly drawn training point stands in for the expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .neural import Network, OptimizerState, apply_step, backward, forward, read_weights, write_weights
from .toy_data import N_CLASSES, normalize_family, sample_auxiliary

ENERGY_KINDS = ("data_mse", "feature_matching", "entropy_min")
PROB_FLOOR = 1e-12


class FeatureExtractor:
    """Frozen map ``x -> net_k((x - mean) / std)``.

    ``net_k`` is ``network`` cut at the pre-activation of ``feature_layer``
    (default: the last layer). Parameters are copied and made read-only.
    """

    def __init__(self, network: Network, mean=None, std=None, feature_layer: int = -1):
        n_in = network.dims[0]
        mean = np.zeros(n_in) if mean is None else np.asarray(mean, dtype=float).reshape(n_in)
        std = np.ones(n_in) if std is None else np.asarray(std, dtype=float).reshape(n_in)
        if np.any(std <= 0) or not np.all(np.isfinite(std)):
            raise InvalidInput("normalization std must be positive and finite")
        n_layers = len(network.layers)
        self.feature_layer = feature_layer % n_layers if -n_layers <= feature_layer < n_layers else None
        if self.feature_layer is None:
            raise InvalidInput(f"feature layer {feature_layer} out of range")
        self._full = network.copy()
        self._net = network.truncated(self.feature_layer)
        for p in self._full.params() + self._net.params():
            p.setflags(write=False)
        self.mean = mean.copy()
        self.std = std.copy()
        self.mean.setflags(write=False)
        self.std.setflags(write=False)

    @property
    def dim_in(self) -> int:
        return self._net.dims[0]

    @property
    def dim_out(self) -> int:
        return self._net.dims[-1]

    @property
    def network(self) -> Network:
        return self._full.copy()

    def with_normalization(self, mean, std) -> "FeatureExtractor":
        return FeatureExtractor(self._full, mean, std, self.feature_layer)

    def with_layer(self, feature_layer: int) -> "FeatureExtractor":
        return FeatureExtractor(self._full, self.mean, self.std, feature_layer)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim_in:
            raise InvalidInput(f"point dimension {x.shape[-1]} does not match extractor input {self.dim_in}")
        return x

    def __call__(self, x) -> np.ndarray:
        x = self._check(x)
        return forward(self._net, (x - self.mean) / self.std)[0]

    def forward(self, x):
        x = self._check(x)
        return forward(self._net, (x - self.mean) / self.std)

    def input_grad(self, tape, out_grad) -> np.ndarray:
        _, g = backward(self._net, tape, out_grad)
        return g / self.std

    def save(self, path) -> None:
        write_weights(path, self._full, extra={
            "norm_mean": self.mean, "norm_std": self.std, "feature_layer": [self.feature_layer],
        })

    @classmethod
    def load(cls, path) -> "FeatureExtractor":
        net, extra = read_weights(path)
        layer = int(extra.get("feature_layer", [-1])[0])
        return cls(net, extra.get("norm_mean"), extra.get("norm_std"), layer)

    @classmethod
    def random(cls, dims=(2, 32, 32, 8), seed: int = 0, activation: str = "tanh") -> "FeatureExtractor":
        """Fixed-seed random-weight extractor (the cheap alternative)."""
        rng = np.random.default_rng(seed)
        return cls(Network.init(list(dims), activation, rng))


def pretrain_extractor(
    family: str = "ring8",
    n_aux: int = 4000,
    hidden=(32, 32),
    steps: int = 1500,
    batch_size: int = 128,
    lr: float = 3e-3,
    seed: int = 0,
) -> FeatureExtractor:
    """Train a mode classifier on a perturbed copy of ``family`` and freeze it.

    The auxiliary data are scaled, rotated and noisier than the target so the
    extractor is related to, but not fitted on, the training distribution.
    """
    family = normalize_family(family)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xE7]))
    x, y = sample_auxiliary(family, n_aux, rng)
    mean, std = x.mean(axis=0), x.std(axis=0)
    xn = (x - mean) / std
    k = N_CLASSES[family]
    net = Network.init([2, *hidden, k], "leaky_relu", rng)
    opt = OptimizerState.for_params(net.params(), lr=lr)
    onehot = np.eye(k)
    for _ in range(steps):
        idx = rng.integers(0, n_aux, size=batch_size)
        logits, tape = forward(net, xn[idx])
        p = softmax(logits)
        grads, _ = backward(net, tape, (p - onehot[y[idx]]) / batch_size)
        apply_step(net, opt, grads)
    return FeatureExtractor(net, mean, std)


def classifier_accuracy(f: FeatureExtractor, x, y) -> float:
    return float(np.mean(np.argmax(f(x), axis=1) == y))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class EnergyConfig:
    kind: str = "data_mse"
    n_mc: int = 1
    entropy_sign: int = 1

    def __post_init__(self):
        if self.kind not in ENERGY_KINDS:
            raise InvalidInput(f"unknown energy kind {self.kind!r}; expected one of {ENERGY_KINDS}")
        if int(self.n_mc) != self.n_mc or self.n_mc < 1:
            raise InvalidInput(f"n_mc must be a positive integer, got {self.n_mc}")
        if self.entropy_sign not in (1, -1):
            raise InvalidInput("entropy_sign must be +1 or -1")


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise InvalidInput(f"point dimension {x.shape[1]} does not match extractor input {dim}")
    return x, single


def _refs(training_ref, dim):
    ref = np.atleast_2d(np.asarray(training_ref, dtype=float))
    if ref.size == 0:
        raise InvalidInput("reference set is empty")
    if ref.shape[-1] != dim:
        raise InvalidInput("reference points do not match extractor input dimension")
    return ref


def energy_data_mse(x, training_ref, f: FeatureExtractor):
    """Mean feature distance of ``x`` to every reference point.

    ``x`` may be one point or a batch; the result is a float or an array.
    """
    X, single = _as_batch(x, f.dim_in)
    R = f(_refs(training_ref, f.dim_in))
    F = f(X)
    e = np.mean(np.sum((F[:, None, :] - R[None, :, :]) ** 2, axis=2), axis=1) / f.dim_out
    return float(e[0]) if single else e


def energy_data_mse_paired(X, ref_feats, f: FeatureExtractor):
    """Energies and input gradients when each row has its own references.

    Args:
        X: ``(B, dim_in)`` points.
        ref_feats: ``(B, n_mc, d)`` features of the reference points drawn
            for each row.

    Returns:
        ``(energies, grads)`` of shapes ``(B,)`` and ``(B, dim_in)``.
    """
    F, tape = f.forward(X)
    diff = F[:, None, :] - ref_feats
    d = f.dim_out
    e = np.mean(np.sum(diff**2, axis=2), axis=1) / d
    dF = (2.0 / d) * diff.mean(axis=1)
    return e, f.input_grad(tape, dF)


def energy_gradient(x, training_ref, f: FeatureExtractor):
    """Exact gradient of :func:`energy_data_mse` with respect to ``x``."""
    X, single = _as_batch(x, f.dim_in)
    R = f(_refs(training_ref, f.dim_in))
    ref_feats = np.broadcast_to(R, (X.shape[0],) + R.shape)
    _, g = energy_data_mse_paired(X, ref_feats, f)
    return g[0] if single else g


def draw_references(rng: np.random.Generator, n_rows: int, n_train: int, n_mc: int = 1):
    """Indices ``(n_rows, n_mc)`` of training points drawn uniformly with replacement."""
    return rng.integers(0, n_train, size=(n_rows, n_mc))


def energy_data_mse_mc(x, training, f: FeatureExtractor, rng: np.random.Generator, n_mc: int = 1):
    """Monte-Carlo estimate using ``n_mc`` uniformly drawn training points per row."""
    X, single = _as_batch(x, f.dim_in)
    T = _refs(training, f.dim_in)
    idx = draw_references(rng, X.shape[0], T.shape[0], n_mc)
    e, _ = energy_data_mse_paired(X, f(T)[idx], f)
    return float(e[0]) if single else e


def feature_matching_loss(real_batch, fake_batch, f: FeatureExtractor) -> float:
    """Squared distance between the mean features of two batches.

    This is a batch-level penalty: it is not an expectation of a per-sample
    energy under the generator.
    """
    real = np.atleast_2d(np.asarray(real_batch, dtype=float))
    fake = np.atleast_2d(np.asarray(fake_batch, dtype=float))
    if real.size == 0 or fake.size == 0:
        raise InvalidInput("feature matching needs nonempty batches")
    diff = f(real).mean(axis=0) - f(fake).mean(axis=0)
    return float(diff @ diff)


def feature_matching_grad(real_batch, fake_batch, f: FeatureExtractor):
    """``(loss, d loss / d fake_batch)``."""
    real = np.atleast_2d(np.asarray(real_batch, dtype=float))
    fake = np.atleast_2d(np.asarray(fake_batch, dtype=float))
    if real.size == 0 or fake.size == 0:
        raise InvalidInput("feature matching needs nonempty batches")
    F, tape = f.forward(fake)
    diff = F.mean(axis=0) - f(real).mean(axis=0)
    dF = np.broadcast_to(2.0 * diff / fake.shape[0], F.shape)
    return float(diff @ diff), f.input_grad(tape, dF)


def _entropy_from_logits(z):
    z = z - z.max(axis=-1, keepdims=True)
    logp = z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    p = np.exp(logp)
    H = -np.sum(p * np.maximum(logp, math.log(PROB_FLOOR)), axis=-1)
    return H, p, logp


def energy_entropy(x, f: FeatureExtractor, entropy_sign: int = 1):
    """``entropy_sign * H(softmax(f(x)))`` in nats."""
    if f.dim_out < 2:
        raise InvalidInput("entropy energy needs at least two logits")
    X, single = _as_batch(x, f.dim_in)
    H, _, _ = _entropy_from_logits(f(X))
    e = entropy_sign * np.maximum(H, 0.0)
    return float(e[0]) if single else e


def energy_entropy_and_grad(X, f: FeatureExtractor, entropy_sign: int = 1):
    Z, tape = f.forward(X)
    H, p, logp = _entropy_from_logits(Z)
    dZ = -p * (logp + H[:, None])
    return entropy_sign * H, f.input_grad(tape, entropy_sign * dZ)
