import numpy as np
import pytest

from gpal.data import FeatureDataset, SynthSpec, synth_blobs
from gpal.kernels import KernelParams
from gpal.svgp import SvgpModel


@pytest.fixture
def tiny_ds() -> FeatureDataset:
    """Three classes, 120 pool + 30 test samples, 4-d, fully labeled."""
    spec = SynthSpec(
        n_per_class=[60, 40, 20], dim=4, spread=1.0, seed=3, test_n_per_class=[15, 10, 5]
    )
    return synth_blobs(spec)


def random_model(rng: np.random.Generator, m=4, c=3, d=2, mc_samples=16) -> SvgpModel:
    """Small model with generic (non-identity) variational parameters."""
    q_root = np.zeros((c, m, m))
    for k in range(c):
        low = np.tril(0.2 * rng.standard_normal((m, m)), -1)
        low[np.diag_indices(m)] = rng.uniform(0.4, 1.3, m)
        q_root[k] = low
    return SvgpModel(
        inducing=rng.standard_normal((m, d)),
        q_mean=0.5 * rng.standard_normal((m, c)),
        q_root=q_root,
        kernel=KernelParams(
            log_lengthscale=float(rng.uniform(-0.3, 0.4)),
            log_variance=float(rng.uniform(-0.5, 0.3)),
        ),
        class_names=[f"k{j}" for j in range(c)],
        mc_samples=mc_samples,
    )
