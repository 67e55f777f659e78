import numpy as np
import pytest

from oulab.model import build_model


def random_stable(rng, d, margin=0.3):
    """A random real d x d matrix shifted so its spectral abscissa is -margin - U(0, 1)."""
    G = rng.standard_normal((d, d))
    shift = np.linalg.eigvals(G).real.max() + margin + rng.uniform()
    return G - shift * np.eye(d)


def taylor_expm(M, t=1.0, terms=30):
    """Scaling-and-squaring with a plain Taylor series; an oracle independent of Pade."""
    M = np.asarray(M, dtype=float) * t
    nrm = np.linalg.norm(M, 1)
    s = max(0, int(np.ceil(np.log2(max(nrm, 1e-300) / 0.25))))
    X = M / 2**s
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


@pytest.fixture(scope="session")
def sym1d():
    return build_model([[-1.0]])


@pytest.fixture(scope="session")
def rot2d():
    return build_model([[-1.0, -1.0], [1.0, -1.0]])
