import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

from picpde.training import FieldJet, MetaGrid


# ---------------------------------------------------------------------------
# finite-difference oracles (independent of the package's own stencils)

def fd1(u, h, axis=0):
    u = np.moveaxis(u, axis, 0)
    out = (-u[4:] + 8 * u[3:-1] - 8 * u[1:-3] + u[:-4]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def fd2(u, h, axis=0):
    u = np.moveaxis(u, axis, 0)
    out = (-u[4:] + 16 * u[3:-1] - 30 * u[2:-2] + 16 * u[1:-3] - u[:-4]) / (12 * h * h)
    return np.moveaxis(out, 0, axis)


def fd3(u, h, axis=0):
    u = np.moveaxis(u, axis, 0)
    out = (u[:-6] / 8 - u[1:-5] + 13 * u[2:-4] / 8
           - 13 * u[4:-2] / 8 + u[5:-1] - u[6:] / 8) / h**3
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# analytic and grid-derived jets

def convection_diffusion_jet(meta: MetaGrid, amp=1.0, x0=0.3, width=0.25) -> FieldJet:
    """Exact derivatives of the closed-form Gaussian-pulse solution of
    u_t = -u_x + 0.25 u_xx."""
    pts = meta.points()
    x, t = pts[:, 0], pts[:, 1]
    c, d = 1.0, 0.25
    var = width * width + 2.0 * d * t
    z = x - x0 - c * t
    u = amp * width / np.sqrt(var) * np.exp(-z * z / (2.0 * var))
    ux = -z / var * u
    uxx = (z * z / var - 1.0) / var * u
    uxxx = (3.0 * z / var**2 - z**3 / var**3) * u
    uxxxx = (3.0 / var**2 - 6.0 * z * z / var**3 + z**4 / var**4) * u
    ut = -c * ux + d * uxx
    utt = c * c * uxx - 2.0 * c * d * uxxx + d * d * uxxxx
    return FieldJet(meta=meta, u=u, u_x=ux, u_xx=uxx, u_xxx=uxxx, u_t=ut, u_tt=utt)


def jet_from_grid(field, x_stride=1, t_stride=1, margin=4) -> FieldJet:
    """FieldJet built from 4th-order finite differences of a dense clean grid.

    Uses grid nodes directly (subsampled by the strides, keeping a margin
    for the stencils), so no interpolation error enters. Test scaffolding
    for the sparse-regression baselines on clean data.
    """
    u = field.values
    dx, dt = field.dx, field.dt
    ux = fd1(u, dx, 0)       # row r of output = grid row r + 2
    uxx = fd2(u, dx, 0)
    uxxx = fd3(u, dx, 0)     # row r = grid row r + 3
    ut = fd1(u, dt, 1)       # col c = grid col c + 2
    utt = fd2(u, dt, 1)
    xi = np.arange(margin, u.shape[0] - margin, x_stride)
    ti = np.arange(margin, u.shape[1] - margin, t_stride)
    meta = MetaGrid(
        (float(field.xs[xi[0]]), float(field.xs[xi[-1]])),
        (float(field.ts[ti[0]]), float(field.ts[ti[-1]])),
        len(xi), len(ti),
    )

    def pick(arr, row_cut, col_cut):
        return arr[np.ix_(xi - row_cut, ti - col_cut)].reshape(-1)

    return FieldJet(
        meta=meta,
        u=pick(u, 0, 0),
        u_x=pick(ux, 2, 0),
        u_xx=pick(uxx, 2, 0),
        u_xxx=pick(uxxx, 3, 0),
        u_t=pick(ut, 0, 2),
        u_tt=pick(utt, 0, 2),
    )


# ---------------------------------------------------------------------------
# parameter flattening for gradient checks

def flat_params(net) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.parameters()])


def set_flat(net, vec) -> None:
    i = 0
    for p in net.parameters():
        p[...] = vec[i:i + p.size].reshape(p.shape)
        i += p.size


# ---------------------------------------------------------------------------
# shared expensive fixtures

import pytest

from picpde.canonical import generate_dataset
from picpde.grids import NoiseSpec, add_noise, subsample
from picpde.network import init_mlp
from picpde.training import TrainConfig, train_surrogate


@pytest.fixture(scope="session")
def cd_setup():
    """Small trained surrogate on lightly noisy convection-diffusion data.

    Shared by the training/selection tests that need a realistic network;
    sized well below production settings to keep the suite quick.
    """
    field = generate_dataset("convection_diffusion")
    noisy = add_noise(field, NoiseSpec(0.1, "gaussian", 3))
    samples = subsample(noisy, 2500, seed=4)
    cfg = TrainConfig(max_epochs=4000, seed=5)
    net0 = init_mlp((2, 30, 30, 30, 1), "rational", seed=6)
    ann, report = train_surrogate(net0, samples, cfg)
    return {"field": field, "samples": samples, "ann": ann, "cfg": cfg,
            "report": report}
