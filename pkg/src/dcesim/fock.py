"""Brute-force number-basis oracle for two-mode squeezed vacuum moments.

Independent of the Gaussian moment algebra: the state is built by exponentiating
the squeeze generator on a truncated two-mode Fock space and every second
moment is read off explicit operator matrices. Memory grows as
(cutoff + 1)**2 per vector; the sparse generator keeps cutoff ~ 30 cheap.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import CutoffTooSmall
from .gaussian import QuadratureCovariance

MAX_SQUEEZE = 0.3
MIN_CUTOFF = 20
TOP_POPULATION_TOL = 1e-12


def annihilation(dim):
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr")


def two_mode_operators(cutoff):
    """Annihilation operators (a+, a-) on the (cutoff+1)^2 dimensional product space."""
    dim = cutoff + 1
    a = annihilation(dim)
    eye = sp.identity(dim, format="csr")
    return sp.kron(a, eye, format="csr"), sp.kron(eye, a, format="csr")


def two_mode_squeezed_vacuum(r, phase, cutoff=30):
    """State vector exp[r(e^{i phase} a+^dag a-^dag - h.c.)]|0,0> in the truncated basis.

    Index ``n_plus * (cutoff + 1) + n_minus`` holds the amplitude of |n_plus, n_minus>.
    """
    if r < 0 or r > MAX_SQUEEZE:
        raise ValueError(f"oracle supports 0 <= r <= {MAX_SQUEEZE}, got {r}")
    if cutoff < MIN_CUTOFF:
        raise ValueError(f"cutoff must be >= {MIN_CUTOFF}, got {cutoff}")
    ap, am = two_mode_operators(cutoff)
    pair_create = (ap @ am).conj().T
    generator = r * (np.exp(1j * phase) * pair_create - np.exp(-1j * phase) * (ap @ am))
    vac = np.zeros((cutoff + 1) ** 2, dtype=complex)
    vac[0] = 1.0
    vec = expm_multiply(generator.tocsc(), vac)
    pops = np.abs(vec.reshape(cutoff + 1, cutoff + 1)) ** 2
    top = pops[-1, :].sum() + pops[:, -1].sum()
    if top > TOP_POPULATION_TOL:
        raise CutoffTooSmall(f"top Fock level holds population {top:.3g} at cutoff {cutoff}")
    return vec


def mean_photon_numbers(vec, cutoff):
    """(<n+>, <n->) from the Fock populations."""
    pops = np.abs(vec.reshape(cutoff + 1, cutoff + 1)) ** 2
    n = np.arange(cutoff + 1)
    return float(pops.sum(axis=1) @ n), float(pops.sum(axis=0) @ n)


def fock_oracle_covariance(r, phase, cutoff=30) -> QuadratureCovariance:
    """Quadrature covariance of the two-mode squeezed vacuum by explicit operator algebra."""
    vec = two_mode_squeezed_vacuum(r, phase, cutoff)
    ap, am = two_mode_operators(cutoff)
    s = 1 / np.sqrt(2)
    quads = [
        s * (ap + ap.conj().T),
        -1j * s * (ap - ap.conj().T),
        s * (am + am.conj().T),
        -1j * s * (am - am.conj().T),
    ]
    applied = [op @ vec for op in quads]
    cov = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            # symmetrized <X_i X_j> of hermitian operators is Re<X_i X_j>
            cov[i, j] = np.vdot(applied[i], applied[j]).real
    means = np.array([np.vdot(vec, a).real for a in applied])
    cov -= np.outer(means, means)
    return QuadratureCovariance((cov + cov.T) / 2)
