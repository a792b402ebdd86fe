"""Ground-truth spectrum by dense diagonalization in a truncated Fock basis.

Basis index 2n + s, with n the photon number and s = 0 (sz = +1) or
s = 1 (sz = -1).  In this ordering every matrix element of H_R and H_eps is
real.  Parity is P = exp(i pi a^+a) sz, diagonal with entries (-1)^n (+-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LevelNotConverged, NoConvergenceOfEigensolver
from .series import ModelParams

N_FOCK_DEFAULT = 300
N_FOCK_LARGE_X = 500
CERT_EXTRA = 50
CERT_TOL = 1e-9
PARITY_THRESHOLD = 0.99


def build_matrix(params: ModelParams, n_fock: int) -> np.ndarray:
    """Real symmetric matrix of H = a^+a + g sx (a + a^+) + eps sx + Delta sz."""
    if n_fock < 1:
        raise ValueError("n_fock must be at least 1")
    g, d, eps = params.g, params.delta, params.epsilon
    dim = 2 * n_fock
    H = np.zeros((dim, dim))
    n = np.arange(n_fock)
    up, dn = 2 * n, 2 * n + 1
    H[up, up] = n + d
    H[dn, dn] = n - d
    H[up, dn] = H[dn, up] = eps
    # g sx (a + a^+): couples |n, s> with |n+1, -s>
    c = g * np.sqrt(n[:-1] + 1.0)
    H[up[:-1], dn[1:]] = H[dn[1:], up[:-1]] = c
    H[dn[:-1], up[1:]] = H[up[1:], dn[:-1]] = c
    return H


def parity_diagonal(n_fock: int) -> np.ndarray:
    n = np.arange(n_fock)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    return np.column_stack([sign, -sign]).ravel()


@dataclass(frozen=True)
class OracleResult:
    """Eigenvalues of the truncated Hamiltonian; only certified levels are exposed."""

    all_eigenvalues: np.ndarray = field(repr=False)
    all_parities: np.ndarray | None = field(repr=False)
    n_fock: int
    converged_count: int
    residuals: np.ndarray = field(repr=False, default=None)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.all_eigenvalues[:self.converged_count]

    @property
    def parity_labels(self) -> np.ndarray | None:
        if self.all_parities is None:
            return None
        return self.all_parities[:self.converged_count]

    def spectral(self, params: ModelParams) -> np.ndarray:
        """Certified levels as spectral parameters x = E + g^2."""
        return self.eigenvalues + params.g**2

    def sector(self, parity: str) -> np.ndarray:
        """Certified eigenvalues whose parity expectation has the requested sign."""
        labels = self.parity_labels
        if labels is None:
            raise ValueError("parity is not conserved for eps != 0")
        want = 1.0 if parity == "+" else -1.0
        return self.eigenvalues[labels * want > PARITY_THRESHOLD]

    @property
    def flagged(self) -> np.ndarray:
        """Indices of certified levels whose |<P>| falls below the labelling threshold."""
        labels = self.parity_labels
        if labels is None:
            return np.array([], dtype=int)
        return np.nonzero(np.abs(labels) < PARITY_THRESHOLD)[0]


def eigensolve(matrix: np.ndarray, check: np.ndarray | None = None, *,
               cert_tol: float = CERT_TOL) -> OracleResult:
    """Dense symmetric eigendecomposition with an optional truncation certificate.

    ``check`` is the same Hamiltonian at a larger truncation; the leading
    levels that agree with it to ``cert_tol`` are reported as converged.
    Without ``check`` every level counts as converged.
    """
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-14 * max(1.0, np.abs(matrix).max())):
        raise ValueError("matrix is not symmetric")
    try:
        w, v = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergenceOfEigensolver(str(exc)) from exc
    dim = matrix.shape[0]
    parities = None
    if dim % 2 == 0:
        P = parity_diagonal(dim // 2)
        parities = np.einsum("ij,i,ij->j", v, P, v)
    residuals = np.linalg.norm(matrix @ v - v * w, axis=0)
    count = dim
    if check is not None:
        w2 = np.linalg.eigvalsh(check)
        stable = np.abs(w - w2[:dim]) < cert_tol
        count = int(np.argmin(stable)) if not stable.all() else dim
    return OracleResult(all_eigenvalues=w, all_parities=parities, n_fock=dim // 2,
                        converged_count=count, residuals=residuals)


def solve(params: ModelParams, n_fock: int = N_FOCK_DEFAULT, *, extra: int = CERT_EXTRA,
          cert_tol: float = CERT_TOL) -> OracleResult:
    """Certified oracle spectrum: solve at ``n_fock`` and re-solve at ``n_fock + extra``."""
    res = eigensolve(build_matrix(params, n_fock), build_matrix(params, n_fock + extra),
                     cert_tol=cert_tol)
    if not params.symmetric:
        res = OracleResult(all_eigenvalues=res.all_eigenvalues, all_parities=None,
                           n_fock=res.n_fock, converged_count=res.converged_count,
                           residuals=res.residuals)
    return res


def sector_matrix(params: ModelParams, parity: str, n_fock: int) -> np.ndarray:
    """Block of H_R on the states with P = +1 or P = -1 (eps must vanish)."""
    if not params.symmetric:
        raise ValueError("parity sectors exist only for eps = 0")
    want = 1.0 if parity == "+" else -1.0
    keep = np.nonzero(parity_diagonal(n_fock) == want)[0]
    H = build_matrix(params, n_fock)
    return H[np.ix_(keep, keep)]


def sector_eigenvalues(params: ModelParams, parity: str, n_fock: int = N_FOCK_DEFAULT, *,
                       extra: int = CERT_EXTRA, cert_tol: float = CERT_TOL) -> np.ndarray:
    """Certified eigenvalues of one parity block, exact in parity even at degeneracies."""
    w = np.linalg.eigvalsh(sector_matrix(params, parity, n_fock))
    w2 = np.linalg.eigvalsh(sector_matrix(params, parity, n_fock + extra))
    stable = np.abs(w - w2[:len(w)]) < cert_tol
    count = int(np.argmin(stable)) if not stable.all() else len(w)
    return w[:count]


def degeneracy_gap(params: ModelParams, n: int, n_fock: int = N_FOCK_DEFAULT) -> float:
    """E_+ - E_- for the positive/negative-parity levels nearest to E = n - g^2.

    At a Juddian point both levels sit at E = n - g^2 and the gap vanishes;
    away from it the sign tells on which side of the crossing the couplings
    are.
    """
    target = n - params.g**2
    out = []
    for parity in ("+", "-"):
        levels = sector_eigenvalues(params, parity, n_fock)
        if len(levels) == 0 or levels[-1] < target:
            raise LevelNotConverged(f"no certified {parity} level reaches E = {target:.6g}")
        out.append(levels[np.argmin(np.abs(levels - target))])
    return float(out[0] - out[1])
