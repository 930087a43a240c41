"""Integrated light-noise modes, their canonical partners and squeezed light inputs.

The noise added to the atoms is ``N = T4 Y``. Its rows are only approximately
mutually commuting; squeezing is therefore carried out in an exactly canonical
mode basis spanning the same phase-space directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ContractViolation, SingularConfiguration
from .gaussian import symplectic_form
from .protocol import LinearMapResult


def _sigma_right(rows: np.ndarray) -> np.ndarray:
    """``rows @ sigma`` for the block form, without building the 2N x 2N matrix."""
    n = rows.shape[1] // 2
    return np.concatenate([-rows[:, n:], rows[:, :n]], axis=1)


def commutator_matrix(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """``A sigma B^T``; entry ``(i, j)`` is ``-i [a_i . Y, b_j . Y]``."""
    B = A if B is None else B
    n = A.shape[1] // 2
    return A[:, :n] @ B[:, n:].T - A[:, n:] @ B[:, :n].T


def _gram_blocks(T4: np.ndarray):
    G = T4 @ T4.T
    K = commutator_matrix(T4)
    return G, K


def _check_gram(G: np.ndarray):
    norms = np.diag(G)
    if np.any(norms <= 1e-14 * max(norms.max(initial=0.0), 1.0)):
        bad = [i for i, v in enumerate(norms) if v <= 1e-14 * max(norms.max(), 1.0)]
        raise SingularConfiguration(f"noise rows {bad} have vanishing norm")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise SingularConfiguration("noise rows are linearly dependent") from exc


def partner_coefficients(T4: np.ndarray) -> np.ndarray:
    """Coefficients ``C`` with partners ``= C @ (T4 sigma)``.

    The partner of row ``i`` is the symplectic dual ``t_i sigma`` with the
    components pairing it to the other rows removed; since ``t_i sigma (t_j sigma)^T
    = t_i t_j^T`` this amounts to orthogonalising against the Euclidean Gram
    matrix, done here in one solve (Cholesky, no pivoting, row order preserved).
    """
    G, _ = _gram_blocks(T4)
    _check_gram(G)
    L = np.linalg.cholesky(G)
    Linv = np.linalg.solve(L, np.eye(len(G)))
    return Linv.T @ Linv


def complete_canonical_partners(T4: np.ndarray) -> np.ndarray:
    """Return ``T8 = [T4; T4']`` with ``[N_i, N'_j] = i delta_ij`` exactly.

    Raises :class:`SingularConfiguration` for a zero-norm or dependent row.
    """
    T4 = np.asarray(T4, dtype=float)
    if T4.ndim != 2 or T4.shape[1] % 2:
        raise ContractViolation(f"transfer matrix must be k x 2N, got {T4.shape}")
    C = partner_coefficients(T4)
    return np.vstack([T4, C @ _sigma_right(T4)])


def orthosymplectic_basis(T4: np.ndarray) -> np.ndarray:
    """Symplectic Gram-Schmidt over ``span(T4, T4 sigma)`` in the order of the rows.

    Each row is orthogonalised (Euclidean, which here coincides with symplectic
    orthogonality) against the pairs fixed so far and normalised; its partner is
    ``e sigma``. Returns ``W`` (``2k x 2N``, rows ``n_1..n_k, n'_1..n'_k``) with
    ``W W^T = 1`` and ``W sigma W^T = sigma_k``.
    """
    T4 = np.asarray(T4, dtype=float)
    k = T4.shape[0]
    G, K = _gram_blocks(T4)
    # span basis B = [T4; T4 sigma]; inner products and sigma-action in coefficient space
    gram = np.block([[G, -K], [K, G]])
    right_sigma = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
    scale = max(np.trace(G), 1e-300)
    es, fs = [], []
    for i in range(k):
        v = np.zeros(2 * k)
        v[i] = 1.0
        for e, f in zip(es, fs):
            v = v - (v @ gram @ e) * e - (v @ gram @ f) * f
        nrm2 = v @ gram @ v
        if nrm2 <= 1e-14 * scale:
            raise SingularConfiguration(f"noise row {i} lies in the span of earlier modes")
        v = v / np.sqrt(nrm2)
        es.append(v)
        fs.append(v @ right_sigma)
    coeff = np.array(es + fs)
    return coeff @ np.vstack([T4, _sigma_right(T4)])


class LightCovariance:
    """Covariance of the input light, possibly too large to hold densely."""

    dim: int

    def congruence(self, T: np.ndarray) -> np.ndarray:
        """``T Gamma_L T^T``."""
        raise NotImplementedError

    def toarray(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ProductLightCovariance(LightCovariance):
    """Independent slices with variances ``x_var`` and ``p_var`` (scalars or length-N arrays)."""

    slices: int
    x_var: object = 1.0
    p_var: object = 1.0

    @property
    def dim(self) -> int:
        return 2 * self.slices

    def diagonal(self) -> np.ndarray:
        n = self.slices
        return np.concatenate([np.broadcast_to(self.x_var, (n,)), np.broadcast_to(self.p_var, (n,))]).astype(float)

    def congruence(self, T: np.ndarray) -> np.ndarray:
        return (T * self.diagonal()) @ T.T

    def toarray(self) -> np.ndarray:
        return np.diag(self.diagonal())

    @classmethod
    def vacuum(cls, slices: int) -> "ProductLightCovariance":
        return cls(slices)

    @classmethod
    def squeezed_x(cls, slices: int, r: float) -> "ProductLightCovariance":
        """Every slice squeezed in the measured ``x`` quadrature."""
        return cls(slices, np.exp(-r), np.exp(r))


@dataclass(frozen=True)
class ModeSqueezedLight(LightCovariance):
    """Vacuum everywhere except the modes ``W`` (orthosymplectic rows), squeezed by ``r``.

    ``Gamma = 1 + W^T (Lambda - 1) W`` with ``Lambda = diag(e^-r 1_k, e^r 1_k)``.
    """

    W: np.ndarray
    r: float

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def mode_variances(self) -> np.ndarray:
        k = self.W.shape[0] // 2
        return np.r_[np.full(k, np.exp(-self.r)), np.full(k, np.exp(self.r))]

    def congruence(self, T: np.ndarray) -> np.ndarray:
        P = T @ self.W.T
        return T @ T.T + (P * (self.mode_variances() - 1.0)) @ P.T

    def toarray(self) -> np.ndarray:
        return np.eye(self.dim) + (self.W.T * (self.mode_variances() - 1.0)) @ self.W


def squeezed_input_covariance(T8: np.ndarray, r: float) -> ModeSqueezedLight:
    """Light input with the integrated noise modes squeezed by ``r`` (``n`` by ``e^-r``).

    The modes are built by :func:`orthosymplectic_basis` from the noise rows of
    ``T8`` (its upper half); the complement stays in vacuum. Use ``.toarray()``
    for the dense ``2N x 2N`` matrix.
    """
    if r < 0:
        raise ContractViolation("squeezing parameter must be non-negative; relabel modes instead")
    T8 = np.asarray(T8, dtype=float)
    if T8.shape[0] % 2:
        raise ContractViolation("T8 must have an even number of rows")
    k = T8.shape[0] // 2
    return ModeSqueezedLight(orthosymplectic_basis(T8[:k]), float(r))


def noise_covariance(result, light_cov) -> np.ndarray:
    """``Gamma_noise = T4 Gamma_L T4^T`` for a :class:`LinearMapResult` (or a raw ``T4``)."""
    T4 = result.T_noise if isinstance(result, LinearMapResult) else np.asarray(result, dtype=float)
    if isinstance(light_cov, LightCovariance):
        if light_cov.dim != T4.shape[1]:
            raise ContractViolation(f"light covariance of dim {light_cov.dim} vs {T4.shape[1]} columns")
        out = light_cov.congruence(T4)
    else:
        light_cov = np.asarray(light_cov, dtype=float)
        if light_cov.shape != (T4.shape[1], T4.shape[1]):
            raise ContractViolation(f"light covariance of shape {light_cov.shape} vs {T4.shape[1]} columns")
        out = T4 @ light_cov @ T4.T
    return 0.5 * (out + out.T)


class NoiseDecomposition:
    """Integrated-noise analysis of one realised map.

    Built from ``T4`` alone; partners, the canonical mode basis and the
    ``alpha``/``beta`` split are computed lazily so that degenerate maps
    (e.g. no coupling at all) can still report their noise covariance.
    """

    def __init__(self, T4: np.ndarray, epsilon: float = float("nan")):
        T4 = np.asarray(T4, dtype=float)
        if T4.ndim != 2 or T4.shape[0] != 4 or T4.shape[1] % 2:
            raise ContractViolation(f"T4 must be 4 x 2N, got {T4.shape}")
        self.T4 = T4
        self.epsilon = epsilon

    @cached_property
    def is_trivial(self) -> bool:
        return not np.any(self.T4)

    @cached_property
    def T8(self) -> np.ndarray:
        return complete_canonical_partners(self.T4)

    @cached_property
    def sigma_dt(self) -> np.ndarray:
        return commutator_matrix(self.T8)

    @property
    def deviation(self) -> float:
        return float(np.max(np.abs(self.sigma_dt - symplectic_form(4, "block"))))

    @property
    def noise_commutators(self) -> np.ndarray:
        """``-i [N_i, N_j]`` for the four integrated noise operators."""
        return commutator_matrix(self.T4)

    @cached_property
    def mode_basis(self) -> np.ndarray:
        return orthosymplectic_basis(self.T4)

    @cached_property
    def mode_projection(self) -> np.ndarray:
        """``T4 W^T``: noise operators expressed in the canonical modes ``(n, n')``."""
        if self.is_trivial:
            return np.zeros((4, 8))
        return self.T4 @ self.mode_basis.T

    def covariance(self, r: float = 0.0) -> np.ndarray:
        """Atomic noise covariance when the canonical modes are squeezed by ``r``."""
        P = self.mode_projection
        lam = np.r_[np.full(4, np.exp(-r)), np.full(4, np.exp(r))]
        out = (P * lam) @ P.T + self._residual
        return 0.5 * (out + out.T)

    @cached_property
    def _residual(self) -> np.ndarray:
        # part of T4 outside span(W) is zero up to rounding; keep it for exactness
        if self.is_trivial:
            return np.zeros((4, 4))
        P = self.mode_projection
        return self.T4 @ self.T4.T - P @ P.T

    @cached_property
    def _alpha_beta(self):
        g0 = self.covariance(0.0)
        g1 = self.covariance(1.0)
        _, U = np.linalg.eigh(g0)
        y0 = np.einsum("ij,jk,ki->i", U.T, g0, U)
        y1 = np.einsum("ij,jk,ki->i", U.T, g1, U)
        A = np.array([[1.0, 1.0], [np.exp(-1.0), np.exp(1.0)]])
        coef, *_ = np.linalg.lstsq(A, np.vstack([y0, y1]), rcond=None)
        return coef[0], coef[1], U

    @property
    def alpha(self) -> np.ndarray:
        return self._alpha_beta[0]

    @property
    def beta(self) -> np.ndarray:
        return self._alpha_beta[1]

    @property
    def principal_directions(self) -> np.ndarray:
        return self._alpha_beta[2]


def integrated_noise(result: LinearMapResult) -> NoiseDecomposition:
    """Wrap the transfer matrix of a protocol run for noise analysis."""
    T4 = np.asarray(result.T_noise, dtype=float)
    if not np.all(np.isfinite(T4)):
        raise ContractViolation("transfer matrix contains non-finite entries")
    return NoiseDecomposition(T4, result.config.epsilon)
