"""Fock-space state series and operator matrices.

Conventions used throughout the package:

* A truncation ``T`` keeps photon numbers ``0..T``, so amplitude arrays
  have ``T + 1`` entries.
* The squeeze operator is ``S(z) = exp((conj(z) a^2 - z adag^2) / 2)``.
* The displacement operator is ``D(beta) = exp(beta adag - conj(beta) a)``.
* The two-mode squeezer acting on vacuum gives amplitudes
  ``sech(r) * (-exp(i theta) tanh(r))^n`` on ``|n, n>``.
* The beam splitter of transmissivity ``T`` is
  ``exp(-i arccos(sqrt(T)) (exp(i phi) adag b + exp(-i phi) a bdag))``
  with ``phi = -pi/2``.

Displacement and squeeze matrices hold the true infinite-dimensional
matrix elements restricted to the kept block, computed by diagonalising
the generator on a padded space. Column norms below one therefore
measure exactly the population pushed above the cutoff.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

log = logging.getLogger(__name__)

_QUANT = 1e-12


def _qkey(x: float) -> int:
    """Quantise a real parameter for cache keys (resolution 1e-12)."""
    return int(round(x / _QUANT))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# state amplitude series


def fock_amplitudes(n: int, truncation: int) -> np.ndarray:
    """Amplitudes of the number state ``|n>``."""
    if n < 0 or n > truncation:
        raise ValueError(f"fock index {n} outside 0..{truncation}")
    c = np.zeros(truncation + 1, dtype=complex)
    c[n] = 1.0
    return c


def coherent_amplitudes(alpha: complex, truncation: int) -> np.ndarray:
    """Amplitudes of ``|alpha>``, exact up to the cutoff (norm may be < 1)."""
    c = np.zeros(truncation + 1, dtype=complex)
    c[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(truncation):
        c[n + 1] = c[n] * alpha / np.sqrt(n + 1)
    return c


def squeezed_vacuum_amplitudes(z: complex, truncation: int) -> np.ndarray:
    """Amplitudes of ``S(z)|0>``; only even photon numbers are populated."""
    r, th = abs(z), np.angle(z)
    c = np.zeros(truncation + 1, dtype=complex)
    c[0] = 1 / np.sqrt(np.cosh(r))
    step = -np.exp(1j * th) * np.tanh(r)
    for k in range(1, truncation // 2 + 1):
        c[2 * k] = c[2 * k - 2] * step * np.sqrt((2 * k - 1) / (2 * k))
    return c


def two_mode_squeezed_amplitudes(z: complex, truncation: int) -> np.ndarray:
    """Joint amplitudes of the two-mode squeezed vacuum as a 2-D array."""
    r, th = abs(z), np.angle(z)
    amps = np.zeros((truncation + 1, truncation + 1), dtype=complex)
    f = 1 / np.cosh(r)
    step = -np.exp(1j * th) * np.tanh(r)
    for n in range(truncation + 1):
        amps[n, n] = f
        f = f * step
    return amps


# ---------------------------------------------------------------------------
# single-mode operator matrices
#
# Both generators are gauged to real antisymmetric tridiagonal form, so the
# exponential follows from one real symmetric tridiagonal eigenproblem on a
# padded space. The padding is sized so the kept block is converged to
# machine precision (checked against independent oracles in the test suite).


def _displacement_build(re: int, im: int, truncation: int) -> np.ndarray:
    beta = complex(re, im) * _QUANT
    d = truncation + 1
    r, phi = abs(beta), np.angle(beta)
    if r == 0:
        return _readonly(np.eye(d, dtype=complex))
    pad = int(np.ceil(8 * r * np.sqrt(d) + 4 * r * r)) + 64
    P = d + pad
    s = r * np.sqrt(np.arange(1.0, P))
    lam, V = eigh_tridiagonal(np.zeros(P), s)
    n = np.arange(P)
    g = np.exp(1j * n * phi) * (1j ** n)
    M = (g[:d, None] * V[:d]) @ (np.exp(-1j * lam)[:, None] * (V.T * g.conj()[None, :]))
    return _readonly(M[:, :d])


def _squeeze_build(re: int, im: int, truncation: int) -> np.ndarray:
    z = complex(re, im) * _QUANT
    d = truncation + 1
    r, th = abs(z), np.angle(z)
    if r == 0:
        return _readonly(np.eye(d, dtype=complex))
    # padding follows the photon-number growth factor cosh(2r)
    P = int(np.ceil(d * np.cosh(2 * r))) + 128
    out = np.zeros((d, d), dtype=complex)
    for parity in (0, 1):
        ns = np.arange(parity, P, 2)
        c = 0.5 * np.sqrt((ns[:-1] + 1.0) * (ns[:-1] + 2.0))
        lam, V = eigh_tridiagonal(np.zeros(ns.size), r * c)
        k = np.arange(ns.size)
        g = np.exp(1j * k * (th + np.pi)) * (1j ** k)
        keep = ns < d
        M = (g[keep, None] * V[keep]) @ (
            np.exp(-1j * lam)[:, None] * (V.T[:, keep] * g.conj()[None, keep])
        )
        out[np.ix_(ns[keep], ns[keep])] = M
    return _readonly(out)


@lru_cache(maxsize=512)
def _matrix_cache(kind: str, re: int, im: int, truncation: int) -> np.ndarray:
    if kind == "displacement":
        return _displacement_build(re, im, truncation)
    if kind == "squeeze":
        return _squeeze_build(re, im, truncation)
    raise ValueError(f"unknown operator kind {kind!r}")


def displacement_matrix(beta: complex, truncation: int) -> np.ndarray:
    """Matrix of ``D(beta)`` on photon numbers ``0..truncation``.

    Returns a read-only cached array. Cache entries are keyed by the
    operator kind, the parameters quantised to 1e-12 and the truncation;
    lookups are safe from multiple threads and inserts are serialised.
    """
    return _matrix_cache("displacement", _qkey(beta.real), _qkey(beta.imag), truncation)


def squeeze_matrix(z: complex, truncation: int) -> np.ndarray:
    """Matrix of ``S(z)`` on photon numbers ``0..truncation`` (read-only, cached)."""
    return _matrix_cache("squeeze", _qkey(z.real), _qkey(z.imag), truncation)


def phase_factors(theta: float, truncation: int) -> np.ndarray:
    """Diagonal of the phase shifter ``exp(i theta n)``."""
    return np.exp(1j * theta * np.arange(truncation + 1))


# ---------------------------------------------------------------------------
# beam splitter
#
# Total photon number is conserved, so the action decomposes over
# anti-diagonals of the joint amplitude array. Each block is gauged to a
# parameter-free real symmetric tridiagonal matrix whose eigensystem is
# cached; the transmissivity only enters through the rotation angle.


@lru_cache(maxsize=None)
def _bs_block(n: int):
    if n == 0:
        return np.zeros(1), np.eye(1)
    k = np.arange(n)
    off = np.sqrt((k + 1) * (n - k))
    return eigh_tridiagonal(np.zeros(n + 1), off)


def beamsplitter_apply(amps: np.ndarray, transmissivity: float) -> np.ndarray:
    """Apply the beam splitter to a joint two-mode amplitude array.

    Blocks with total photon number above the cutoff are rotated exactly
    and then cropped, so any norm deficit of the result is a true
    truncation leak.
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must be in [0, 1]")
    d = amps.shape[0]
    theta = np.arccos(np.sqrt(transmissivity))
    out = np.zeros_like(amps, dtype=complex)
    for n in range(2 * d - 1):
        lo, hi = max(0, n - d + 1), min(n, d - 1)
        ks = np.arange(lo, hi + 1)
        vec = np.zeros(n + 1, dtype=complex)
        vec[ks] = amps[ks, n - ks]
        ph = 1j ** np.arange(n + 1)
        lam, V = _bs_block(n)
        rot = ph.conj() * (V @ (np.exp(-1j * theta * lam) * (V.T @ (ph * vec))))
        out[ks, n - ks] = rot[ks]
    return out


# ---------------------------------------------------------------------------
# cubic phase


@lru_cache(maxsize=8)
def _position_cubed_eigensystem(dim: int):
    """Eigensystem of ``q^3`` with ``q = (a + adag)/sqrt(2)`` on a dim-dim block."""
    up = np.diag(np.sqrt(np.arange(1.0, dim)), 1)
    q = (up + up.T) / np.sqrt(2)
    lam, V = eigh(q @ q @ q)
    return _readonly(lam), _readonly(V)


def cubic_phase_apply(gamma: float, amps: np.ndarray, pad: int = 80):
    """Apply ``exp(i gamma q^3)`` to single-mode amplitudes.

    The operator is evaluated on a padded space, then cropped back.
    Returns ``(new_amps, loss)`` where ``loss`` is the squared norm left
    above the cutoff; the result is not renormalised.
    """
    d = amps.size
    lam, V = _position_cubed_eigensystem(d + pad)
    v = np.zeros(d + pad, dtype=complex)
    v[:d] = amps
    w = V @ (np.exp(1j * gamma * lam) * (V.T @ v))
    loss = float(np.sum(np.abs(w[d:]) ** 2))
    if loss > 1e-12:
        log.debug("cubic phase gamma=%g lost %.3e above cutoff %d", gamma, loss, d - 1)
    return w[:d], loss
