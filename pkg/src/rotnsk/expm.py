"""Batched matrix exponential and phi-functions for small dense matrices.

The exponential uses scaling and squaring around the diagonal Pade
approximant of degree 13 (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
Each matrix in the batch gets its own scaling exponent, so a batch mixing
tiny and huge norms is handled without over-squaring the small ones.

The phi-functions needed by exponential integrators are read off the
exponential of an augmented block matrix, which avoids dividing by a
possibly singular generator.
"""

from __future__ import annotations

import numpy as np

from .errors import ExpmOverflowError

_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152
_MAX_SQUARINGS = 1000


def expm(a: np.ndarray) -> np.ndarray:
    """Exponential of each matrix in a batch of shape ``(..., n, n)``.

    Raises
    ------
    ExpmOverflowError
        If the result is not finite.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    dtype = np.result_type(a.dtype, np.float64)
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    flat = a.reshape((-1, n, n)).astype(dtype, copy=True)

    norms = np.max(np.sum(np.abs(flat), axis=-2), axis=-1)
    if not np.all(np.isfinite(norms)):
        raise ExpmOverflowError("matrix entries are not finite")
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0.0).astype(int)
    if np.any(s > _MAX_SQUARINGS):
        worst = float(np.max(norms))
        raise ExpmOverflowError(f"matrix norm {worst:.3e} needs more than {_MAX_SQUARINGS} squarings")
    flat /= np.ldexp(1.0, s)[:, None, None]

    b = _PADE13
    ident = np.broadcast_to(np.eye(n, dtype=dtype), flat.shape)
    a2 = flat @ flat
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = flat @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)

    # Overflow during squaring is reported below as ExpmOverflowError.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(int(s.max(initial=0))):
            sel = s > k
            r[sel] = r[sel] @ r[sel]

    if not np.all(np.isfinite(r)):
        raise ExpmOverflowError(
            f"matrix exponential overflowed (largest 1-norm {float(np.max(norms)):.3e})"
        )
    return r.reshape(batch_shape + (n, n))


def exp_and_phi(a: np.ndarray, h: float, inject: np.ndarray | None = None):
    """Return ``exp(hA)``, ``h phi1(hA) E`` and ``h^2 phi2(hA) E``.

    ``E`` (``n x m``, default the identity) selects the columns through
    which forcing enters.  With ``phi1(z) = (e^z - 1)/z`` and
    ``phi2(z) = (e^z - 1 - z)/z^2`` the three blocks are read from the
    first block row of ``exp(h B)`` with

        B = [[A, E, 0],
             [0, 0, I],
             [0, 0, 0]].
    """
    a = np.asarray(a)
    n = a.shape[-1]
    if inject is None:
        inject = np.eye(n)
    m = inject.shape[-1]
    size = n + 2 * m
    dtype = np.result_type(a.dtype, np.float64)
    aug = np.zeros(a.shape[:-2] + (size, size), dtype=dtype)
    aug[..., :n, :n] = a
    aug[..., :n, n : n + m] = inject
    aug[..., n : n + m, n + m :] = np.eye(m)
    big = expm(h * aug)
    return big[..., :n, :n], big[..., :n, n : n + m], big[..., :n, n + m :]
