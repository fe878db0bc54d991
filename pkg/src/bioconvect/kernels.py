"""Transport-sweep kernels along discrete ordinates.

Each ordinate obeys ``|mu| dPsi/ds + (i k.nu + kappa n) Psi = Q`` along its
upwind coordinate ``s``. A cell of the grid is crossed with the exponential
integrator that is exact for a constant attenuation rate and a source
varying linearly across the cell:

    Psi_out = e^{-x} Psi_in + (h/|mu|) [(phi1 - phi2) Q_in + phi2 Q_out]

with ``x = (dtau + i k.nu h)/|mu|``, ``phi1 = (1 - e^{-x})/x`` and
``phi2 = (1 - phi1)/x``.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. ``BIOCONVECT_DISABLE_NUMBA=1`` selects the latter.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

_SERIES_RADIUS = 0.1


# --------------------------------------------------------------------------
# cell coefficients

def _phi_numpy(x):
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _SERIES_RADIUS
    xs = np.where(small, 0.0, x)
    safe = np.where(small, 1.0, xs)
    phi1 = np.where(small, 0.0, (1.0 - np.exp(-xs)) / safe)
    phi2 = np.where(small, 0.0, (1.0 - phi1) / safe)
    # series: phi1 = sum (-x)^m/(m+1)!, phi2 = sum (-x)^m/(m+2)!
    s1 = np.zeros_like(x)
    s2 = np.zeros_like(x)
    term = np.ones_like(x)
    fact1, fact2 = 1.0, 2.0
    for m in range(10):
        s1 = s1 + term / fact1
        s2 = s2 + term / fact2
        term = term * (-x)
        fact1 *= m + 2
        fact2 *= m + 3
    phi1 = np.where(small, s1, phi1)
    phi2 = np.where(small, s2, phi2)
    return phi1, phi2


@njit
def _phi_scalar(x):
    if abs(x) < 0.1:
        s1 = 0j
        s2 = 0j
        term = 1.0 + 0j
        f1 = 1.0
        f2 = 2.0
        for m in range(10):
            s1 += term / f1
            s2 += term / f2
            term = term * (-x)
            f1 *= m + 2
            f2 *= m + 3
        return s1, s2
    p1 = (1.0 - np.exp(-x)) / x
    return p1, (1.0 - p1) / x


def cell_coefficients(h, dtau, mu_abs, kv):
    """Per-cell (optical exponent x, inflow weight, outflow weight) arrays.

    Shapes broadcast as (n_ordinates, n_cells).
    """
    x = (dtau[None, :] + 1j * kv[:, None] * h[None, :]) / mu_abs[:, None]
    phi1, phi2 = _phi_numpy(x)
    scale = h[None, :] / mu_abs[:, None]
    return x, scale * (phi1 - phi2), scale * phi2


# --------------------------------------------------------------------------
# vector sweeps: Psi for given sources

@njit
def _sweep_apply_numba(h, dtau, mu, kv, Q):
    n_ord, n = Q.shape
    psi = np.zeros((n_ord, n), dtype=np.complex128)
    for o in range(n_ord):
        ma = abs(mu[o])
        if mu[o] > 0:
            for j in range(n - 1):
                x = (dtau[j] + 1j * kv[o] * h[j]) / ma
                p1, p2 = _phi_scalar(x)
                sc = h[j] / ma
                psi[o, j + 1] = np.exp(-x) * psi[o, j] + sc * ((p1 - p2) * Q[o, j] + p2 * Q[o, j + 1])
        else:
            for j in range(n - 1, 0, -1):
                x = (dtau[j - 1] + 1j * kv[o] * h[j - 1]) / ma
                p1, p2 = _phi_scalar(x)
                sc = h[j - 1] / ma
                psi[o, j - 1] = np.exp(-x) * psi[o, j] + sc * ((p1 - p2) * Q[o, j] + p2 * Q[o, j - 1])
    return psi


def _sweep_apply_numpy(h, dtau, mu, kv, Q):
    n_ord, n = Q.shape
    x, c, d = cell_coefficients(h, dtau, np.abs(mu), kv)
    E = np.exp(-x)
    psi = np.zeros((n_ord, n), dtype=complex)
    up = mu > 0
    dn = ~up
    for j in range(n - 1):
        psi[up, j + 1] = E[up, j] * psi[up, j] + c[up, j] * Q[up, j] + d[up, j] * Q[up, j + 1]
    for j in range(n - 1, 0, -1):
        psi[dn, j - 1] = (E[dn, j - 1] * psi[dn, j] + c[dn, j - 1] * Q[dn, j]
                          + d[dn, j - 1] * Q[dn, j - 1])
    return psi


def sweep_apply(h, dtau, mu, kv, Q, use_numba=None):
    """Solve every ordinate for sources ``Q`` (n_ordinates, n_nodes).

    ``h`` are cell widths, ``dtau`` the optical thickness of each cell,
    ``mu`` the direction cosines (sign selects the sweep direction) and
    ``kv`` the horizontal phase rate k.nu per ordinate. Inflow values are 0.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    args = (np.ascontiguousarray(h, dtype=float), np.ascontiguousarray(dtau, dtype=float),
            np.ascontiguousarray(mu, dtype=float), np.ascontiguousarray(kv, dtype=float),
            np.ascontiguousarray(Q, dtype=complex))
    if use_numba:
        return _sweep_apply_numba(*args)
    return _sweep_apply_numpy(*args)


# --------------------------------------------------------------------------
# operator sweeps: moments of the sweep matrices

@njit
def _sweep_moments_numba(h, dtau, mu, kv, Id, w0, wa):
    n_ord = mu.shape[0]
    n = h.shape[0] + 1
    K0 = np.zeros((n, n), dtype=np.complex128)
    K1 = np.zeros((n, n), dtype=np.complex128)
    KA0 = np.zeros((n, n), dtype=np.complex128)
    KA1 = np.zeros((n, n), dtype=np.complex128)
    row = np.zeros(n, dtype=np.complex128)
    for o in range(n_ord):
        ma = abs(mu[o])
        for i in range(n):
            row[i] = 0.0
        if mu[o] > 0:
            lo = 0
            for j in range(n - 1):
                x = (dtau[j] + 1j * kv[o] * h[j]) / ma
                p1, p2 = _phi_scalar(x)
                sc = h[j] / ma
                e = np.exp(-x)
                for l in range(lo, j + 1):
                    row[l] *= e
                row[j] += sc * (p1 - p2)
                row[j + 1] += sc * p2
                r = j + 1
                for l in range(0, j + 2):
                    v = row[l]
                    K0[r, l] += w0[o] * v
                    K1[r, l] += w0[o] * v * Id[o, l]
                    KA0[r, l] += wa[o] * v
                    KA1[r, l] += wa[o] * v * Id[o, l]
        else:
            for j in range(n - 1, 0, -1):
                x = (dtau[j - 1] + 1j * kv[o] * h[j - 1]) / ma
                p1, p2 = _phi_scalar(x)
                sc = h[j - 1] / ma
                e = np.exp(-x)
                for l in range(j, n):
                    row[l] *= e
                row[j] += sc * (p1 - p2)
                row[j - 1] += sc * p2
                r = j - 1
                for l in range(j - 1, n):
                    v = row[l]
                    K0[r, l] += w0[o] * v
                    K1[r, l] += w0[o] * v * Id[o, l]
                    KA0[r, l] += wa[o] * v
                    KA1[r, l] += wa[o] * v * Id[o, l]
    return K0, K1, KA0, KA1


def _upward_matrix(x, c, d):
    """Sweep matrix of one upward ordinate from its cell coefficients."""
    n = len(x) + 1
    lam = np.concatenate([[0.0], np.cumsum(x)])
    diff = lam[:, None] - lam[None, :]
    i, l = np.indices((n, n))
    # propagator from node l to node i (i >= l)
    P = np.exp(-np.where(i >= l, diff, np.inf))
    S = np.zeros((n, n), dtype=complex)
    # Q_l enters Psi_{l+1} with weight c_l, then propagates
    S[:, :-1] += P[:, 1:] * c[None, :]
    # Q_l enters Psi_l with weight d_{l-1}
    S[:, 1:] += P[:, 1:] * d[None, :]
    return S


def _sweep_moments_numpy(h, dtau, mu, kv, Id, w0, wa):
    n = len(h) + 1
    K0 = np.zeros((n, n), dtype=complex)
    K1 = np.zeros((n, n), dtype=complex)
    KA0 = np.zeros((n, n), dtype=complex)
    KA1 = np.zeros((n, n), dtype=complex)
    x, c, d = cell_coefficients(h, dtau, np.abs(mu), kv)
    for o in range(len(mu)):
        if mu[o] > 0:
            S = _upward_matrix(x[o], c[o], d[o])
        else:
            S = _upward_matrix(x[o, ::-1], c[o, ::-1], d[o, ::-1])[::-1, ::-1]
        K0 += w0[o] * S
        SI = S * Id[o][None, :]
        K1 += w0[o] * SI
        KA0 += wa[o] * S
        KA1 += wa[o] * SI
    return K0, K1, KA0, KA1


def sweep_moments(h, dtau, mu, kv, Id, w0, wa, use_numba=None):
    """Weighted sums of the per-ordinate sweep matrices ``S_o``.

    Returns ``(sum w0 S, sum w0 S diag(Id_o), sum wa S, sum wa S diag(Id_o))``
    where ``S_o`` maps a nodal source to the nodal solution of ordinate o.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    args = (np.ascontiguousarray(h, dtype=float), np.ascontiguousarray(dtau, dtype=float),
            np.ascontiguousarray(mu, dtype=float), np.ascontiguousarray(kv, dtype=float),
            np.ascontiguousarray(Id, dtype=float), np.ascontiguousarray(w0, dtype=float),
            np.ascontiguousarray(wa, dtype=float))
    if use_numba:
        return _sweep_moments_numba(*args)
    return _sweep_moments_numpy(*args)
