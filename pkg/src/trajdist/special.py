r"""Bessel functions of the first kind for integer and half-integer order.

Integer orders use Miller's downward recurrence normalised with the
Neumann sum :math:`J_0 + 2\sum_k J_{2k} = 1`. Half-integer orders go through
the spherical Bessel functions :math:`j_n`, recurring upward where the order
is below the argument and downward (Miller, normalised on :math:`j_0` or
:math:`j_1`) above it. Small arguments use the ascending series.

Everything is vectorised over the argument. The ``*_sequence`` functions
return a whole ladder of orders from one sweep, which is how the hopping
model evaluates many series terms at once.
"""

import math

import numpy as np

__all__ = [
    "bessel_J",
    "bessel_J_sequence",
    "normalized_bessel_sequence",
    "bessel_generating",
]

_BIG = 1e250
_SMALL = 1e-250


def _start_order(nmax, xmax):
    m = max(nmax, int(xmax)) + 20 + int(math.sqrt(40.0 * max(nmax, xmax, 1.0)))
    return m + (m % 2)


def _series_sequence(nu0, nmax, x):
    """Ascending series for J_{nu0+n}(x), n = 0..nmax, accurate for small x."""
    out = np.empty((nmax + 1, x.size))
    q = -0.25 * x * x
    for n in range(nmax + 1):
        nu = nu0 + n
        term = np.ones_like(x)
        total = np.ones_like(x)
        for m in range(1, 60):
            term = term * q / (m * (nu + m))
            total = total + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        if nu == 0:
            pre = 1.0
        else:
            # log(x) - log 2 rather than log(x / 2): x / 2 underflows for subnormal x
            with np.errstate(divide="ignore"):
                pre = np.exp(nu * (np.log(x) - math.log(2.0)) - math.lgamma(nu + 1.0))
        out[n] = pre * total
    return out


def _integer_sequence(nmax, x):
    """J_0..J_nmax at x >= 0 by Miller's algorithm (x > 0 entries only)."""
    out = np.zeros((nmax + 1, x.size))
    pos = x > 0
    out[0, ~pos] = 1.0
    if not np.any(pos):
        return out
    xp = x[pos]
    m = _start_order(nmax, float(xp.max()))
    jp1 = np.zeros_like(xp)
    jk = np.full_like(xp, 1e-30)
    norm = np.zeros_like(xp)
    acc = np.zeros((nmax + 1, xp.size))
    for k in range(m, 0, -1):
        # jk holds J_k, jp1 holds J_{k+1}
        if k <= nmax:
            acc[k] = jk
        if k % 2 == 0:
            norm += 2.0 * jk
        jm1 = (2.0 * k / xp) * jk - jp1
        jp1, jk = jk, jm1
        big = np.abs(jk) > _BIG
        if np.any(big):
            jk[big] *= _SMALL
            jp1[big] *= _SMALL
            norm[big] *= _SMALL
            acc[:, big] *= _SMALL
    acc[0] = jk
    norm += jk
    out[:, pos] = acc / norm
    return out


def _spherical_sequence(nmax, x):
    """Spherical j_0..j_nmax at x > 0."""
    nx = x.size
    s, c = np.sin(x), np.cos(x)
    j0 = s / x
    j1 = s / x**2 - c / x
    up = np.empty((nmax + 1, nx))
    up[0] = j0
    if nmax >= 1:
        up[1] = j1
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            up[n + 1] = (2 * n + 1) / x * up[n] - up[n - 1]
    if nmax < 2 or np.all(x > nmax):
        return up

    m = _start_order(nmax, float(x.max()))
    fp1 = np.zeros(nx)
    fk = np.full(nx, 1e-30)
    down = np.zeros((nmax + 1, nx))
    for k in range(m, 0, -1):
        if k <= nmax:
            down[k] = fk
        fm1 = (2 * k + 1) / x * fk - fp1
        fp1, fk = fk, fm1
        big = np.abs(fk) > _BIG
        if np.any(big):
            fk[big] *= _SMALL
            fp1[big] *= _SMALL
            down[:, big] *= _SMALL
    down[0] = fk
    # normalise on whichever of j0, j1 is farther from a zero
    use0 = np.abs(j0) >= np.abs(j1)
    scale = np.where(use0, j0 / np.where(use0, down[0], 1.0), j1 / np.where(use0, 1.0, down[1]))
    down *= scale
    order = np.arange(nmax + 1)[:, None]
    return np.where(order < x[None, :], up, down)


def bessel_J_sequence(nu0, nmax, x):
    r"""Return :math:`J_{\nu_0+n}(x)` for ``n = 0..nmax``.

    Parameters
    ----------
    nu0 : {0, 0.5}
        Lowest order of the ladder; integer ladders start at 0 and
        half-integer ladders at 1/2.
    nmax : int
        Number of steps up the ladder.
    x : array_like
        Non-negative arguments.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(nmax + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    if np.any(xf < 0):
        raise ValueError("bessel_J_sequence requires x >= 0")
    if nu0 not in (0, 0.5):
        raise ValueError("nu0 must be 0 or 0.5")
    out = np.empty((nmax + 1, xf.size))
    # series region: no cancellation when x^2/4 is small against the order
    small = xf * xf <= 4.0 * (nu0 + 1.0) * 0.5
    if np.any(small):
        out[:, small] = _series_sequence(nu0, nmax, xf[small])
    rest = ~small
    if np.any(rest):
        xr = xf[rest]
        if nu0 == 0:
            out[:, rest] = _integer_sequence(nmax, xr)
        else:
            out[:, rest] = _spherical_sequence(nmax, xr) * np.sqrt(2.0 * xr / np.pi)
    return out.reshape((nmax + 1,) + shape)


def bessel_J(order, x):
    r"""Bessel function :math:`J_\nu(x)` for integer or half-integer ``order``.

    Negative integer orders and negative arguments (integer orders only)
    are reduced through :math:`J_{-n} = (-1)^n J_n` and
    :math:`J_n(-x) = (-1)^n J_n(x)`.

    Examples
    --------
    >>> float(bessel_J(0, 0.0))
    1.0
    >>> round(float(bessel_J(0.5, np.pi / 2)), 12)  # sqrt(2/(pi x)) sin x
    0.636619772368
    """
    x = np.asarray(x, dtype=float)
    two_nu = 2.0 * float(order)
    if abs(two_nu - round(two_nu)) > 1e-12:
        raise ValueError(f"order must be integer or half-integer, got {order}")
    two_nu = int(round(two_nu))
    if two_nu % 2 == 0:
        n = two_nu // 2
        sign = 1.0
        if n < 0:
            n = -n
            sign = -1.0 if n % 2 else 1.0
        xs = np.abs(x)
        xsign = np.where((x < 0) & (n % 2 == 1), -1.0, 1.0)
        val = bessel_J_sequence(0, n, xs)[n]
        return sign * xsign * val
    if two_nu < 0:
        raise ValueError("negative half-integer orders are not supported")
    if np.any(x < 0):
        raise ValueError("half-integer orders require x >= 0")
    n = (two_nu - 1) // 2
    return bessel_J_sequence(0.5, n, x)[n]


def normalized_bessel_sequence(nu0, nmax, z):
    r"""Return :math:`\Gamma(\nu+1)(2/z)^\nu J_\nu(z)` for ``nu = nu0..nu0+nmax``.

    This is the Bessel function divided by its small-argument leading term,
    so it equals 1 at ``z = 0`` for every order and is bounded by 1.
    """
    z = np.abs(np.asarray(z, dtype=float))
    shape = z.shape
    zf = z.ravel()
    out = np.empty((nmax + 1, zf.size))
    orders = nu0 + np.arange(nmax + 1)
    z2 = zf * zf
    q = -0.25 * z2
    # per order: series while z^2 <= 8(nu+1) (terms shrink fast, no overflow)
    series = z2[None, :] <= 8.0 * (orders[:, None] + 1.0)
    for i, nu in enumerate(orders):
        mask = series[i]
        if not np.any(mask):
            continue
        qs = q[mask]
        term = np.ones_like(qs)
        total = np.ones_like(qs)
        for m in range(1, 120):
            term = term * qs / (m * (nu + m))
            total = total + term
            if np.all(np.abs(term) <= 1e-17):
                break
        out[i, mask] = total
    need = ~series
    cols = np.any(need, axis=0)
    if np.any(cols):
        zr = zf[cols]
        jv = bessel_J_sequence(nu0, nmax, zr)
        lg = np.array([math.lgamma(nu + 1.0) for nu in orders])[:, None]
        pre = np.exp(lg + orders[:, None] * np.log(2.0 / zr)[None, :])
        sub = out[:, cols]
        out[:, cols] = np.where(need[:, cols], pre * jv, sub)
    return out.reshape((nmax + 1,) + shape)


def bessel_generating(t, lam):
    r"""Moment generating function of the squared Bessel weights.

    :math:`F_t(\lambda) = \sum_n e^{i\lambda n} J_n(t)^2 = J_0(2t\sin(\lambda/2))`.
    """
    return bessel_J(0, 2.0 * np.asarray(t, dtype=float) * np.sin(0.5 * np.asarray(lam, dtype=float)))
