"""Special functions for the Matérn family.

The modified Bessel function of the second kind is evaluated in one of two
ways. Half-integer orders use the terminating closed form

    K_{n+1/2}(z) = sqrt(pi / (2 z)) e^{-z} sum_{k=0}^{n} (n+k)! / (k! (n-k)!) (2z)^{-k}.

Every other order goes through Temme's series for z < 2 and Steed's
continued fraction (Temme's CF2) for z >= 2, both evaluated at the reduced
order |mu| <= 1/2 and carried up to the target order by the (stable) forward
recurrence K_{mu+1}(z) = (2 mu / z) K_mu(z) + K_{mu-1}(z).

All routines accept a scalar order and scalar or array arguments.
"""

import enum
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "BesselEvalMode",
    "bessel_k",
    "bessel_k_scaled",
    "eval_mode",
    "half_integer_index",
    "log_gamma",
    "scaled_matern_radial",
    "SMALL_Z_THRESHOLD",
]

# Below this argument z^nu K_nu(z) is replaced by its z -> 0 expansion.
SMALL_Z_THRESHOLD = 1e-8

_EPS = np.finfo(float).eps
_MAXIT = 10000

# Taylor coefficients of 1 / Gamma(1 + x) about x = 0.
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
    1.7144063219273374334e-20,
)


class BesselEvalMode(enum.Enum):
    HALF_INTEGER = "half-integer closed form"
    NUMERIC = "series/asymptotic numeric"


def half_integer_index(nu):
    """Return n if nu == n + 1/2 for an integer n >= 0, else None."""
    n = nu - 0.5
    if n >= 0 and n == math.floor(n):
        return int(n)
    return None


def eval_mode(nu):
    if half_integer_index(nu) is not None:
        return BesselEvalMode.HALF_INTEGER
    return BesselEvalMode.NUMERIC


def log_gamma(x):
    """Natural logarithm of the Gamma function for positive finite x."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires a positive finite argument, got {x!r}")
    return math.lgamma(x)


def _check_order(nu):
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0.0:
        raise DomainError(f"Bessel order must be finite and >= 0, got {nu!r}")
    return nu


def _check_positive_args(z):
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(z <= 0.0):
        raise DomainError("Bessel argument must be positive and finite")
    return z


def _half_integer_poly(n, z):
    """sum_{k=0}^{n} (n+k)! / (k! (n-k)!) (2z)^{-k}, evaluated by Horner in 1/(2z)."""
    w = 1.0 / (2.0 * z)
    acc = np.zeros_like(z)
    for k in range(n, -1, -1):
        coef = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
        acc = acc * w + coef
    return acc


def _gamma_pieces(mu):
    """Temme's auxiliary quantities for |mu| <= 1/2.

    Returns (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) where
    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
    gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
    """
    mu2 = mu * mu
    even = 0.0
    for a in reversed(_RGAMMA1P[0::2]):
        even = even * mu2 + a
    odd = 0.0
    for a in reversed(_RGAMMA1P[1::2]):
        odd = odd * mu2 + a
    gampl = even + mu * odd
    gammi = even - mu * odd
    return -odd, even, gampl, gammi


def _temme_series(mu, z):
    """K_mu(z) and K_{mu+1}(z) for |mu| <= 1/2 and 0 < z < 2 (unscaled)."""
    gam1, gam2, gampl, gammi = _gamma_pieces(mu)
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(0.5 * z)
    e = mu * d
    small = np.abs(e) < _EPS
    safe_e = np.where(small, 1.0, e)
    fact2 = np.where(small, 1.0, np.sinh(safe_e) / safe_e)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(z)
    dd = 0.25 * z * z
    total1 = p.copy()
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = total + delta
        total1 = total1 + c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break
    return total, total1 * 2.0 / z


def _steed_cf2_scaled(mu, z):
    """e^z K_mu(z) and e^z K_{mu+1}(z) for |mu| <= 1/2 and z >= 2."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25 - mu * mu
    q = np.full_like(z, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAXIT):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < _EPS):
            break
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * z)) / s
    kmu1 = kmu * (mu + z + 0.5 - h) / z
    return kmu, kmu1


def _numeric_scaled(nu, z):
    """e^z K_nu(z) through the reduced order and forward recurrence."""
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu = np.empty_like(z)
    kmu1 = np.empty_like(z)
    lo = z < 2.0
    if np.any(lo):
        k0, k1 = _temme_series(mu, z[lo])
        scale = np.exp(z[lo])
        kmu[lo] = k0 * scale
        kmu1[lo] = k1 * scale
    hi = ~lo
    if np.any(hi):
        k0, k1 = _steed_cf2_scaled(mu, z[hi])
        kmu[hi] = k0
        kmu1[hi] = k1
    for i in range(1, nl + 1):
        knext = (mu + i) * (2.0 / z) * kmu1 + kmu
        kmu = kmu1
        kmu1 = knext
    return kmu


def _closed_form_scaled(n, z):
    return np.sqrt(math.pi / (2.0 * z)) * _half_integer_poly(n, z)


def bessel_k_scaled(nu, z, mode=None):
    """Exponentially scaled Bessel function e^z K_nu(z).

    Parameters
    ----------
    nu : float
        Order, nu >= 0.
    z : float or array_like
        Positive arguments.
    mode : BesselEvalMode, optional
        Force an evaluation path. The closed form is only valid for
        half-integer orders; by default it is used exactly for those.
    """
    nu = _check_order(nu)
    z_arr = _check_positive_args(z)
    flat = np.atleast_1d(z_arr).astype(float).ravel()
    if mode is None:
        mode = eval_mode(nu)
    if mode is BesselEvalMode.HALF_INTEGER:
        n = half_integer_index(nu)
        if n is None:
            raise DomainError(f"closed form requested for non-half-integer order {nu}")
        out = _closed_form_scaled(n, flat)
    else:
        out = _numeric_scaled(nu, flat)
    out = out.reshape(z_arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_k(nu, z, mode=None, full_output=False):
    """Modified Bessel function of the second kind K_nu(z) for real nu >= 0, z > 0.

    With ``full_output=True`` a second value is returned: a boolean (or boolean
    array) that is true where K_nu(z) underflowed to zero in double precision.
    """
    scaled = np.asarray(bessel_k_scaled(nu, z, mode=mode))
    z_arr = np.asarray(z, dtype=float)
    with np.errstate(under="ignore"):
        value = scaled * np.exp(-z_arr)
    underflow = (value == 0.0) & (scaled > 0.0)
    if value.ndim == 0:
        value = float(value)
        underflow = bool(underflow)
    if full_output:
        return value, underflow
    return value


def _radial_small_z(nu, z):
    """z^nu K_nu(z) for tiny z: the limit 2^{nu-1} Gamma(nu) plus its leading correction.

    For 0 < nu < 1 the leading correction is
    -Gamma(1 - nu) / (nu 2^{nu+1}) z^{2 nu}; for nu >= 1 it is O(z^2 log z)
    and below double resolution at these arguments.
    """
    limit = math.exp((nu - 1.0) * math.log(2.0) + math.lgamma(nu))
    if nu < 1.0:
        coef = math.gamma(1.0 - nu) / (nu * 2.0 ** (nu + 1.0))
        return limit - coef * z ** (2.0 * nu)
    return np.full_like(z, limit)


def scaled_matern_radial(nu, z):
    """Radial profile z^nu K_nu(z) of the Matérn kernel, extended to z = 0.

    At z = 0 the value is the limit 2^{nu-1} Gamma(nu).
    """
    nu = float(nu)
    if not math.isfinite(nu) or nu <= 0.0:
        raise DomainError(f"Matérn smoothness must be positive and finite, got {nu!r}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z_arr)) or np.any(z_arr < 0.0):
        raise DomainError("radial argument must be finite and non-negative")
    flat = np.atleast_1d(z_arr).ravel()
    out = np.empty_like(flat)
    n = half_integer_index(nu)
    if n is not None:
        # sqrt(pi/2) e^{-z} sum_k c_k z^{n-k} 2^{-k}, exact down to z = 0
        acc = np.zeros_like(flat)
        for k in range(n + 1):
            coef = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k)) / 2.0**k
            acc = acc * flat + coef
        out[:] = math.sqrt(math.pi / 2.0) * np.exp(-flat) * acc
    else:
        tiny = flat < SMALL_Z_THRESHOLD
        if np.any(tiny):
            out[tiny] = _radial_small_z(nu, flat[tiny])
        rest = ~tiny
        if np.any(rest):
            zr = flat[rest]
            scaled = _numeric_scaled(nu, zr)
            with np.errstate(under="ignore"):
                out[rest] = np.exp(nu * np.log(zr) - zr) * scaled
    out = out.reshape(z_arr.shape)
    return float(out) if out.ndim == 0 else out
