"""Complex Airy function and the rotated solutions of -u'' + i s u - lambda u = 0.

Ai is evaluated by one of four routes:

* the Maclaurin series, where its alternating sum does not cancel badly;
* the large-|z| expansion with correction terms, for |z| >= R_SWITCH;
* the three-solution connection formula near the negative real axis;
* Taylor continuation of the Airy equation inward along the ray from
  |z| = R_SWITCH, for the sector where Ai is small and the series
  loses its digits to cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

J = np.exp(2j * np.pi / 3)
ROT_A = np.exp(1j * np.pi / 6)
ROT_B = ROT_A * J
ROT_C = ROT_A * J * J

R_SWITCH = 7.5
# log of the tolerated cancellation factor in the series: |zeta| + Re(zeta)
SERIES_LOSS = 9.5
TAYLOR_STEP = 0.5
TAYLOR_TERMS = 32
ASYM_TERMS = 40

BRANCH_NAMES = {0: "series", 1: "asymptotic", 2: "connection", 3: "taylor"}


def _series_coefficients(r_max: float, floor: float = 1e-24):
    # a_n = Gamma((n+1)/3) sin(2(n+1)pi/3) 3^(n/3) / (n! pi 3^(2/3))
    sines = (math.sqrt(3) / 2, -math.sqrt(3) / 2, 0.0)
    coeffs = []
    n = 0
    log_norm = math.log(math.pi) + (2.0 / 3.0) * math.log(3.0)
    while True:
        s = sines[n % 3]
        log_mag = (math.lgamma((n + 1) / 3) + (n / 3) * math.log(3.0)
                   - math.lgamma(n + 1) - log_norm)
        coeffs.append(s * math.exp(log_mag))
        if n > 30 and log_mag + n * math.log(r_max) < math.log(floor):
            break
        n += 1
    return np.array(coeffs)


_SERIES = _series_coefficients(R_SWITCH)
_SERIES_D = _SERIES[1:] * np.arange(1, len(_SERIES))


def _asym_coefficients(k_max: int):
    u = [1.0]
    for k in range(1, k_max + 1):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k))
    u = np.array(u)
    k = np.arange(k_max + 1)
    v = u.copy()
    v[1:] = -(6 * k[1:] + 1) / (6 * k[1:] - 1) * u[1:]
    sign = (-1.0) ** k
    return sign * u, sign * v


_ASYM_U, _ASYM_V = _asym_coefficients(ASYM_TERMS)


def ai_series(z):
    """Maclaurin series of Ai and Ai'. Accurate where cancellation is mild."""
    z = np.asarray(z, dtype=complex)
    p = np.full(z.shape, _SERIES[-1], dtype=complex)
    for c in _SERIES[-2::-1]:
        p = p * z + c
    dp = np.full(z.shape, _SERIES_D[-1], dtype=complex)
    for c in _SERIES_D[-2::-1]:
        dp = dp * z + c
    return p, dp


def ai_asymptotic(z):
    """Large-|z| expansion, optimally truncated; valid for |arg z| < pi."""
    z = np.asarray(z, dtype=complex)
    zeta = (2.0 / 3.0) * z ** 1.5
    quarter = z ** 0.25
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi) * quarter)
    inv = 1.0 / zeta
    k_keep = np.floor(2.0 * np.abs(zeta)) - 1.0
    s = np.zeros(z.shape, dtype=complex)
    t = np.zeros(z.shape, dtype=complex)
    power = np.ones(z.shape, dtype=complex)
    for k in range(ASYM_TERMS + 1):
        use = k <= k_keep
        s = s + np.where(use, _ASYM_U[k] * power, 0.0)
        t = t + np.where(use, _ASYM_V[k] * power, 0.0)
        power = power * inv
    return pref * s, -pref * quarter * quarter * t


def _asym_or_connection(z):
    ai = np.empty(z.shape, dtype=complex)
    aip = np.empty(z.shape, dtype=complex)
    far = np.abs(np.angle(z)) > 2.0 * np.pi / 3.0
    near = ~far
    if near.any():
        ai[near], aip[near] = ai_asymptotic(z[near])
    if far.any():
        zf = z[far]
        a1, d1 = ai_asymptotic(J * zf)
        a2, d2 = ai_asymptotic(J * J * zf)
        ai[far] = -J * a1 - J * J * a2
        aip[far] = -J * J * d1 - J * d2
    return ai, aip, far


def _taylor_inward(z):
    """Continue (Ai, Ai') from radius R_SWITCH inward along the ray to z."""
    r = np.abs(z)
    start = z * (R_SWITCH / r)
    y, dy, _ = _asym_or_connection(start)
    dist = np.abs(start - z)
    n_steps = max(1, int(math.ceil(dist.max() / TAYLOR_STEP)))
    h = (z - start) / n_steps
    z0 = start
    for _ in range(n_steps):
        c = [y, dy]
        for k in range(TAYLOR_TERMS - 2):
            prev = c[k - 1] if k >= 1 else 0.0
            c.append((z0 * c[k] + prev) / ((k + 1) * (k + 2)))
        val = c[-1]
        der = (len(c) - 1) * c[-1]
        for k in range(len(c) - 2, 0, -1):
            val = val * h + c[k]
            der = der * h + k * c[k]
        y = val * h + c[0]
        dy = der
        z0 = z0 + h
    return y, dy


def ai_values(z):
    """Vectorized (Ai(z), Ai'(z), branch code)."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    ai = np.empty(z.shape, dtype=complex)
    aip = np.empty(z.shape, dtype=complex)
    branch = np.zeros(z.shape, dtype=int)
    r = np.abs(z)
    big = r >= R_SWITCH
    if big.any():
        a, d, far = _asym_or_connection(z[big])
        ai[big], aip[big] = a, d
        branch[big] = np.where(far, 2, 1)
    small = ~big
    if small.any():
        zs = z[small]
        zeta = (2.0 / 3.0) * zs ** 1.5
        lossy = (np.abs(zeta) + zeta.real) > SERIES_LOSS
        a = np.empty(zs.shape, dtype=complex)
        d = np.empty(zs.shape, dtype=complex)
        b = np.zeros(zs.shape, dtype=int)
        ok = ~lossy
        if ok.any():
            a[ok], d[ok] = ai_series(zs[ok])
        if lossy.any():
            a[lossy], d[lossy] = _taylor_inward(zs[lossy])
            b[lossy] = 3
        ai[small], aip[small], branch[small] = a, d, b
    return ai.reshape(shape), aip.reshape(shape), branch.reshape(shape)


@dataclass(frozen=True)
class AiryValue:
    z: complex
    ai: complex
    ai_prime: complex
    branch: str


def ai(z: complex) -> AiryValue:
    a, d, b = ai_values(np.array([z]))
    return AiryValue(complex(z), complex(a[0]), complex(d[0]), BRANCH_NAMES[int(b[0])])


@dataclass(frozen=True)
class RotatedPair:
    """The decaying/growing pair a(s) = Ai(e^{i pi/6}(s + i lam)), b(s) = Ai(e^{5i pi/6}(s + i lam)).

    Both solve u'' = (i s - lam) u; a decays and b grows as s -> +inf.
    Each evaluator returns (value, d/ds value).
    """
    lam: complex

    def _eval(self, rot, s):
        s = np.asarray(s)
        val, der, _ = ai_values(rot * (s + 1j * self.lam))
        return val, rot * der

    def a(self, s):
        return self._eval(ROT_A, s)

    def b(self, s):
        return self._eval(ROT_B, s)

    def c(self, s):
        return self._eval(ROT_C, s)

    def wronskian(self, s):
        av, ad = self.a(s)
        bv, bd = self.b(s)
        return av * bd - ad * bv


WRONSKIAN_AB = 1.0 / (2.0 * np.pi)


def rotated_pair(lam: complex) -> RotatedPair:
    # the three rotation factors cube to i
    for k, rot in enumerate((ROT_A, ROT_B, ROT_C)):
        if abs(rot ** 3 - 1j) > 1e-14:
            raise AssertionError(f"rotation {k} does not cube to i")
    return RotatedPair(complex(lam))


def product_modulus_check(lam: complex, t: float) -> float:
    """|a(t) b(t)| divided by its large-t asymptote |t + i lam|^(-1/2) / (4 pi)."""
    pair = RotatedPair(complex(lam))
    av, _ = pair.a(t)
    bv, _ = pair.b(t)
    return float(abs(av * bv) / (abs(t + 1j * lam) ** -0.5 / (4 * np.pi)))


def decompose_in_airy_basis(value, derivative, s, lam):
    """Coefficients (c_a, c_b) with value = c_a a(s) + c_b b(s), same for d/ds."""
    pair = RotatedPair(complex(lam))
    av, ad = pair.a(s)
    bv, bd = pair.b(s)
    c_a = (value * bd - derivative * bv) / WRONSKIAN_AB
    c_b = (av * derivative - ad * value) / WRONSKIAN_AB
    return c_a, c_b
