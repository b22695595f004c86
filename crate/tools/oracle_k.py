"""Reference values for the power and logarithm constants of the 1D
fractional Laplacian, at 30 digits with mpmath.

k(a, s) is computed twice: from the Gamma-function closed form and by direct
quadrature of the principal-value integral at x = 1. The quadrature column is
the one frozen in crates/core/src/oracle.rs.
"""
from mpmath import binomial, gamma, inf, mp, mpf, pi, quad, sqrt

mp.dps = 30

PAIRS = [(0.4, 0.75), (0.1, 0.6), (0.25, 0.55), (0.3, 0.9), (0.5, 0.8), (0.9, 0.7),
         (1.2, 0.8), (0.6, 0.65), (0.2, 0.3), (0.3, 0.5), (mpf(1) / 3, 0.8), (0.6, 0.9)]
ORDERS = [0.55, 0.6, 0.75, 0.8, 0.9]


def norm(s):
    return s * 4**s * gamma(mpf(1) / 2 + s) / (sqrt(pi) * gamma(1 - s))


def k_closed(a, s):
    return 2**(2 * s) * gamma((1 + a) / 2) * gamma((2 * s - a) / 2) / (gamma((1 + a - 2 * s) / 2) * gamma(-a / 2))


def k_pv(a, s):
    # near z = 0 the second difference cancels; expand it in z instead
    def near(z):
        total, k = mpf(0), 1
        while True:
            term = binomial(a, 2 * k) * z**(2 * k - 1 - 2 * s)
            total += term
            if abs(term) < mpf(10)**(-mp.dps) * abs(total):
                return -2 * total
            k += 1

    far = lambda z: (2 - (1 + z)**a - abs(1 - z)**a) / z**(1 + 2 * s)
    inner = quad(near, [0, mpf(1) / 4, mpf(1) / 2])
    outer = quad(far, [mpf(1) / 2, 1, 2, 10, 100, inf])
    return norm(s) * (inner + outer)


def c_log(s):
    return 2**(2 * s - 2) * (2 * s - 1) * gamma(mpf(1) / 2) * gamma(s) / gamma((3 - 2 * s) / 2)


if __name__ == "__main__":
    print("alpha, s, k_closed, k_pv")
    for a, s in PAIRS:
        a, s = mpf(a), mpf(s)
        print(mp.nstr(a, 17), mp.nstr(s, 17), mp.nstr(k_closed(a, s), 17), mp.nstr(k_pv(a, s), 17))
    print("s, c_log, k(1e-8, s)/1e-8")
    for s in ORDERS:
        s = mpf(s)
        print(mp.nstr(s, 17), mp.nstr(c_log(s), 17), mp.nstr(k_closed(mpf("1e-8"), s) / mpf("1e-8"), 12))
