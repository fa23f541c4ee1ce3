"""Reference values for E_{a,b}(z), z <= 0.

Two independent multiprecision routes: the defining power series evaluated
at high working precision, and mpmath's fixed-Talbot inverse Laplace
transform of s^(a-b)/(s^a - z) at t = 1. A value is emitted only when both
routes agree to 1e-20.
"""
import mpmath as mp

mp.mp.dps = 60


def ml_series(a, b, z):
    a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
    with mp.workdps(60 + int(abs(z)) * 2):
        s = mp.mpf(0)
        k = 0
        while True:
            term = z**k / mp.gamma(a * k + b)
            s += term
            if k > 10 and abs(term) < mp.mpf(10) ** (-40) * max(abs(s), mp.mpf(10) ** -30):
                break
            k += 1
            if k > 20000:
                return None
        return s


def ml_talbot(a, b, z):
    a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
    f = lambda s: s ** (a - b) / (s**a - z)
    return mp.invertlaplace(f, 1, method="talbot")


cases = []
for a in ["0.3", "0.5", "0.6", "0.8", "0.9", "0.95", "0.99"]:
    af = mp.mpf(a)
    for b in ["1", "a+1", "2a+1", "2"]:
        bf = {"1": mp.mpf(1), "a+1": af + 1, "2a+1": 2 * af + 1, "2": mp.mpf(2)}[b]
        for z in ["-0.3", "-1", "-3", "-7", "-10", "-20", "-50", "-100"]:
            s = ml_series(af, bf, mp.mpf(z))
            t = ml_talbot(af, bf, mp.mpf(z))
            ok = s is not None and abs(s - t) <= mp.mpf("1e-20") * abs(s)
            if ok:
                cases.append((a, float(bf), z, s))

for a, b, z, v in cases:
    print(f"    ({a}, {b!r}, {z}, {mp.nstr(v, 20)}),")
