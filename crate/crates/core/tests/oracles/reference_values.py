"""High-precision reference values frozen into the Rust test-suite.

Independent of the Rust implementation: everything here is evaluated with
mpmath at 30 digits, using direct (not transformed) integral definitions.
Run: python3 reference_values.py
"""
from mpmath import mp, si, ceil, besseljzero, mpf, gamma, pi, quad, quadosc, exp, cos, besselj, inf, sqrt, floor, e

mp.dps = 30


def riesz_constant(beta, d):
    return 2**beta * pi**(mpf(d) / 2) * gamma(mpf(beta) / 2) / gamma((d - mpf(beta)) / 2)


def sphere_area(d):
    return 2 * pi**(mpf(d) / 2) / gamma(mpf(d) / 2)


def spectral(r, a, b, d, t):
    # time-integrated spectral integrand of Var Z_t, radial part
    return (1 - exp(-2 * t * r**a)) * r**(b - d - a) / 2


def variance_by_quadrature(a, b, d, t):
    # double integral: int_0^t int_{R^d} exp(-2 s |xi|^a) |xi|^(b-d) dxi ds
    inner = lambda s: sphere_area(d) * quad(lambda r: exp(-2 * s * r**a) * r**(b - 1), [0, 1, inf])
    return quad(inner, [0, t])


def covariance_1d(lag, a, b, t):
    # Var - int S (1 - cos): absolutely convergent, no singular oscillatory start.
    # Beyond R the exponential is below e^-80 and S is a pure power.
    var = variance_by_quadrature(a, b, 1, t)
    R = ceil((40 / t) ** (1 / a) * lag / pi + 1) * pi / lag
    pts = [mpf(0)] + [k * pi / lag for k in range(1, int(R * lag / pi) + 1)]
    body = quad(lambda r: 2 * spectral(r, a, b, 1, t) * (1 - cos(r * lag)), pts)
    p = b - 1 - a
    assert p == -2, "closed-form tail written for alpha - beta = 1"
    # int_R^inf r^-2 cos(r h) dr = h [cos(Rh)/(Rh) - (pi/2 - Si(Rh))]
    X = R * lag
    tail = 1 / R - lag * (cos(X) / X - (pi / 2 - si(X)))
    return var - body - tail


print("stable_density a=1.5 d=1 s=1 x=0:", quad(lambda r: exp(-r**mpf(1.5)), [0, inf]) / pi)
for (b, d) in [(0.5, 1), (1, 2), (0.9, 1), (0.5, 2)]:
    print(f"riesz_constant beta={b} d={d}:", riesz_constant(mpf(b), d))
for (a, b, d) in [(1.5, 0.5, 1), (2, 1, 1), (2, 0.5, 2)]:
    a, b = mpf(a), mpf(b)
    q = variance_by_quadrature(a, b, d, 1)
    closed = sphere_area(d) * gamma(b / a) / ((a - b) * 2**(b / a))
    print(f"variance_constant a={a} b={b} d={d}: quad={q} closed={closed}")
print("spectral a=2 b=1 d=1 t=1 r=1:", spectral(mpf(1), 2, 1, 1, 1))
a, b, t = mpf(1.5), mpf(0.5), mpf(1)
var = variance_by_quadrature(a, b, 1, t)
for lag in [1, 10, 100, 1000]:
    c = covariance_1d(mpf(lag), a, b, t)
    print(f"covariance a=1.5 b=0.5 d=1 t=1 lag={lag}: {c} corr={c / var} corr*lag^b={c / var * mpf(lag)**b}")
# asymptotic correlation constant: 2 t Gamma(b) cos(pi b / 2) / var  (d=1)
from mpmath import cos as mcos
print("corr asymptotic const:", 2 * t * gamma(b) * mcos(pi * b / 2) / var)
# factor prefactor kappa so that (h*h)=f with h = kappa |x|^{-(d+b)/2}
def ft_power(a_, d):
    # FT of |x|^{-a} = C_a |xi|^{a-d}
    return pi**(mpf(d) / 2) * 2**(d - a_) * gamma((d - a_) / 2) / gamma(a_ / 2)
for (b, d) in [(0.5, 1), (0.5, 2)]:
    b = mpf(b)
    ca = ft_power((d + b) / 2, d)
    kappa = (2 * pi)**(mpf(d) / 2) / ca
    print(f"factor kappa beta={b} d={d}: {kappa}  (sqrt c_bd = {sqrt(riesz_constant(b, d))})")
# d=2 covariance at lag 3, a=2 b=0.5 t=1
a, b = mpf(2), mpf(0.5)
h = 3
R = besseljzero(0, 30) / h
body = quad(lambda r: 2 * pi * spectral(r, a, b, 2, 1) * r * (1 - besselj(0, h * r)),
            [0] + [besseljzero(0, k) / h for k in range(1, 31)])
p = b - 1 - a
tail = pi * (-R**(p + 1) / (p + 1)
             - quadosc(lambda r: r**p * besselj(0, h * r), [R, inf], zeros=lambda n: besseljzero(0, n + 30) / h))
print("covariance d=2 a=2 b=0.5 t=1 lag=3:", variance_by_quadrature(a, b, 2, 1) - body - tail)
print("skeleton count n=3 theta=0.4 d=2:", (floor(e**mpf(1.8)) + 1)**2)
print("Gamma(5/3)/pi:", gamma(mpf(5) / 3) / pi)
print("J0(1), J0(20):", besselj(0, 1), besselj(0, 20))
