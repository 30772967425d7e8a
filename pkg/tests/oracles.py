"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code.
"""

import math
from fractions import Fraction


def direct_mhq(tables, z=1.96):
    """Exact rational evaluation of the pooled quotient and its log-variance.

    ``tables`` is a list of ``(a, b, c_prime, d_prime)`` tuples.
    Returns ``(value, var_log, ci_low, ci_high)`` as floats.
    """
    R = S = Fraction(0)
    terms = []
    for a, b, c, d in tables:
        n = a + b + c + d
        if n == 0:
            continue
        r = Fraction(a * d, n)
        s = Fraction(b * c, n)
        p = Fraction(a + d, n)
        q = Fraction(b + c, n)
        terms.append((r, s, p, q))
        R += r
        S += s
    value = R / S
    var = Fraction(1, 2) * (
        sum(p * r for r, s, p, q in terms) / (R * R)
        + sum(p * s + q * r for r, s, p, q in terms) / (R * S)
        + sum(q * s for r, s, p, q in terms) / (S * S)
    )
    v, var_f = float(value), float(var)
    half = z * math.sqrt(var_f)
    return v, var_f, math.exp(math.log(v) - half), math.exp(math.log(v) + half)


def brute_ranks(xs):
    """Average ranks by counting: rank = 1 + #smaller + (#ties - 1) / 2."""
    out = []
    for x in xs:
        less = sum(1 for y in xs if y < x)
        equal = sum(1 for y in xs if y == x)
        out.append(less + (equal + 1) / 2)
    return out


def brute_pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def brute_spearman(xs, ys):
    return brute_pearson(brute_ranks(xs), brute_ranks(ys))


def fixed_effect_z(pairs):
    """Inverse-variance mean of Fisher z for ``(r, n)`` pairs."""
    w = [n - 3 for _, n in pairs]
    z = [math.atanh(r) for r, _ in pairs]
    return sum(wi * zi for wi, zi in zip(w, z)) / sum(w)
