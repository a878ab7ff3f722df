"""Independent evaluation of the sigmoid rewards used in sigmoid_oracles.rs."""
import math


def sig(t, s, p):
    return 1.0 / (1.0 + math.exp(-s * (t - p)))


def seq_reward(t, slopes, infl, a):
    r = 1.0
    for h in range(len(a)):
        alpha = 1.0 if h == 0 else (10.0 if a[h - 1] >= 0.5 else 0.1)
        y = sig(t, alpha * slopes[h], infl[h])
        r *= 1.0 - min(abs(y - a[h]), abs(1.0 - y - a[h]))
    return r


def plain_reward(t, slopes, infl, a):
    r = 1.0
    for h in range(len(a)):
        r *= 1.0 - abs(sig(t, slopes[h], infl[h]) - a[h])
    return r


CASES = [
    ("seq", 5, [1.0, 1.0], [5.0, 5.0], [0.5, 0.5]),
    ("seq", 3, [0.7, -2.5, 4.0], [4.2, 6.1, 5.0], [0.3, 0.6, 0.9]),
    ("seq", 8, [-12.0, 0.4, 1.5], [2.0, 7.5, 9.0], [0.5, 0.1, 0.2]),
    ("plain", 2, [0.9, -0.3], [3.0, 6.0], [0.4, 0.7]),
]

for kind, t, s, p, a in CASES:
    f = seq_reward if kind == "seq" else plain_reward
    print(kind, t, s, p, a, repr(f(t, s, p, a)))
