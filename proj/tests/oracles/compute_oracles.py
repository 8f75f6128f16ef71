# Copyright 2026 The dpcomp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent mpmath oracles for frozen expected values used in the C++ tests.

Every number here is computed by brute force (direct subset sums, direct
binomial sums, direct series) at 60 decimal digits, never through the
library code paths.
"""
from fractions import Fraction
from itertools import product
from math import comb

import mpmath as mp

mp.mp.dps = 60


def subset_delta(eps, deltas, eps_g):
    """delta_g(eps_g) by brute force over all subsets."""
    k = len(eps)
    total = mp.mpf(0)
    for mask in range(1 << k):
        s_in = sum((eps[i] for i in range(k) if mask >> i & 1), mp.mpf(0))
        s_out = sum((eps[i] for i in range(k) if not mask >> i & 1), mp.mpf(0))
        total += max(mp.e**s_in - mp.e**eps_g * mp.e**s_out, 0)
    surv = mp.mpf(1)
    denom = mp.mpf(1)
    for e, d in zip(eps, deltas):
        surv *= 1 - d
        denom *= 1 + mp.e**e
    return 1 - surv + surv * total / denom


def homogeneous_delta(eps, delta, k, eps_g):
    if eps == 0:
        return 1 - (1 - delta) ** k
    lo = int(mp.ceil((eps_g + k * eps) / (2 * eps)))
    s = mp.mpf(0)
    for l in range(max(lo, 0), k + 1):
        s += comb(k, l) * (mp.e**(l * eps) - mp.e**eps_g * mp.e**((k - l) * eps))
    return 1 - (1 - delta) ** k * (1 - s / (1 + mp.e**eps) ** k)


def least_eps(fn, delta_g, hi):
    lo = mp.mpf(0)
    if fn(lo) <= delta_g:
        return lo
    for _ in range(200):
        mid = (lo + hi) / 2
        if fn(mid) <= delta_g:
            hi = mid
        else:
            lo = mid
    return hi


def rr_enumerate(eps, deltas, eps_g):
    rows = []
    for e, d in zip(eps, deltas):
        a = 1 - d
        p = mp.e**e / (1 + mp.e**e)
        q = 1 / (1 + mp.e**e)
        rows.append(((d, a * p, a * q, 0), (0, a * q, a * p, d)))
    total = mp.mpf(0)
    for x in product(range(4), repeat=len(eps)):
        p0 = mp.mpf(1)
        p1 = mp.mpf(1)
        for i, o in enumerate(x):
            p0 *= rows[i][0][o]
            p1 *= rows[i][1][o]
        total += max(p0 - mp.e**eps_g * p1, 0)
    return total


LICENSE_HEADER = """# Copyright 2026 The dpcomp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""


if __name__ == "__main__":
    print(LICENSE_HEADER)
    print("softplus(0) =", mp.log(2))
    print("ln1p_taylor(0.001) series 3 terms =", mp.mpf("0.001") - mp.mpf("0.001")**2 / 2 + mp.mpf("0.001")**3 / 3)
    print("ln(1.001) =", mp.log(mp.mpf("1.001")))
    print("binomial(60,30) =", comb(60, 30))
    adv = mp.sqrt(200 * mp.log(2**20)) * mp.mpf("0.1") + 100 * mp.mpf("0.1") * (mp.e**mp.mpf("0.1") - 1)
    print("advanced(0.1, k=100, 2^-20) =", adv)
    adv2 = mp.sqrt(2 * 700 * mp.log(2**25)) * mp.mpf("0.005") + 700 * mp.mpf("0.005") * (mp.e**mp.mpf("0.005") - 1)
    print("advanced(0.005, k=700, 2^-25) =", adv2)
    ln2, ln3 = mp.log(2), mp.log(3)
    print("subset delta (ln2,ln3) at ln3 =", subset_delta([ln2, ln3], [0, 0], ln3))
    print("rr enumerate (ln2,ln3) at ln3 =", rr_enumerate([ln2, ln3], [0, 0], ln3))
    print("homogeneous k=2 ln2 at 0 =", homogeneous_delta(ln2, 0, 2, 0))
    # mixed instance with deltas, used as a frozen regression value
    eps = [mp.mpf("0.3"), mp.mpf("0.7"), mp.mpf("1.1")]
    dl = [mp.mpf("0.01"), mp.mpf("0"), mp.mpf("0.02")]
    print("subset delta mixed at 0.5 =", subset_delta(eps, dl, mp.mpf("0.5")))
    print("rr enumerate mixed at 0.5 =", rr_enumerate(eps, dl, mp.mpf("0.5")))
    print("least eps mixed at delta_g=0.1 =", least_eps(lambda g: subset_delta(eps, dl, g), mp.mpf("0.1"), sum(eps)))
    # homogeneous k=10 eps=0.2 delta=0.001 at eps_g=0.9
    print("homogeneous k=10 eps=.2 d=.001 at .9 =", homogeneous_delta(mp.mpf("0.2"), mp.mpf("0.001"), 10, mp.mpf("0.9")))
    print("subset   k=10 eps=.2 d=.001 at .9 =", subset_delta([mp.mpf("0.2")] * 10, [mp.mpf("0.001")] * 10, mp.mpf("0.9")))
    # advanced vs optimal, delta_prime = delta_g / 2
    dg = mp.mpf(2) ** -25
    for k in range(100, 701, 100):
        e = mp.mpf("0.005")
        opt = least_eps(lambda g: homogeneous_delta(e, 0, k, g), dg, k * e)
        adv = mp.sqrt(2 * k * mp.log(1 / (dg / 2))) * e + k * e * (mp.e**e - 1)
        print(f"k={k} optimal={mp.nstr(opt, 15)} advanced={mp.nstr(adv, 15)} ratio={mp.nstr(adv / opt, 6)} basic/opt={mp.nstr(k * e / opt, 6)}")
    # discretize example
    beta = Fraction(1, 10) / (Fraction(11, 10) + 1)
    print("beta =", beta, "a1 =", -(-Fraction(1, 10) * (1 / beta + 1) // 1))
