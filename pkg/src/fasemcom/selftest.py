"""Fast built-in oracle checks, runnable without the test suite."""
from __future__ import annotations

import math

import numpy as np

from . import attnmap, channel, kwx, powalloc, semmatch


def _q_oracle(x):
    # Gaussian tail by direct integration of the density, independent of erfc
    from scipy.integrate import quad

    return quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), x, math.inf)[0]


def _checks():
    yield "allocate [1,2,2] beta=1 -> [6,12,12]", np.allclose(
        powalloc.allocate([1, 2, 2], 1, 30).powers, [6, 12, 12], rtol=0, atol=1e-12)
    yield "allocate beta=0 is uniform", np.allclose(powalloc.allocate([1, 5, 3, 2], 0, 30).powers, 7.5)
    yield "quantize L=5 {0,.2,.6,1} -> {1,1,3,5}", attnmap.quantize([0, 0.2, 0.6, 1.0], 5).tolist() == [1, 1, 3, 5]
    yield "token count 576 / 1152 / 2880", [semmatch.token_count(n, 576) for n in (0, 1, 4)] == [576, 1152, 2880]
    x = math.sqrt(20.0)
    yield "Q(sqrt 20) erfc vs quadrature", abs(float(channel.q_function(x)) - _q_oracle(x)) < 1e-12
    cfg = channel.ChannelConfig(m_f=5, m_s=4)
    g = channel.fading_gains(cfg, channel.trial_stream(1, 0, 0), 200_000)
    yield "fading mean ~ 1", abs(g.mean() - 1.0) < 0.02
    yield "keyword 'license plate number' extracted", any(
        c.text == "license plate number"
        for c in kwx.extract_keywords("What is the license plate number of the car in front?", top_k=5))
    yield "cosine scale invariance", abs(
        semmatch.cosine_similarity([1, 2], [3, 1]) - semmatch.cosine_similarity([1, 2], [30, 10])) < 1e-12


def run_selftest(verbose=True) -> bool:
    ok = True
    for name, passed in _checks():
        ok &= bool(passed)
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
