import os
import subprocess
import sys

SCRIPT = """
import numpy as np
from kaidd import _accel
from kaidd.decoder import ReweightedDecoder
from kaidd.graph_analysis import girth
from kaidd.ldpc_code import peg_construct
H = peg_construct(96, 48, 3, seed=0)
res = ReweightedDecoder(H, 0.8).decode(np.full(H.N, 4.0))
print(_accel.USE_NUMBA, girth(H), res.converged, res.iterations)
"""


def _run(flag):
    env = dict(os.environ, KAIDD_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return out.stdout.split()


def test_numpy_fallback_matches_numba():
    off, on = _run("1"), _run("0")
    assert off[0] == "False" and on[0] == "True"
    assert off[1:] == on[1:]
